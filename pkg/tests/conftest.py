import numpy as np
import pytest

from paretune.sim import Computer, InteractiveSession, TaskSubmission
from paretune.traces import TraceConfig, TraceSet, generate


@pytest.fixture
def plain_computer() -> Computer:
    return Computer(
        id="c0",
        cluster_id="k0",
        watts_sleep=1.0,
        watts_idle=10.0,
        watts_active=100.0,
        efficiency=1.0,
        suspendable=False,
        reboot_hour=None,
    )


@pytest.fixture
def small_traces() -> TraceSet:
    """A 3-day, 8-computer scenario small enough for sub-second simulations."""
    return generate(
        TraceConfig(
            horizon_days=3,
            computer_count=8,
            cluster_count=2,
            task_count=60,
            seed=101,
        )
    )


def make_traces(
    sessions=(), tasks=(), computers=(), horizon_s=86_400
) -> TraceSet:
    return TraceSet(
        sessions=tuple(sessions),
        tasks=tuple(tasks),
        computers=tuple(computers),
        horizon_s=horizon_s,
    )
