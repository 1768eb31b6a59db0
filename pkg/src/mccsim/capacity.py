"""Compute-capacity formulas and progress arithmetic.

Space-shared capacity is the per-core strength a host offers when VMs own
whole PEs; time-shared capacity is the per-core share left once concurrent
cloudlets oversubscribe the cores. A cloudlet executes at
``capacity * cores`` MI per second, so its estimated finish time and its
progress between events are two views of the same linear rate.

All functions are pure and safe to call from anywhere.
"""

from __future__ import annotations

from typing import Sequence

from .model import ProcessingElement

# Remaining work at or below this many MI counts as done.
COMPLETION_EPSILON_MI = 1e-9


def space_shared_capacity(pes: Sequence[ProcessingElement]) -> float:
    """Per-core capacity of a host under exclusive PE reservation: the
    arithmetic mean of the PE strengths."""
    if not pes:
        raise ValueError("host has no processing elements")
    return sum(pe.mips for pe in pes) / len(pes)


def time_shared_capacity(
    pes: Sequence[ProcessingElement], active_core_demand: int
) -> float:
    """Per-core capacity when ``active_core_demand`` cores' worth of
    cloudlets share the PEs: total MIPS divided by max(demand, PE count).

    Under-subscription (demand <= PE count) degenerates to the
    space-shared value.
    """
    if not pes:
        raise ValueError("host has no processing elements")
    if active_core_demand < 0:
        raise ValueError("active core demand must be non-negative")
    total = sum(pe.mips for pe in pes)
    return total / max(active_core_demand, len(pes))


def estimated_finish_time(
    ct: float, remaining_mi: float, capacity: float, cores: int
) -> float:
    """Finish time of a cloudlet with ``remaining_mi`` left, running
    ``cores`` parallel strands at ``capacity`` MIPS each, as of time ``ct``.

    Zero remaining work returns ``ct`` exactly.
    """
    if capacity <= 0:
        raise ValueError("no processing capacity")
    if remaining_mi == 0:
        return ct
    return ct + remaining_mi / (capacity * cores)


def advance_progress(
    remaining_mi: float, capacity: float, cores: int, dt: float
) -> float:
    """Remaining work after ``dt`` seconds at rate ``capacity * cores``,
    clamped at zero."""
    if dt < 0:
        raise ValueError("time step must be non-negative")
    return max(0.0, remaining_mi - capacity * cores * dt)
