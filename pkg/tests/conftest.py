"""Shared test helpers: builders for small scenarios and an independent
progressive-filling oracle for single-VM schedules."""

from __future__ import annotations

import heapq

import pytest

from mccsim import bundled_scenarios_dir
from mccsim.model import (
    AccessPoint,
    Application,
    ApplicationClass,
    CloudNode,
    Cloudlet,
    Host,
    HostBinding,
    InjectedEvent,
    MobileDevice,
    ProcessingElement,
    Vm,
)
from mccsim.report import Scenario
from mccsim.scheduler import VmRuntime


def pes(*mips: float) -> list[ProcessingElement]:
    return [ProcessingElement(float(m)) for m in mips]


def make_scenario(
    *,
    name: str = "test",
    nodes: list[CloudNode],
    applications: list[Application],
    access_points: list[AccessPoint] | None = None,
    devices: list[MobileDevice] | None = None,
    events: list[InjectedEvent] | None = None,
    dynamic: bool = True,
    seed: int = 0,
) -> Scenario:
    """Scenario with a default single access point routing to the first node."""
    if access_points is None:
        access_points = [AccessPoint("ap-1", nodes[0].id, 0.0)]
    if devices is None:
        devices = [MobileDevice("dev-1", access_points[0].id)]
    return Scenario(
        name=name,
        seed=seed,
        dynamic=dynamic,
        nodes=nodes,
        access_points=access_points,
        devices=devices,
        applications=applications,
        events=events or [],
    )


def single_vm_app(
    app_id: str,
    vm_cores: int,
    mips_per_core: float,
    cloudlet_specs: list[tuple[float, int]],
    *,
    submit_time_s: float = 0.0,
    device_id: str = "dev-1",
) -> Application:
    """One app holding one VM and cloudlets given as (length_mi, cores)."""
    vm = Vm(f"{app_id}-vm", vm_cores, mips_per_core)
    cloudlets = [
        Cloudlet(f"{app_id}-cl{i}", length, cores, vm.id)
        for i, (length, cores) in enumerate(cloudlet_specs)
    ]
    return Application(
        id=app_id,
        device_id=device_id,
        app_class=ApplicationClass.PUBLIC,
        owned_nodes=[],
        vms=[vm],
        cloudlets=cloudlets,
        submit_time_s=submit_time_s,
    )


def fluid_finish_times(
    vm_cores: int, mips_per_core: float, jobs: list[tuple[float, float, int]]
) -> list[float]:
    """Brute-force progressive-filling schedule for one VM.

    ``jobs`` are (arrival_s, length_mi, cores) tuples. Active jobs share the
    VM's total MIPS proportionally to their core counts, squeezed when the
    summed core demand exceeds the VM's cores. Recomputed interval by
    interval; independent of the production scheduler.
    """
    total = vm_cores * mips_per_core
    n = len(jobs)
    remaining = [j[1] for j in jobs]
    finish: list[float | None] = [None] * n
    pending = sorted(range(n), key=lambda i: (jobs[i][0], i))
    arrived: set[int] = set()
    t = 0.0
    while any(f is None for f in finish):
        while pending and jobs[pending[0]][0] <= t:
            arrived.add(pending.pop(0))
        active = [i for i in sorted(arrived) if finish[i] is None]
        if not active:
            t = jobs[pending[0]][0]
            continue
        demand = sum(jobs[i][2] for i in active)
        share = total / max(demand, vm_cores)
        dt = min(remaining[i] / (share * jobs[i][2]) for i in active)
        if pending:
            dt = min(dt, jobs[pending[0]][0] - t)
        for i in active:
            remaining[i] -= share * jobs[i][2] * dt
        t += dt
        for i in active:
            if remaining[i] <= 1e-9:
                finish[i] = t
    return finish


def run_single_vm_events(
    vm_cores: int, mips_per_core: float, jobs: list[tuple[float, float, int]]
) -> list[float]:
    """Drive the production scheduler through an event loop for one VM.

    Same conventions as the engine: completion events are stamped with the
    VM runtime's generation and discarded when stale, and each acted-upon
    event finishes exactly one cloudlet.
    """
    vm = Vm("vm", vm_cores, mips_per_core)
    vm.host_binding = HostBinding("node", "host", tuple(range(vm_cores)))
    cloudlets = [
        Cloudlet(f"c{i}", length, cores, "vm")
        for i, (_, length, cores) in enumerate(jobs)
    ]
    rt = VmRuntime(vm, {c.id: i for i, c in enumerate(cloudlets)})
    heap: list[tuple[float, int, str, str, int | None]] = []
    seq = 0
    for i, (arrival, _, _) in enumerate(jobs):
        heapq.heappush(heap, (arrival, seq, "submit", cloudlets[i].id, None))
        seq += 1
    finish: list[float | None] = [None] * len(jobs)
    index = {c.id: i for i, c in enumerate(cloudlets)}
    while heap:
        t, _, kind, cloudlet_id, gen = heapq.heappop(heap)
        if kind == "submit":
            rt.submit(cloudlets[index[cloudlet_id]], t)
        else:
            if gen != rt.generation:
                continue
            done = rt.complete(cloudlet_id, t)
            finish[index[done.id]] = t
        if rt.next_completion is not None:
            next_id, eft = rt.next_completion
            seq += 1
            heapq.heappush(heap, (eft, seq, "finish", next_id, rt.generation))
    return finish


@pytest.fixture(scope="session")
def bundled_dir():
    return bundled_scenarios_dir()
