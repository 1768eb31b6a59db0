"""Deterministic discrete-event engine binding allocation and scheduling.

Events pop in (time, seq) order. Simultaneous application submissions are
processed as one batch, largest resource requirement first. Completion
events carry a per-VM generation stamp: whenever a VM's finish estimates
change, its generation moves on and any completion event still in the
queue with the old stamp is discarded on arrival, so exactly one event is
acted upon per cloudlet. Injected scenario events (failures, recoveries,
handoffs) are sequenced after workload events at equal timestamps and so
take effect strictly after anything already due.

Every allocation, progress update, completion, release, failure, and
re-allocation is appended to a central log; replaying the log rebuilds the
placement map and each cloudlet's remaining work, which is what failover
relies on: when a node dies, affected cloudlets resume elsewhere with the
progress they had at the failure instant.
"""

from __future__ import annotations

import copy
import heapq
from dataclasses import dataclass, field
from typing import Any

from .allocator import (
    AllocationPlan,
    PendingQueue,
    allocate_application,
    preferred_node,
    sort_applications,
)
from .model import (
    CLOUDLET_FINISHED,
    CLOUDLET_PENDING,
    Application,
    Cloudlet,
    ScenarioError,
    SimClock,
    Vm,
    validate_scenario,
)
from .capacity import space_shared_capacity, time_shared_capacity
from .scheduler import NodeState, VmRuntime, place_vm, release_vm

APP_SUBMIT = "app_submit"
CLOUDLET_FINISH = "cloudlet_finish"
NODE_FAIL = "node_fail"
NODE_RECOVER = "node_recover"
AP_HANDOFF = "ap_handoff"

LOG_ALLOCATED = "Allocated"
LOG_PROGRESS = "Progress"
LOG_FINISHED = "Finished"
LOG_RELEASED = "Released"
LOG_FAILED = "Failed"
LOG_REALLOCATED = "Reallocated"

STATUS_COMPLETED = "completed"
STATUS_DEGRADED = "degraded"

# Injected events sort after same-time workload events.
_INJECTED_SEQ_BASE = 1_000_000_000


@dataclass
class Event:
    time: float
    seq: int
    kind: str
    app_id: str | None = None
    vm_id: str | None = None
    cloudlet_id: str | None = None
    node_id: str | None = None
    device_id: str | None = None
    ap_id: str | None = None
    generation: int | None = None


@dataclass
class LogEntry:
    """One record of the append-only central allocation/progress log."""

    time: float
    kind: str
    app_id: str | None = None
    vm_id: str | None = None
    cloudlet_id: str | None = None
    remaining_mi: float | None = None
    node_id: str | None = None
    host_id: str | None = None
    pe_indices: tuple[int, ...] | None = None

    def to_dict(self) -> dict:
        out: dict = {"time": self.time, "kind": self.kind}
        for key in ("app_id", "vm_id", "cloudlet_id", "remaining_mi", "node_id", "host_id"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        if self.pe_indices is not None:
            out["pe_indices"] = list(self.pe_indices)
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "LogEntry":
        pes = raw.get("pe_indices")
        return cls(
            time=raw["time"],
            kind=raw["kind"],
            app_id=raw.get("app_id"),
            vm_id=raw.get("vm_id"),
            cloudlet_id=raw.get("cloudlet_id"),
            remaining_mi=raw.get("remaining_mi"),
            node_id=raw.get("node_id"),
            host_id=raw.get("host_id"),
            pe_indices=tuple(pes) if pes is not None else None,
        )


class CentralLog:
    """Append-only, time-ordered record replicated at the central cloud."""

    def __init__(self) -> None:
        self.entries: list[LogEntry] = []

    def append(self, entry: LogEntry) -> None:
        if self.entries and entry.time < self.entries[-1].time:
            raise ValueError(
                f"log time regression: {entry.time} < {self.entries[-1].time}"
            )
        self.entries.append(entry)

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class ReplayState:
    """State rebuilt from the log: who is placed where, and how much work
    each cloudlet has left."""

    placements: dict[str, dict]
    remaining_mi: dict[str, float]


def replay_log(scenario, entries: list[LogEntry]) -> ReplayState:
    """Reconstruct placements and remaining work by replaying log entries
    over the scenario's initial state."""
    remaining = {
        cl.id: cl.length_mi for app in scenario.applications for cl in app.cloudlets
    }
    placements: dict[str, dict] = {}
    for e in entries:
        if e.kind in (LOG_ALLOCATED, LOG_REALLOCATED):
            placements[e.vm_id] = {
                "node": e.node_id,
                "host": e.host_id,
                "pes": list(e.pe_indices),
            }
        elif e.kind == LOG_RELEASED:
            placements.pop(e.vm_id, None)
        elif e.kind == LOG_FAILED:
            if e.vm_id is not None:
                placements.pop(e.vm_id, None)
        elif e.kind == LOG_PROGRESS:
            remaining[e.cloudlet_id] = e.remaining_mi
        elif e.kind == LOG_FINISHED:
            remaining[e.cloudlet_id] = 0.0
    return ReplayState(placements=placements, remaining_mi=remaining)


@dataclass
class RunResult:
    """Everything a run produced: metrics, final state, and the full log."""

    scenario_name: str
    seed: int
    dynamic: bool
    status: str
    n_vms: int
    n_cloudlets: int
    first_submit_s: float | None
    last_finish_s: float | None
    makespan_ms: float
    space_shared_capacity_mips: float
    time_shared_capacity_mips: float
    app_finish_s: dict[str, float | None]
    final_placements: dict[str, dict]
    final_remaining_mi: dict[str, float]
    log: list[LogEntry]
    n_acted_completions: int = 0
    snapshots: list[tuple[float, dict, dict]] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "scenario": self.scenario_name,
            "seed": self.seed,
            "dynamic": self.dynamic,
            "status": self.status,
            "n_vms": self.n_vms,
            "n_cloudlets": self.n_cloudlets,
            "first_submit_s": self.first_submit_s,
            "last_finish_s": self.last_finish_s,
            "makespan_ms": self.makespan_ms,
            "space_shared_capacity_mips": self.space_shared_capacity_mips,
            "time_shared_capacity_mips": self.time_shared_capacity_mips,
            "app_finish_s": self.app_finish_s,
            "final_placements": self.final_placements,
            "final_remaining_mi": self.final_remaining_mi,
            "log": [e.to_dict() for e in self.log],
        }

    @classmethod
    def from_json_dict(cls, raw: dict) -> "RunResult":
        return cls(
            scenario_name=raw["scenario"],
            seed=raw["seed"],
            dynamic=raw["dynamic"],
            status=raw["status"],
            n_vms=raw["n_vms"],
            n_cloudlets=raw["n_cloudlets"],
            first_submit_s=raw["first_submit_s"],
            last_finish_s=raw["last_finish_s"],
            makespan_ms=raw["makespan_ms"],
            space_shared_capacity_mips=raw["space_shared_capacity_mips"],
            time_shared_capacity_mips=raw["time_shared_capacity_mips"],
            app_finish_s=raw["app_finish_s"],
            final_placements=raw["final_placements"],
            final_remaining_mi=raw["final_remaining_mi"],
            log=[LogEntry.from_dict(e) for e in raw["log"]],
        )


class _AppRun:
    def __init__(self, app: Application, declaration_index: int):
        self.app = app
        self.declaration_index = declaration_index
        self.queued = False
        self.released = False
        self.finish_s: float | None = None

    def all_finished(self) -> bool:
        return all(c.state == CLOUDLET_FINISHED for c in self.app.cloudlets)


class Engine:
    """One engine runs one scenario, single-threaded, no shared state."""

    def __init__(
        self,
        scenario,
        *,
        seed: int | None = None,
        lose_progress_since_log: bool = False,
        record_snapshots: bool = False,
    ):
        errors = validate_scenario(scenario)
        if errors:
            raise ScenarioError("invalid scenario: " + "; ".join(errors))
        # Work on a private copy: inputs stay pristine and reruns match.
        self.scenario = copy.deepcopy(scenario)
        self.seed = scenario.seed if seed is None else seed
        self.dynamic = self.scenario.dynamic
        self.lose_progress = lose_progress_since_log
        self.record_snapshots = record_snapshots

        self.nodes = [NodeState(node) for node in self.scenario.nodes]
        self.node_by_id = {ns.node.id: ns for ns in self.nodes}
        self.aps = {ap.id: ap for ap in self.scenario.access_points}
        self.devices = {dev.id: dev for dev in self.scenario.devices}

        self.apps = [
            _AppRun(app, i) for i, app in enumerate(self.scenario.applications)
        ]
        self.app_by_id = {ar.app.id: ar for ar in self.apps}

        self.all_vms: list[Vm] = []
        self.vm_decl_index: dict[str, int] = {}
        self.vm_to_app: dict[str, _AppRun] = {}
        self.vm_runtimes: dict[str, VmRuntime] = {}
        self.all_cloudlets: list[Cloudlet] = []
        cloudlet_order: dict[str, int] = {}
        for ar in self.apps:
            for vm in ar.app.vms:
                self.vm_decl_index[vm.id] = len(self.all_vms)
                self.all_vms.append(vm)
                self.vm_to_app[vm.id] = ar
            for cl in ar.app.cloudlets:
                cloudlet_order[cl.id] = len(self.all_cloudlets)
                self.all_cloudlets.append(cl)
        for ar in self.apps:
            for vm in ar.app.vms:
                self.vm_runtimes[vm.id] = VmRuntime(vm, cloudlet_order)

        self.host_order: list[tuple[NodeState, int]] = [
            (ns, hi) for ns in self.nodes for hi in range(len(ns.hosts))
        ]
        self.host_peak_demand: dict[str, int] = {
            ns.hosts[hi].host.id: 0 for ns, hi in self.host_order
        }
        self.hosts_with_allocations: list[str] = []

        self.clock = SimClock()
        self.log = CentralLog()
        self.pending = PendingQueue()
        self.heap: list[tuple[float, int, Event]] = []
        self._seq = 0
        self._acted_completions = 0
        self._last_finish: float | None = None
        self.snapshots: list[tuple[float, dict, dict]] = []
        self._ran = False

    # -- event plumbing -------------------------------------------------

    def _push(self, event: Event) -> None:
        heapq.heappush(self.heap, (event.time, event.seq, event))

    def _next_seq(self) -> int:
        self._seq += 1
        return self._seq

    def _ap_at(self, device_id: str, t: float) -> str:
        """Access point a device is attached to just before time ``t``:
        its declared AP, adjusted by handoffs strictly earlier than ``t``."""
        ap_id = None
        for dev in self.scenario.devices:
            if dev.id == device_id:
                ap_id = dev.ap_id
        handoffs = [
            ev
            for ev in self.scenario.events
            if ev.kind == AP_HANDOFF and ev.device == device_id and ev.time_s < t
        ]
        handoffs.sort(key=lambda ev: ev.time_s)  # stable: declaration order ties
        for ev in handoffs:
            ap_id = ev.ap
        return ap_id

    def _schedule_initial_events(self) -> None:
        for ar in self.apps:
            app = ar.app
            ap = self.aps[self._ap_at(app.device_id, app.submit_time_s)]
            arrival = app.submit_time_s + ap.latency_ms / 1000.0
            self._push(
                Event(arrival, self._next_seq(), APP_SUBMIT, app_id=app.id)
            )
        for i, ev in enumerate(self.scenario.events):
            self._push(
                Event(
                    ev.time_s,
                    _INJECTED_SEQ_BASE + i,
                    ev.kind,
                    node_id=ev.node,
                    device_id=ev.device,
                    ap_id=ev.ap,
                )
            )

    def _push_completion(self, rt: VmRuntime) -> None:
        if rt.next_completion is None:
            return
        cloudlet_id, eft = rt.next_completion
        self._push(
            Event(
                eft,
                self._next_seq(),
                CLOUDLET_FINISH,
                vm_id=rt.vm.id,
                cloudlet_id=cloudlet_id,
                generation=rt.generation,
            )
        )

    # -- bookkeeping -----------------------------------------------------

    def _refresh_host_demand(self, node_state: NodeState) -> None:
        for hs in node_state.hosts:
            demand = sum(
                self.vm_runtimes[vm_id].active_core_demand
                for vm_id in hs.reservations
            )
            if demand > self.host_peak_demand[hs.host.id]:
                self.host_peak_demand[hs.host.id] = demand

    def _log(self, **kw: Any) -> None:
        self.log.append(LogEntry(**kw))

    def _activate_placements(
        self, ar: _AppRun, plan: AllocationPlan, t: float, kind: str
    ) -> None:
        """Record a plan in the log, start the placed VMs' pending cloudlets,
        and refresh completion events and load tracking."""
        app = ar.app
        for p in plan.placements:
            self._log(
                time=t,
                kind=kind,
                app_id=app.id,
                vm_id=p.vm_id,
                node_id=p.node_id,
                host_id=p.host_id,
                pe_indices=p.pe_indices,
            )
            if p.host_id not in self.hosts_with_allocations:
                self.hosts_with_allocations.append(p.host_id)
        placed_ids = {p.vm_id for p in plan.placements}
        for vm in app.vms:
            if vm.id not in placed_ids:
                continue
            rt = self.vm_runtimes[vm.id]
            for cl in app.cloudlets:
                if cl.vm_id == vm.id and cl.state == CLOUDLET_PENDING:
                    rt.submit(cl, t)
            for cl in rt.running:
                self._log(
                    time=t,
                    kind=LOG_PROGRESS,
                    app_id=app.id,
                    vm_id=vm.id,
                    cloudlet_id=cl.id,
                    remaining_mi=cl.remaining_mi,
                    node_id=vm.host_binding.node_id,
                )
            self._push_completion(rt)
            self._refresh_host_demand(self.node_by_id[vm.host_binding.node_id])

    def _release_app(self, ar: _AppRun, t: float) -> None:
        app = ar.app
        for vm in app.vms:
            if vm.host_binding is None:
                continue
            node_state = self.node_by_id[vm.host_binding.node_id]
            node_id = vm.host_binding.node_id
            release_vm(vm, node_state, runtime=self.vm_runtimes[vm.id])
            self._log(
                time=t, kind=LOG_RELEASED, app_id=app.id, vm_id=vm.id, node_id=node_id
            )
        ar.released = True
        self._drain_queue(t)

    def _drain_queue(self, t: float) -> None:
        """Re-attempt every queued application, in queue order, admitting
        each one that now fits."""
        for app_id in self.pending.ordered_ids():
            ar = self.app_by_id[app_id]
            if not ar.queued:
                continue  # admitted by a nested drain during this pass
            app = ar.app
            device = self.devices[app.device_id]
            preferred = preferred_node(device, self.aps)
            unbound = [vm for vm in app.vms if vm.host_binding is None]
            plan = allocate_application(
                app, unbound, self.nodes, self.dynamic, preferred
            )
            if plan is None:
                continue
            self.pending.remove(app_id)
            ar.queued = False
            self._activate_placements(ar, plan, t, LOG_ALLOCATED)
            if ar.all_finished() and not ar.released:
                if ar.finish_s is None:
                    ar.finish_s = t
                self._release_app(ar, t)

    # -- event handlers ---------------------------------------------------

    def _submit_app(self, ar: _AppRun, t: float) -> None:
        app = ar.app
        device = self.devices[app.device_id]
        preferred = preferred_node(device, self.aps)
        unbound = [vm for vm in app.vms if vm.host_binding is None]
        plan = allocate_application(app, unbound, self.nodes, self.dynamic, preferred)
        if plan is None:
            ar.queued = True
            self.pending.push(app, ar.declaration_index)
            return
        self._activate_placements(ar, plan, t, LOG_ALLOCATED)
        if ar.all_finished():
            ar.finish_s = t
            self._release_app(ar, t)

    def _handle_submit_batch(self, first: Event, t: float) -> None:
        batch = [first]
        while self.heap and self.heap[0][0] == t and self.heap[0][2].kind == APP_SUBMIT:
            batch.append(heapq.heappop(self.heap)[2])
        runs = [self.app_by_id[ev.app_id] for ev in batch]
        for app in sort_applications([ar.app for ar in runs]):
            self._submit_app(self.app_by_id[app.id], t)

    def _handle_cloudlet_finish(self, ev: Event, t: float) -> None:
        rt = self.vm_runtimes[ev.vm_id]
        if ev.generation != rt.generation:
            return  # stale: the VM rescheduled after this event was queued
        self._acted_completions += 1
        ar = self.vm_to_app[ev.vm_id]
        node_id = rt.vm.host_binding.node_id
        finished = rt.complete(ev.cloudlet_id, t)
        self._log(
            time=t,
            kind=LOG_FINISHED,
            app_id=ar.app.id,
            vm_id=ev.vm_id,
            cloudlet_id=finished.id,
            remaining_mi=0.0,
            node_id=node_id,
        )
        self._last_finish = t
        for cl in rt.running:
            self._log(
                time=t,
                kind=LOG_PROGRESS,
                app_id=ar.app.id,
                vm_id=ev.vm_id,
                cloudlet_id=cl.id,
                remaining_mi=cl.remaining_mi,
                node_id=node_id,
            )
        self._push_completion(rt)
        if ar.all_finished() and not ar.released:
            ar.finish_s = t
            self._release_app(ar, t)

    def _handle_node_fail(self, ev: Event, t: float) -> None:
        ns = self.node_by_id.get(ev.node_id)
        if ns is None:
            raise ScenarioError(f"unknown node: {ev.node_id}")
        if not ns.alive:
            raise ScenarioError(f"node already down: {ev.node_id}")
        ns.alive = False
        self._log(time=t, kind=LOG_FAILED, node_id=ev.node_id)

        affected_vm_ids = sorted(
            (vm_id for hs in ns.hosts for vm_id in hs.reservations),
            key=lambda v: self.vm_decl_index[v],
        )
        completed_apps: list[_AppRun] = []
        displaced_by_vm: dict[str, list[Cloudlet]] = {}
        for vm_id in affected_vm_ids:
            rt = self.vm_runtimes[vm_id]
            ar = self.vm_to_app[vm_id]
            if not self.lose_progress:
                # Preserve progress exactly up to the failure instant; work
                # that completes right at the instant still counts.
                for done in rt.reschedule(t):
                    self._log(
                        time=t,
                        kind=LOG_FINISHED,
                        app_id=ar.app.id,
                        vm_id=vm_id,
                        cloudlet_id=done.id,
                        remaining_mi=0.0,
                        node_id=ev.node_id,
                    )
                    self._last_finish = t
            displaced_by_vm[vm_id] = rt.unbind(t)
            release_vm(rt.vm, ns)

        affected_apps: list[tuple[_AppRun, list[str]]] = []
        for vm_id in affected_vm_ids:
            ar = self.vm_to_app[vm_id]
            for entry in affected_apps:
                if entry[0] is ar:
                    entry[1].append(vm_id)
                    break
            else:
                affected_apps.append((ar, [vm_id]))

        for ar, vm_ids in affected_apps:
            if ar.all_finished():
                if ar.finish_s is None:
                    ar.finish_s = t
                completed_apps.append(ar)
                continue
            app = ar.app
            device = self.devices[app.device_id]
            preferred = preferred_node(device, self.aps)
            to_place = [vm for vm in app.vms if vm.id in vm_ids]
            plan = allocate_application(app, to_place, self.nodes, True, preferred)
            if plan is not None:
                self._activate_placements(ar, plan, t, LOG_REALLOCATED)
            else:
                for vm_id in vm_ids:
                    self._log(
                        time=t,
                        kind=LOG_FAILED,
                        app_id=app.id,
                        vm_id=vm_id,
                        node_id=ev.node_id,
                    )
                    for cl in displaced_by_vm[vm_id]:
                        self._log(
                            time=t,
                            kind=LOG_PROGRESS,
                            app_id=app.id,
                            vm_id=vm_id,
                            cloudlet_id=cl.id,
                            remaining_mi=cl.remaining_mi,
                        )
                if app.id not in self.pending:
                    ar.queued = True
                    self.pending.push(app, ar.declaration_index)

        for ar in completed_apps:
            if not ar.released:
                self._release_app(ar, t)

    def _handle_node_recover(self, ev: Event, t: float) -> None:
        ns = self.node_by_id.get(ev.node_id)
        if ns is None:
            raise ScenarioError(f"unknown node: {ev.node_id}")
        if ns.alive:
            raise ScenarioError(f"node already alive: {ev.node_id}")
        ns.alive = True
        self._drain_queue(t)

    def _handle_handoff(self, ev: Event, t: float) -> None:
        device = self.devices.get(ev.device_id)
        if device is None:
            raise ScenarioError(f"unknown device: {ev.device_id}")
        if ev.ap_id not in self.aps:
            raise ScenarioError(f"unknown access point: {ev.ap_id}")
        device.ap_id = ev.ap_id

    # -- snapshots and results ---------------------------------------------

    def _placements_now(self) -> dict[str, dict]:
        out: dict[str, dict] = {}
        for vm in self.all_vms:
            if vm.host_binding is not None:
                b = vm.host_binding
                out[vm.id] = {
                    "node": b.node_id,
                    "host": b.host_id,
                    "pes": list(b.pe_indices),
                }
        return out

    def _remaining_now(self) -> dict[str, float]:
        return {cl.id: cl.remaining_mi for cl in self.all_cloudlets}

    def run(self) -> RunResult:
        if self._ran:
            raise RuntimeError("engine already ran; build a new one per run")
        self._ran = True
        self._schedule_initial_events()

        while self.heap:
            t, _, ev = heapq.heappop(self.heap)
            self.clock.advance(t)
            if ev.kind == APP_SUBMIT:
                self._handle_submit_batch(ev, t)
            elif ev.kind == CLOUDLET_FINISH:
                self._handle_cloudlet_finish(ev, t)
            elif ev.kind == NODE_FAIL:
                self._handle_node_fail(ev, t)
            elif ev.kind == NODE_RECOVER:
                self._handle_node_recover(ev, t)
            elif ev.kind == AP_HANDOFF:
                self._handle_handoff(ev, t)
            else:
                raise RuntimeError(f"unknown event kind: {ev.kind}")
            if self.record_snapshots and (not self.heap or self.heap[0][0] > t):
                self.snapshots.append((t, self._placements_now(), self._remaining_now()))

        all_done = all(c.state == CLOUDLET_FINISHED for c in self.all_cloudlets)
        first_submit = (
            min(ar.app.submit_time_s for ar in self.apps) if self.apps else None
        )
        if self.apps and self._last_finish is not None and first_submit is not None:
            makespan_ms = (self._last_finish - first_submit) * 1000.0
        else:
            makespan_ms = 0.0

        ss_cap, ts_cap = self._capacity_metrics()
        return RunResult(
            scenario_name=self.scenario.name,
            seed=self.seed,
            dynamic=self.dynamic,
            status=STATUS_COMPLETED if all_done else STATUS_DEGRADED,
            n_vms=len(self.all_vms),
            n_cloudlets=len(self.all_cloudlets),
            first_submit_s=first_submit,
            last_finish_s=self._last_finish,
            makespan_ms=makespan_ms,
            space_shared_capacity_mips=ss_cap,
            time_shared_capacity_mips=ts_cap,
            app_finish_s={ar.app.id: ar.finish_s for ar in self.apps},
            final_placements=self._placements_now(),
            final_remaining_mi=self._remaining_now(),
            log=self.log.entries,
            n_acted_completions=self._acted_completions,
            snapshots=self.snapshots,
        )

    def _capacity_metrics(self) -> tuple[float, float]:
        """Report metrics: mean space-shared capacity over hosts that held
        allocations, and the time-shared capacity of the most loaded host
        at its peak concurrent core demand."""
        if not self.hosts_with_allocations:
            return 0.0, 0.0
        hosts_by_id = {
            ns.hosts[hi].host.id: ns.hosts[hi].host for ns, hi in self.host_order
        }
        used = [hosts_by_id[h] for h in self.hosts_with_allocations]
        ss = sum(space_shared_capacity(h.pes) for h in used) / len(used)

        busiest = None
        busiest_peak = -1
        for ns, hi in self.host_order:
            host = ns.hosts[hi].host
            peak = self.host_peak_demand[host.id]
            if peak > busiest_peak:
                busiest = host
                busiest_peak = peak
        ts = time_shared_capacity(busiest.pes, busiest_peak)
        return ss, ts


def run_scenario(
    scenario,
    *,
    seed: int | None = None,
    lose_progress_since_log: bool = False,
    record_snapshots: bool = False,
) -> RunResult:
    """Validate and run a scenario to completion on a fresh engine."""
    engine = Engine(
        scenario,
        seed=seed,
        lose_progress_since_log=lose_progress_since_log,
        record_snapshots=record_snapshots,
    )
    return engine.run()
