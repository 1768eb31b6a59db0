"""Space-shared VM placement and time-shared cloudlet scheduling.

Hosts hand whole PEs to VMs: placement is first-fit over hosts in
declaration order, reserving the lowest-indexed PEs strong enough for the
VM. Inside a VM, running cloudlets share the reserved capacity fluidly:
every arrival or completion changes everyone's rate, so remaining work is
advanced lazily to the current time and finish estimates are recomputed at
each such event.

State in this module is owned by a single engine instance and mutated only
on its thread.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .capacity import (
    COMPLETION_EPSILON_MI,
    advance_progress,
    estimated_finish_time,
    time_shared_capacity,
    space_shared_capacity,
)
from .model import (
    CLOUDLET_FINISHED,
    CLOUDLET_PENDING,
    CLOUDLET_RUNNING,
    CloudNode,
    Cloudlet,
    Host,
    HostBinding,
    ProcessingElement,
    Vm,
)


@dataclass
class HostState:
    """Reservation ledger of one host: which VM holds which PE indices."""

    host: Host
    reservations: dict[str, tuple[int, ...]] = field(default_factory=dict)

    def reserved_indices(self) -> set[int]:
        taken: set[int] = set()
        for indices in self.reservations.values():
            taken.update(indices)
        return taken


@dataclass
class NodeState:
    """Runtime view of a cloud node: liveness plus per-host reservations."""

    node: CloudNode
    alive: bool = True
    hosts: list[HostState] = field(default_factory=list)
    reserved_mips: float = 0.0

    def __post_init__(self) -> None:
        if not self.hosts:
            self.hosts = [HostState(h) for h in self.node.hosts]

    @property
    def capacity_mips(self) -> float:
        """Aggregate space-shared capacity over the node's hosts."""
        return sum(space_shared_capacity(hs.host.pes) for hs in self.hosts)

    @property
    def free_capacity_mips(self) -> float:
        return self.capacity_mips - self.reserved_mips


def place_vm(vm: Vm, node_state: NodeState) -> HostBinding | None:
    """Bind a VM to the first host with enough free, strong-enough PEs.

    Scans hosts in declaration order and reserves the lowest-indexed free
    PEs whose strength covers the VM's per-core requirement. Returns None
    when no host qualifies (a placement failure, not an error).
    """
    if not node_state.alive:
        raise ValueError(f"node down: {node_state.node.id}")
    if vm.host_binding is not None:
        raise ValueError(f"vm already bound: {vm.id}")
    for hs in node_state.hosts:
        taken = hs.reserved_indices()
        candidates = [
            i
            for i, pe in enumerate(hs.host.pes)
            if i not in taken and pe.mips >= vm.mips_per_core
        ]
        if len(candidates) >= vm.cores:
            picked = tuple(candidates[: vm.cores])
            hs.reservations[vm.id] = picked
            node_state.reserved_mips += vm.requirement_mips
            vm.host_binding = HostBinding(node_state.node.id, hs.host.id, picked)
            return vm.host_binding
    return None


def release_vm(
    vm: Vm, node_state: NodeState, runtime: "VmRuntime | None" = None
) -> tuple[int, ...]:
    """Return a VM's PEs to the free pool; exact inverse of placement.

    A runtime may be passed to guard against releasing a VM whose
    cloudlets are still running.
    """
    if vm.host_binding is None:
        raise ValueError(f"vm not bound: {vm.id}")
    if runtime is not None and runtime.running:
        raise ValueError(f"vm busy: {vm.id} has running cloudlets")
    binding = vm.host_binding
    for hs in node_state.hosts:
        if hs.host.id == binding.host_id:
            freed = hs.reservations.pop(vm.id)
            node_state.reserved_mips -= vm.requirement_mips
            vm.host_binding = None
            return freed
    raise ValueError(f"vm {vm.id} not reserved on node {node_state.node.id}")


class VmRuntime:
    """Scheduling state of one VM: its running cloudlets, their lazily
    advanced remaining work, and the next predicted completion.

    ``generation`` increments whenever the set of finish estimates changes,
    so completion events stamped with an older generation can be discarded.
    """

    def __init__(self, vm: Vm, cloudlet_order: dict[str, int]):
        self.vm = vm
        self.cloudlet_order = cloudlet_order  # cloudlet id -> declaration index
        self.running: list[Cloudlet] = []  # kept in declaration order
        self.last_update = 0.0
        self.generation = 0
        self.next_completion: tuple[str, float] | None = None

    @property
    def active_core_demand(self) -> int:
        return sum(c.cores for c in self.running)

    def capacity(self) -> float:
        """Per-core share each running cloudlet currently receives."""
        pes = [ProcessingElement(self.vm.mips_per_core)] * self.vm.cores
        return time_shared_capacity(pes, self.active_core_demand)

    def _advance_to(self, ct: float) -> None:
        dt = ct - self.last_update
        if dt < 0:
            raise ValueError(
                f"clock went backwards: {ct} < {self.last_update} on vm {self.vm.id}"
            )
        if dt > 0 and self.running:
            cap = self.capacity()
            for c in self.running:
                c.remaining_mi = advance_progress(c.remaining_mi, cap, c.cores, dt)
        self.last_update = ct

    def _recompute(self, ct: float) -> None:
        self.generation += 1
        if not self.running:
            self.next_completion = None
            return
        cap = self.capacity()
        best: tuple[float, int, str] | None = None
        for c in self.running:
            eft = estimated_finish_time(ct, c.remaining_mi, cap, c.cores)
            key = (eft, self.cloudlet_order[c.id], c.id)
            if best is None or key < best:
                best = key
        self.next_completion = (best[2], best[0])

    def eft_of(self, cloudlet_id: str, ct: float) -> float:
        """Finish estimate of one running cloudlet at the current rates."""
        cap = self.capacity()
        for c in self.running:
            if c.id == cloudlet_id:
                return estimated_finish_time(ct, c.remaining_mi, cap, c.cores)
        raise ValueError(f"cloudlet not running: {cloudlet_id}")

    def submit(self, cloudlet: Cloudlet, ct: float) -> None:
        """Start a pending cloudlet on this VM at time ``ct``.

        Everyone already running is advanced to ``ct`` first; rates and
        finish estimates are then recomputed with the newcomer included.
        """
        if cloudlet.vm_id != self.vm.id:
            raise ValueError(
                f"cloudlet {cloudlet.id} targets vm {cloudlet.vm_id}, not {self.vm.id}"
            )
        if self.vm.host_binding is None:
            raise ValueError(f"vm not bound: {self.vm.id}")
        if cloudlet.state != CLOUDLET_PENDING:
            raise ValueError(f"cloudlet not pending: {cloudlet.id}")
        if cloudlet.cores > self.vm.cores:
            raise ValueError(
                f"cloudlet wider than VM: {cloudlet.id} needs {cloudlet.cores} "
                f"cores, vm {self.vm.id} has {self.vm.cores}"
            )
        self._advance_to(ct)
        cloudlet.state = CLOUDLET_RUNNING
        self.running.append(cloudlet)
        self.running.sort(key=lambda c: self.cloudlet_order[c.id])
        self._recompute(ct)

    def reschedule(self, ct: float) -> list[Cloudlet]:
        """Advance everyone to ``ct``; cloudlets with no work left finish.

        Returns the finished cloudlets (declaration order) and refreshes
        rates and finish estimates for the survivors.
        """
        self._advance_to(ct)
        finished = [c for c in self.running if c.remaining_mi <= COMPLETION_EPSILON_MI]
        for c in finished:
            c.remaining_mi = 0.0
            c.state = CLOUDLET_FINISHED
            self.running.remove(c)
        self._recompute(ct)
        return finished

    def complete(self, cloudlet_id: str, ct: float) -> Cloudlet:
        """Finish exactly one named cloudlet at its predicted finish time.

        Used by the engine so each completion is driven by its own event;
        simultaneous finishers surface one at a time at the same timestamp.
        """
        self._advance_to(ct)
        for c in self.running:
            if c.id == cloudlet_id:
                if c.remaining_mi > 1e-6:
                    raise RuntimeError(
                        f"completion fired early for {cloudlet_id}: "
                        f"{c.remaining_mi} MI left at t={ct}"
                    )
                c.remaining_mi = 0.0
                c.state = CLOUDLET_FINISHED
                self.running.remove(c)
                self._recompute(ct)
                return c
        raise ValueError(f"cloudlet not running: {cloudlet_id}")

    def unbind(self, ct: float) -> list[Cloudlet]:
        """Strip the VM's workload for re-placement after a node failure.

        Running cloudlets go back to pending with their remaining work
        preserved; the caller releases the PE reservation itself.
        """
        displaced = list(self.running)
        for c in displaced:
            c.state = CLOUDLET_PENDING
        self.running.clear()
        self.last_update = ct
        self._recompute(ct)
        return displaced
