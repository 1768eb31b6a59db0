"""Application-to-node allocation with access-point aware preference.

Applications are served largest resource requirement first. Each one is
tried on its preferred eligible node when the requirement fits under that
node's free aggregate capacity (strict comparison); otherwise, in dynamic
mode, its VMs spill over node by node across the eligible list. An
application that cannot be fully placed leaves no trace and waits in a
pending queue ordered the same way, drained whenever resources free up.

Class rules: private applications may only land on their owned nodes,
hybrid ones prefer owned nodes before public ones, public ones go anywhere.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass

from .model import (
    AccessPoint,
    Application,
    ApplicationClass,
    MobileDevice,
    ScenarioError,
    Vm,
    resource_requirement,
)
from .scheduler import NodeState, place_vm, release_vm


@dataclass
class VmPlacement:
    vm_id: str
    node_id: str
    host_id: str
    pe_indices: tuple[int, ...]


@dataclass
class AllocationPlan:
    app_id: str
    placements: list[VmPlacement]
    spilled: bool  # any VM landed off the preferred eligible node


def sort_applications(apps: list[Application]) -> list[Application]:
    """Stable sort by descending resource requirement; ties keep the
    incoming (declaration) order."""
    return sorted(apps, key=lambda a: -resource_requirement(a))


def preferred_node(device: MobileDevice, access_points: dict[str, AccessPoint]) -> str:
    """Node the device's current access point routes to. Looked up fresh at
    every submission, so handoffs redirect future work."""
    ap = access_points.get(device.ap_id)
    if ap is None:
        raise ValueError(
            f"device {device.id} references unknown access point {device.ap_id}"
        )
    return ap.preferred_node


def eligible_nodes(
    app: Application, node_states: list[NodeState], preferred: str | None
) -> list[NodeState]:
    """Alive nodes this application may use, in placement order.

    Ordering: owned nodes before public ones for hybrid apps, declaration
    order within each group, with the preferred node pulled to the front of
    its group.
    """
    alive = [ns for ns in node_states if ns.alive]
    owned = set(app.owned_nodes)
    if app.app_class is ApplicationClass.PRIVATE:
        if not app.owned_nodes:
            raise ScenarioError(
                f"application {app.id} unplaceable by class: "
                "private with no owned nodes"
            )
        groups = [[ns for ns in alive if ns.node.id in owned]]
    elif app.app_class is ApplicationClass.HYBRID:
        groups = [
            [ns for ns in alive if ns.node.id in owned],
            [ns for ns in alive if ns.node.id not in owned],
        ]
    else:
        groups = [alive]

    ordered: list[NodeState] = []
    for group in groups:
        front = [ns for ns in group if ns.node.id == preferred]
        rest = [ns for ns in group if ns.node.id != preferred]
        ordered.extend(front + rest)
    return ordered


def allocate_application(
    app: Application,
    vms: list[Vm],
    node_states: list[NodeState],
    dynamic: bool,
    preferred: str | None,
) -> AllocationPlan | None:
    """Place the given (unbound) VMs of an application, or nothing at all.

    Returns the plan on success; None means the application must queue, in
    which case every reservation made during the attempt has been undone.
    """
    eligible = eligible_nodes(app, node_states, preferred)
    if not eligible:
        return None
    target = eligible[0]
    reference = target.node.id  # the preferred eligible node

    placements: list[VmPlacement] = []
    placed_on: list[tuple[Vm, NodeState]] = []

    def undo() -> None:
        for vm, ns in reversed(placed_on):
            release_vm(vm, ns)
        placements.clear()
        placed_on.clear()

    if resource_requirement(app) < target.free_capacity_mips:
        complete = True
        for vm in vms:
            binding = place_vm(vm, target)
            if binding is None:
                complete = False
                break
            placements.append(
                VmPlacement(vm.id, binding.node_id, binding.host_id, binding.pe_indices)
            )
            placed_on.append((vm, target))
        if complete:
            return AllocationPlan(app.id, placements, spilled=False)
        undo()
        if not dynamic:
            return None
    elif not dynamic:
        return None

    # Dynamic spillover: each VM takes the first eligible node that fits it.
    for vm in vms:
        for ns in eligible:
            binding = place_vm(vm, ns)
            if binding is not None:
                placements.append(
                    VmPlacement(
                        vm.id, binding.node_id, binding.host_id, binding.pe_indices
                    )
                )
                placed_on.append((vm, ns))
                break
        else:
            undo()
            return None
    spilled = any(p.node_id != reference for p in placements)
    return AllocationPlan(app.id, placements, spilled=spilled)


class PendingQueue:
    """Applications waiting for resources, largest requirement first; ties
    fall back to submit time, then declaration order."""

    def __init__(self) -> None:
        self._entries: list[tuple[tuple[float, float, int], str]] = []

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, app_id: str) -> bool:
        return any(app_id == entry[1] for entry in self._entries)

    def push(self, app: Application, declaration_index: int) -> None:
        key = (-resource_requirement(app), app.submit_time_s, declaration_index)
        bisect.insort(self._entries, (key, app.id))

    def remove(self, app_id: str) -> None:
        for i, (_, entry_id) in enumerate(self._entries):
            if entry_id == app_id:
                del self._entries[i]
                return
        raise ValueError(f"application not queued: {app_id}")

    def ordered_ids(self) -> list[str]:
        return [app_id for _, app_id in self._entries]
