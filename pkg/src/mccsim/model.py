"""Domain model for a federated mobile-cloud simulation.

The hardware hierarchy is cloud node -> host -> processing element (PE);
the workload hierarchy is application -> VM -> cloudlet. Mobile devices
attach to access points, which route submissions to a preferred node and
add a fixed submission latency. Everything here is plain value data:
validated once after parsing, then mutated only inside the engine's
single-threaded run loop.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class ScenarioError(ValueError):
    """A scenario is structurally or semantically unusable."""


class ApplicationClass(Enum):
    PRIVATE = "private"
    PUBLIC = "public"
    HYBRID = "hybrid"


CLOUDLET_PENDING = "pending"
CLOUDLET_RUNNING = "running"
CLOUDLET_FINISHED = "finished"


@dataclass
class ProcessingElement:
    """One core of a host; ``mips`` is its processing strength."""

    mips: float


@dataclass
class Host:
    id: str
    pes: list[ProcessingElement]

    @property
    def np(self) -> int:
        """Number of processing elements."""
        return len(self.pes)

    @property
    def total_mips(self) -> float:
        return sum(pe.mips for pe in self.pes)


@dataclass
class CloudNode:
    id: str
    hosts: list[Host]
    alive: bool = True


@dataclass
class HostBinding:
    """Where a VM lives: a host plus the exact PE indices it reserved."""

    node_id: str
    host_id: str
    pe_indices: tuple[int, ...]


@dataclass
class Vm:
    id: str
    cores: int
    mips_per_core: float
    host_binding: HostBinding | None = None

    @property
    def requirement_mips(self) -> float:
        return self.cores * self.mips_per_core


@dataclass
class Cloudlet:
    """A task unit: total length in million instructions plus a core demand.

    ``remaining_mi`` starts at the full length and is driven to zero by the
    scheduler; ``state`` is finished exactly when it reaches zero.
    """

    id: str
    length_mi: float
    cores: int
    vm_id: str
    remaining_mi: float | None = None
    state: str = CLOUDLET_PENDING

    def __post_init__(self) -> None:
        if self.remaining_mi is None:
            self.remaining_mi = self.length_mi

    @property
    def executed_mi(self) -> float:
        return self.length_mi - self.remaining_mi


@dataclass
class Application:
    id: str
    device_id: str
    app_class: ApplicationClass
    owned_nodes: list[str]
    vms: list[Vm]
    cloudlets: list[Cloudlet]
    submit_time_s: float


@dataclass
class MobileDevice:
    id: str
    ap_id: str


@dataclass
class AccessPoint:
    id: str
    preferred_node: str
    latency_ms: float


@dataclass
class InjectedEvent:
    """A scenario-scripted fault or mobility event."""

    time_s: float
    kind: str  # node_fail | node_recover | ap_handoff
    node: str | None = None
    device: str | None = None
    ap: str | None = None


@dataclass
class SimClock:
    """Simulation time; only ever moves forward."""

    now: float = 0.0

    def advance(self, t: float) -> None:
        if t < self.now:
            raise ValueError(f"clock went backwards: {t} < {self.now}")
        self.now = t


def resource_requirement(app: Application) -> float:
    """Aggregate MIPS demand of an application: sum of cores x MIPS per core
    over its VMs. This is the quantity applications are ordered by and
    compared against node capacity during allocation."""
    return sum(vm.requirement_mips for vm in app.vms)


def validate_scenario(scenario) -> list[str]:
    """Check every cross-reference and numeric invariant of a parsed scenario.

    Returns one error string per violation, each prefixed with the path of
    the offending field; an empty list means the scenario is runnable.
    """
    errors: list[str] = []

    node_ids: set[str] = set()
    host_ids: set[str] = set()
    for ni, node in enumerate(scenario.nodes):
        npath = f"nodes[{ni}]"
        if node.id in node_ids:
            errors.append(f"{npath}.id: duplicate node id {node.id!r}")
        node_ids.add(node.id)
        if not node.hosts:
            errors.append(f"{npath}.hosts: node has no hosts")
        for hi, host in enumerate(node.hosts):
            hpath = f"{npath}.hosts[{hi}]"
            if host.id in host_ids:
                errors.append(f"{hpath}.id: duplicate host id {host.id!r}")
            host_ids.add(host.id)
            if not host.pes:
                errors.append(f"{hpath}.pes: host has no processing elements")
            for pi, pe in enumerate(host.pes):
                if pe.mips <= 0:
                    errors.append(f"{hpath}.pes[{pi}]: mips must be positive")

    ap_ids: set[str] = set()
    for ai, ap in enumerate(scenario.access_points):
        apath = f"access_points[{ai}]"
        if ap.id in ap_ids:
            errors.append(f"{apath}.id: duplicate access point id {ap.id!r}")
        ap_ids.add(ap.id)
        if ap.preferred_node not in node_ids:
            errors.append(
                f"{apath}.preferred_node: unknown node {ap.preferred_node!r}"
            )
        if ap.latency_ms < 0:
            errors.append(f"{apath}.latency_ms: latency must be non-negative")

    device_ids: set[str] = set()
    for di, dev in enumerate(scenario.devices):
        dpath = f"devices[{di}]"
        if dev.id in device_ids:
            errors.append(f"{dpath}.id: duplicate device id {dev.id!r}")
        device_ids.add(dev.id)
        if dev.ap_id not in ap_ids:
            errors.append(f"{dpath}.ap: unknown access point {dev.ap_id!r}")

    app_ids: set[str] = set()
    vm_ids: set[str] = set()
    cloudlet_ids: set[str] = set()
    for xi, app in enumerate(scenario.applications):
        xpath = f"applications[{xi}]"
        if app.id in app_ids:
            errors.append(f"{xpath}.id: duplicate application id {app.id!r}")
        app_ids.add(app.id)
        if app.device_id not in device_ids:
            errors.append(f"{xpath}.device: unknown device {app.device_id!r}")
        if app.submit_time_s < 0:
            errors.append(f"{xpath}.submit_time_s: must be non-negative")
        for node_id in app.owned_nodes:
            if node_id not in node_ids:
                errors.append(f"{xpath}.owned_nodes: unknown node {node_id!r}")
        if app.app_class is ApplicationClass.PRIVATE and not app.owned_nodes:
            errors.append(
                f"{xpath}.owned_nodes: private application {app.id!r} has no "
                "owned nodes and is unplaceable by class"
            )
        local_vms: dict[str, Vm] = {}
        for vi, vm in enumerate(app.vms):
            vpath = f"{xpath}.vms[{vi}]"
            if vm.id in vm_ids:
                errors.append(f"{vpath}.id: duplicate vm id {vm.id!r}")
            vm_ids.add(vm.id)
            local_vms[vm.id] = vm
            if vm.cores < 1:
                errors.append(f"{vpath}.cores: must be a positive integer")
            if vm.mips_per_core <= 0:
                errors.append(f"{vpath}.mips_per_core: must be positive")
        for ci, cl in enumerate(app.cloudlets):
            cpath = f"{xpath}.cloudlets[{ci}]"
            if cl.id in cloudlet_ids:
                errors.append(f"{cpath}.id: duplicate cloudlet id {cl.id!r}")
            cloudlet_ids.add(cl.id)
            if cl.length_mi <= 0:
                errors.append(f"{cpath}.length_mi: must be positive")
            if cl.cores < 1:
                errors.append(f"{cpath}.cores: must be a positive integer")
            target = local_vms.get(cl.vm_id)
            if target is None:
                errors.append(
                    f"{cpath}.vm: cloudlet {cl.id!r} references vm "
                    f"{cl.vm_id!r} not declared in this application"
                )
            elif cl.cores > target.cores:
                errors.append(
                    f"{cpath}.cores: cloudlet {cl.id!r} needs {cl.cores} cores "
                    f"but vm {target.id!r} has {target.cores}"
                )

    for ei, ev in enumerate(scenario.events):
        epath = f"events[{ei}]"
        if ev.time_s < 0:
            errors.append(f"{epath}.time_s: must be non-negative")
        if ev.kind in ("node_fail", "node_recover"):
            if ev.node not in node_ids:
                errors.append(f"{epath}.node: unknown node {ev.node!r}")
        elif ev.kind == "ap_handoff":
            if ev.device not in device_ids:
                errors.append(f"{epath}.device: unknown device {ev.device!r}")
            if ev.ap not in ap_ids:
                errors.append(f"{epath}.ap: unknown access point {ev.ap!r}")
        else:
            errors.append(f"{epath}.kind: unknown event kind {ev.kind!r}")

    if scenario.seed < 0:
        errors.append("seed: must be non-negative")

    return errors
