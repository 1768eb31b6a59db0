"""Scenario document parsing and metric report emission.

A scenario is a UTF-8 JSON document describing the node/host/PE hardware,
access points, devices, applications (VMs plus cloudlets), and injected
events. Parsing is strict: unknown keys are rejected so typos surface as
errors, and every structural problem in a document is reported together.

Reports carry four columns per run: a "N tasks in M VMs" label, the mean
space-shared capacity over hosts that held allocations, the makespan in
milliseconds, and the time-shared capacity of the most loaded host at its
peak concurrent core demand. The same rows feed a stacked-bar chart data
file; nothing here renders images.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .model import (
    AccessPoint,
    Application,
    ApplicationClass,
    CloudNode,
    Cloudlet,
    Host,
    InjectedEvent,
    MobileDevice,
    ProcessingElement,
    Vm,
)

REPORT_COLUMNS = (
    "Distributed Cloud details(VMs)",
    "Capacity(Dynamically varying) using space shared",
    "Estimated finish time(in milisec)",
    "Total processing capacity of Cloud host",
)

METRIC_NOTES = {
    REPORT_COLUMNS[1]: (
        "mean per-core (space-shared) capacity over hosts that held at "
        "least one VM during the run, in MIPS"
    ),
    REPORT_COLUMNS[2]: (
        "makespan: first submission to last cloudlet completion, in "
        "milliseconds"
    ),
    REPORT_COLUMNS[3]: (
        "time-shared capacity of the most loaded host at its peak "
        "concurrent core demand, in MIPS"
    ),
}


class ScenarioFormatError(ValueError):
    """The scenario document is malformed; ``errors`` lists every problem."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


@dataclass
class Scenario:
    """Fully resolved input document for one simulation run."""

    name: str
    seed: int
    dynamic: bool
    nodes: list[CloudNode]
    access_points: list[AccessPoint]
    devices: list[MobileDevice]
    applications: list[Application]
    events: list[InjectedEvent]


@dataclass
class ReportRow:
    label: str
    space_shared_capacity: float
    finish_time_ms: float
    time_shared_capacity: float


# --------------------------------------------------------------------------
# Scenario parsing
# --------------------------------------------------------------------------


class _Check:
    """Collects document errors so they can all be reported at once."""

    def __init__(self) -> None:
        self.errors: list[str] = []

    _ZERO = {"str": "", "bool": False, "int": 0, "num": 0.0, "list": []}

    def obj(self, raw: Any, path: str, required: dict, optional: dict) -> dict | None:
        if not isinstance(raw, dict):
            self.errors.append(f"{path}: expected an object")
            return None
        known = set(required) | set(optional)
        for key in raw:
            if key not in known:
                self.errors.append(f"{path}: unknown key {key!r}")
        out: dict = {}
        for key, kind in required.items():
            if key not in raw:
                self.errors.append(f"{path}: missing required key {key!r}")
                out[key] = self._ZERO[kind]
            else:
                out[key] = self.typed(raw[key], kind, f"{path}.{key}")
        for key, (kind, default) in optional.items():
            if key in raw:
                out[key] = self.typed(raw[key], kind, f"{path}.{key}")
            else:
                out[key] = default
        return out

    def typed(self, value: Any, kind: str, path: str) -> Any:
        if kind == "str":
            if not isinstance(value, str):
                self.errors.append(f"{path}: expected a string")
                return ""
            return value
        if kind == "bool":
            if not isinstance(value, bool):
                self.errors.append(f"{path}: expected a boolean")
                return False
            return value
        if kind == "int":
            if isinstance(value, bool) or not isinstance(value, int):
                self.errors.append(f"{path}: expected an integer")
                return 0
            return value
        if kind == "num":
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                self.errors.append(f"{path}: expected a number")
                return 0.0
            return float(value)
        if kind == "list":
            if not isinstance(value, list):
                self.errors.append(f"{path}: expected an array")
                return []
            return value
        raise AssertionError(kind)


def parse_scenario(document: dict) -> Scenario:
    """Build a Scenario from a decoded JSON document.

    Raises ScenarioFormatError carrying every structural error found;
    semantic cross-reference checks live in ``model.validate_scenario``.
    """
    ck = _Check()
    top = ck.obj(
        document,
        "scenario",
        required={
            "name": "str",
            "dynamic": "bool",
            "nodes": "list",
            "access_points": "list",
            "devices": "list",
            "applications": "list",
        },
        optional={"seed": ("int", 0), "events": ("list", [])},
    )
    if top is None:
        raise ScenarioFormatError(ck.errors)

    nodes: list[CloudNode] = []
    for ni, raw in enumerate(top["nodes"]):
        got = ck.obj(raw, f"nodes[{ni}]", {"id": "str", "hosts": "list"}, {})
        if got is None:
            continue
        hosts: list[Host] = []
        for hi, hraw in enumerate(got["hosts"]):
            hgot = ck.obj(
                hraw, f"nodes[{ni}].hosts[{hi}]", {"id": "str", "pes": "list"}, {}
            )
            if hgot is None:
                continue
            pes = [
                ProcessingElement(
                    ck.typed(m, "num", f"nodes[{ni}].hosts[{hi}].pes[{pi}]")
                )
                for pi, m in enumerate(hgot["pes"])
            ]
            hosts.append(Host(hgot["id"], pes))
        nodes.append(CloudNode(got["id"], hosts))

    aps: list[AccessPoint] = []
    for ai, raw in enumerate(top["access_points"]):
        got = ck.obj(
            raw,
            f"access_points[{ai}]",
            {"id": "str", "preferred_node": "str", "latency_ms": "num"},
            {},
        )
        if got is not None:
            aps.append(AccessPoint(got["id"], got["preferred_node"], got["latency_ms"]))

    devices: list[MobileDevice] = []
    for di, raw in enumerate(top["devices"]):
        got = ck.obj(raw, f"devices[{di}]", {"id": "str", "ap": "str"}, {})
        if got is not None:
            devices.append(MobileDevice(got["id"], got["ap"]))

    applications: list[Application] = []
    for xi, raw in enumerate(top["applications"]):
        xpath = f"applications[{xi}]"
        got = ck.obj(
            raw,
            xpath,
            required={
                "id": "str",
                "device": "str",
                "class": "str",
                "submit_time_s": "num",
                "vms": "list",
                "cloudlets": "list",
            },
            optional={"owned_nodes": ("list", [])},
        )
        if got is None:
            continue
        try:
            app_class = ApplicationClass(got["class"])
        except ValueError:
            ck.errors.append(
                f"{xpath}.class: must be one of private, public, hybrid "
                f"(got {got['class']!r})"
            )
            app_class = ApplicationClass.PUBLIC
        owned = [
            ck.typed(n, "str", f"{xpath}.owned_nodes[{oi}]")
            for oi, n in enumerate(got["owned_nodes"])
        ]
        vms: list[Vm] = []
        for vi, vraw in enumerate(got["vms"]):
            vgot = ck.obj(
                vraw,
                f"{xpath}.vms[{vi}]",
                {"id": "str", "cores": "int", "mips_per_core": "num"},
                {},
            )
            if vgot is not None:
                vms.append(Vm(vgot["id"], vgot["cores"], vgot["mips_per_core"]))
        cloudlets: list[Cloudlet] = []
        for ci, craw in enumerate(got["cloudlets"]):
            cgot = ck.obj(
                craw,
                f"{xpath}.cloudlets[{ci}]",
                {"id": "str", "vm": "str", "length_mi": "num", "cores": "int"},
                {},
            )
            if cgot is not None:
                cloudlets.append(
                    Cloudlet(cgot["id"], cgot["length_mi"], cgot["cores"], cgot["vm"])
                )
        applications.append(
            Application(
                id=got["id"],
                device_id=got["device"],
                app_class=app_class,
                owned_nodes=owned,
                vms=vms,
                cloudlets=cloudlets,
                submit_time_s=got["submit_time_s"],
            )
        )

    events: list[InjectedEvent] = []
    for ei, raw in enumerate(top["events"]):
        epath = f"events[{ei}]"
        if not isinstance(raw, dict):
            ck.errors.append(f"{epath}: expected an object")
            continue
        kind = raw.get("kind")
        if kind in ("node_fail", "node_recover"):
            got = ck.obj(raw, epath, {"time_s": "num", "kind": "str", "node": "str"}, {})
            if got is not None:
                events.append(InjectedEvent(got["time_s"], kind, node=got["node"]))
        elif kind == "ap_handoff":
            got = ck.obj(
                raw,
                epath,
                {"time_s": "num", "kind": "str", "device": "str", "ap": "str"},
                {},
            )
            if got is not None:
                events.append(
                    InjectedEvent(got["time_s"], kind, device=got["device"], ap=got["ap"])
                )
        else:
            ck.errors.append(f"{epath}.kind: unknown event kind {kind!r}")

    if ck.errors:
        raise ScenarioFormatError(ck.errors)
    return Scenario(
        name=top["name"],
        seed=top["seed"],
        dynamic=top["dynamic"],
        nodes=nodes,
        access_points=aps,
        devices=devices,
        applications=applications,
        events=events,
    )


def serialize_scenario(scenario: Scenario) -> dict:
    """Inverse of ``parse_scenario``: emit the canonical document form."""
    doc: dict = {
        "name": scenario.name,
        "seed": scenario.seed,
        "dynamic": scenario.dynamic,
        "nodes": [
            {
                "id": node.id,
                "hosts": [
                    {"id": h.id, "pes": [pe.mips for pe in h.pes]} for h in node.hosts
                ],
            }
            for node in scenario.nodes
        ],
        "access_points": [
            {"id": ap.id, "preferred_node": ap.preferred_node, "latency_ms": ap.latency_ms}
            for ap in scenario.access_points
        ],
        "devices": [{"id": d.id, "ap": d.ap_id} for d in scenario.devices],
        "applications": [
            {
                "id": app.id,
                "device": app.device_id,
                "class": app.app_class.value,
                "owned_nodes": list(app.owned_nodes),
                "submit_time_s": app.submit_time_s,
                "vms": [
                    {"id": vm.id, "cores": vm.cores, "mips_per_core": vm.mips_per_core}
                    for vm in app.vms
                ],
                "cloudlets": [
                    {"id": c.id, "vm": c.vm_id, "length_mi": c.length_mi, "cores": c.cores}
                    for c in app.cloudlets
                ],
            }
            for app in scenario.applications
        ],
        "events": [_event_doc(ev) for ev in scenario.events],
    }
    return doc


def _event_doc(ev: InjectedEvent) -> dict:
    if ev.kind in ("node_fail", "node_recover"):
        return {"time_s": ev.time_s, "kind": ev.kind, "node": ev.node}
    return {"time_s": ev.time_s, "kind": ev.kind, "device": ev.device, "ap": ev.ap}


def load_scenario(path: str | Path) -> Scenario:
    """Read and parse a scenario file."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioFormatError([f"not valid JSON: {exc}"]) from exc
    return parse_scenario(document)


def scenario_to_text(scenario: Scenario) -> str:
    return json.dumps(serialize_scenario(scenario), indent=2) + "\n"


# --------------------------------------------------------------------------
# Report and chart emission
# --------------------------------------------------------------------------


def row_from_result(result) -> ReportRow:
    """Build the four-column report row for one run result."""
    return ReportRow(
        label=f"{result.n_cloudlets} tasks in {result.n_vms} VMs",
        space_shared_capacity=result.space_shared_capacity_mips,
        finish_time_ms=result.makespan_ms,
        time_shared_capacity=result.time_shared_capacity_mips,
    )


def write_report(rows: list[ReportRow], fmt: str = "csv", meta: dict | None = None) -> str:
    """Render report rows as a CSV or JSON document (deterministic bytes)."""
    if not rows:
        raise ValueError("no report rows")
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for row in rows:
            writer.writerow(
                [
                    row.label,
                    row.space_shared_capacity,
                    row.finish_time_ms,
                    row.time_shared_capacity,
                ]
            )
        return buf.getvalue()
    if fmt == "json":
        doc = {
            "columns": list(REPORT_COLUMNS),
            "rows": [
                {
                    REPORT_COLUMNS[0]: row.label,
                    REPORT_COLUMNS[1]: row.space_shared_capacity,
                    REPORT_COLUMNS[2]: row.finish_time_ms,
                    REPORT_COLUMNS[3]: row.time_shared_capacity,
                }
                for row in rows
            ],
            "meta": {"metrics": METRIC_NOTES, **(meta or {})},
        }
        return json.dumps(doc, indent=2) + "\n"
    raise ValueError(f"unknown report format: {fmt}")


def read_report_json(text: str) -> list[ReportRow]:
    """Parse the JSON report format back into rows."""
    doc = json.loads(text)
    return [
        ReportRow(
            label=raw[REPORT_COLUMNS[0]],
            space_shared_capacity=raw[REPORT_COLUMNS[1]],
            finish_time_ms=raw[REPORT_COLUMNS[2]],
            time_shared_capacity=raw[REPORT_COLUMNS[3]],
        )
        for raw in doc["rows"]
    ]


def write_chart_data(rows: list[ReportRow]) -> dict:
    """Stacked-bar chart data: one category per row, one series per metric,
    in report column order."""
    if not rows:
        raise ValueError("no report rows")
    return {
        "categories": [row.label for row in rows],
        "series": [
            {
                "name": REPORT_COLUMNS[1],
                "values": [row.space_shared_capacity for row in rows],
            },
            {"name": REPORT_COLUMNS[2], "values": [row.finish_time_ms for row in rows]},
            {
                "name": REPORT_COLUMNS[3],
                "values": [row.time_shared_capacity for row in rows],
            },
        ],
    }


def chart_to_text(chart: dict) -> str:
    return json.dumps(chart, indent=2) + "\n"
