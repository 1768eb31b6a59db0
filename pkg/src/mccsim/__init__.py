"""Deterministic discrete-event simulator for mobile-cloud workloads.

Applications submitted by mobile devices through access points are
allocated to federated cloud nodes largest-requirement-first, their VMs
placed space-shared onto hosts, and their cloudlets scheduled time-shared
inside each VM. A central append-only log records every allocation and
progress change and is replayed to survive injected node failures.
"""

from importlib import resources
from pathlib import Path

from .capacity import (
    COMPLETION_EPSILON_MI,
    advance_progress,
    estimated_finish_time,
    space_shared_capacity,
    time_shared_capacity,
)
from .engine import Engine, RunResult, replay_log, run_scenario
from .model import (
    AccessPoint,
    Application,
    ApplicationClass,
    CloudNode,
    Cloudlet,
    Host,
    MobileDevice,
    ProcessingElement,
    ScenarioError,
    Vm,
    resource_requirement,
    validate_scenario,
)
from .report import (
    ReportRow,
    Scenario,
    ScenarioFormatError,
    load_scenario,
    parse_scenario,
    row_from_result,
    serialize_scenario,
    write_chart_data,
    write_report,
)

__version__ = "0.1.0"


def bundled_scenarios_dir() -> Path:
    """Directory holding the scenario fixtures shipped with the package."""
    return Path(resources.files("mccsim") / "scenarios")
