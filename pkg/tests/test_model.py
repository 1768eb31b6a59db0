"""Unit tests for domain types, requirement aggregation, and validation."""

import random

import pytest

from mccsim.model import (
    Application,
    ApplicationClass,
    CloudNode,
    Cloudlet,
    Host,
    InjectedEvent,
    ProcessingElement,
    SimClock,
    Vm,
    resource_requirement,
    validate_scenario,
)
from mccsim.report import load_scenario

from conftest import make_scenario, pes, single_vm_app


def _app(vms, app_id="a1"):
    return Application(app_id, "dev-1", ApplicationClass.PUBLIC, [], vms, [], 0.0)


class TestResourceRequirement:
    def test_no_vms(self):
        assert resource_requirement(_app([])) == 0.0

    def test_single_vm(self):
        assert resource_requirement(_app([Vm("v", 1, 100.0)])) == 100.0

    def test_sum_over_vms(self):
        app = _app([Vm("v1", 2, 250.0), Vm("v2", 2, 250.0)])
        assert resource_requirement(app) == 1000.0

    def test_additive_over_vm_partition(self):
        rng = random.Random(3)
        for _ in range(50):
            vms = [
                Vm(f"v{i}", rng.randint(1, 8), rng.uniform(10, 500))
                for i in range(rng.randint(0, 10))
            ]
            cut = rng.randint(0, len(vms))
            whole = resource_requirement(_app(vms))
            parts = resource_requirement(_app(vms[:cut])) + resource_requirement(
                _app(vms[cut:])
            )
            assert whole == pytest.approx(parts, rel=1e-12)


class TestSimClock:
    def test_monotonic(self):
        clock = SimClock()
        clock.advance(1.0)
        clock.advance(1.0)
        clock.advance(2.5)
        with pytest.raises(ValueError, match="clock went backwards"):
            clock.advance(2.0)


class TestValidateScenario:
    def _valid(self):
        node = CloudNode("n1", [Host("h1", pes(250, 250))])
        app = single_vm_app("a1", 1, 250.0, [(500.0, 1)])
        return make_scenario(nodes=[node], applications=[app])

    def test_valid_scenario_has_no_errors(self):
        assert validate_scenario(self._valid()) == []

    def test_bundled_scenario_validates(self, bundled_dir):
        scenario = load_scenario(bundled_dir / "table2_row1.scenario")
        assert validate_scenario(scenario) == []

    def test_dangling_vm_reference(self):
        sc = self._valid()
        sc.applications[0].cloudlets[0].vm_id = "nope"
        errors = validate_scenario(sc)
        assert len(errors) == 1
        assert "a1-cl0" in errors[0] and "nope" in errors[0]

    def test_zero_mips(self):
        sc = self._valid()
        sc.nodes[0].hosts[0].pes[0] = ProcessingElement(0.0)
        errors = validate_scenario(sc)
        assert len(errors) == 1
        assert "mips must be positive" in errors[0]

    def test_validation_is_idempotent(self):
        sc = self._valid()
        sc.applications[0].cloudlets[0].vm_id = "nope"
        sc.nodes[0].hosts[0].pes[0] = ProcessingElement(-1.0)
        assert validate_scenario(sc) == validate_scenario(sc)

    def test_duplicate_ids_flagged_per_kind(self):
        sc = self._valid()
        sc.nodes.append(CloudNode("n1", [Host("h2", pes(100))]))
        sc.applications.append(single_vm_app("a1", 1, 100.0, []))
        errors = validate_scenario(sc)
        assert any("duplicate node id" in e for e in errors)
        assert any("duplicate application id" in e for e in errors)

    def test_private_app_requires_owned_nodes(self):
        sc = self._valid()
        sc.applications[0].app_class = ApplicationClass.PRIVATE
        errors = validate_scenario(sc)
        assert len(errors) == 1
        assert "unplaceable by class" in errors[0]

    def test_cloudlet_wider_than_vm(self):
        sc = self._valid()
        sc.applications[0].cloudlets[0].cores = 5
        errors = validate_scenario(sc)
        assert len(errors) == 1
        assert "5 cores" in errors[0]

    def test_event_references_and_times(self):
        sc = self._valid()
        sc.events.append(InjectedEvent(-1.0, "node_fail", node="n1"))
        sc.events.append(InjectedEvent(1.0, "node_fail", node="ghost"))
        sc.events.append(InjectedEvent(1.0, "ap_handoff", device="dev-1", ap="ghost"))
        errors = validate_scenario(sc)
        assert any("must be non-negative" in e for e in errors)
        assert any("unknown node 'ghost'" in e for e in errors)
        assert any("unknown access point 'ghost'" in e for e in errors)

    def test_dangling_device_and_ap(self):
        sc = self._valid()
        sc.applications[0].device_id = "ghost"
        sc.access_points[0].preferred_node = "ghost"
        errors = validate_scenario(sc)
        assert any("unknown device" in e for e in errors)
        assert any("unknown node" in e for e in errors)

    def test_cloudlet_length_must_be_positive(self):
        sc = self._valid()
        sc.applications[0].cloudlets[0].length_mi = 0.0
        sc.applications[0].cloudlets[0].remaining_mi = 0.0
        errors = validate_scenario(sc)
        assert any("length_mi" in e for e in errors)


class TestCloudletDefaults:
    def test_remaining_defaults_to_length(self):
        cl = Cloudlet("c", 1234.5, 1, "vm")
        assert cl.remaining_mi == 1234.5
        assert cl.state == "pending"
        assert cl.executed_mi == 0.0
