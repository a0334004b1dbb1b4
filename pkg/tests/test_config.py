import json

import pytest
from hypothesis import given, settings, strategies as st

from ris_twinsolver import (ConfigError, Constraint, CoordinateOrder, ZtgForm,
                            build_reference_scenario, dump_scenario, load_run_config, load_scenario,
                            read_run_config)
from ris_twinsolver.config import scenario_to_dict

SCENARIO = """\
frequency_hz: 3.0e9
transmitters:
  - {center: [0.0, 0.0], length: 0.05, radius: 1.0e-4}
  - {center: [0.05, 0.0], length: 0.05, radius: 1.0e-4}
receivers:
  - {center: [0.96, 1.44, 0.01], length: 0.05, radius: 1.0e-4}
ris:
  - {center: [0.0, 2.4], length: 0.05, radius: 1.0e-4, termination_re: 0.2, termination_im: 0.0}
  - {center: [0.0125, 2.4], termination_re: 0.0, termination_im: -35.5}
z_generator_ohm: [50, {re: 75, im: 5}]
z_load_ohm: 50
direct_path_blocked: false
"""


def test_load_scenario_fields():
    s = load_scenario(SCENARIO)
    assert s.params.frequency == 3e9
    assert len(s.transmitters) == 2 and len(s.ris) == 2 and len(s.receivers) == 1
    assert s.receivers[0].center == (0.96, 1.44, 0.01)
    assert s.z_ris == (0.2 + 0j, -35.5j)
    assert s.z_generator == (50 + 0j, 75 + 5j)
    assert s.z_load == (50 + 0j,)
    assert not s.direct_path_blocked
    # defaults: half-wave length and lambda / 1000 radius
    lam = s.params.wavelength
    assert s.ris[1].length == pytest.approx(lam / 2) and s.ris[1].radius == pytest.approx(lam / 1000)


def test_round_trip_text_and_json():
    s = load_scenario(SCENARIO)
    assert load_scenario(dump_scenario(s)) == s
    assert load_scenario(json.dumps(scenario_to_dict(s))) == s


@settings(max_examples=10, deadline=None)
@given(st.integers(1, 64), st.floats(0, 10), st.floats(-1e3, 1e3))
def test_round_trip_reference_scenarios(n, re, im):
    s = build_reference_scenario(n, termination=complex(re, im))
    assert load_scenario(dump_scenario(s)) == s


@pytest.mark.parametrize("text, key, line", [
    ("frequency_hz: 1e9\ntransmitters: []\nreceivers: [{center: [0, 0]}]\nbogus: 1\n", "bogus", 4),
    ("frequency_hz: 1e9\ntransmitters:\n  - {center: [0, 0], lenght: 0.1}\nreceivers: []\n",
     "transmitters.0.lenght", 3),
    ("frequency_hz: -5\ntransmitters: []\nreceivers: []\n", "frequency_hz", 1),
    ("frequency_hz: 1e9\ntransmitters:\n  - {center: [0]}\nreceivers: []\n", "transmitters.0.center", 3),
    ("frequency_hz: 1e9\ntransmitters: [{center: [0, 0]}]\nreceivers: [{center: [1, 0]}]\n"
     "direct_path_blocked: maybe\n", "direct_path_blocked", 4),
    ("frequency_hz: 1e9\ntransmitters: [{center: [0, 0]}]\nreceivers: [{center: [1, 0]}]\n"
     "z_load_ohm: [1, 2, 3]\n", "z_load_ohm", 4),
    ("frequency_hz: 1e9\ntransmitters:\n  - {center: [0, 0], radius: 1.0}\nreceivers: []\n",
     "transmitters.0", 3),
])
def test_scenario_errors_name_key_and_line(text, key, line):
    with pytest.raises(ConfigError) as info:
        load_scenario(text)
    assert info.value.key == key
    assert info.value.line == line


def test_missing_required_key():
    with pytest.raises(ConfigError) as info:
        load_scenario("transmitters: []\n")
    assert info.value.key == "frequency_hz" and info.value.line == 1


def test_malformed_yaml_reports_line():
    with pytest.raises(ConfigError) as info:
        load_scenario("frequency_hz: 1e9\ntransmitters: [\n")
    assert info.value.line is not None


def test_run_config_defaults():
    cfg = load_run_config("")
    assert cfg.scenario is None
    assert cfg.mesh.segments_per_halfwave == 21 and not cfg.mesh.refinement_check
    assert cfg.optimizer.constraint is Constraint.REACTIVE_ONLY
    assert cfg.optimizer.max_sweeps == 50 and cfg.optimizer.tolerance == 1e-6
    assert cfg.ztg_form is ZtgForm.SOURCE


def test_run_config_keys(tmp_path):
    (tmp_path / "scen.yaml").write_text(SCENARIO)
    (tmp_path / "run.yaml").write_text(
        "scenario: scen.yaml\nquad_order: 48\nquad_panels: 2\nsegments_per_halfwave: 41\n"
        "refinement_check: true\nconstraint: passive_complex\nmax_sweeps: 7\ntolerance: 1e-8\n"
        "initial_termination_ohm: {re: 1, im: -2}\ncoordinate_order: random_permutation\n"
        "seed: 9\nztg_as_printed: true\n")
    cfg = read_run_config(tmp_path / "run.yaml")
    assert len(cfg.scenario.ris) == 2
    assert (cfg.quad.order, cfg.quad.panels) == (48, 2)
    assert cfg.mesh.segments_per_halfwave == 41 and cfg.mesh.refinement_check
    o = cfg.optimizer
    assert o.constraint is Constraint.PASSIVE_COMPLEX and o.max_sweeps == 7 and o.tolerance == 1e-8
    assert o.initial_termination == 1 - 2j
    assert o.coordinate_order is CoordinateOrder.RANDOM_PERMUTATION and o.seed == 9
    assert cfg.ztg_form is ZtgForm.PRINTED


def test_inline_scenario_errors_keep_line_numbers():
    text = "max_sweeps: 3\nscenario:\n  frequency_hz: 1e9\n  transmitters: []\n  receivers: []\n  oops: 2\n"
    with pytest.raises(ConfigError) as info:
        load_run_config(text)
    assert info.value.key == "scenario.oops" and info.value.line == 6


@pytest.mark.parametrize("text, key", [
    ("segments_per_halfwave: 20\n", "segments_per_halfwave"),
    ("constraint: unconstrained\n", "constraint"),
    ("constraint: sideways\n", "constraint"),
    ("quad_order: 1\n", "quad_order"),
    ("max_sweeps: -1\n", "max_sweeps"),
    ("tolerance: 0\n", "tolerance"),
    ("ztg_form: source\nztg_as_printed: true\n", "ztg_as_printed"),
    ("scenario: missing.yaml\n", "scenario"),
    ("unknown: 1\n", "unknown"),
])
def test_run_config_errors(text, key):
    with pytest.raises(ConfigError) as info:
        load_run_config(text)
    assert info.value.key == key
    assert info.value.line == 1 + text.count("\n", 0, text.index(key))
