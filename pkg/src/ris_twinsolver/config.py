"""Scenario and run-configuration files (YAML; JSON is accepted as a subset).

A scenario document looks like::

    frequency_hz: 3.0e9
    transmitters:
      - {center: [0.0, 0.0], length: 0.05, radius: 1.0e-4}
    receivers:
      - {center: [0.96, 1.44], length: 0.05, radius: 1.0e-4}
    ris:
      - {center: [0.0, 2.4], length: 0.05, radius: 1.0e-4,
         termination_re: 0.2, termination_im: 0.0}
    z_generator_ohm: 50
    z_load_ohm: 50
    direct_path_blocked: true

Centers are (x, y) or (x, y, z) in metres; all dipoles are z-directed.
``length`` defaults to half a wavelength and ``radius`` to a thousandth of a
wavelength.  Port impedances are a single number, or one entry per port
where each entry is a number or ``{re, im}``.

A run configuration holds solver settings and optionally a ``scenario``
(either an inline mapping as above or a path relative to the config file).
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .analytical import QuadratureSpec
from .channel import ZtgForm
from .core import Dipole, Role, Scenario, free_space_params
from .exceptions import ConfigError, DomainError, GeometryError, StructuralError
from .optimizer import Constraint, CoordinateOrder, OptimizerConfig
from .peec import MeshConfig

SCENARIO_KEYS = ("frequency_hz", "transmitters", "receivers", "ris", "z_generator_ohm",
                 "z_load_ohm", "direct_path_blocked")
DIPOLE_KEYS = ("center", "length", "radius")
RIS_KEYS = DIPOLE_KEYS + ("termination_re", "termination_im")
RUN_KEYS = ("scenario", "quad_order", "quad_panels", "segments_per_halfwave",
            "refinement_check", "constraint", "max_sweeps", "tolerance",
            "initial_termination_ohm", "coordinate_order", "seed", "ztg_form",
            "ztg_as_printed")

_MODEL_ERRORS = (DomainError, GeometryError, StructuralError)


class _Doc:
    """Parsed YAML plus a map from key paths to 1-based line numbers."""

    def __init__(self, text: str, source: str = "<string>"):
        try:
            node = yaml.compose(text, Loader=yaml.SafeLoader)
        except yaml.MarkedYAMLError as exc:
            line = exc.problem_mark.line + 1 if exc.problem_mark else None
            raise ConfigError(f"{source}: malformed document: {exc.problem}", line=line) from None
        self.source = source
        self.prefix: tuple = ()
        self.lines: dict[tuple, int] = {}
        if node is None:
            self.data = {}
            return
        self._index(node, ())
        self.data = yaml.SafeLoader("").construct_document(node)

    def _index(self, node, path):
        self.lines[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            for key, value in node.value:
                self.lines[path + (key.value,)] = key.start_mark.line + 1
                self._index(value, path + (key.value,))
        elif isinstance(node, yaml.SequenceNode):
            for i, value in enumerate(node.value):
                self._index(value, path + (i,))

    def error(self, message, path) -> ConfigError:
        path = self.prefix + tuple(path)
        key = ".".join(str(p) for p in path) or None
        line = None
        for n in range(len(path), -1, -1):
            if path[:n] in self.lines:
                line = self.lines[path[:n]]
                break
        return ConfigError(f"{self.source}: {message}", key=key, line=line)


def _mapping(doc, value, path, allowed, required=()):
    if not isinstance(value, dict):
        raise doc.error("expected a mapping", path)
    for key in value:
        if key not in allowed:
            raise doc.error(f"unknown key (allowed: {', '.join(allowed)})", path + (key,))
    for key in required:
        if key not in value:
            raise doc.error("missing required key", path + (key,))
    return value


def _number(doc, value, path, positive=False):
    # YAML 1.1 resolves "3e9" (no dot) to a string; accept it as a number.
    if isinstance(value, str):
        try:
            value = float(value)
        except ValueError:
            pass
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise doc.error(f"expected a number, got {value!r}", path)
    value = float(value)
    if not math.isfinite(value) or (positive and value <= 0):
        raise doc.error(f"expected a {'positive ' if positive else ''}finite number, got {value!r}",
                        path)
    return value


def _complex(doc, value, path):
    if isinstance(value, dict):
        _mapping(doc, value, path, ("re", "im"), ("re",))
        return complex(_number(doc, value["re"], path + ("re",)),
                       _number(doc, value.get("im", 0.0), path + ("im",)))
    return complex(_number(doc, value, path))


def _port_impedances(doc, data, key, n):
    path = (key,)
    if key not in data:
        return (50.0 + 0j,)
    value = data[key]
    if isinstance(value, list):
        if len(value) not in (1, n):
            raise doc.error(f"expected 1 or {n} entries, got {len(value)}", path)
        return tuple(_complex(doc, v, path + (i,)) for i, v in enumerate(value))
    return (_complex(doc, value, path),)


def _dipoles(doc, data, key, wavelength, ris=False):
    path = (key,)
    items = data.get(key, [])
    if not isinstance(items, list):
        raise doc.error("expected a list of dipoles", path)
    dipoles, terms = [], []
    role = {"transmitters": Role.TRANSMITTER, "receivers": Role.RECEIVER, "ris": Role.RIS}[key]
    for i, item in enumerate(items):
        p = path + (i,)
        _mapping(doc, item, p, RIS_KEYS if ris else DIPOLE_KEYS, ("center",))
        center = item["center"]
        if not isinstance(center, list) or len(center) not in (2, 3):
            raise doc.error("center must be [x, y] or [x, y, z]", p + ("center",))
        xyz = [_number(doc, c, p + ("center", j)) for j, c in enumerate(center)]
        if len(xyz) == 2:
            xyz.append(0.0)
        length = _number(doc, item.get("length", wavelength / 2), p + ("length",), positive=True)
        radius = _number(doc, item.get("radius", wavelength / 1000), p + ("radius",),
                         positive=True)
        try:
            dipoles.append(Dipole(tuple(xyz), length, radius, role))
        except _MODEL_ERRORS as exc:
            raise doc.error(str(exc), p) from None
        if ris:
            terms.append(complex(_number(doc, item.get("termination_re", 0.2), p + ("termination_re",)),
                                 _number(doc, item.get("termination_im", 0.0), p + ("termination_im",))))
    return tuple(dipoles), tuple(terms)


def _scenario_from(doc: _Doc, data, prefix=()) -> Scenario:
    sub = _Doc.__new__(_Doc)
    sub.source, sub.data, sub.lines = doc.source, data, doc.lines
    sub.prefix = doc.prefix + tuple(prefix)
    doc = sub
    _mapping(doc, data, (), SCENARIO_KEYS, ("frequency_hz", "transmitters", "receivers"))
    try:
        params = free_space_params(_number(doc, data["frequency_hz"], ("frequency_hz",),
                                           positive=True))
    except _MODEL_ERRORS as exc:
        raise doc.error(str(exc), ("frequency_hz",)) from None
    lam = params.wavelength
    tx, _ = _dipoles(doc, data, "transmitters", lam)
    rx, _ = _dipoles(doc, data, "receivers", lam)
    ris, terms = _dipoles(doc, data, "ris", lam, ris=True)
    blocked = data.get("direct_path_blocked", True)
    if not isinstance(blocked, bool):
        raise doc.error("expected true or false", ("direct_path_blocked",))
    try:
        return Scenario(
            params=params, transmitters=tx, ris=ris, receivers=rx,
            z_generator=_port_impedances(doc, data, "z_generator_ohm", len(tx)),
            z_load=_port_impedances(doc, data, "z_load_ohm", len(rx)),
            z_ris=terms, direct_path_blocked=blocked,
        )
    except _MODEL_ERRORS as exc:
        raise doc.error(str(exc), ()) from None


def load_scenario(text: str, source: str = "<string>") -> Scenario:
    """Parse a scenario document.

    Raises ConfigError naming the offending key and line.
    """
    doc = _Doc(text, source)
    return _scenario_from(doc, doc.data)


def read_scenario(path) -> Scenario:
    path = Path(path)
    return load_scenario(path.read_text(), str(path))


def _plain(x: float):
    return int(x) if float(x).is_integer() and abs(x) < 2 ** 53 else float(x)


def _impedance_out(values):
    def one(z):
        return _plain(z.real) if z.imag == 0 else {"re": _plain(z.real), "im": _plain(z.imag)}

    if len(set(values)) == 1:
        return one(values[0])
    return [one(z) for z in values]


def scenario_to_dict(scenario: Scenario) -> dict:
    """Plain-data form of a scenario, as written by :func:`dump_scenario`."""
    if scenario.objects:
        raise ConfigError("scenarios with environment objects cannot be serialized")

    def dip(d: Dipole, term=None):
        out = {"center": [float(c) for c in d.center], "length": float(d.length),
               "radius": float(d.radius)}
        if term is not None:
            out["termination_re"] = float(term.real)
            out["termination_im"] = float(term.imag)
        return out

    return {
        "frequency_hz": float(scenario.params.frequency),
        "transmitters": [dip(d) for d in scenario.transmitters],
        "receivers": [dip(d) for d in scenario.receivers],
        "ris": [dip(d, z) for d, z in zip(scenario.ris, scenario.z_ris)],
        "z_generator_ohm": _impedance_out(scenario.z_generator),
        "z_load_ohm": _impedance_out(scenario.z_load),
        "direct_path_blocked": scenario.direct_path_blocked,
    }


def dump_scenario(scenario: Scenario) -> str:
    """YAML text that :func:`load_scenario` parses back to an equal scenario."""
    return yaml.safe_dump(scenario_to_dict(scenario), sort_keys=False, default_flow_style=None)


@dataclass(frozen=True)
class RunConfig:
    """Solver settings read from a run configuration file."""

    scenario: Scenario | None = None
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)
    mesh: MeshConfig = field(default_factory=MeshConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    ztg_form: ZtgForm = ZtgForm.SOURCE


def _int(doc, value, path, minimum):
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise doc.error(f"expected an integer >= {minimum}, got {value!r}", path)
    return value


def _choice(doc, value, path, enum_type):
    try:
        return enum_type(str(value).lower())
    except ValueError:
        allowed = ", ".join(e.value for e in enum_type)
        raise doc.error(f"expected one of {allowed}, got {value!r}", path) from None


def load_run_config(text: str, source: str = "<string>", base_dir=None) -> RunConfig:
    """Parse a run configuration; see the module docstring for the layout."""
    doc = _Doc(text, source)
    data = _mapping(doc, doc.data, (), RUN_KEYS)

    scenario = None
    if "scenario" in data:
        value = data["scenario"]
        if isinstance(value, str):
            path = Path(base_dir or ".") / value
            try:
                scenario = read_scenario(path)
            except OSError as exc:
                raise doc.error(f"cannot read scenario file: {exc.strerror}", ("scenario",)) from None
        else:
            scenario = _scenario_from(doc, value, ("scenario",))

    def get(key, convert, default, *args):
        return convert(doc, data[key], (key,), *args) if key in data else default

    def build(key, ctor, **kwargs):
        try:
            return ctor(**kwargs)
        except _MODEL_ERRORS as exc:
            raise doc.error(str(exc), (key,) if key in data else ()) from None

    quad_default = QuadratureSpec()
    quad = build("quad_order", QuadratureSpec,
                 order=get("quad_order", _int, quad_default.order, 2),
                 panels=get("quad_panels", _int, quad_default.panels, 1))

    refinement = data.get("refinement_check", False)
    if not isinstance(refinement, bool):
        raise doc.error("expected true or false", ("refinement_check",))
    mesh = build("segments_per_halfwave", MeshConfig,
                 segments_per_halfwave=get("segments_per_halfwave", _int, 21, 1),
                 refinement_check=refinement)

    seed = data.get("seed")
    if seed is not None:
        seed = _int(doc, seed, ("seed",), 0)
    initial = get("initial_termination_ohm", _complex, 0.2 + 0j)
    opt = build("constraint", OptimizerConfig,
                constraint=get("constraint", _choice, Constraint.REACTIVE_ONLY, Constraint),
                max_sweeps=get("max_sweeps", _int, 50, 0),
                tolerance=get("tolerance", _number, 1e-6, True),
                initial_termination=initial,
                coordinate_order=get("coordinate_order", _choice, CoordinateOrder.SEQUENTIAL,
                                     CoordinateOrder),
                seed=seed)

    form = get("ztg_form", _choice, None, ZtgForm)
    if "ztg_as_printed" in data:
        printed = data["ztg_as_printed"]
        if not isinstance(printed, bool):
            raise doc.error("expected true or false", ("ztg_as_printed",))
        if form is not None and (form is ZtgForm.PRINTED) != printed:
            raise doc.error("conflicts with ztg_form", ("ztg_as_printed",))
        if printed:
            form = ZtgForm.PRINTED
    return RunConfig(scenario, quad, mesh, opt, form or ZtgForm.SOURCE)


def read_run_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return load_run_config(text, str(path), base_dir=os.path.dirname(os.path.abspath(path)))
