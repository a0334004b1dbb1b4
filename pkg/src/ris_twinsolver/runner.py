"""Experiment orchestration: size sweeps, both engines, CSV artifacts.

Each (RIS size, engine) combination builds its system matrix once and
yields an unoptimized row (scenario terminations) and, if requested, an
optimized row started from those same terminations.  Failures are recorded
per combination and never abort the sweep.

Files written to ``out_dir``:

    results.csv                 one row per (size, engine, optimized)
    terminations/*.csv          re, im of the terminations behind each row
    errors.csv                  failed combinations
    validation.csv              cross-engine gates and diagnostics
    impedance_discrepancy.csv   per-block analytical vs PEEC statistics
    report.txt                  human-readable summary
    gain_vs_size_unoptimized.csv        gain vs RIS size per engine
    gain_vs_size_optimized.csv          same, optimized terminations
"""
from __future__ import annotations

import csv
import io
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analytical import QuadratureSpec, assemble_zsys_analytical
from .channel import Engine, ZtgForm, end_to_end_channel
from .core import ROLE_ORDER, BlockImpedanceMatrix, Scenario, build_reference_scenario
from .exceptions import ConfigError, TwinSolverError
from .optimizer import OptimizerConfig, optimize_terminations
from .peec import MeshConfig, extract_zsys_peec

log = logging.getLogger(__name__)

#: Cross-engine gain gate (dB) and the largest RIS size it applies to.
ENGINE_GATE_DB = 3.0
ENGINE_GATE_MAX_SIZE = 16
REFERENCE_SIZES = (4, 16, 64)
THREADS_ENV = "RIS_TWINSOLVER_THREADS"

RESULT_COLUMNS = ("ris_size", "engine", "optimized", "gain_db", "runtime_ms", "terminations_file")


@dataclass(frozen=True)
class ExperimentSpec:
    """What to run and where to write it.

    ``scenario`` of None selects the built-in reference link, rebuilt for
    every entry of ``ris_sizes`` with ``optimizer.initial_termination`` on
    all elements.  A custom scenario fixes the size to its own RIS count.
    """

    out_dir: Path
    ris_sizes: tuple[int, ...] = REFERENCE_SIZES
    engines: tuple[Engine, ...] = (Engine.ANALYTICAL, Engine.PEEC)
    optimize: bool = False
    scenario: Scenario | None = None
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)
    mesh: MeshConfig = field(default_factory=MeshConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    ztg_form: ZtgForm = ZtgForm.SOURCE
    timing: bool = False
    write_results: bool = True

    def __post_init__(self):
        object.__setattr__(self, "out_dir", Path(self.out_dir))
        engines = tuple(dict.fromkeys(Engine(e) for e in self.engines))
        if not engines:
            raise ConfigError("at least one engine must be selected", key="engine")
        object.__setattr__(self, "engines", tuple(e for e in Engine if e in engines))
        sizes = self.ris_sizes
        if self.scenario is not None and not sizes:
            sizes = (len(self.scenario.ris),)
        sizes = tuple(dict.fromkeys(int(n) for n in sizes))
        if not sizes:
            raise ConfigError("ris_sizes must not be empty", key="sizes")
        if any(n < 1 for n in sizes):
            raise ConfigError("RIS sizes must be positive", key="sizes")
        if self.scenario is not None and sizes != (len(self.scenario.ris),):
            raise ConfigError(f"the configured scenario has {len(self.scenario.ris)} RIS elements; "
                              f"requested sizes {list(sizes)}", key="sizes")
        object.__setattr__(self, "ris_sizes", sizes)
        object.__setattr__(self, "ztg_form", ZtgForm(self.ztg_form))

    def scenario_for(self, n_ris: int) -> Scenario:
        if self.scenario is not None:
            return self.scenario
        return build_reference_scenario(n_ris, termination=self.optimizer.initial_termination)


@dataclass
class GainEntry:
    ris_size: int
    engine: Engine
    optimized: bool
    gain_db: float | None = None
    runtime_ms: float | None = None
    terminations: np.ndarray | None = None
    error: str | None = None

    @property
    def label(self) -> str:
        return f"n{self.ris_size}_{self.engine.value}_{'optimized' if self.optimized else 'unoptimized'}"


@dataclass(frozen=True)
class Gate:
    """One validation check; ``passed`` is None for diagnostics."""

    name: str
    ris_size: str
    value: float
    threshold: str
    passed: bool | None


@dataclass
class ValidationReport:
    spec: ExperimentSpec
    entries: list[GainEntry]
    gates: list[Gate]
    discrepancies: list[dict]
    notes: list[str]

    def gain(self, ris_size, engine, optimized) -> float | None:
        for e in self.entries:
            if (e.ris_size, e.engine, e.optimized) == (ris_size, Engine(engine), optimized):
                return e.gain_db
        return None

    @property
    def errors(self) -> list[GainEntry]:
        return [e for e in self.entries if e.error is not None]

    @property
    def passed(self) -> bool:
        """True iff every combination succeeded and every gate passed."""
        return not self.errors and all(g.passed is not False for g in self.gates)


def worker_count() -> int:
    """Worker threads allowed by RIS_TWINSOLVER_THREADS (default 1)."""
    value = os.environ.get(THREADS_ENV, "").strip()
    if not value:
        return 1
    try:
        n = int(value)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {value!r}") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {value!r}")
    return n


def build_zsys(scenario: Scenario, engine: Engine, spec: ExperimentSpec,
               mesh: MeshConfig | None = None) -> BlockImpedanceMatrix:
    if engine is Engine.PEEC:
        return extract_zsys_peec(scenario, mesh or spec.mesh)
    return assemble_zsys_analytical(scenario, spec.quad)


@dataclass
class _Combination:
    ris_size: int
    engine: Engine
    zsys: BlockImpedanceMatrix | None
    rows: list[GainEntry]


def _describe(exc: Exception) -> str:
    return f"{type(exc).__name__}: {exc}"


def _run_combination(spec: ExperimentSpec, n_ris: int, engine: Engine) -> _Combination:
    unopt = GainEntry(n_ris, engine, False)
    rows = [unopt]
    opt = GainEntry(n_ris, engine, True) if spec.optimize else None
    if opt is not None:
        rows.append(opt)
    zsys = None
    try:
        scenario = spec.scenario_for(n_ris)
        t0 = time.perf_counter()
        zsys = build_zsys(scenario, engine, spec)
        t_build = time.perf_counter() - t0
    except (TwinSolverError, ArithmeticError, ValueError) as exc:
        log.error("n=%d %s: system matrix failed: %s", n_ris, engine.value, exc)
        for row in rows:
            row.error = _describe(exc)
        return _Combination(n_ris, engine, None, rows)

    z0 = scenario.z_ris_vector()
    try:
        t0 = time.perf_counter()
        res = end_to_end_channel(zsys, scenario.z_generator, scenario.z_load, z0, engine,
                                 spec.ztg_form)
        unopt.gain_db = res.gain_db
        unopt.runtime_ms = 1e3 * (t_build + time.perf_counter() - t0)
        unopt.terminations = z0
    except (TwinSolverError, ArithmeticError, ValueError) as exc:
        unopt.error = _describe(exc)
    if opt is not None:
        try:
            t0 = time.perf_counter()
            res = optimize_terminations(zsys, scenario.z_generator, scenario.z_load, spec.optimizer,
                                        initial=z0, engine=engine, ztg_form=spec.ztg_form)
            opt.gain_db = res.channel.gain_db
            opt.runtime_ms = 1e3 * (t_build + time.perf_counter() - t0)
            opt.terminations = res.terminations
            log.info("n=%d %s: %d sweeps, %.3f dB", n_ris, engine.value, res.sweeps, opt.gain_db)
        except (TwinSolverError, ArithmeticError, ValueError) as exc:
            opt.error = _describe(exc)
    return _Combination(n_ris, engine, zsys, rows)


def _block_discrepancies(n_ris, za: BlockImpedanceMatrix, zp: BlockImpedanceMatrix):
    out = []
    roles = [r for r in ROLE_ORDER if za.sizes[r]]
    for rows in roles:
        for cols in roles:
            a, p = za.block(rows, cols), zp.block(rows, cols)
            diff = np.abs(a - p)
            ref = np.linalg.norm(p)
            rel = np.linalg.norm(a - p) / ref if ref > 0 else (0.0 if not diff.any() else math.inf)
            out.append({
                "ris_size": n_ris,
                "block": f"{rows.value}{cols.value}",
                "entries": a.size,
                "max_abs_diff_ohm": float(diff.max()),
                "mean_abs_diff_ohm": float(diff.mean()),
                "rel_frobenius_diff": float(rel),
            })
    return out


def _sign(x):
    return (x > 0) - (x < 0)


def _gates(spec: ExperimentSpec, entries, zsys) -> list[Gate]:
    gates = []

    def gain(n, engine, optimized):
        for e in entries:
            if (e.ris_size, e.engine, e.optimized) == (n, engine, optimized):
                return e.gain_db
        return None

    flags = (False, True) if spec.optimize else (False,)
    both = len(spec.engines) == 2
    a, p = Engine.ANALYTICAL, Engine.PEEC
    for optimized in flags:
        tag = "optimized" if optimized else "unoptimized"
        if both:
            for n in spec.ris_sizes:
                ga, gp = gain(n, a, optimized), gain(n, p, optimized)
                if ga is None or gp is None:
                    continue
                delta = abs(ga - gp)
                if n <= ENGINE_GATE_MAX_SIZE:
                    gates.append(Gate(f"engine_delta_{tag}", str(n), delta,
                                      f"<= {ENGINE_GATE_DB:g} dB", delta <= ENGINE_GATE_DB))
                else:
                    gates.append(Gate(f"engine_delta_{tag}", str(n), delta, "", None))
            sizes = [n for n in spec.ris_sizes
                     if gain(n, a, optimized) is not None and gain(n, p, optimized) is not None]
            if len(sizes) >= 2:
                same = all(
                    _sign(gain(m, a, optimized) - gain(n, a, optimized))
                    == _sign(gain(m, p, optimized) - gain(n, p, optimized))
                    for i, m in enumerate(sizes) for n in sizes[i + 1:])
                gates.append(Gate(f"trend_order_{tag}", "/".join(map(str, sizes)),
                                  float(same), "identical ordering", same))
    if spec.optimize:
        for engine in spec.engines:
            for n in spec.ris_sizes:
                g0, g1 = gain(n, engine, False), gain(n, engine, True)
                if g0 is None or g1 is None:
                    continue
                gates.append(Gate(f"optimized_ge_unoptimized_{engine.value}", str(n), g1 - g0,
                                  ">= 0 dB", g1 >= g0))
        if both:
            # Analytical-optimal terminations evaluated on the PEEC matrix.
            for n in spec.ris_sizes:
                zp = zsys.get((n, p))
                row = next((e for e in entries if (e.ris_size, e.engine, e.optimized) == (n, a, True)),
                           None)
                if zp is None or row is None or row.terminations is None:
                    continue
                scenario = spec.scenario_for(n)
                try:
                    res = end_to_end_channel(zp, scenario.z_generator, scenario.z_load,
                                             row.terminations, p, spec.ztg_form)
                    gates.append(Gate("transfer_gain_peec_db", str(n), res.gain_db, "", None))
                except (TwinSolverError, ArithmeticError) as exc:
                    log.warning("transfer diagnostic failed at n=%d: %s", n, exc)
    return gates


def _refinement(spec: ExperimentSpec, zsys) -> list[Gate]:
    out = []
    refined_cfg = spec.mesh.refined()
    for n in spec.ris_sizes:
        z1 = zsys.get((n, Engine.PEEC))
        if z1 is None:
            continue
        scenario = spec.scenario_for(n)
        try:
            z2 = build_zsys(scenario, Engine.PEEC, spec, refined_cfg)
            g1, g2 = (end_to_end_channel(z, scenario.z_generator, scenario.z_load,
                                         scenario.z_ris_vector(), ztg_form=spec.ztg_form).gain_db
                      for z in (z1, z2))
        except (TwinSolverError, ArithmeticError) as exc:
            log.warning("refinement check failed at n=%d: %s", n, exc)
            continue
        change = np.linalg.norm(z2.matrix - z1.matrix) / np.linalg.norm(z2.matrix)
        out.append(Gate("refinement_zsys_rel_change", str(n), float(change), "", None))
        out.append(Gate("refinement_gain_change_db", str(n), abs(g2 - g1), "", None))
    return out


def _notes(spec: ExperimentSpec) -> list[str]:
    form = {
        ZtgForm.SOURCE: "(Z_TT + Z_G)^-1, load voltage per generator EMF",
        ZtgForm.NORMALIZED: "(I + Z_TT Z_G^-1)^-1",
        ZtgForm.PRINTED: "(I + Z_TT Z_G)^-1, literal form; not dimensionally consistent",
    }[spec.ztg_form]
    source = "built-in reference link" if spec.scenario is None else "configured scenario"
    return [
        "x-axis of the gain series: number of RIS elements (gain vs RIS size).",
        "gain metric: 10 log10 ||H_E2E||_F^2 (dB).",
        f"scenario: {source}; engines: {', '.join(e.value for e in spec.engines)}.",
        f"transmitter factor Z_TG = {form}.",
        f"optimizer: {spec.optimizer.constraint.value}, started from the scenario terminations; "
        "each engine optimizes on its own system matrix.",
        f"cross-engine gate: |delta gain| <= {ENGINE_GATE_DB:g} dB for RIS sizes <= "
        f"{ENGINE_GATE_MAX_SIZE}; larger sizes are reported only.",
    ]


def run_experiment(spec: ExperimentSpec) -> ValidationReport:
    """Run every requested combination, write the CSV artifacts, return the report."""
    jobs = [(n, e) for n in spec.ris_sizes for e in spec.engines]
    workers = min(worker_count(), len(jobs))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            combos = list(pool.map(lambda job: _run_combination(spec, *job), jobs))
    else:
        combos = [_run_combination(spec, *job) for job in jobs]

    entries = [row for c in combos for row in c.rows]
    zsys = {(c.ris_size, c.engine): c.zsys for c in combos if c.zsys is not None}
    discrepancies = []
    for n in spec.ris_sizes:
        za, zp = zsys.get((n, Engine.ANALYTICAL)), zsys.get((n, Engine.PEEC))
        if za is not None and zp is not None:
            discrepancies.extend(_block_discrepancies(n, za, zp))
    gates = _gates(spec, entries, zsys)
    if spec.mesh.refinement_check:
        gates.extend(_refinement(spec, zsys))
    report = ValidationReport(spec, entries, gates, discrepancies, _notes(spec))
    write_report(report)
    return report


def _fmt(x, digits=6) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if math.isinf(x):
        return "-inf" if x < 0 else "inf"
    return f"{x:.{digits}f}"


def _write_csv(path: Path, header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    path.write_text(buf.getvalue())


def write_terminations(path: Path, terminations) -> None:
    """Two-column (re, im) CSV in ohm, full double precision."""
    z = np.asarray(terminations, dtype=complex)
    _write_csv(path, ("re", "im"), [(repr(float(v.real)), repr(float(v.imag))) for v in z])


def read_terminations(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return np.array([complex(float(r["re"]), float(r["im"])) for r in rows])


def write_report(report: ValidationReport) -> list[Path]:
    spec = report.spec
    out = spec.out_dir
    out.mkdir(parents=True, exist_ok=True)
    written = []

    if spec.write_results:
        tdir = out / "terminations"
        tdir.mkdir(exist_ok=True)
        rows = []
        for e in report.entries:
            tfile = ""
            if e.terminations is not None and e.error is None:
                tfile = f"terminations/{e.label}.csv"
                write_terminations(out / tfile, e.terminations)
            runtime = _fmt(e.runtime_ms, 1) if spec.timing else ""
            rows.append((e.ris_size, e.engine.value, _fmt(e.optimized), _fmt(e.gain_db),
                         runtime, tfile))
        _write_csv(out / "results.csv", RESULT_COLUMNS, rows)
        written.append(out / "results.csv")
        written.extend(emit_plot_data(report))

    _write_csv(out / "errors.csv", ("ris_size", "engine", "optimized", "error"),
               [(e.ris_size, e.engine.value, _fmt(e.optimized), e.error) for e in report.errors])
    _write_csv(out / "validation.csv", ("check", "ris_size", "value", "threshold", "passed"),
               [(g.name, g.ris_size, _fmt(g.value), g.threshold, _fmt(g.passed))
                for g in report.gates])
    keys = ("ris_size", "block", "entries", "max_abs_diff_ohm", "mean_abs_diff_ohm",
            "rel_frobenius_diff")
    _write_csv(out / "impedance_discrepancy.csv", keys,
               [tuple(_fmt(d[k]) if isinstance(d[k], float) else d[k] for k in keys)
                for d in report.discrepancies])
    (out / "report.txt").write_text(format_report(report))
    written += [out / n for n in ("errors.csv", "validation.csv", "impedance_discrepancy.csv",
                                  "report.txt")]
    return written


def format_report(report: ValidationReport) -> str:
    lines = ["# RIS channel gain: analytical vs PEEC"]
    lines += [f"# {n}" for n in report.notes]
    lines.append("")
    lines.append(f"{'size':>6} {'engine':<11} {'optimized':<10} {'gain_db':>12}")
    for e in report.entries:
        gain = _fmt(e.gain_db, 3) if e.error is None else f"ERROR {e.error}"
        lines.append(f"{e.ris_size:>6} {e.engine.value:<11} {_fmt(e.optimized):<10} {gain:>12}")
    lines.append("")
    for g in report.gates:
        status = {True: "PASS", False: "FAIL", None: "info"}[g.passed]
        thr = f" ({g.threshold})" if g.threshold else ""
        lines.append(f"[{status}] {g.name} n={g.ris_size}: {_fmt(g.value, 4)}{thr}")
    if report.discrepancies:
        lines.append("")
        lines.append("worst per-block relative discrepancy (Frobenius):")
        for n in report.spec.ris_sizes:
            rows = [d for d in report.discrepancies if d["ris_size"] == n]
            if rows:
                worst = max(rows, key=lambda d: d["rel_frobenius_diff"])
                lines.append(f"  n={n}: block {worst['block']} {worst['rel_frobenius_diff']:.4f}")
    lines.append("")
    lines.append(f"overall: {'PASS' if report.passed else 'FAIL'}")
    return "\n".join(lines) + "\n"


def emit_plot_data(report: ValidationReport) -> list[Path]:
    """Gain-vs-size series: gain_vs_size_unoptimized.csv and gain_vs_size_optimized.csv.

    One row per requested size, one column per engine; cells without a
    result are left empty.
    """
    out = report.spec.out_dir
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, optimized in (("gain_vs_size_unoptimized.csv", False), ("gain_vs_size_optimized.csv", True)):
        rows = [(n,) + tuple(_fmt(report.gain(n, e, optimized)) for e in Engine)
                for n in report.spec.ris_sizes]
        _write_csv(out / name, ("ris_size",) + tuple(f"{e.value}_gain_db" for e in Engine), rows)
        paths.append(out / name)
    return paths
