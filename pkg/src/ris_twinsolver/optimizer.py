"""Block coordinate ascent over the RIS terminations.

Only one diagonal entry of Z_SS + diag(z) changes per step, so the cached
scattering inverse W is refreshed by a Sherman-Morrison update and the
channel becomes a fractional-linear function of the new termination:

    H(z_n + d) = H + d / (1 + u d) * (B w_n)(w_n^T C),     u = W[n, n]

Its squared Frobenius norm is a ratio of quadratics in d, maximized in
closed form along the reactance axis.  For passive terminations that is
also the maximum over the closed right half-plane: the Möbius map sends
the half-plane onto a disk in t = d / (1 + u d), and ||H + t M||^2 is
convex in t, so the maximum sits on the boundary (Re z = 0).
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .channel import (ChannelFactors, ChannelResult, Engine, ZtgForm, channel_factors,
                      end_to_end_channel, scattering_inverse)
from .core import BlockImpedanceMatrix, Scenario
from .exceptions import DomainError, SingularUpdateError

log = logging.getLogger(__name__)

#: Relative guard on the Sherman-Morrison denominator.
SM_GUARD = 1e-12


class Constraint(enum.Enum):
    REACTIVE_ONLY = "reactive_only"
    PASSIVE_COMPLEX = "passive_complex"
    UNCONSTRAINED = "unconstrained"


class CoordinateOrder(enum.Enum):
    SEQUENTIAL = "sequential"
    RANDOM_PERMUTATION = "random_permutation"


@dataclass(frozen=True)
class OptimizerConfig:
    """Settings of the coordinate ascent.

    ``max_reactance`` bounds the reactance search (ohm); the open-circuit
    limit is approached through it.  Steps that would push the 1-norm
    condition number of Z_SS + diag(z) above ``max_condition`` are
    rejected in favour of the next-best candidate.
    """

    constraint: Constraint = Constraint.REACTIVE_ONLY
    max_sweeps: int = 50
    tolerance: float = 1e-6
    initial_termination: complex = 0.2
    coordinate_order: CoordinateOrder = CoordinateOrder.SEQUENTIAL
    seed: int | None = None
    max_reactance: float = 1e6
    max_condition: float = 1e8

    def __post_init__(self):
        object.__setattr__(self, "constraint", Constraint(self.constraint))
        object.__setattr__(self, "coordinate_order", CoordinateOrder(self.coordinate_order))
        object.__setattr__(self, "initial_termination", complex(self.initial_termination))
        if self.constraint is Constraint.UNCONSTRAINED:
            # t = d / (1 + u d) reaches infinity at d = -1/u: an active
            # termination cancelling the element's driving-point impedance.
            raise DomainError("unconstrained complex terminations make the gain unbounded; "
                              "use reactive_only or passive_complex")
        if not self.tolerance > 0:
            raise DomainError("tolerance must be positive")
        if int(self.max_sweeps) != self.max_sweeps or self.max_sweeps < 0:
            raise DomainError("max_sweeps must be a non-negative integer")
        if not self.max_reactance > 0:
            raise DomainError("max_reactance must be positive")
        if not self.max_condition > 1:
            raise DomainError("max_condition must exceed 1")


@dataclass
class OptimizerState:
    """Mutable iterate of the coordinate ascent."""

    terminations: np.ndarray
    z_sca_inverse: np.ndarray
    h: np.ndarray
    objective: float
    iteration: int = 0
    history: list = field(default_factory=list)


def sherman_morrison_update(inv, index: int, delta: complex) -> np.ndarray:
    """Inverse of ``M + delta e_n e_n^T`` given ``inv = M^-1``, in O(N^2).

    Raises SingularUpdateError if ``1 + delta inv[n, n]`` vanishes.
    """
    inv = np.asarray(inv, dtype=complex)
    if delta == 0:
        return inv.copy()
    du = delta * inv[index, index]
    denom = 1.0 + du
    if abs(denom) <= SM_GUARD * max(abs(du), 1.0):
        raise SingularUpdateError(f"rank-one update of index {index} is singular")
    return inv - (delta / denom) * np.outer(inv[:, index], inv[index, :])


def init_state(factors: ChannelFactors, terminations) -> OptimizerState:
    z = np.array(terminations, dtype=complex)
    w = scattering_inverse(factors.z_ss, 0.0, z)
    h = factors.channel(w)
    obj = float(np.sum(np.abs(h) ** 2))
    return OptimizerState(terminations=z, z_sca_inverse=w, h=h, objective=obj,
                          history=[(0, obj)])


@dataclass(frozen=True)
class CoordinateObjective:
    """||H||_F^2 as a function of one termination.

    With d = z_new - z_current,

        f(d) = (alpha + 2 Re(beta d) + gamma |d|^2) / |1 + u d|^2
    """

    index: int
    z_current: complex
    alpha: float
    beta: complex
    gamma: float
    u: complex

    def __call__(self, z_new):
        d = np.asarray(z_new, dtype=complex) - self.z_current
        num = self.alpha + 2.0 * np.real(self.beta * d) + self.gamma * np.abs(d) ** 2
        return num / np.abs(1.0 + self.u * d) ** 2

    def reactance_polynomials(self):
        """Coefficients (c0, c1, c2) of numerator and denominator in x, z_new = jx."""
        z0, b, u = self.z_current, self.beta, self.u
        num = (self.alpha - 2.0 * (b * z0).real + self.gamma * abs(z0) ** 2,
               -2.0 * b.imag - 2.0 * self.gamma * z0.imag,
               self.gamma)
        p = 1.0 - u * z0
        den = (abs(p) ** 2, -2.0 * (u * p.conjugate()).imag, abs(u) ** 2)
        return num, den

    def stationary_reactances(self) -> list[float]:
        """Real roots of d/dx [num(x) / den(x)] = 0."""
        (n0, n1, n2), (d0, d1, d2) = self.reactance_polynomials()
        q0 = n1 * d0 - n0 * d1
        q1 = 2.0 * (n2 * d0 - n0 * d2)
        q2 = n2 * d1 - n1 * d2
        scale = max(abs(q0), abs(q1), abs(q2))
        if scale == 0:
            return []
        q0, q1, q2 = q0 / scale, q1 / scale, q2 / scale
        if abs(q2) < 1e-14:
            return [-q0 / q1] if abs(q1) > 1e-14 else []
        disc = q1 * q1 - 4.0 * q2 * q0
        if disc < 0:
            return []
        root = math.sqrt(disc)
        # numerically stable pair
        qq = -0.5 * (q1 + math.copysign(root, q1))
        roots = [qq / q2]
        if qq != 0:
            roots.append(q0 / qq)
        return roots

    def candidates(self, constraint: Constraint, max_reactance: float = 1e6):
        """Admissible stationary points and bounds, best first.

        Returns a list of ``(z, value)``; ties are ordered by smaller |z|.
        """
        constraint = Constraint(constraint)
        zs = [1j * x for x in self.stationary_reactances() if abs(x) <= max_reactance]
        zs += [1j * max_reactance, -1j * max_reactance]
        z0 = self.z_current
        if constraint is Constraint.PASSIVE_COMPLEX and z0.real >= 0:
            zs.append(z0)
        elif constraint is Constraint.REACTIVE_ONLY and z0.real == 0:
            zs.append(z0)
        scored = [(complex(z), float(self(z))) for z in zs]
        best = max(v for _, v in scored)
        tol = 1e-12 * abs(best)
        return sorted(scored, key=lambda zv: (-_round_to(zv[1], tol), abs(zv[0]), zv[0].imag))

    def maximize(self, constraint: Constraint, max_reactance: float = 1e6) -> tuple[complex, float]:
        """Best admissible termination and its objective value."""
        return self.candidates(constraint, max_reactance)[0]


def _round_to(value: float, tol: float) -> float:
    return round(value / tol) * tol if tol > 0 else value


def coordinate_objective(state: OptimizerState, factors: ChannelFactors,
                         index: int) -> CoordinateObjective:
    """Exact coefficients of the objective in termination ``index``."""
    w = state.z_sca_inverse
    b = factors.left @ w[:, index]
    c = w[index, :] @ factors.right
    m = np.outer(b, c)
    alpha = float(np.sum(np.abs(state.h) ** 2))
    g = complex(np.vdot(state.h, m))
    u = complex(w[index, index])
    mm = float(np.sum(np.abs(m) ** 2))
    return CoordinateObjective(
        index=index,
        z_current=complex(state.terminations[index]),
        alpha=alpha,
        beta=alpha * u + g,
        gamma=alpha * abs(u) ** 2 + 2.0 * (g * u.conjugate()).real + mm,
        u=u,
    )


def _condition(k, w) -> float:
    return float(np.linalg.norm(k, 1) * np.linalg.norm(w, 1))


def optimize_coordinate(state: OptimizerState, factors: ChannelFactors, index: int,
                        config: OptimizerConfig) -> OptimizerState:
    """Replace termination ``index`` by its best admissible value.

    Updates ``state`` in place and returns it.  Candidates whose update is
    singular or too ill-conditioned are skipped; if none remains the
    termination is left unchanged.
    """
    objective = coordinate_objective(state, factors, index)
    state.iteration += 1
    z_old = state.terminations[index]
    for z_new, _ in objective.candidates(config.constraint, config.max_reactance):
        delta = z_new - z_old
        if delta == 0:
            break
        try:
            w = sherman_morrison_update(state.z_sca_inverse, index, delta)
        except SingularUpdateError:
            log.debug("coordinate %d: singular update for z = %s", index, z_new)
            continue
        z = state.terminations.copy()
        z[index] = z_new
        if _condition(factors.z_ss + np.diag(z), w) > config.max_condition:
            log.debug("coordinate %d: z = %s rejected by conditioning guard", index, z_new)
            continue
        h = factors.channel(w)
        state.z_sca_inverse = w
        state.terminations = z
        state.h = h
        state.objective = float(np.sum(np.abs(h) ** 2))
        break
    else:
        log.warning("coordinate %d left unchanged: no admissible update", index)
    state.history.append((state.iteration, state.objective))
    return state


class OptimizationResult(NamedTuple):
    terminations: np.ndarray
    channel: ChannelResult
    history: list
    sweeps: int = 0


def optimize_terminations(zsys: BlockImpedanceMatrix, z_g, z_l, config: OptimizerConfig | None = None,
                          initial=None, engine: Engine | None = None,
                          ztg_form: ZtgForm = ZtgForm.SOURCE) -> OptimizationResult:
    """Coordinate ascent on a given system impedance matrix.

    ``initial`` defaults to ``config.initial_termination`` on every element.
    Sweeps stop when the relative objective gain of a sweep drops below
    ``config.tolerance`` or after ``config.max_sweeps`` sweeps.
    """
    config = config or OptimizerConfig()
    factors = channel_factors(zsys, z_g, z_l, ztg_form)
    n = zsys.n_s
    if initial is None:
        initial = np.full(n, config.initial_termination, dtype=complex)
    state = init_state(factors, initial)
    rng = np.random.default_rng(config.seed)
    sweeps = 0
    while sweeps < config.max_sweeps and n:
        start = state.objective
        if config.coordinate_order is CoordinateOrder.RANDOM_PERMUTATION:
            order = rng.permutation(n)
        else:
            order = range(n)
        for index in order:
            optimize_coordinate(state, factors, int(index), config)
        sweeps += 1
        gain = (state.objective - start) / start if start > 0 else math.inf
        log.debug("sweep %d: objective %.6e (%+.3e)", sweeps, state.objective, gain)
        if gain < config.tolerance:
            break
    result = end_to_end_channel(zsys, z_g, z_l, state.terminations, engine, ztg_form)
    return OptimizationResult(state.terminations.copy(), result, list(state.history), sweeps)


def optimize_ris(scenario: Scenario, config: OptimizerConfig | None = None,
                 zsys: BlockImpedanceMatrix | None = None, engine: Engine = Engine.ANALYTICAL,
                 ztg_form: ZtgForm = ZtgForm.SOURCE, quad=None, mesh_cfg=None) -> OptimizationResult:
    """Optimize the RIS terminations of ``scenario``.

    The system matrix comes from ``zsys`` if given, else from ``engine``.
    """
    if zsys is None:
        if Engine(engine) is Engine.PEEC:
            from .peec import extract_zsys_peec
            zsys = extract_zsys_peec(scenario, mesh_cfg)
        else:
            from .analytical import assemble_zsys_analytical
            zsys = assemble_zsys_analytical(scenario, quad)
    return optimize_terminations(zsys, scenario.z_generator, scenario.z_load, config,
                                 engine=Engine(engine), ztg_form=ztg_form)

