"""Induced-EMF self and mutual impedances of parallel thin-wire dipoles.

Each dipole carries the sinusoidal current

    I(z) = sin(k (l/2 - |z - z_c|)) / sin(k l / 2)

normalized to one ampere at the feed.  The z-directed field radiated by such
a filament at transverse distance ``rho`` is closed form: three spherical
waves launched from the two wire ends and the feed point.  That closes the
inner integral of the reaction integral exactly, and the outer integral
over the observing wire is done with composite Gauss-Legendre quadrature
split at every kink of the integrand.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import BlockImpedanceMatrix, Dipole, FreeSpaceParams, Scenario
from .exceptions import DomainError, GeometryError, SingularLengthError


@dataclass(frozen=True)
class QuadratureSpec:
    """Gauss-Legendre rule used for the outer integral.

    ``order`` nodes per panel and ``panels`` uniform panels between
    consecutive breakpoints (feed point, wire ends).  Near-axis interactions
    additionally get geometrically graded panels toward each breakpoint.
    """

    order: int = 32
    panels: int = 1
    grading_ratio: float = 4.0

    def __post_init__(self):
        if self.order < 2 or self.panels < 1:
            raise DomainError("quadrature needs order >= 2 and panels >= 1")
        if not self.grading_ratio > 1.0:
            raise DomainError("grading_ratio must exceed 1")


@lru_cache(maxsize=32)
def _gauss_legendre(order):
    return np.polynomial.legendre.leggauss(order)


@dataclass(frozen=True)
class SinusoidalCurrent:
    """Assumed current distribution on one dipole."""

    center: float
    length: float
    wavenumber: float

    def __post_init__(self):
        if abs(math.sin(0.5 * self.wavenumber * self.length)) < 1e-9:
            raise SingularLengthError(
                f"sin(k l/2) vanishes for l = {self.length:g} m: feed current is undefined"
            )

    def __call__(self, z):
        return sinusoidal_current(z, self)


def sinusoidal_current(z, current: SinusoidalCurrent):
    """Normalized current at axial position(s) ``z``; 1 at the feed, 0 at the ends."""
    half = 0.5 * current.length
    offset = np.abs(np.asarray(z, dtype=float) - current.center)
    if np.any(offset > half * (1 + 1e-12)):
        raise DomainError("current evaluated outside the wire extent")
    k = current.wavenumber
    value = np.sin(k * (half - np.minimum(offset, half))) / math.sin(k * half)
    return value if np.ndim(value) else float(value)


def effective_offset(p: Dipole, q: Dipole) -> float:
    """Transverse offset used in the kernel, clamped below by the wire radius."""
    return max(p.axis_distance(q), 0.5 * (p.radius + q.radius))


def _panel_edges(lo, hi, rho, quad: QuadratureSpec):
    edges = np.linspace(lo, hi, quad.panels + 1)
    length = hi - lo
    if rho < 0.25 * length / quad.panels:
        steps = []
        d = rho
        while d < 0.25 * length / quad.panels:
            steps.append(d)
            d *= quad.grading_ratio
        steps = np.array(steps)
        edges = np.concatenate([edges, lo + steps, hi - steps])
        edges = np.unique(edges)
    return edges


def _canonical(p: Dipole, q: Dipole):
    # Reciprocity is exact only up to quadrature error; a fixed argument order
    # makes mutual_impedance(p, q) and mutual_impedance(q, p) bit-identical.
    key_p = (p.length, p.radius, p.center)
    key_q = (q.length, q.radius, q.center)
    return (p, q) if key_p <= key_q else (q, p)


def mutual_impedance(p: Dipole, q: Dipole, params: FreeSpaceParams,
                     quad: QuadratureSpec | None = None) -> complex:
    """Mutual impedance Z_qp between two parallel z-directed dipoles (ohm).

    For ``p == q`` this is the self impedance, evaluated with the transverse
    offset equal to the wire radius.

    Parameters
    ----------
    p, q : Dipole
        Source and observing dipoles.  Both must be z-directed.
    params : FreeSpaceParams
    quad : QuadratureSpec, optional

    Raises
    ------
    GeometryError
        If the dipoles are not z-directed or their wires overlap.
    SingularLengthError
        If either length makes sin(k l / 2) vanish.
    """
    quad = quad or QuadratureSpec()
    if not (p.is_z_directed and q.is_z_directed):
        raise GeometryError("only parallel z-directed dipoles are supported")
    if p is not q and p != q:
        lo_p, hi_p = p.z_extent
        lo_q, hi_q = q.z_extent
        if p.axis_distance(q) < p.radius + q.radius and max(lo_q - hi_p, lo_p - hi_q) <= 0:
            raise GeometryError("distinct dipoles with overlapping wire volumes")
    p, q = _canonical(p, q)
    k = params.wavenumber
    SinusoidalCurrent(p.center[2], p.length, k)  # rejects singular lengths
    obs = SinusoidalCurrent(q.center[2], q.length, k)
    rho = effective_offset(p, q)

    hp = 0.5 * p.length
    zp = p.center[2]
    lo_q, hi_q = q.z_extent
    breaks = {lo_q, q.center[2], hi_q}
    breaks.update(b for b in (zp - hp, zp, zp + hp) if lo_q < b < hi_q)
    breaks = sorted(breaks)

    x, w = _gauss_legendre(quad.order)
    nodes, weights = [], []
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        edges = _panel_edges(lo, hi, rho, quad)
        a, b = edges[:-1, None], edges[1:, None]
        nodes.append((0.5 * (a + b) + 0.5 * (b - a) * x).ravel())
        weights.append((0.5 * (b - a) * w).ravel())
    z = np.concatenate(nodes)
    wz = np.concatenate(weights)

    u = z - zp
    r1 = np.sqrt(rho * rho + (u - hp) ** 2)
    r2 = np.sqrt(rho * rho + (u + hp) ** 2)
    r0 = np.sqrt(rho * rho + u * u)
    field = (np.exp(-1j * k * r1) / r1 + np.exp(-1j * k * r2) / r2
             - 2.0 * math.cos(k * hp) * np.exp(-1j * k * r0) / r0)
    integral = np.sum(wz * sinusoidal_current(z, obs) * field)
    return complex(1j * params.eta0 / (4.0 * math.pi * math.sin(k * hp)) * integral)


def impedance_matrix(dipoles, params: FreeSpaceParams,
                     quad: QuadratureSpec | None = None) -> np.ndarray:
    """Dense symmetric matrix of pairwise induced-EMF impedances."""
    n = len(dipoles)
    z = np.empty((n, n), dtype=complex)
    for i in range(n):
        for j in range(i, n):
            z[i, j] = z[j, i] = mutual_impedance(dipoles[i], dipoles[j], params, quad)
    return z


def assemble_zsys_analytical(scenario: Scenario,
                             quad: QuadratureSpec | None = None) -> BlockImpedanceMatrix:
    """System impedance matrix from pairwise induced-EMF evaluations.

    With ``scenario.direct_path_blocked`` the T-R and R-T blocks are zeroed.
    """
    zsys = BlockImpedanceMatrix.from_sizes(
        impedance_matrix(scenario.dipoles, scenario.params, quad), scenario.sizes)
    if scenario.direct_path_blocked:
        zsys = zsys.with_direct_path_blocked()
    return zsys
