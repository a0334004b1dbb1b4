"""Independent reference computations used by the tests.

None of these share code with the package beyond the data model; each
follows a different formulation of the same physics or linear algebra.
"""
import math

import numpy as np
from scipy import constants, optimize

ETA0 = math.sqrt(constants.mu_0 / constants.epsilon_0)


def _sin_current(z, zc, length, k):
    half = 0.5 * length
    return np.sin(k * (half - np.abs(z - zc))) / math.sin(k * half)


def _sin_current_derivative(z, zc, length, k):
    half = 0.5 * length
    return -k * np.sign(z - zc) * np.cos(k * (half - np.abs(z - zc))) / math.sin(k * half)


def _composite_gl(lo, hi, panels, order, centre):
    """Composite Gauss-Legendre nodes; ``centre`` is forced onto a panel edge."""
    n_lo = max(1, round(panels * (centre - lo) / (hi - lo)))
    edges = np.concatenate([np.linspace(lo, centre, n_lo + 1),
                            np.linspace(centre, hi, panels - n_lo + 1)[1:]])
    x, w = np.polynomial.legendre.leggauss(order)
    a, b = edges[:-1, None], edges[1:, None]
    return (0.5 * (a + b) + 0.5 * (b - a) * x).ravel(), (0.5 * (b - a) * w).ravel()


def emf_double_integral(zc_p, len_p, zc_q, len_q, rho, k, panels=500, order=20, chunk=400):
    """Mixed-potential reaction integral between two sinusoidal currents.

        Z = j eta / (4 pi k) * int int (k^2 I_p I_q - I_p' I_q') e^{-jkR} / R

    with R = sqrt((z - z')^2 + rho^2), evaluated by brute force on a
    ``panels * order`` point composite Gauss-Legendre grid on each wire.
    """
    zp, wp = _composite_gl(zc_p - len_p / 2, zc_p + len_p / 2, panels, order, zc_p)
    zq, wq = _composite_gl(zc_q - len_q / 2, zc_q + len_q / 2, panels, order, zc_q)
    ip = _sin_current(zp, zc_p, len_p, k) * wp
    dp = _sin_current_derivative(zp, zc_p, len_p, k) * wp
    iq = _sin_current(zq, zc_q, len_q, k) * wq
    dq = _sin_current_derivative(zq, zc_q, len_q, k) * wq
    total = 0j
    for s in range(0, zp.size, chunk):
        r = np.sqrt((zp[s:s + chunk, None] - zq[None, :]) ** 2 + rho * rho)
        g = np.exp(-1j * k * r) / r
        total += k * k * (ip[s:s + chunk] @ g @ iq) - dp[s:s + chunk] @ g @ dq
    return 1j * ETA0 / (4 * math.pi * k) * total


def network_channel(z, n_t, n_s, n_r, z_g, z_l, z_ris, unilateral=True):
    """Solve the whole terminated network for unit generator EMFs.

    Port currents of all N = n_t + n_s + n_r dipoles follow from one KVL
    system; the receiver load voltages -Z_L I_R per EMF give H.  With
    ``unilateral`` the reverse couplings (RIS->TX, RX->TX, RX->RIS) are
    dropped, which is the approximation behind the cascaded channel formula.
    """
    z = np.array(z, dtype=complex)
    n = n_t + n_s + n_r
    t, s, r = slice(0, n_t), slice(n_t, n_t + n_s), slice(n_t + n_s, n)
    if unilateral:
        z[t, s] = 0
        z[t, r] = 0
        z[s, r] = 0
    z[t, t] += np.diag(np.broadcast_to(z_g, (n_t,)))
    z[s, s] += np.diag(np.broadcast_to(z_ris, (n_s,)))
    z[r, r] += np.diag(np.broadcast_to(z_l, (n_r,)))
    emf = np.zeros((n, n_t), dtype=complex)
    emf[t] = np.eye(n_t)
    currents = np.linalg.solve(z, emf)
    return -np.diag(np.broadcast_to(z_l, (n_r,))) @ currents[r]


def hallen_dipole(length, radius, k, segments, eta=ETA0):
    """Input impedance of a delta-gap fed straight wire by Hallen's equation.

    Pulse basis on ``segments`` equal cells, point matching at the cell
    centres plus the wire end, reduced kernel at the wire radius; the
    homogeneous-solution constant is the extra unknown.
    """
    h = length / 2
    edges = np.linspace(-h, h, segments + 1)
    zc = 0.5 * (edges[:-1] + edges[1:])
    zm = np.concatenate([zc, [h]])
    x, w = np.polynomial.legendre.leggauss(24)
    a = np.zeros((segments + 1, segments + 1), dtype=complex)
    sub = 8
    for j in range(segments):
        cuts = np.linspace(edges[j], edges[j + 1], sub + 1)
        lo, hi = cuts[:-1, None], cuts[1:, None]
        zs = (0.5 * (lo + hi) + 0.5 * (hi - lo) * x).ravel()
        ws = (0.5 * (hi - lo) * w).ravel()
        r = np.sqrt((zm[:, None] - zs[None, :]) ** 2 + radius * radius)
        a[:, j] = (np.exp(-1j * k * r) / r) @ ws
    a[:, segments] = 1j * 4 * math.pi / eta * np.cos(k * zm)
    b = -1j * 4 * math.pi / eta * 0.5 * np.sin(k * np.abs(zm))
    current = np.linalg.solve(a, b)[:segments]
    mid = segments // 2
    feed = current[mid] if segments % 2 else 0.5 * (current[mid - 1] + current[mid])
    return 1.0 / feed


def neumann_parallel(length_1, length_2, offset_z, rho):
    """Static Neumann integral int int dz dz' / R for parallel filaments (closed form)."""
    def f(u):
        return u * np.arcsinh(u / rho) - np.sqrt(u * u + rho * rho)

    a1, b1 = 0.0, length_1
    a2, b2 = offset_z, offset_z + length_2
    return -(f(b1 - b2) - f(b1 - a2) - f(a1 - b2) + f(a1 - a2))


def reactance_grid_max(objective, points=10_000, scale=100.0):
    """Maximum of ``objective(jx)`` over a grid covering the whole reactance axis.

    x = scale * tan(theta) with theta uniform in (-pi/2, pi/2).
    """
    theta = np.linspace(-math.pi / 2, math.pi / 2, points + 2)[1:-1]
    x = scale * np.tan(theta)
    values = np.array([objective(1j * xi) for xi in x])
    i = int(np.argmax(values))
    return x[i], values[i], x


def golden_reactance_max(objective, lo=-1e3, hi=1e3, coarse=2001):
    """Golden-section refinement of the best point of a coarse reactance scan."""
    xs = np.linspace(lo, hi, coarse)
    vals = np.array([objective(1j * x) for x in xs])
    i = int(np.argmax(vals))
    if 0 < i < coarse - 1:
        res = optimize.minimize_scalar(lambda x: -objective(1j * x),
                                       bracket=(xs[i - 1], xs[i], xs[i + 1]), method="golden",
                                       options={"xtol": 1e-12})
        if -res.fun >= vals[i]:
            return res.x, -res.fun
    return xs[i], vals[i]
