"""Thin-wire PEEC solver for systems of parallel z-directed dipoles.

Each dipole is cut into ``n`` equal volume cells (branches) carrying axial
current, with ``n + 1`` surface cells (nodes) centered on the cell joints.
Partial inductances couple branches, potential coefficients couple nodes,
and Kirchhoff's laws give the frequency-domain MNA system

    [ Z(s) + s Lp    -A^T          ] [ I   ]   [ V_s ]
    [ A               s P^-1 + Y_le ] [ Phi ] = [ I_s ]

where ``A`` (nodes x branches) is the transpose of the branch-node
incidence stored on the mesh.  Ports are delta gaps in the central branch
of every dipole: sources and lumped port impedances are series elements of
that branch.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse

from ._linalg import CheckedLU
from .core import BlockImpedanceMatrix, Dipole, FreeSpaceParams, Scenario
from .exceptions import ConditioningError, DomainError, GeometryError, StructuralError

log = logging.getLogger(__name__)

#: Largest admissible segment length in wavelengths.
MAX_SEGMENT_WAVELENGTHS = 0.1
#: Shortest recommended cell, in wire radii.
THIN_WIRE_RATIO = 8.0

RETARDATION_MODES = ("extracted", "center")


@dataclass(frozen=True)
class MeshConfig:
    """Mesh and kernel options.

    ``retardation`` selects how the phase delay enters the partial elements:
    ``"extracted"`` integrates 1/R exactly and adds the smooth remainder
    (e^{-jkR} - 1)/R at the cell centers; ``"center"`` multiplies the static
    value by e^{-jkR} at the center distance.
    """

    segments_per_halfwave: int = 21
    refinement_check: bool = False
    retardation: str = "extracted"
    min_segments: int = 5

    def __post_init__(self):
        n = self.segments_per_halfwave
        if int(n) != n or n < 5:
            raise DomainError(f"segments_per_halfwave must be an integer >= 5, got {n!r}")
        if n % 2 == 0:
            raise DomainError(f"segments_per_halfwave must be odd (center feed), got {n}")
        if self.retardation not in RETARDATION_MODES:
            raise DomainError(f"retardation must be one of {RETARDATION_MODES}")
        if self.min_segments < 1:
            raise DomainError("min_segments must be positive")

    def refined(self) -> "MeshConfig":
        """Configuration with roughly twice the mesh density (21 -> 41)."""
        return MeshConfig(2 * self.segments_per_halfwave - 1, self.refinement_check,
                          self.retardation, 2 * self.min_segments - 1)


@dataclass(frozen=True)
class PeecMesh:
    """Segmented wires.

    Branch ``b`` runs along +z from node ``incidence[b] == +1`` to node
    ``incidence[b] == -1``.  Cells are described by their axis position
    ``xy``, their axial interval ``[lo, hi]``, radius and owning dipole.
    """

    branch_xy: np.ndarray
    branch_lo: np.ndarray
    branch_hi: np.ndarray
    branch_radius: np.ndarray
    branch_owner: np.ndarray
    node_xy: np.ndarray
    node_z: np.ndarray
    node_lo: np.ndarray
    node_hi: np.ndarray
    node_radius: np.ndarray
    node_owner: np.ndarray
    incidence: scipy.sparse.csr_matrix
    feed_branch: np.ndarray
    feed_nodes: np.ndarray
    wavelength: float = field(default=math.nan)

    @property
    def n_branches(self) -> int:
        return self.branch_lo.size

    @property
    def n_nodes(self) -> int:
        return self.node_z.size

    @property
    def n_ports(self) -> int:
        return self.feed_branch.size

    @property
    def branch_length(self) -> np.ndarray:
        return self.branch_hi - self.branch_lo

    @property
    def port_map(self) -> dict[int, tuple[int, tuple[int, int]]]:
        """dipole index -> (feed branch, (feed start node, feed end node))."""
        return {i: (int(b), (int(n[0]), int(n[1])))
                for i, (b, n) in enumerate(zip(self.feed_branch, self.feed_nodes))}

    @classmethod
    def concatenate(cls, fragments) -> "PeecMesh":
        fragments = list(fragments)
        if not fragments:
            raise StructuralError("cannot build a mesh from zero dipoles")
        nb = np.cumsum([0] + [f.n_branches for f in fragments])
        nn = np.cumsum([0] + [f.n_nodes for f in fragments])
        owners = np.cumsum([0] + [f.n_ports for f in fragments])

        def cat(name, shift=None):
            parts = []
            for i, f in enumerate(fragments):
                v = getattr(f, name)
                parts.append(v + shift[i] if shift is not None else v)
            return np.concatenate(parts)

        return cls(
            branch_xy=cat("branch_xy"),
            branch_lo=cat("branch_lo"),
            branch_hi=cat("branch_hi"),
            branch_radius=cat("branch_radius"),
            branch_owner=cat("branch_owner", owners),
            node_xy=cat("node_xy"),
            node_z=cat("node_z"),
            node_lo=cat("node_lo"),
            node_hi=cat("node_hi"),
            node_radius=cat("node_radius"),
            node_owner=cat("node_owner", owners),
            incidence=scipy.sparse.block_diag([f.incidence for f in fragments], format="csr"),
            feed_branch=cat("feed_branch", nb),
            feed_nodes=cat("feed_nodes", nn),
            wavelength=fragments[0].wavelength,
        )


def segment_count(length: float, wavelength: float, segments_per_halfwave: int,
                  min_segments: int = 5) -> int:
    """Odd number of segments giving about ``segments_per_halfwave`` per λ/2."""
    if segments_per_halfwave % 2 == 0 or segments_per_halfwave < 5:
        raise DomainError(
            f"segments_per_halfwave must be odd and >= 5, got {segments_per_halfwave}")
    n = max(round(segments_per_halfwave * length / (0.5 * wavelength)),
            math.ceil(length / (MAX_SEGMENT_WAVELENGTHS * wavelength)), min_segments, 1)
    return n if n % 2 else n + 1


def mesh_dipole(d: Dipole, segments_per_halfwave: int = 21,
                wavelength: float | None = None, min_segments: int = 5) -> PeecMesh:
    """Uniformly segment one dipole; the feed is the central branch.

    ``wavelength`` defaults to twice the dipole length, so a half-wave
    dipole gets exactly ``segments_per_halfwave`` segments.
    """
    if not d.is_z_directed:
        raise GeometryError("only z-directed dipoles are supported")
    wavelength = 2.0 * d.length if wavelength is None else float(wavelength)
    n = segment_count(d.length, wavelength, segments_per_halfwave, min_segments)
    lo, hi = d.z_extent
    if d.length / n < THIN_WIRE_RATIO * d.radius:
        # the reduced kernel drifts once cells get this short
        log.warning("segment length %.3g m is below %g wire radii; thin-wire kernel "
                    "accuracy degrades", d.length / n, THIN_WIRE_RATIO)
    z = np.linspace(lo, hi, n + 1)
    half = 0.5 * (z[1] - z[0])
    rows = np.repeat(np.arange(n), 2)
    cols = np.stack([np.arange(n), np.arange(1, n + 1)], axis=1).ravel()
    vals = np.tile([1.0, -1.0], n)
    xy = np.array(d.center[:2], dtype=float)
    feed = n // 2
    return PeecMesh(
        branch_xy=np.tile(xy, (n, 1)),
        branch_lo=z[:-1].copy(),
        branch_hi=z[1:].copy(),
        branch_radius=np.full(n, d.radius),
        branch_owner=np.zeros(n, dtype=int),
        node_xy=np.tile(xy, (n + 1, 1)),
        node_z=z,
        node_lo=np.maximum(z - half, lo),
        node_hi=np.minimum(z + half, hi),
        node_radius=np.full(n + 1, d.radius),
        node_owner=np.zeros(n + 1, dtype=int),
        incidence=scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(n, n + 1)),
        feed_branch=np.array([feed]),
        feed_nodes=np.array([[feed, feed + 1]]),
        wavelength=wavelength,
    )


def mesh_dipoles(dipoles, wavelength: float, mesh_cfg: MeshConfig | None = None) -> PeecMesh:
    mesh_cfg = mesh_cfg or MeshConfig()
    return PeecMesh.concatenate(
        mesh_dipole(d, mesh_cfg.segments_per_halfwave, wavelength, mesh_cfg.min_segments)
        for d in dipoles)


@dataclass(frozen=True)
class PartialElements:
    """Retarded partial inductances (H), potential coefficients (1/F) and
    series cell impedances (ohm) at one frequency."""

    lp: np.ndarray
    p: np.ndarray
    z_cell: np.ndarray
    params: FreeSpaceParams


def _static_line_integral(lo_i, hi_i, lo_j, hi_j, rho):
    """Closed form of the double integral of 1/sqrt((z - z')^2 + rho^2)."""

    def prim(u):
        return u * np.arcsinh(u / rho) - np.sqrt(u * u + rho * rho)

    return prim(hi_i - lo_j) - prim(hi_i - hi_j) - prim(lo_i - lo_j) + prim(lo_i - hi_j)


def _coupling(xy, lo, hi, radius, owner, k, retardation):
    """Double line integral of e^{-jkR}/R between all pairs of cells."""
    dx = xy[:, None, 0] - xy[None, :, 0]
    dy = xy[:, None, 1] - xy[None, :, 1]
    axis_dist = np.hypot(dx, dy)
    same = owner[:, None] == owner[None, :]
    rho = np.where(same, 0.5 * (radius[:, None] + radius[None, :]),
                   np.maximum(axis_dist, 0.5 * (radius[:, None] + radius[None, :])))
    static = _static_line_integral(lo[:, None], hi[:, None], lo[None, :], hi[None, :], rho)
    mid = 0.5 * (lo + hi)
    r_cc = np.sqrt(axis_dist ** 2 + (mid[:, None] - mid[None, :]) ** 2)
    off = ~np.eye(r_cc.shape[0], dtype=bool)
    if np.any(r_cc[off] == 0.0):
        raise GeometryError("distinct cells with coincident centers")
    if retardation == "center":
        kernel = static * np.exp(-1j * k * r_cc)
    else:
        length = hi - lo
        with np.errstate(divide="ignore", invalid="ignore"):
            smooth = np.where(r_cc > 0, np.expm1(-1j * k * r_cc) / np.where(r_cc > 0, r_cc, 1.0),
                              -1j * k)
        kernel = static + length[:, None] * length[None, :] * smooth
    # symmetrize exactly; the closed form is symmetric only up to rounding
    return 0.5 * (kernel + kernel.T)


def assemble_partial_elements(mesh: PeecMesh, params: FreeSpaceParams,
                              retardation: str = "extracted") -> PartialElements:
    """Partial inductances Lp and potential coefficients P for ``mesh``.

    Cells on the same wire use the thin-wire reduced kernel (distance
    measured to the wire surface); cells on different wires use the axis
    separation.
    """
    if retardation not in RETARDATION_MODES:
        raise DomainError(f"retardation must be one of {RETARDATION_MODES}")
    k = params.wavenumber
    kb = _coupling(mesh.branch_xy, mesh.branch_lo, mesh.branch_hi, mesh.branch_radius,
                   mesh.branch_owner, k, retardation)
    kn = _coupling(mesh.node_xy, mesh.node_lo, mesh.node_hi, mesh.node_radius,
                   mesh.node_owner, k, retardation)
    node_len = mesh.node_hi - mesh.node_lo
    lp = params.mu0 / (4.0 * math.pi) * kb
    p = kn / (node_len[:, None] * node_len[None, :]) / (4.0 * math.pi * params.eps0)
    return PartialElements(lp=lp, p=p, z_cell=np.zeros(mesh.n_branches, dtype=complex),
                           params=params)


@dataclass(frozen=True)
class MnaSystem:
    """Assembled MNA operator, right-hand side and block bookkeeping."""

    matrix: np.ndarray
    rhs: np.ndarray
    n_branches: int
    n_nodes: int
    z_cell: np.ndarray
    y_lumped: np.ndarray
    s: complex

    def block(self, name: str) -> np.ndarray:
        nb = self.n_branches
        return {
            "branch-branch": self.matrix[:nb, :nb],
            "branch-node": self.matrix[:nb, nb:],
            "node-branch": self.matrix[nb:, :nb],
            "node-node": self.matrix[nb:, nb:],
        }[name]


def _port_branch(mesh, port):
    if not 0 <= port < mesh.n_ports:
        raise StructuralError(f"port {port} outside mesh with {mesh.n_ports} ports")
    return int(mesh.feed_branch[port])


def assemble_mna(elements: PartialElements, mesh: PeecMesh, lumped=None, excitation=None,
                 s: complex | None = None, shunts=None, current_sources=None) -> MnaSystem:
    """Build the frequency-domain MNA system.

    Parameters
    ----------
    elements : PartialElements
    mesh : PeecMesh
    lumped : dict, optional
        port -> series impedance (ohm) inserted in the port's feed gap.
    excitation : dict, optional
        port -> delta-gap source voltage (V).
    s : complex, optional
        Laplace variable; defaults to j·omega at the elements' frequency.
    shunts : iterable of (node_a, node_b, admittance), optional
        Lumped admittances between two nodes; ``node_b = None`` connects to
        the reference.
    current_sources : dict, optional
        node -> injected current (A).
    """
    s = 1j * elements.params.omega if s is None else complex(s)
    if s.real != 0 or not s.imag > 0:
        raise DomainError("s must be j*omega with omega > 0")
    nb, nn = mesh.n_branches, mesh.n_nodes
    z_cell = np.array(elements.z_cell, dtype=complex)
    rhs = np.zeros(nb + nn, dtype=complex)
    for port, z in (lumped or {}).items():
        if not np.isfinite(z):
            raise DomainError(f"lumped impedance at port {port} must be finite")
        z_cell[_port_branch(mesh, port)] += z
    for port, v in (excitation or {}).items():
        rhs[_port_branch(mesh, port)] += v
    y_lumped = np.zeros((nn, nn), dtype=complex)
    for a, b, y in shunts or ():
        if not np.isfinite(y):
            raise DomainError("lumped admittances must be finite")
        for node in (a, b):
            if node is not None and not 0 <= node < nn:
                raise StructuralError(f"node {node} outside mesh")
        y_lumped[a, a] += y
        if b is not None:
            y_lumped[b, b] += y
            y_lumped[a, b] -= y
            y_lumped[b, a] -= y
    for node, current in (current_sources or {}).items():
        if not 0 <= node < nn:
            raise StructuralError(f"node {node} outside mesh")
        rhs[nb + node] += current

    inc = mesh.incidence.toarray()
    p_inv = CheckedLU(elements.p, "potential coefficient matrix").solve(np.eye(nn))
    matrix = np.empty((nb + nn, nb + nn), dtype=complex)
    matrix[:nb, :nb] = s * elements.lp + np.diag(z_cell)
    matrix[:nb, nb:] = -inc
    matrix[nb:, :nb] = inc.T
    matrix[nb:, nb:] = s * p_inv + y_lumped
    return MnaSystem(matrix=matrix, rhs=rhs, n_branches=nb, n_nodes=nn, z_cell=z_cell,
                     y_lumped=y_lumped, s=s)


def solve_mna(system: MnaSystem) -> tuple[np.ndarray, np.ndarray]:
    """Branch currents I and node potentials Phi.

    Raises ConditioningError if the system is singular or the solution
    residual exceeds 1e-9 relative.
    """
    nb = system.n_branches
    if not np.any(system.rhs):
        return (np.zeros(nb, dtype=complex), np.zeros(system.n_nodes, dtype=complex))
    lu = CheckedLU(system.matrix, "MNA system")
    x = lu.solve(system.rhs)
    residual = np.linalg.norm(system.matrix @ x - system.rhs) / np.linalg.norm(system.rhs)
    if residual > 1e-9:
        raise ConditioningError(f"MNA residual {residual:.2e} exceeds 1e-9", lu.condition)
    return x[:nb], x[nb:]


def port_impedance_matrix(mesh: PeecMesh, elements: PartialElements) -> np.ndarray:
    """Open-circuit impedance matrix of the delta-gap ports.

    Column j holds the gap voltages when a unit current is forced through
    port j and every other gap is open (zero current).  The port voltages
    are extra unknowns bordering the MNA system.
    """
    system = assemble_mna(elements, mesh)
    n = system.matrix.shape[0]
    m = mesh.n_ports
    e = np.zeros((n, m))
    e[mesh.feed_branch, np.arange(m)] = 1.0
    bordered = np.zeros((n + m, n + m), dtype=complex)
    bordered[:n, :n] = system.matrix
    bordered[:n, n:] = -e
    bordered[n:, :n] = e.T
    rhs = np.zeros((n + m, m), dtype=complex)
    rhs[n:, :] = np.eye(m)
    sol = CheckedLU(bordered, "bordered MNA system").solve(rhs)
    return sol[n:, :]


def extract_zsys_peec(scenario: Scenario, mesh_cfg: MeshConfig | None = None) -> BlockImpedanceMatrix:
    """System impedance matrix of ``scenario`` from a full-wave PEEC solve."""
    mesh_cfg = mesh_cfg or MeshConfig()
    params = scenario.params
    mesh = mesh_dipoles(scenario.dipoles, params.wavelength, mesh_cfg)
    elements = assemble_partial_elements(mesh, params, mesh_cfg.retardation)
    zsys = BlockImpedanceMatrix.from_sizes(port_impedance_matrix(mesh, elements), scenario.sizes)
    if scenario.direct_path_blocked:
        zsys = zsys.with_direct_path_blocked()
    return zsys


def input_impedance(dipole: Dipole, params: FreeSpaceParams,
                    mesh_cfg: MeshConfig | None = None) -> complex:
    """Feed impedance of an isolated dipole driven by a 1 V delta gap."""
    mesh_cfg = mesh_cfg or MeshConfig()
    mesh = mesh_dipoles([dipole], params.wavelength, mesh_cfg)
    elements = assemble_partial_elements(mesh, params, mesh_cfg.retardation)
    current, _ = solve_mna(assemble_mna(elements, mesh, excitation={0: 1.0}))
    return complex(1.0 / current[mesh.feed_branch[0]])
