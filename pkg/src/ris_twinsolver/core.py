"""Physical constants, wire geometry and the scenario data model.

Everything here is immutable after construction.  Complex impedance vectors
are stored as tuples so that scenarios compare and hash by value; the
``*_matrix`` / ``*_vector`` helpers hand out numpy views.
"""
from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import constants

from .exceptions import DomainError, GeometryError, StructuralError

MU0 = constants.mu_0
EPS0 = constants.epsilon_0

#: Thin-wire regime: radius must not exceed this fraction of the length.
MAX_RADIUS_FRACTION = 1.0 / 50.0

Z_AXIS = (0.0, 0.0, 1.0)


@dataclass(frozen=True)
class FreeSpaceParams:
    """Vacuum parameters at a single operating frequency (SI units)."""

    frequency: float
    wavelength: float
    wavenumber: float
    eta0: float
    eps0: float
    mu0: float

    @property
    def omega(self) -> float:
        return 2.0 * math.pi * self.frequency

    @property
    def speed_of_light(self) -> float:
        return 1.0 / math.sqrt(self.mu0 * self.eps0)


def free_space_params(frequency: float) -> FreeSpaceParams:
    """Derive wavelength, wavenumber and wave impedance for ``frequency`` in Hz."""
    frequency = float(frequency)
    if not frequency > 0.0 or not math.isfinite(frequency):
        raise DomainError(f"frequency must be positive and finite, got {frequency!r}")
    c = 1.0 / math.sqrt(MU0 * EPS0)
    wavelength = c / frequency
    return FreeSpaceParams(
        frequency=frequency,
        wavelength=wavelength,
        wavenumber=2.0 * math.pi / wavelength,
        eta0=math.sqrt(MU0 / EPS0),
        eps0=EPS0,
        mu0=MU0,
    )


class Role(enum.Enum):
    TRANSMITTER = "T"
    RIS = "S"
    OBJECT = "O"
    RECEIVER = "R"


#: Fixed block order of the system impedance matrix.
ROLE_ORDER = (Role.TRANSMITTER, Role.RIS, Role.OBJECT, Role.RECEIVER)


@dataclass(frozen=True)
class Dipole:
    """A center-fed, perfectly conducting thin-wire dipole."""

    center: tuple[float, float, float]
    length: float
    radius: float
    role: Role = Role.TRANSMITTER
    axis: tuple[float, float, float] = Z_AXIS

    def __post_init__(self):
        center = tuple(float(c) for c in self.center)
        axis = tuple(float(c) for c in self.axis)
        if len(center) != 3 or len(axis) != 3:
            raise GeometryError("center and axis must be 3-vectors")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "length", float(self.length))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.length > 0.0:
            raise GeometryError(f"dipole length must be positive, got {self.length}")
        if not 0.0 < self.radius <= self.length * MAX_RADIUS_FRACTION:
            raise GeometryError(
                f"radius {self.radius:g} m outside thin-wire range (0, length/50] "
                f"for length {self.length:g} m"
            )
        if abs(math.hypot(*axis) - 1.0) > 1e-12:
            raise GeometryError(f"axis must be a unit vector, got {axis}")

    @property
    def is_z_directed(self) -> bool:
        return abs(abs(self.axis[2]) - 1.0) < 1e-12

    @property
    def z_extent(self) -> tuple[float, float]:
        half = 0.5 * self.length
        return self.center[2] - half, self.center[2] + half

    def axis_distance(self, other: "Dipole") -> float:
        """Distance between the two (parallel, z-directed) wire axes."""
        return math.hypot(self.center[0] - other.center[0], self.center[1] - other.center[1])


def check_wire_clearance(p: Dipole, q: Dipole) -> None:
    """Raise GeometryError if two distinct parallel wires share volume."""
    if p.axis_distance(q) >= p.radius + q.radius:
        return
    lo_p, hi_p = p.z_extent
    lo_q, hi_q = q.z_extent
    gap = max(lo_q - hi_p, lo_p - hi_q)
    if gap <= 0.0:
        raise GeometryError(
            f"wires at {p.center} and {q.center} overlap: axis distance "
            f"{p.axis_distance(q):.3e} m < radii sum and no axial gap"
        )


def _complex_tuple(values, n: int, what: str) -> tuple[complex, ...]:
    arr = np.atleast_1d(np.asarray(values, dtype=complex))
    if arr.ndim == 2:
        if arr.shape[0] != arr.shape[1] or np.count_nonzero(arr - np.diag(np.diag(arr))):
            raise StructuralError(f"{what} must be diagonal")
        arr = np.diag(arr)
    if arr.size == 1 and n != 1:
        arr = np.full(n, arr[0])
    if arr.shape != (n,):
        raise StructuralError(f"{what} has {arr.size} entries, expected {n}")
    return tuple(complex(v) for v in arr)


@dataclass(frozen=True)
class Scenario:
    """A complete transmitter / RIS / receiver system.

    ``z_generator`` and ``z_load`` hold the diagonals of the generator and
    load impedance matrices; ``z_ris`` the RIS tunable terminations.  Scalars
    are broadcast to every port of the group.
    """

    params: FreeSpaceParams
    transmitters: tuple[Dipole, ...]
    ris: tuple[Dipole, ...]
    receivers: tuple[Dipole, ...]
    z_generator: tuple[complex, ...] = (50.0 + 0j,)
    z_load: tuple[complex, ...] = (50.0 + 0j,)
    z_ris: tuple[complex, ...] = ()
    direct_path_blocked: bool = True
    objects: tuple[Dipole, ...] = ()

    def __post_init__(self):
        groups = {
            "transmitters": (self.transmitters, Role.TRANSMITTER),
            "ris": (self.ris, Role.RIS),
            "receivers": (self.receivers, Role.RECEIVER),
            "objects": (self.objects, Role.OBJECT),
        }
        for name, (dipoles, role) in groups.items():
            fixed = tuple(dataclasses.replace(d, role=role) if d.role is not role else d
                          for d in dipoles)
            object.__setattr__(self, name, fixed)
        if not self.transmitters or not self.receivers:
            raise StructuralError("a scenario needs at least one transmitter and one receiver")
        object.__setattr__(self, "z_generator",
                           _complex_tuple(self.z_generator, len(self.transmitters), "z_generator"))
        object.__setattr__(self, "z_load",
                           _complex_tuple(self.z_load, len(self.receivers), "z_load"))
        z_ris = self.z_ris if len(self.z_ris) or not self.ris else (0.2,)
        object.__setattr__(self, "z_ris", _complex_tuple(z_ris, len(self.ris), "z_ris")
                           if self.ris else ())
        if any(z == 0 for z in self.z_load):
            raise DomainError("load impedances must be nonzero")
        object.__setattr__(self, "direct_path_blocked", bool(self.direct_path_blocked))
        dips = self.dipoles
        for i, p in enumerate(dips):
            for q in dips[i + 1:]:
                check_wire_clearance(p, q)

    @property
    def dipoles(self) -> tuple[Dipole, ...]:
        """All dipoles in block order T, S, O, R."""
        return self.transmitters + self.ris + self.objects + self.receivers

    @property
    def sizes(self) -> dict[Role, int]:
        return {
            Role.TRANSMITTER: len(self.transmitters),
            Role.RIS: len(self.ris),
            Role.OBJECT: len(self.objects),
            Role.RECEIVER: len(self.receivers),
        }

    def z_generator_matrix(self) -> np.ndarray:
        return np.diag(np.array(self.z_generator, dtype=complex))

    def z_load_matrix(self) -> np.ndarray:
        return np.diag(np.array(self.z_load, dtype=complex))

    def z_ris_vector(self) -> np.ndarray:
        return np.array(self.z_ris, dtype=complex)

    def with_terminations(self, z_ris) -> "Scenario":
        return dataclasses.replace(self, z_ris=_complex_tuple(z_ris, len(self.ris), "z_ris"))


def build_reference_scenario(
    n_ris: int,
    termination: complex = 0.2,
    frequency: float = 3e9,
    z_generator: complex = 50.0,
    z_load: complex = 50.0,
    radius: float | None = None,
) -> Scenario:
    """The reference link: 4 TX dipoles, one RX dipole, ``n_ris`` RIS elements.

    TX dipoles sit at (0, 0) + m·(λ/2, 0), the receiver at (9.6λ, 14.4λ)
    and the RIS elements at (0, 24λ) + m·(λ/8, 0), all z-directed and
    λ/2 long with radius λ/1000 unless ``radius`` is given.  The direct
    TX-RX path is blocked.
    """
    if int(n_ris) != n_ris or n_ris < 1:
        raise DomainError(f"n_ris must be a positive integer, got {n_ris!r}")
    n_ris = int(n_ris)
    params = free_space_params(frequency)
    lam = params.wavelength
    length = lam / 2.0
    a = lam / 1000.0 if radius is None else float(radius)

    def row(n, x0, y0, dx, role):
        return tuple(Dipole((x0 + m * dx, y0, 0.0), length, a, role) for m in range(n))

    return Scenario(
        params=params,
        transmitters=row(4, 0.0, 0.0, lam / 2.0, Role.TRANSMITTER),
        ris=row(n_ris, 0.0, 24.0 * lam, lam / 8.0, Role.RIS),
        receivers=(Dipole((9.6 * lam, 14.4 * lam, 0.0), length, a, Role.RECEIVER),),
        z_generator=(complex(z_generator),) * 4,
        z_load=(complex(z_load),),
        z_ris=(complex(termination),) * n_ris,
        direct_path_blocked=True,
    )


@dataclass(frozen=True)
class BlockImpedanceMatrix:
    """System impedance matrix with role-indexed blocks in T, S, O, R order."""

    matrix: np.ndarray
    n_t: int
    n_s: int
    n_o: int
    n_r: int
    _offsets: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        n = self.n_t + self.n_s + self.n_o + self.n_r
        if m.shape != (n, n):
            raise StructuralError(f"matrix shape {m.shape} does not match group sizes (total {n})")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        offsets, start = {}, 0
        for role, size in zip(ROLE_ORDER, (self.n_t, self.n_s, self.n_o, self.n_r)):
            offsets[role] = slice(start, start + size)
            start += size
        object.__setattr__(self, "_offsets", offsets)

    @classmethod
    def from_sizes(cls, matrix, sizes: dict[Role, int]) -> "BlockImpedanceMatrix":
        return cls(matrix, sizes[Role.TRANSMITTER], sizes[Role.RIS],
                   sizes[Role.OBJECT], sizes[Role.RECEIVER])

    @property
    def sizes(self) -> dict[Role, int]:
        return {Role.TRANSMITTER: self.n_t, Role.RIS: self.n_s,
                Role.OBJECT: self.n_o, Role.RECEIVER: self.n_r}

    def index(self, role: Role | str) -> slice:
        return self._offsets[_as_role(role)]

    def block(self, rows: Role | str, cols: Role | str) -> np.ndarray:
        """Return the block ``Z_{rows,cols}``, e.g. ``block("R", "S")``."""
        return self.matrix[self.index(rows), self.index(cols)]

    def symmetry_error(self) -> float:
        """max |Z - Z^T| / max |Z|."""
        scale = np.max(np.abs(self.matrix))
        if scale == 0:
            return 0.0
        return float(np.max(np.abs(self.matrix - self.matrix.T)) / scale)

    def with_direct_path_blocked(self) -> "BlockImpedanceMatrix":
        m = np.array(self.matrix)
        t, r = self.index(Role.TRANSMITTER), self.index(Role.RECEIVER)
        m[r, t] = 0.0
        m[t, r] = 0.0
        return BlockImpedanceMatrix(m, self.n_t, self.n_s, self.n_o, self.n_r)

    def with_matrix(self, matrix) -> "BlockImpedanceMatrix":
        return BlockImpedanceMatrix(matrix, self.n_t, self.n_s, self.n_o, self.n_r)


def _as_role(role) -> Role:
    if isinstance(role, Role):
        return role
    try:
        return Role(str(role).upper())
    except ValueError:
        return Role[str(role).upper()]


