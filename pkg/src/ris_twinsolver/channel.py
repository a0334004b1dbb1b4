"""End-to-end channel of a TX / RIS / RX multiport network.

The channel matrix maps generator voltages to receiver load voltages,

    H = Z_RL [Z_RT - Z_RS Z_sca Z_ST] Z_TG

with Z_RL = (I + Z_RR Z_L^-1)^-1, Z_sca = (Z_SS + Z_SOS + Z_RIS)^-1 and,
by default, Z_TG = (Z_TT + Z_G)^-1.  It neglects the reverse couplings
(RIS to TX, RX to RIS, RX to TX), which are weak at link distances.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from ._linalg import checked_solve
from .core import BlockImpedanceMatrix, Role
from .exceptions import StructuralError


class Engine(enum.Enum):
    ANALYTICAL = "analytical"
    PEEC = "peec"


class ZtgForm(enum.Enum):
    """How the transmitter-side factor Z_TG is formed.

    SOURCE      (Z_TT + Z_G)^-1: H is the dimensionless ratio of load
                voltage to generator EMF.
    NORMALIZED  (I + Z_TT Z_G^-1)^-1.
    PRINTED     (I + Z_TT Z_G)^-1, the literal published expression.
    """

    SOURCE = "source"
    NORMALIZED = "normalized"
    PRINTED = "printed"


@dataclass(frozen=True)
class ChannelResult:
    h_e2e: np.ndarray
    gain_db: float
    engine: Engine | None
    terminations: np.ndarray


def _solve(a, b, what):
    return checked_solve(a, b, what, equilibrate=False)


def scattering_inverse(z_ss, z_sos, z_ris) -> np.ndarray:
    """(Z_SS + Z_SOS + Z_RIS)^-1.

    ``z_ris`` may be the termination vector or its diagonal matrix.
    """
    z_ss = np.asarray(z_ss, dtype=complex)
    z_ris = np.asarray(z_ris, dtype=complex)
    if z_ris.ndim == 1:
        z_ris = np.diag(z_ris)
    total = z_ss + np.asarray(z_sos, dtype=complex) + z_ris
    return _solve(total, np.eye(total.shape[0], dtype=complex), "Z_SS + Z_SOS + Z_RIS")


def _diag(values, n, what):
    arr = np.asarray(values, dtype=complex)
    if arr.ndim == 0:
        arr = np.full(n, arr)
    if arr.ndim == 2:
        arr = np.diag(arr)
    if arr.shape != (n,):
        raise StructuralError(f"{what} needs {n} entries, got {arr.shape}")
    return arr


def transmit_factor(z_tt, z_g, form: ZtgForm = ZtgForm.SOURCE) -> np.ndarray:
    """Z_TG for the chosen form (see :class:`ZtgForm`)."""
    form = ZtgForm(form)
    n = z_tt.shape[0]
    eye = np.eye(n, dtype=complex)
    if form is ZtgForm.SOURCE:
        return _solve(z_tt + np.diag(z_g), eye, "Z_TT + Z_G")
    if form is ZtgForm.NORMALIZED:
        return _solve(eye + z_tt / z_g[None, :], eye, "I + Z_TT Z_G^-1")
    return _solve(eye + z_tt * z_g[None, :], eye, "I + Z_TT Z_G")


def receive_factor(z_rr, z_l) -> np.ndarray:
    """Z_RL = (I + Z_RR Z_L^-1)^-1."""
    if np.any(z_l == 0):
        raise StructuralError("load impedances must be nonzero")
    eye = np.eye(z_rr.shape[0], dtype=complex)
    return _solve(eye + z_rr / z_l[None, :], eye, "I + Z_RR Z_L^-1")


@dataclass(frozen=True)
class ChannelFactors:
    """Termination-independent pieces of the channel: H = A - B W C.

    ``W`` is the scattering inverse (Z_SS + diag(z))^-1.
    """

    direct: np.ndarray      # A = Z_RL Z_RT Z_TG
    left: np.ndarray        # B = Z_RL Z_RS
    right: np.ndarray       # C = Z_ST Z_TG
    z_ss: np.ndarray

    def channel(self, w: np.ndarray) -> np.ndarray:
        return self.direct - self.left @ w @ self.right


def channel_factors(zsys: BlockImpedanceMatrix, z_g, z_l,
                    ztg_form: ZtgForm = ZtgForm.SOURCE) -> ChannelFactors:
    if zsys.n_o:
        raise StructuralError("environment objects are not modeled; N_O must be 0")
    if zsys.n_t == 0 or zsys.n_r == 0:
        raise StructuralError("need at least one transmitter and one receiver")
    z_g = _diag(z_g, zsys.n_t, "Z_G")
    z_l = _diag(z_l, zsys.n_r, "Z_L")
    T, S, R = Role.TRANSMITTER, Role.RIS, Role.RECEIVER
    z_tg = transmit_factor(np.array(zsys.block(T, T)), z_g, ztg_form)
    z_rl = receive_factor(np.array(zsys.block(R, R)), z_l)
    return ChannelFactors(
        direct=z_rl @ zsys.block(R, T) @ z_tg,
        left=z_rl @ zsys.block(R, S),
        right=zsys.block(S, T) @ z_tg,
        z_ss=np.array(zsys.block(S, S)),
    )


def channel_gain_db(h) -> float:
    """10 log10 ||h||_F^2; ``-inf`` for the zero matrix."""
    power = float(np.sum(np.abs(np.asarray(h)) ** 2))
    return 10.0 * math.log10(power) if power > 0 else -math.inf


def end_to_end_channel(zsys: BlockImpedanceMatrix, z_g, z_l, z_ris,
                       engine: Engine | None = None,
                       ztg_form: ZtgForm = ZtgForm.SOURCE) -> ChannelResult:
    """End-to-end channel matrix (N_R x N_T) and its Frobenius gain.

    Parameters
    ----------
    zsys : BlockImpedanceMatrix
        System impedances; must have no object block (N_O = 0), so the
        object-composited blocks reduce to the direct ones.
    z_g, z_l : array_like
        Generator and load impedances (diagonal entries, or a scalar).
    z_ris : array_like
        RIS terminations.
    ztg_form : ZtgForm
        Transmitter-side factor, see :class:`ZtgForm`.

    Raises
    ------
    ConditioningError
        If Z_SS + Z_RIS (or a port factor) cannot be inverted.
    StructuralError
        On dimension mismatches.
    """
    factors = channel_factors(zsys, z_g, z_l, ztg_form)
    z_ris = _diag(z_ris, zsys.n_s, "Z_RIS")
    if zsys.n_s:
        coupled = factors.left @ _solve(factors.z_ss + np.diag(z_ris), factors.right,
                                        "Z_SS + Z_SOS + Z_RIS")
        h = factors.direct - coupled
    else:
        h = factors.direct
    return ChannelResult(h_e2e=h, gain_db=channel_gain_db(h), engine=engine,
                         terminations=z_ris.copy())
