"""U(1)-symmetric two-qubit gates.

Matrices act on the two-site basis ordered (dd, ud, du, uu), where the first
letter is site n and the second site n+1, i.e. index = b_n + 2 b_{n+1}.  The
gate is

    U = exp(-i H) exp(-i h S^z_n) exp(-i h' S^z_{n+1}),
    H = J/2 (S^+_n S^-_{n+1} e^{i phi} + h.c.) + Jz S^z_n S^z_{n+1}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DD, UD, DU, UU = 0, 1, 2, 3


@dataclass(frozen=True)
class GateParams:
    J: float
    Jz: float
    h: float = 0.0
    h_prime: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        for name in ("J", "Jz", "h", "h_prime", "phi"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    def reduced(self) -> "GateParams":
        """Copy with every angle mapped into (-pi, pi]."""
        return GateParams(*(wrap_angle(v) for v in (self.J, self.Jz, self.h, self.h_prime, self.phi)))


def wrap_angle(x):
    """Map angles into (-pi, pi]."""
    y = np.mod(np.asarray(x, dtype=float) + np.pi, 2 * np.pi) - np.pi
    y = np.where(y == -np.pi, np.pi, y)
    return float(y) if np.ndim(y) == 0 else y


def gate_elements(J, Jz, h, h_prime, phi):
    """Non-zero entries of the gate: (u_dd, u_uu, 2x2 block on (ud, du)).

    Works elementwise on arrays of parameters; the block has shape (..., 2, 2).
    """
    J, Jz, h, hp, phi = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (J, Jz, h, h_prime, phi)))
    zz = np.exp(-0.25j * Jz)
    # exp(-ih S^z_n - ih' S^z_{n+1}) on each configuration
    d_dd = np.exp(0.5j * (h + hp))
    d_uu = np.exp(-0.5j * (h + hp))
    d_ud = np.exp(-0.5j * (h - hp))
    d_du = np.exp(0.5j * (h - hp))
    # hopping block is -Jz/4 + (J/2) n.sigma with n = (cos phi, -sin phi, 0)
    c = np.cos(J / 2)
    s = np.sin(J / 2)
    pre = np.conj(zz)
    block = np.empty(J.shape + (2, 2), dtype=np.complex128)
    block[..., 0, 0] = pre * c * d_ud
    block[..., 0, 1] = pre * (-1j) * s * np.exp(1j * phi) * d_du
    block[..., 1, 0] = pre * (-1j) * s * np.exp(-1j * phi) * d_ud
    block[..., 1, 1] = pre * c * d_du
    return zz * d_dd, zz * d_uu, block


def build_gate(params: GateParams) -> np.ndarray:
    """Dense 4x4 matrix of the gate."""
    u_dd, u_uu, block = gate_elements(params.J, params.Jz, params.h, params.h_prime, params.phi)
    u = np.zeros((4, 4), dtype=np.complex128)
    u[DD, DD] = u_dd
    u[UU, UU] = u_uu
    u[np.ix_([UD, DU], [UD, DU])] = block
    return u


@dataclass(frozen=True)
class SwapForm:
    """Phases of the J = pi gate.

    U = e^{-i kappa+}|uu><uu| + e^{-i xi+}|du><ud| + e^{-i xi-}|ud><du| + e^{-i kappa-}|dd><dd|
    """

    kappa_plus: float
    kappa_minus: float
    xi_plus: float
    xi_minus: float

    def matrix(self) -> np.ndarray:
        u = np.zeros((4, 4), dtype=np.complex128)
        u[UU, UU] = np.exp(-1j * self.kappa_plus)
        u[DD, DD] = np.exp(-1j * self.kappa_minus)
        u[DU, UD] = np.exp(-1j * self.xi_plus)
        u[UD, DU] = np.exp(-1j * self.xi_minus)
        return u


def swap_form(h: float, h_prime: float, phi: float, Jz: float) -> SwapForm:
    """Generalized SWAP phases of ``build_gate(GateParams(pi, Jz, h, h_prime, phi))``."""
    return SwapForm(
        kappa_plus=(h + h_prime) / 2 + Jz / 4,
        kappa_minus=-(h + h_prime) / 2 + Jz / 4,
        xi_plus=math.pi / 2 + (h - h_prime) / 2 - Jz / 4 + phi,
        xi_minus=math.pi / 2 - (h - h_prime) / 2 - Jz / 4 - phi,
    )


def from_four_phases(theta1, theta2, theta3, theta4, J, Jz) -> GateParams:
    """Convert the Pauli-rotation form

        V = Rz_n(t1) Rz_{n+1}(t2) exp(-iJ/4 (XX + YY)) exp(-iJz/4 ZZ) Rz_n(t3) Rz_{n+1}(t4),
        Rz(t) = exp(-i t Z / 2),

    into gate parameters.  The local rotations on the left dress the hopping
    term, so only their difference survives as the Peierls phase.
    """
    return GateParams(
        J=J,
        Jz=Jz,
        h=theta1 + theta3,
        h_prime=theta2 + theta4,
        phi=theta2 - theta1,
    )
