"""Fixed-magnetization sector of an N-qubit register.

Basis states are stored as integers with site 0 in the least significant bit
(bit set = spin up).  Within a sector they are ordered by integer value, which
is the colexicographic order of the set-bit positions, so the position of a
state in the list is its combinadic rank.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from numba import njit

MAX_SITES_INT = 64
MAX_SITES_VECTOR = 28


def sector_dimension(n_sites: int, n_up: int) -> int:
    """Number of basis states of `n_sites` qubits with `n_up` spins up."""
    if n_sites > MAX_SITES_INT:
        raise OverflowError(f"n_sites={n_sites} exceeds the {MAX_SITES_INT}-bit state encoding")
    if not 0 <= n_up <= n_sites:
        raise ValueError(f"n_up={n_up} outside [0, {n_sites}]")
    return math.comb(n_sites, n_up)


def binomial_table(n_max: int) -> np.ndarray:
    """Pascal triangle C[n, k] for 0 <= n, k <= n_max (zeros above the diagonal)."""
    table = np.zeros((n_max + 1, n_max + 2), dtype=np.int64)
    for n in range(n_max + 1):
        for k in range(n + 1):
            table[n, k] = math.comb(n, k)
    return table


@njit(cache=True)
def _enumerate_states(n_sites, n_up, out):
    # Gosper's hack: next integer with the same popcount.
    x = (np.int64(1) << n_up) - 1
    for i in range(out.size):
        out[i] = x
        if x == 0:
            break
        u = x & -x
        v = x + u
        x = v + (((v ^ x) // u) >> 2)


@njit(cache=True)
def _rank_one(s, binom):
    r = 0
    k = 1
    pos = 0
    while s:
        if s & 1:
            r += binom[pos, k]
            k += 1
        s >>= 1
        pos += 1
    return r


@njit(cache=True)
def _rank_many(states, binom, out):
    for i in range(states.size):
        out[i] = _rank_one(states[i], binom)


@njit(cache=True)
def _profile(amplitudes, states, n_sites, out):
    for i in range(states.size):
        a = amplitudes[i]
        p = a.real * a.real + a.imag * a.imag
        s = states[i]
        for n in range(n_sites):
            if (s >> n) & 1:
                out[n] += p
    total = 0.0
    for i in range(amplitudes.size):
        a = amplitudes[i]
        total += a.real * a.real + a.imag * a.imag
    for n in range(n_sites):
        out[n] -= 0.5 * total


class SectorBasis:
    """Basis of the `n_up`-excitation sector of `n_sites` qubits.

    Parameters
    ----------
    n_sites : int
        Chain length N (2 <= N <= 28 for in-memory state vectors).
    n_up : int
        Number of up spins; the magnetization is ``n_up - N/2``.
    """

    def __init__(self, n_sites: int, n_up: int):
        if n_sites < 2:
            raise ValueError("need at least two sites")
        if n_sites > MAX_SITES_VECTOR:
            raise ValueError(
                f"n_sites={n_sites} exceeds the in-memory limit of {MAX_SITES_VECTOR} sites"
            )
        self.n_sites = int(n_sites)
        self.n_up = int(n_up)
        self.dimension = sector_dimension(self.n_sites, self.n_up)
        self.binom = binomial_table(self.n_sites)
        self.states = np.empty(self.dimension, dtype=np.int64)
        _enumerate_states(self.n_sites, self.n_up, self.states)
        self._cache: dict = {}

    @classmethod
    def from_magnetization(cls, n_sites: int, magnetization) -> "SectorBasis":
        """Build the sector with total S^z equal to `magnetization` (integer or half-integer)."""
        n_up = Fraction(n_sites, 2) + Fraction(magnetization)
        if n_up.denominator != 1:
            raise ValueError(f"M={magnetization} is not compatible with N={n_sites}")
        return cls(n_sites, int(n_up))

    @property
    def magnetization(self) -> float:
        return self.n_up - self.n_sites / 2

    def __repr__(self):
        return f"SectorBasis(n_sites={self.n_sites}, n_up={self.n_up}, dimension={self.dimension})"

    def __eq__(self, other):
        return (
            isinstance(other, SectorBasis)
            and other.n_sites == self.n_sites
            and other.n_up == self.n_up
        )

    def __hash__(self):
        return hash((self.n_sites, self.n_up))

    def rank(self, bits: int) -> int:
        bits = int(bits)
        if bits < 0 or bits >> self.n_sites:
            raise ValueError(f"{bits:#b} does not fit in {self.n_sites} sites")
        if bin(bits).count("1") != self.n_up:
            raise ValueError(f"{bits:#b} has popcount != {self.n_up}")
        return int(_rank_one(np.int64(bits), self.binom))

    def rank_many(self, bits: np.ndarray) -> np.ndarray:
        """Vectorized rank without validation."""
        bits = np.ascontiguousarray(bits, dtype=np.int64)
        out = np.empty(bits.size, dtype=np.int64)
        _rank_many(bits.ravel(), self.binom, out)
        return out.reshape(bits.shape)

    def unrank(self, index: int) -> int:
        if not 0 <= index < self.dimension:
            raise IndexError(f"index {index} outside [0, {self.dimension})")
        return int(self.states[index])

    def occupations(self) -> np.ndarray:
        """(d, N) array of 0/1 site occupations. Cached; avoid for large sectors."""
        occ = self._cache.get("occupations")
        if occ is None:
            occ = ((self.states[:, None] >> np.arange(self.n_sites)) & 1).astype(np.int8)
            self._cache["occupations"] = occ
        return occ


@dataclass
class SectorState:
    """Complex amplitude vector over a :class:`SectorBasis`."""

    basis: SectorBasis
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (self.basis.dimension,):
            raise ValueError(
                f"amplitude vector has shape {self.amplitudes.shape}, "
                f"expected ({self.basis.dimension},)"
            )

    def copy(self) -> "SectorState":
        return SectorState(self.basis, self.amplitudes.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalize(self) -> "SectorState":
        nrm = self.norm()
        if nrm == 0.0:
            raise ValueError("cannot normalize the zero vector")
        self.amplitudes /= nrm
        return self

    @classmethod
    def basis_state(cls, basis: SectorBasis, bits: int) -> "SectorState":
        amps = np.zeros(basis.dimension, dtype=np.complex128)
        amps[basis.rank(bits)] = 1.0
        return cls(basis, amps)


def random_sector_state(basis: SectorBasis, rng: np.random.Generator) -> SectorState:
    """Typical state: i.i.d. standard complex Gaussian amplitudes, normalized."""
    amps = rng.standard_normal(basis.dimension) + 1j * rng.standard_normal(basis.dimension)
    return SectorState(basis, amps).normalize()


def random_phase_state(basis: SectorBasis, rng: np.random.Generator) -> SectorState:
    """Equal-modulus state with i.i.d. uniform phases.

    Its site profile equals the sector average exactly, so the excitation
    background carries no sampling noise.
    """
    phases = rng.uniform(-np.pi, np.pi, basis.dimension)
    amps = np.exp(1j * phases) / math.sqrt(basis.dimension)
    return SectorState(basis, amps)


def project_up(state: SectorState, site: int):
    """Project `site` onto spin up.

    Returns ``(projected, weight)`` where `weight` is the squared norm of the
    kept component.  The projected state stays embedded in the original basis
    (amplitudes with `site` down are zero) and is renormalized.  When nothing
    survives the projection, ``(None, 0.0)`` is returned.
    """
    basis = state.basis
    if not 0 <= site < basis.n_sites:
        raise IndexError(f"site {site} outside [0, {basis.n_sites})")
    if basis.n_up == 0:
        return None, 0.0
    keep = ((basis.states >> site) & 1).astype(bool)
    amps = np.where(keep, state.amplitudes, 0.0)
    weight = float(np.vdot(amps, amps).real)
    if weight == 0.0:
        return None, 0.0
    return SectorState(basis, amps / math.sqrt(weight)), weight


def measure_profile(state: SectorState) -> np.ndarray:
    """Local magnetization <S^z_n> for every site n."""
    basis = state.basis
    out = np.zeros(basis.n_sites)
    _profile(state.amplitudes, basis.states, basis.n_sites, out)
    return out
