"""Floquet circuits of N bond gates in random order on a ring, applied inside a sector."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .gates import GateParams, gate_elements
from .sector import SectorBasis, SectorState

# Per-bond index caches are built automatically below this many stored indices.
AUTO_CACHE_LIMIT = 60_000_000


@dataclass(frozen=True)
class FloquetCircuit:
    """One disorder realization.

    Bond b couples sites b and (b + 1) mod N.  `permutation[0]` is the first
    bond applied in every Floquet period.
    """

    n_sites: int
    J: float
    Jz: float
    h: np.ndarray = field(repr=False)
    h_prime: np.ndarray = field(repr=False)
    phi: np.ndarray = field(repr=False)
    permutation: np.ndarray
    seed: object = None

    def __post_init__(self):
        n = self.n_sites
        for name in ("h", "h_prime", "phi", "permutation"):
            arr = np.array(getattr(self, name), dtype=np.int64 if name == "permutation" else float)
            if arr.shape != (n,):
                raise ValueError(f"{name} must have shape ({n},)")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if sorted(self.permutation.tolist()) != list(range(n)):
            raise ValueError("permutation is not a bijection on the bonds")

    @property
    def bonds(self) -> list[GateParams]:
        return [
            GateParams(self.J, self.Jz, float(self.h[b]), float(self.h_prime[b]), float(self.phi[b]))
            for b in range(self.n_sites)
        ]

    def gate_tables(self):
        """(u_dd, u_uu, blocks) for every bond, indexed by bond."""
        return gate_elements(self.J, self.Jz, self.h, self.h_prime, self.phi)

    def with_couplings(self, J=None, Jz=None) -> "FloquetCircuit":
        """Same disorder and ordering with different (J, Jz)."""
        return FloquetCircuit(
            self.n_sites,
            self.J if J is None else J,
            self.Jz if Jz is None else Jz,
            self.h,
            self.h_prime,
            self.phi,
            self.permutation,
            self.seed,
        )


def sample_circuit(n_sites: int, J: float, Jz: float, rng: np.random.Generator, seed=None) -> FloquetCircuit:
    """Disorder phases uniform on [-pi, pi] per bond, gate order uniform over S_N."""
    h = rng.uniform(-np.pi, np.pi, n_sites)
    hp = rng.uniform(-np.pi, np.pi, n_sites)
    phi = rng.uniform(-np.pi, np.pi, n_sites)
    perm = rng.permutation(n_sites)
    return FloquetCircuit(n_sites, float(J), float(Jz), h, hp, phi, perm, seed)


# ---------------------------------------------------------------------------
# kernels


@njit(cache=True)
def _popcount_below(s, a):
    x = s & ((np.int64(1) << a) - 1)
    c = 0
    while x:
        x &= x - 1
        c += 1
    return c


@njit(cache=True)
def _rank(s, binom):
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
def _apply_bond_direct(psi, states, binom, n_sites, bond, u_dd, u_uu, blk):
    a = bond
    c = (bond + 1) % n_sites
    ma = np.int64(1) << a
    mc = np.int64(1) << c
    for i in range(states.size):
        s = states[i]
        ba = (s & ma) != 0
        bc = (s & mc) != 0
        if ba and bc:
            psi[i] *= u_uu
        elif not ba and not bc:
            psi[i] *= u_dd
        elif ba:
            # partner has the excitation moved from a to c
            t = (s ^ ma) | mc
            if c == a + 1:
                j = i + binom[a, _popcount_below(s, a)]
            else:
                j = _rank(t, binom)
            x = psi[i]
            y = psi[j]
            psi[i] = blk[0, 0] * x + blk[0, 1] * y
            psi[j] = blk[1, 0] * x + blk[1, 1] * y


@njit(cache=True)
def _steps_direct(psi, k, order, states, binom, n_sites, u_dd, u_uu, blocks):
    for _ in range(k):
        for b in order:
            _apply_bond_direct(psi, states, binom, n_sites, b, u_dd[b], u_uu[b], blocks[b])


@njit(cache=True)
def _steps_cached(psi, k, order, uu_idx, uu_off, dd_idx, dd_off, ud_idx, du_idx, pair_off,
                  u_dd, u_uu, blocks):
    for _ in range(k):
        for b in order:
            g = u_uu[b]
            for q in range(uu_off[b], uu_off[b + 1]):
                psi[uu_idx[q]] *= g
            g = u_dd[b]
            for q in range(dd_off[b], dd_off[b + 1]):
                psi[dd_idx[q]] *= g
            b00 = blocks[b, 0, 0]
            b01 = blocks[b, 0, 1]
            b10 = blocks[b, 1, 0]
            b11 = blocks[b, 1, 1]
            for q in range(pair_off[b], pair_off[b + 1]):
                i = ud_idx[q]
                j = du_idx[q]
                x = psi[i]
                y = psi[j]
                psi[i] = b00 * x + b01 * y
                psi[j] = b10 * x + b11 * y


@njit(cache=True)
def _cyclic_shift_map(states, binom, n_sites, out):
    top = n_sites - 1
    full = (np.int64(1) << n_sites) - 1
    for i in range(states.size):
        s = states[i]
        t = ((s << 1) & full) | (s >> top)
        out[i] = _rank(t, binom)


def _bond_index_cache(basis: SectorBasis):
    cached = basis._cache.get("bond_index")
    if cached is not None:
        return cached
    n = basis.n_sites
    states = basis.states
    uu, dd, ud, du = [], [], [], []
    for b in range(n):
        ma = np.int64(1) << b
        mc = np.int64(1) << ((b + 1) % n)
        ba = (states & ma) != 0
        bc = (states & mc) != 0
        uu.append(np.flatnonzero(ba & bc))
        dd.append(np.flatnonzero(~ba & ~bc))
        i_ud = np.flatnonzero(ba & ~bc)
        ud.append(i_ud)
        du.append(basis.rank_many(states[i_ud] ^ (ma | mc)))

    def pack(parts):
        off = np.zeros(n + 1, dtype=np.int64)
        off[1:] = np.cumsum([len(p) for p in parts])
        flat = np.concatenate(parts).astype(np.int64) if parts else np.zeros(0, np.int64)
        return flat, off

    uu_idx, uu_off = pack(uu)
    dd_idx, dd_off = pack(dd)
    ud_idx, pair_off = pack(ud)
    du_idx, _ = pack(du)
    cached = (uu_idx, uu_off, dd_idx, dd_off, ud_idx, du_idx, pair_off)
    basis._cache["bond_index"] = cached
    return cached


class Propagator:
    """Applies a circuit to raw amplitude buffers of one sector, in place.

    ``index_cache=None`` builds the per-bond index tables when they fit under
    ``AUTO_CACHE_LIMIT`` stored indices; otherwise partners are ranked on the
    fly with O(d) memory.
    """

    def __init__(self, circuit: FloquetCircuit, basis: SectorBasis, index_cache: bool | None = None):
        if circuit.n_sites != basis.n_sites:
            raise ValueError(
                f"circuit has {circuit.n_sites} sites but the basis has {basis.n_sites}"
            )
        self.circuit = circuit
        self.basis = basis
        self.order = np.ascontiguousarray(circuit.permutation, dtype=np.int64)
        u_dd, u_uu, blocks = circuit.gate_tables()
        self.u_dd = np.ascontiguousarray(u_dd)
        self.u_uu = np.ascontiguousarray(u_uu)
        self.blocks = np.ascontiguousarray(blocks)
        if index_cache is None:
            index_cache = "bond_index" in basis._cache or basis.dimension * basis.n_sites <= AUTO_CACHE_LIMIT
        self.index = _bond_index_cache(basis) if index_cache else None

    def step(self, psi: np.ndarray, k: int = 1) -> np.ndarray:
        """Apply k Floquet periods to `psi` in place and return it."""
        if psi.shape != (self.basis.dimension,):
            raise ValueError(f"buffer has shape {psi.shape}, expected ({self.basis.dimension},)")
        if k < 0:
            raise ValueError("k must be non-negative")
        if k == 0:
            return psi
        if self.index is not None:
            _steps_cached(psi, k, self.order, *self.index, self.u_dd, self.u_uu, self.blocks)
        else:
            b = self.basis
            _steps_direct(psi, k, self.order, b.states, b.binom, b.n_sites,
                          self.u_dd, self.u_uu, self.blocks)
        return psi


def _check(circuit: FloquetCircuit, state: SectorState):
    if circuit.n_sites != state.basis.n_sites:
        raise ValueError(
            f"circuit has {circuit.n_sites} sites but the state lives on {state.basis.n_sites}"
        )


def apply_floquet(circuit: FloquetCircuit, state: SectorState, index_cache: bool | None = None) -> SectorState:
    """One Floquet period; returns a new state."""
    return apply_floquet_power(circuit, state, 1, index_cache=index_cache)


def apply_floquet_power(circuit: FloquetCircuit, state: SectorState, k: int,
                        index_cache: bool | None = None) -> SectorState:
    """k successive Floquet periods; returns a new state."""
    _check(circuit, state)
    if k < 0:
        raise ValueError("k must be non-negative")
    out = state.copy()
    Propagator(circuit, state.basis, index_cache).step(out.amplitudes, k)
    return out


def cyclic_shift(state: SectorState) -> SectorState:
    """Relabel sites n -> (n + 1) mod N."""
    basis = state.basis
    target = basis._cache.get("shift_map")
    if target is None:
        target = np.empty(basis.dimension, dtype=np.int64)
        _cyclic_shift_map(basis.states, basis.binom, basis.n_sites, target)
        basis._cache["shift_map"] = target
    amps = np.empty_like(state.amplitudes)
    amps[target] = state.amplitudes
    return SectorState(basis, amps)
