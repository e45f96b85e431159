"""Independent reference implementations used only by the tests.

Nothing here imports the package kernels: gates come from matrix
exponentials of Pauli operators and states live in the full 2^N space.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.linalg import expm

SZ = np.diag([-0.5, 0.5]).astype(complex)  # index 0 = down, 1 = up
SP = np.array([[0, 0], [1, 0]], dtype=complex)  # |up><down|
SM = SP.conj().T
I2 = np.eye(2, dtype=complex)


def two_site(a_n, a_np1):
    """Operator a_n (x) a_{n+1} on the index b_n + 2 b_{n+1}."""
    return np.kron(a_np1, a_n)


def gate_expm(J, Jz, h=0.0, hp=0.0, phi=0.0):
    """exp(-iH) exp(-ih Sz_n) exp(-ih' Sz_{n+1}) from dense exponentials."""
    hop = 0.5 * J * (np.exp(1j * phi) * two_site(SP, SM) + np.exp(-1j * phi) * two_site(SM, SP))
    H = hop + Jz * two_site(SZ, SZ)
    return expm(-1j * H) @ expm(-1j * h * two_site(SZ, I2)) @ expm(-1j * hp * two_site(I2, SZ))


def rz(t):
    return expm(-0.5j * t * np.diag([1.0, -1.0]))


def four_phase_gate(t1, t2, t3, t4, J, Jz):
    """Rz_n(t1) Rz_{n+1}(t2) exp(-iJ/4 (XX+YY)) exp(-iJz/4 ZZ) Rz_n(t3) Rz_{n+1}(t4).

    Pauli Z = diag(1, -1) in the (up, down) convention, i.e. Z = 2 Sz here.
    """
    X = np.array([[0, 1], [1, 0]], dtype=complex)
    Y = np.array([[0, -1j], [1j, 0]])
    Z = 2 * SZ
    rz_ = lambda t: expm(-0.5j * t * Z)
    xy = expm(-0.25j * J * (two_site(X, X) + two_site(Y, Y)))
    zz = expm(-0.25j * Jz * two_site(Z, Z))
    return two_site(rz_(t1), rz_(t2)) @ xy @ zz @ two_site(rz_(t3), rz_(t4))


def apply_two_site_full(psi, gate, n, m, n_sites):
    """Apply a 4x4 gate on sites (n, m) of a full 2^N vector (bit k = site k)."""
    T = psi.reshape((2,) * n_sites)
    ax_n = n_sites - 1 - n
    ax_m = n_sites - 1 - m
    T = np.moveaxis(T, [ax_m, ax_n], [0, 1])
    shape = T.shape
    T = (gate @ T.reshape(4, -1)).reshape(shape)
    T = np.moveaxis(T, [0, 1], [ax_m, ax_n])
    return T.reshape(-1)


def floquet_full(psi, n_sites, J, Jz, h, hp, phi, perm):
    for b in perm:
        g = gate_expm(J, Jz, h[b], hp[b], phi[b])
        psi = apply_two_site_full(psi, g, b, (b + 1) % n_sites, n_sites)
    return psi


def sector_states(n_sites, n_up):
    """States with n_up set bits, sorted by integer value, via combinations."""
    return sorted(sum(1 << k for k in c) for c in itertools.combinations(range(n_sites), n_up))


def embed(amps, states, n_sites):
    full = np.zeros(2**n_sites, dtype=complex)
    full[np.asarray(states)] = amps
    return full


def profile_full(full, n_sites):
    p = np.abs(full) ** 2
    idx = np.arange(full.size)
    return np.array([p[(idx >> n) & 1 == 1].sum() - 0.5 * p.sum() for n in range(n_sites)])


def entropy_full(full, n_a, n_sites):
    mat = full.reshape(2 ** (n_sites - n_a), 2**n_a)
    s = np.linalg.svd(mat, compute_uv=False) ** 2
    s = s[s > 1e-300]
    return float(-(s * np.log(s)).sum())


def drift_gates_vectorized(perms, n_sites):
    """Gate count to the first winding for every row of `perms` at once (numpy only)."""
    perms = np.asarray(perms)
    n = perms.shape[0]
    pos = np.full(n, n_sites // 2)
    disp = np.zeros(n, dtype=np.int64)
    done = np.zeros(n, dtype=np.int64)
    g = 0
    while not np.all(done):
        for k in range(n_sites):
            g += 1
            b = perms[:, k]
            right = (pos == b) & (done == 0)
            left = (pos == (b + 1) % n_sites) & (done == 0) & ~right
            pos = np.where(right, (b + 1) % n_sites, np.where(left, b, pos))
            disp += right.astype(np.int64) - left.astype(np.int64)
            hit = (np.abs(disp) == n_sites) & (done == 0)
            done[hit] = g
    return done


def all_permutations(n):
    return np.array(list(itertools.permutations(range(n))), dtype=np.int8)


def drift_walk_quantum(perm, n_sites, rng):
    """Track a single excitation through a J = pi circuit with random phases in the full space."""
    Jz = rng.uniform(-np.pi, np.pi)
    h, hp, phi = (rng.uniform(-np.pi, np.pi, n_sites) for _ in range(3))
    start = n_sites // 2
    psi = np.zeros(2**n_sites, dtype=complex)
    psi[1 << start] = 1.0
    pos = start
    disp = 0
    g = 0
    while True:
        for b in perm:
            g += 1
            gate = gate_expm(math.pi, Jz, h[b], hp[b], phi[b])
            psi = apply_two_site_full(psi, gate, b, (b + 1) % n_sites, n_sites)
            new = int(np.argmax(np.abs(psi)))
            assert abs(abs(psi[new]) - 1) < 1e-9
            new_pos = new.bit_length() - 1
            if new_pos != pos:
                step = (new_pos - pos) % n_sites
                disp += 1 if step == 1 else -1
                pos = new_pos
                if abs(disp) == n_sites:
                    return g


def cue_matrix(n, rng):
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))
