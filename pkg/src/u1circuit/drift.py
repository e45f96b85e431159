"""Classical excitation drift in pure generalized-SWAP circuits.

At J = pi every gate swaps its two sites up to phases, so a single excitation
on a down background hops deterministically through the gate sequence.  The
drift of a gate ordering is the number of sites traversed per Floquet period
on the excitation's first full winding of the ring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

# exact enumeration is used when N! does not exceed this
EXACT_LIMIT = 4_000_000
BATCH = 65_536


@dataclass(frozen=True)
class DriftEstimate:
    """Typical drift N^2 / <g> over gate orderings.

    `mean_drift` divides by the mean winding time; `mean_of_ratios` is the
    plain average of per-ordering drifts, which is larger by Jensen's
    inequality and converges to 2 more slowly.
    """

    n_sites: int
    samples: int
    mean_drift: float
    stderr: float
    exact: bool
    mean_of_ratios: float = math.nan


@njit(cache=True)
def _gates_to_wind(order, n_sites, start):
    pos = start
    disp = 0
    g = 0
    while True:
        for b in order:
            g += 1
            if pos == b:
                pos = (b + 1) % n_sites
                disp += 1
            elif pos == (b + 1) % n_sites:
                pos = b
                disp -= 1
            else:
                continue
            if disp == n_sites or disp == -n_sites:
                return g


@njit(cache=True)
def _moments_rows(perms, n_sites, start):
    # (sum g, sum g^2, sum 1/g)
    s = 0.0
    s2 = 0.0
    inv = 0.0
    for r in range(perms.shape[0]):
        g = float(_gates_to_wind(perms[r], n_sites, start))
        s += g
        s2 += g * g
        inv += 1.0 / g
    return s, s2, inv


@njit(cache=True)
def _enumerate_moments(n_sites, start):
    # Heap's algorithm over all N! orderings; returns (sum g, sum g^2, sum 1/g, count)
    a = np.arange(n_sites)
    c = np.zeros(n_sites, dtype=np.int64)
    g = float(_gates_to_wind(a, n_sites, start))
    s = g
    s2 = g * g
    inv = 1.0 / g
    count = 1
    i = 1
    while i < n_sites:
        if c[i] < i:
            if i % 2 == 0:
                a[0], a[i] = a[i], a[0]
            else:
                a[c[i]], a[i] = a[i], a[c[i]]
            g = float(_gates_to_wind(a, n_sites, start))
            s += g
            s2 += g * g
            inv += 1.0 / g
            count += 1
            c[i] += 1
            i = 1
        else:
            c[i] = 0
            i += 1
    return s, s2, inv, count


def _check_permutation(n_sites: int, perm) -> np.ndarray:
    p = np.asarray(perm, dtype=np.int64)
    if p.shape != (n_sites,) or sorted(p.tolist()) != list(range(n_sites)):
        raise ValueError(f"not a permutation of the {n_sites} bonds: {perm!r}")
    return p


def drift_of_permutation(n_sites: int, perm) -> float:
    """Drift N / (g / N) of one gate ordering.

    Bond b couples sites b and (b + 1) mod N and ``perm[0]`` acts first.  The
    excitation starts at site N // 2; g counts the gates applied until it
    returns there after winding the ring once.
    """
    if n_sites < 3:
        # at N = 2 both bonds join the same pair and the excitation never winds
        raise ValueError("need at least three sites")
    p = _check_permutation(n_sites, perm)
    return n_sites * n_sites / _gates_to_wind(p, n_sites, n_sites // 2)


def staircase(n_sites: int, reverse: bool = False) -> np.ndarray:
    """Extremal orderings: the staircase chasing the excitation (drift N) or its reverse."""
    shift = n_sites // 2 - (1 if reverse else 0)
    return (shift + np.arange(n_sites)) % n_sites


def reversed_staircase_drift(n_sites: int) -> float:
    """N^2 / (N^2 - 2N + 2), the drift of ``staircase(N, reverse=True)``."""
    n2 = n_sites * n_sites
    return n2 / (n2 - 2 * n_sites + 2)


def drift_bounds(n_sites: int) -> tuple[float, float]:
    """Smallest and largest single-ordering drift, N / (N - 1) and N.

    Every period moves the excitation at least one site, always the same way,
    so no ordering is slower than one hop per period.  Orderings that reach
    exactly one hop per period (e.g. P[i] = N//2 - 2 - i mod N) beat the reversed
    staircase, whose drift N^2 / (N^2 - 2N + 2) is therefore not the minimum.
    """
    return n_sites / (n_sites - 1), float(n_sites)


def typical_drift(n_sites: int, n_samples: int, rng: np.random.Generator | None = None,
                  exact: bool | None = None) -> DriftEstimate:
    """Typical drift N^2 / <g> over uniformly random gate orderings, g the winding time.

    With ``exact=None`` all N! orderings are enumerated whenever
    N! <= 4e6 (N <= 10); `n_samples` and `rng` are then ignored.
    """
    if n_sites < 3:
        raise ValueError("need at least three sites")
    if exact is None:
        exact = math.factorial(n_sites) <= EXACT_LIMIT
    start = n_sites // 2
    n2 = n_sites * n_sites
    if exact:
        s, _, inv, count = _enumerate_moments(n_sites, start)
        return DriftEstimate(n_sites, int(count), n2 * count / s, 0.0, True, n2 * inv / count)

    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    if rng is None:
        raise ValueError("sampling needs an rng")
    s = s2 = inv = 0.0
    done = 0
    base = np.broadcast_to(np.arange(n_sites, dtype=np.int64), (min(BATCH, n_samples), n_sites))
    while done < n_samples:
        m = min(BATCH, n_samples - done)
        perms = rng.permuted(base[:m], axis=1)
        a, b, c = _moments_rows(perms, n_sites, start)
        s += a
        s2 += b
        inv += c
        done += m
    g_mean = s / done
    mean = n2 / g_mean
    if done > 1:
        var = max(0.0, (s2 - done * g_mean * g_mean) / (done - 1))
        # delta method for N^2 / <g>
        err = mean / g_mean * math.sqrt(var / done)
    else:
        err = math.nan
    return DriftEstimate(n_sites, done, mean, err, False, n2 * inv / done)
