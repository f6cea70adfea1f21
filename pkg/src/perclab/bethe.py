"""Exact Bethe lattice percolation and a matched cluster grower.

On an infinite cycle-free graph of uniform degree z, every observable of
interest has a closed form below the threshold p_c = 1/(z - 1):
correlation function, correlation length, mean cluster size, the
exponential cutoff of the cluster numbers, and the mean-field exponents
tau = 5/2, sigma = 1/2, nu = 1/2, D = 1/(sigma nu) = 4. The Monte Carlo
grower samples the cluster containing an occupied origin shell by shell;
because sites are occupied independently, the number of occupied slots
in a shell is Binomial(slots, p), which is drawn directly instead of
simulating slots one at a time. Growing from an occupied origin is
size-biased sampling, the convention under which the empirical mean
cluster size converges to S = 1 + sum_l g(l).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import math

import numpy as np

from perclab import rng as _rng

TAU = 2.5
SIGMA = 0.5
NU = 0.5

_DEFAULT_CAP = 10**6


class DivergenceError(ValueError):
    """Requested quantity diverges or leaves its validity domain."""


def _validate(z: int, p: float) -> int:
    z = int(z)
    if z < 2:
        raise ValueError(f"coordination number must be >= 2, got {z}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"occupation probability must be in [0, 1], got {p}")
    return z


def bethe_pc(z: int) -> float:
    """Percolation threshold 1/(z - 1)."""
    z = int(z)
    if z < 2:
        raise ValueError(f"coordination number must be >= 2, got {z}")
    return 1.0 / (z - 1)


def bethe_correlation_g(z: int, p: float, l: int) -> float:
    """g(l) = z (z-1)^(l-1) p^l, the expected same-cluster count at depth l."""
    z = _validate(z, p)
    l = int(l)
    if l < 1:
        raise ValueError(f"chemical distance must be >= 1, got {l}")
    # grouped as ((z-1) p)^l to keep intermediate factors bounded at large l
    return z / (z - 1.0) * ((z - 1.0) * p) ** l


def bethe_correlation_length_sq(z: int, p: float) -> float:
    """xi_l^2 = p_c (p + p_c) / (p_c - p)^2, for p < p_c."""
    z = _validate(z, p)
    pc = bethe_pc(z)
    if p >= pc:
        raise DivergenceError(f"correlation length diverges for p >= p_c = {pc}")
    return pc * (p + pc) / (pc - p) ** 2


def bethe_mean_size(z: int, p: float) -> float:
    """S = p_c (1 + p) / (p_c - p), the size-biased mean cluster size, p < p_c."""
    z = _validate(z, p)
    pc = bethe_pc(z)
    if p >= pc:
        raise DivergenceError(f"mean cluster size diverges for p >= p_c = {pc}")
    return pc * (1.0 + p) / (pc - p)


@dataclass(frozen=True)
class CutoffParams:
    a: float
    sigma: float
    c: float


def bethe_cutoff(z: int, p: float) -> CutoffParams:
    """Cutoff parameters of n_s(p)/n_s(p_c) ~ exp(-c s).

    a = 1/(2 p_c^2 (1 - p_c)), sigma = 1/2, and
    c = -ln(1 - a (p_c - p)^(1/sigma)). Valid while the log argument is
    positive, i.e. a (p_c - p)^2 < 1.
    """
    z = _validate(z, p)
    pc = bethe_pc(z)
    a = 1.0 / (2.0 * pc * pc * (1.0 - pc))
    arg = 1.0 - a * (pc - p) ** 2
    if arg <= 0.0:
        raise DivergenceError(f"cutoff undefined: 1 - a (p_c - p)^2 = {arg} <= 0")
    return CutoffParams(a=a, sigma=SIGMA, c=-math.log(arg))


def bethe_cutoff_amplitude(z: int) -> float:
    """The amplitude a alone (p-independent)."""
    return bethe_cutoff(z, bethe_pc(z)).a


@dataclass(frozen=True)
class BetheMoment:
    value: float
    predicted_exponent: float


def bethe_moment(z: int, p: float, k: float) -> BetheMoment:
    """M_k = sum_s s^(k - tau) exp(-c s), summed to convergence.

    Diverges as |p_c - p|^(-(k + 1 - tau)/sigma); the predicted exponent
    is reported for comparison across a p-sequence. Requires p < p_c so
    the cutoff makes the sum converge.
    """
    z = _validate(z, p)
    pc = bethe_pc(z)
    if p >= pc:
        raise DivergenceError(f"moment sum does not converge for p >= p_c = {pc}")
    c = bethe_cutoff(z, p).c
    total = 0.0
    s0 = 1
    block = 1 << 14
    while True:
        s = np.arange(s0, s0 + block, dtype=np.float64)
        terms = s ** (k - TAU) * np.exp(-c * s)
        total += float(terms.sum())
        # safe to stop once terms are decreasing and negligible
        if terms[-1] < terms[0] and terms[-1] < 1e-15 * total:
            break
        s0 += block
    return BetheMoment(value=total, predicted_exponent=(k + 1.0 - TAU) / SIGMA)


def bethe_exponents() -> dict[str, float]:
    """Mean-field cluster exponents; D is computed from sigma and nu."""
    return {"tau": TAU, "sigma": SIGMA, "nu": NU, "D": 1.0 / (SIGMA * NU)}


# ---------------------------------------------------------------------------
# Monte Carlo growth


@dataclass(eq=False)
class BetheGrowth:
    """One grown cluster: total size, examined perimeter, per-shell counts.

    For a finished (non-truncated) growth the perimeter satisfies
    t = (z - 2) s + 2 exactly. A growth stopped by the size cap reports
    the perimeter examined so far and truncated=True.
    """

    size: int
    perimeter: int
    shells: np.ndarray
    truncated: bool


def grow_bethe_cluster(z: int, p: float, seed: int, cap: int = _DEFAULT_CAP) -> BetheGrowth:
    """Grow the cluster of an occupied origin, shell by shell.

    The origin exposes z slots; every later site exposes z - 1. Each slot
    is occupied independently with probability p, so shell l + 1 holds
    Binomial(m_l (z - 1), p) sites. Growth ends at extinction or when the
    size reaches cap.
    """
    z = _validate(z, p)
    if cap < 1:
        raise ValueError(f"growth cap must be >= 1, got {cap}")
    gen = _rng.stream(seed)
    shells = []
    size = 1
    perimeter = 0
    truncated = False
    slots = z
    while slots > 0:
        m = int(gen.binomial(slots, p))
        shells.append(m)
        size += m
        perimeter += slots - m
        slots = m * (z - 1)
        if size >= cap and slots > 0:
            truncated = True
            break
    return BetheGrowth(
        size=size,
        perimeter=perimeter,
        shells=np.asarray(shells, dtype=np.int64),
        truncated=truncated,
    )


@dataclass(eq=False)
class BetheEnsemble:
    """Aggregated growth realizations at fixed (z, p).

    shell_counts[r, l-1] is the number of cluster sites at chemical
    distance l in realization r, recorded up to shell_depth (deeper
    shells still grow, they are just not tabulated).
    """

    z: int
    p: float
    realizations: int
    cap: int
    master_seed: int
    sizes: np.ndarray
    perimeters: np.ndarray
    truncated: np.ndarray
    shell_counts: np.ndarray

    @property
    def mean_size(self) -> float:
        return float(self.sizes.mean())

    @property
    def sem_size(self) -> float:
        return float(self.sizes.std(ddof=1) / math.sqrt(self.sizes.size))

    @property
    def truncated_fraction(self) -> float:
        return float(self.truncated.mean())

    def shell_mean(self, l: int) -> float:
        """Empirical g(l) estimate: mean occupied count in shell l >= 1."""
        return float(self.shell_counts[:, l - 1].mean())

    def shell_sem(self, l: int) -> float:
        col = self.shell_counts[:, l - 1]
        return float(col.std(ddof=1) / math.sqrt(col.size))

    def perimeter_identity_fraction(self) -> float:
        """Fraction of non-truncated realizations with t = (z-2) s + 2."""
        done = ~self.truncated
        if not done.any():
            return float("nan")
        expect = (self.z - 2) * self.sizes[done] + 2
        return float((self.perimeters[done] == expect).mean())

    def size_histogram(self, truncated_ok: bool = False) -> dict[int, int]:
        """Cluster-size counts, by default over finished growths only.

        Sizes below the cap are unaffected by discarding capped growths
        (a capped growth would have ended larger than the cap).
        """
        keep = self.sizes if truncated_ok else self.sizes[~self.truncated]
        hist = np.bincount(keep)
        return {int(s): int(c) for s, c in enumerate(hist) if c > 0}


def run_bethe_ensemble(z: int, p: float, realizations: int, master_seed: int,
                       cap: int = _DEFAULT_CAP, shell_depth: int = 12,
                       workers: int = 1) -> BetheEnsemble:
    """Independent growth realizations with order-independent seeding.

    Realization k uses the seed derived from (master_seed, k), so results
    are identical for any worker count.
    """
    z = _validate(z, p)
    if realizations < 1:
        raise ValueError(f"realizations must be >= 1, got {realizations}")
    sizes = np.empty(realizations, np.int64)
    perimeters = np.empty(realizations, np.int64)
    truncated = np.zeros(realizations, bool)
    shell_counts = np.zeros((realizations, shell_depth), np.int64)

    def run_range(lo: int, hi: int) -> None:
        for k in range(lo, hi):
            growth = grow_bethe_cluster(z, p, _rng.spawn_seed(master_seed, k), cap=cap)
            sizes[k] = growth.size
            perimeters[k] = growth.perimeter
            truncated[k] = growth.truncated
            depth = min(shell_depth, growth.shells.size)
            shell_counts[k, :depth] = growth.shells[:depth]

    if workers <= 1:
        run_range(0, realizations)
    else:
        step = -(-realizations // workers)
        bounds = [(lo, min(lo + step, realizations)) for lo in range(0, realizations, step)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda b: run_range(*b), bounds))

    return BetheEnsemble(
        z=z,
        p=float(p),
        realizations=realizations,
        cap=cap,
        master_seed=int(master_seed),
        sizes=sizes,
        perimeters=perimeters,
        truncated=truncated,
        shell_counts=shell_counts,
    )
