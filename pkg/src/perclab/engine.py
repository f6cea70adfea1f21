"""Occupancy sampling, union-find labeling, and incremental sweeps.

One kernel drives everything: sites are activated in a given order and
unioned with already-active neighbors, so each bond is handled exactly
once. The union-find carries per-site displacement vectors to the root
(union by size, two-pass path compression), which gives unwrapped
cluster coordinates for radius measurements and detects wrapping on
periodic lattices: a redundant bond whose two endpoint displacements
disagree closes a loop around the torus.

Labeling a fixed configuration processes occupied sites in index order;
an incremental sweep processes all sites in a seeded random permutation
and records observables after every addition. Fixed-p (canonical) values
follow by binomial convolution over the occupation count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numba import njit
from scipy.optimize import brentq
from scipy.stats import binom

from perclab.lattice import LatticeGeometry
from perclab import rng as _rng

OBSERVABLES = (
    "largest_cluster_size",
    "cluster_count",
    "mean_finite_cluster_size",
    "spanning_indicator",
)


class NoCrossingError(RuntimeError):
    """The convolved spanning probability never reaches 1/2."""


# ---------------------------------------------------------------------------
# kernels


@njit(cache=True, nogil=True)
def _find(parent, disp, i, stack, vec):
    """Root of i; writes the displacement from i to the root into vec.

    Fully compresses the path: afterwards every visited node points
    straight at the root with its displacement rewritten accordingly.
    Union by size bounds tree height by log2(N), so a 64-slot stack
    covers any admissible lattice.
    """
    d = disp.shape[1]
    j = i
    depth = 0
    while parent[j] != j:
        stack[depth] = j
        depth += 1
        j = parent[j]
    root = j
    for a in range(d):
        vec[a] = 0
    for k in range(depth - 1, -1, -1):
        node = stack[k]
        for a in range(d):
            vec[a] += disp[node, a]
            disp[node, a] = vec[a]
        parent[node] = root
    return root


@njit(cache=True, nogil=True)
def _activate(order, sides, strides, periodic, span_mask, parent, size, disp,
              face_lo, face_hi, wrap, record, curve_largest, curve_count, curve_s2):
    """Activate sites in order, merging with active neighbors.

    parent must hold -1 at every site in `order` on entry. Returns
    (first_span, largest, cluster_count, sum_sq) where first_span is the
    1-based step after which a spanning (or wrapping) cluster first
    exists, -1 if never. With record=True the three curve arrays receive
    the largest size, cluster count, and sum of squared sizes after every
    step (index n = number of active sites).
    """
    n_act = order.shape[0]
    d = sides.shape[0]
    stack = np.empty(64, np.int64)
    va = np.empty(d, np.int64)
    vb = np.empty(d, np.int64)
    largest = np.int64(0)
    count = np.int64(0)
    s2 = np.int64(0)
    first_span = np.int64(-1)
    if record:
        curve_largest[0] = 0
        curve_count[0] = 0
        curve_s2[0] = 0
    for step in range(n_act):
        i = order[step]
        parent[i] = i
        size[i] = 1
        lo = np.int64(0)
        hi = np.int64(0)
        for a in range(d):
            c = (i // strides[a]) % sides[a]
            if c == 0:
                lo |= np.int64(1) << a
            if c == sides[a] - 1:
                hi |= np.int64(1) << a
        face_lo[i] = lo
        face_hi[i] = hi
        wrap[i] = 0
        count += 1
        s2 += 1
        if largest < 1:
            largest = 1
        for a in range(d):
            c = (i // strides[a]) % sides[a]
            for t in range(2):
                if t == 0:
                    sgn = -1
                    if c > 0:
                        j = i - strides[a]
                    elif periodic:
                        j = i + (sides[a] - 1) * strides[a]
                    else:
                        continue
                else:
                    sgn = 1
                    if c < sides[a] - 1:
                        j = i + strides[a]
                    elif periodic:
                        j = i - (sides[a] - 1) * strides[a]
                    else:
                        continue
                if parent[j] < 0:
                    continue
                ra = _find(parent, disp, i, stack, va)
                rb = _find(parent, disp, j, stack, vb)
                if ra == rb:
                    # redundant bond: on the torus a displacement mismatch
                    # means this bond closes a loop around the lattice
                    if periodic:
                        w = wrap[ra]
                        for u in range(d):
                            delta = va[u] - vb[u]
                            if u == a:
                                delta += sgn
                            if delta != 0:
                                w |= np.int64(1) << u
                        wrap[ra] = w
                        if first_span < 0 and w != 0:
                            first_span = step + 1
                else:
                    sa = size[ra]
                    sb = size[rb]
                    s2 += 2 * sa * sb
                    count -= 1
                    if sa + sb > largest:
                        largest = sa + sb
                    if sa >= sb:
                        parent[rb] = ra
                        for u in range(d):
                            delta = va[u] - vb[u]
                            if u == a:
                                delta += sgn
                            disp[rb, u] = delta
                        size[ra] = sa + sb
                        face_lo[ra] |= face_lo[rb]
                        face_hi[ra] |= face_hi[rb]
                        wrap[ra] |= wrap[rb]
                        r = ra
                    else:
                        parent[ra] = rb
                        for u in range(d):
                            delta = vb[u] - va[u]
                            if u == a:
                                delta -= sgn
                            disp[ra, u] = delta
                        size[rb] = sa + sb
                        face_lo[rb] |= face_lo[ra]
                        face_hi[rb] |= face_hi[ra]
                        wrap[rb] |= wrap[ra]
                        r = rb
                    if first_span < 0:
                        if periodic:
                            if wrap[r] != 0:
                                first_span = step + 1
                        elif (face_lo[r] & face_hi[r] & span_mask) != 0:
                            first_span = step + 1
        if record:
            curve_largest[step + 1] = largest
            curve_count[step + 1] = count
            curve_s2[step + 1] = s2
    return first_span, largest, count, s2


@njit(cache=True, nogil=True)
def _compress_all(parent, disp):
    stack = np.empty(64, np.int64)
    vec = np.empty(disp.shape[1], np.int64)
    for i in range(parent.shape[0]):
        if parent[i] >= 0:
            _find(parent, disp, i, stack, vec)


@njit(cache=True, nogil=True)
def _census_batch(occ, sides, strides, periodic, span_mask, counts):
    """Label every row of an occupancy block, accumulating census sums.

    Returns (m1_total, m2_total, span_total); counts[s] accumulates the
    number of clusters of size s across rows.
    """
    n_real, n_sites = occ.shape
    d = sides.shape[0]
    parent = np.full(n_sites, -1, np.int64)
    size = np.zeros(n_sites, np.int64)
    disp = np.zeros((n_sites, d), np.int32)
    face_lo = np.zeros(n_sites, np.int64)
    face_hi = np.zeros(n_sites, np.int64)
    wrap = np.zeros(n_sites, np.int64)
    order = np.empty(n_sites, np.int64)
    dummy = np.zeros(1, np.int64)
    m1_total = np.int64(0)
    m2_total = np.int64(0)
    span_total = np.int64(0)
    for r in range(n_real):
        n_occ = 0
        for i in range(n_sites):
            if occ[r, i]:
                order[n_occ] = i
                n_occ += 1
        first_span, largest, count, s2 = _activate(
            order[:n_occ], sides, strides, periodic, span_mask,
            parent, size, disp, face_lo, face_hi, wrap,
            False, dummy, dummy, dummy,
        )
        for k in range(n_occ):
            site = order[k]
            if parent[site] == site:
                counts[size[site]] += 1
        m1_total += n_occ
        m2_total += s2
        if first_span >= 0:
            span_total += 1
        for k in range(n_occ):
            parent[order[k]] = -1
    return m1_total, m2_total, span_total


# ---------------------------------------------------------------------------
# configurations and labelings


@dataclass(frozen=True, eq=False)
class Configuration:
    """One sampled occupancy pattern (bit-packed)."""

    geometry: LatticeGeometry
    p: float
    seed: int
    occupied_bits: np.ndarray
    occupied_count: int

    @cached_property
    def occupied_mask(self) -> np.ndarray:
        return np.unpackbits(self.occupied_bits, count=self.geometry.site_count).astype(bool)


@dataclass(eq=False)
class ClusterLabeling:
    """Union-find forest over one configuration, fully path-compressed.

    parent[i] is the root of i's cluster, or -1 for unoccupied sites;
    size[r] is valid at roots; disp[i] is the displacement from i to its
    root in unwrapped coordinates. face_lo/face_hi/wrap_mask are per-root
    axis bitmasks (boundary faces touched, axes wrapped).
    """

    geometry: LatticeGeometry
    parent: np.ndarray
    size: np.ndarray
    disp: np.ndarray
    face_lo: np.ndarray
    face_hi: np.ndarray
    wrap_mask: np.ndarray
    cluster_count: int
    occupied: int
    largest: int
    sum_sq: int
    spanning: bool


def sample_configuration(geometry: LatticeGeometry, p: float, seed: int) -> Configuration:
    """Occupy each site independently with probability p (seeded PCG64)."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"occupation probability must be in [0, 1], got {p}")
    gen = _rng.stream(seed)
    mask = gen.random(geometry.site_count) < p
    return Configuration(
        geometry=geometry,
        p=float(p),
        seed=int(seed),
        occupied_bits=np.packbits(mask),
        occupied_count=int(mask.sum()),
    )


def _labeling_for_order(geometry: LatticeGeometry, order: np.ndarray) -> ClusterLabeling:
    n_sites = geometry.site_count
    parent = np.full(n_sites, -1, np.int64)
    size = np.zeros(n_sites, np.int64)
    disp = np.zeros((n_sites, geometry.d), np.int32)
    face_lo = np.zeros(n_sites, np.int64)
    face_hi = np.zeros(n_sites, np.int64)
    wrap = np.zeros(n_sites, np.int64)
    dummy = np.zeros(1, np.int64)
    first_span, largest, count, s2 = _activate(
        order, geometry.sides_array, geometry.strides, geometry.periodic,
        np.int64(geometry.spanning_axes_mask),
        parent, size, disp, face_lo, face_hi, wrap,
        False, dummy, dummy, dummy,
    )
    _compress_all(parent, disp)
    return ClusterLabeling(
        geometry=geometry,
        parent=parent,
        size=size,
        disp=disp,
        face_lo=face_lo,
        face_hi=face_hi,
        wrap_mask=wrap,
        cluster_count=int(count),
        occupied=int(order.size),
        largest=int(largest),
        sum_sq=int(s2),
        spanning=bool(first_span >= 0),
    )


def label_clusters(config: Configuration) -> ClusterLabeling:
    """Union-find labeling of one configuration (occupied sites, index order)."""
    order = np.flatnonzero(config.occupied_mask).astype(np.int64)
    return _labeling_for_order(config.geometry, order)


# ---------------------------------------------------------------------------
# incremental sweeps


@dataclass(eq=False)
class SweepResult:
    """One incremental sweep: per-step observables over a site permutation.

    Curve arrays are indexed by n (number of active sites, 0..N) and are
    None when the sweep was run without curve recording. first_span is the
    step after which a spanning cluster first exists, -1 if never.
    """

    geometry: LatticeGeometry
    seed: int
    order: np.ndarray
    first_span: int
    largest: np.ndarray | None
    cluster_count: np.ndarray | None
    sum_sq: np.ndarray | None

    @property
    def n_star(self) -> int:
        """First-spanning step; N + 1 (one past full) when never spanning."""
        return self.first_span if self.first_span >= 0 else self.geometry.site_count + 1

    def mean_finite_curve(self) -> np.ndarray:
        """Mean finite-cluster size after each step, largest cluster excluded.

        S_n = (sum s^2 - s_max^2) / (n - s_max), defined as 0 when every
        active site sits in the largest cluster.
        """
        if self.largest is None or self.sum_sq is None:
            raise ValueError("sweep was run without curve recording")
        n = np.arange(self.largest.size, dtype=np.int64)
        big = self.largest
        denom = n - big
        num = self.sum_sq - big * big
        out = np.zeros(n.size, np.float64)
        np.divide(num, denom, out=out, where=denom > 0)
        return out


def newman_ziff_sweep(geometry: LatticeGeometry, seed: int,
                      observables=OBSERVABLES, record_curves: bool = True) -> SweepResult:
    """Add all sites one at a time in a seeded permutation, tracking clusters.

    The recorded integer curves (largest size, cluster count, sum of
    squared sizes) determine every supported observable at every n.
    """
    unknown = set(observables) - set(OBSERVABLES)
    if unknown:
        raise ValueError(f"unknown observables: {sorted(unknown)}")
    if not record_curves and set(observables) - {"spanning_indicator"}:
        raise ValueError("only spanning_indicator is available without curve recording")
    n_sites = geometry.site_count
    gen = _rng.stream(seed)
    order = gen.permutation(n_sites).astype(np.int64)
    parent = np.full(n_sites, -1, np.int64)
    size = np.zeros(n_sites, np.int64)
    disp = np.zeros((n_sites, geometry.d), np.int32)
    face_lo = np.zeros(n_sites, np.int64)
    face_hi = np.zeros(n_sites, np.int64)
    wrap = np.zeros(n_sites, np.int64)
    if record_curves:
        curve_largest = np.empty(n_sites + 1, np.int64)
        curve_count = np.empty(n_sites + 1, np.int64)
        curve_s2 = np.empty(n_sites + 1, np.int64)
    else:
        curve_largest = curve_count = curve_s2 = np.zeros(1, np.int64)
    first_span, _, _, _ = _activate(
        order, geometry.sides_array, geometry.strides, geometry.periodic,
        np.int64(geometry.spanning_axes_mask),
        parent, size, disp, face_lo, face_hi, wrap,
        record_curves, curve_largest, curve_count, curve_s2,
    )
    return SweepResult(
        geometry=geometry,
        seed=int(seed),
        order=order,
        first_span=int(first_span),
        largest=curve_largest if record_curves else None,
        cluster_count=curve_count if record_curves else None,
        sum_sq=curve_s2 if record_curves else None,
    )


@dataclass(eq=False)
class MicrocanonicalCurve:
    """Ensemble mean of one observable after n occupied sites, n = 0..N."""

    observable: str
    values: np.ndarray
    stderr: np.ndarray
    realizations: int


@dataclass(eq=False)
class SweepEnsemble:
    geometry: LatticeGeometry
    master_seed: int
    realizations: int
    curves: dict[str, MicrocanonicalCurve]
    first_span: np.ndarray

    @property
    def n_star(self) -> np.ndarray:
        out = self.first_span.copy()
        out[out < 0] = self.geometry.site_count + 1
        return out


def run_sweep_ensemble(geometry: LatticeGeometry, realizations: int, master_seed: int,
                       observables=OBSERVABLES, workers: int = 1,
                       record_curves: bool = True) -> SweepEnsemble:
    """Average sweep observables over independent seeded permutations.

    Realization k always uses the seed derived from (master_seed, k), and
    per-realization results are accumulated in realization order, so the
    output is byte-identical for any worker count.
    """
    if realizations < 1:
        raise ValueError(f"realizations must be >= 1, got {realizations}")
    unknown = set(observables) - set(OBSERVABLES)
    if unknown:
        raise ValueError(f"unknown observables: {sorted(unknown)}")
    n_sites = geometry.site_count
    want_curves = bool(set(observables) - {"spanning_indicator"})
    if want_curves and not record_curves:
        raise ValueError("requested observables need record_curves=True")

    track = {}
    for obs in observables:
        if obs != "spanning_indicator":
            track[obs] = (np.zeros(n_sites + 1), np.zeros(n_sites + 1))  # sum, sumsq
    span_counts = np.zeros(n_sites + 1, np.int64)
    first_span = np.empty(realizations, np.int64)

    def one(k: int) -> SweepResult:
        return newman_ziff_sweep(
            geometry, _rng.spawn_seed(master_seed, k),
            observables=observables, record_curves=record_curves,
        )

    def accumulate(k: int, res: SweepResult) -> None:
        first_span[k] = res.first_span
        if "spanning_indicator" in observables:
            span_counts[res.n_star:] += 1
        for obs, (tot, tot_sq) in track.items():
            if obs == "largest_cluster_size":
                vals = res.largest.astype(np.float64)
            elif obs == "cluster_count":
                vals = res.cluster_count.astype(np.float64)
            else:
                vals = res.mean_finite_curve()
            tot += vals
            tot_sq += vals * vals

    if workers <= 1:
        for k in range(realizations):
            accumulate(k, one(k))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for k, res in enumerate(pool.map(one, range(realizations))):
                accumulate(k, res)

    curves = {}
    r = realizations
    for obs, (tot, tot_sq) in track.items():
        mean = tot / r
        if r > 1:
            var = np.clip(tot_sq / r - mean * mean, 0.0, None) * (r / (r - 1))
            sem = np.sqrt(var / r)
        else:
            sem = np.zeros(n_sites + 1)
        curves[obs] = MicrocanonicalCurve(obs, mean, sem, r)
    if "spanning_indicator" in observables:
        phat = span_counts / r
        if r > 1:
            sem = np.sqrt(phat * (1.0 - phat) / (r - 1))
        else:
            sem = np.zeros(n_sites + 1)
        curves["spanning_indicator"] = MicrocanonicalCurve("spanning_indicator", phat, sem, r)
    return SweepEnsemble(
        geometry=geometry,
        master_seed=int(master_seed),
        realizations=realizations,
        curves=curves,
        first_span=first_span,
    )


# ---------------------------------------------------------------------------
# canonical convolution and threshold estimation


def canonical_convolve(curve, p: float) -> float:
    """Fixed-p expectation of a microcanonical curve.

    Q(p) = sum_n B(N, n, p) Q_n with binomial weights built by a
    log-space ratio recurrence and normalized around the mode, so the
    result is stable for any N.
    """
    values = np.asarray(getattr(curve, "values", curve), dtype=np.float64)
    if values.ndim != 1 or values.size < 1:
        raise ValueError("curve must be a 1-d array of length N + 1")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability must be in [0, 1], got {p}")
    n_sites = values.size - 1
    if p == 0.0 or n_sites == 0:
        return float(values[0])
    if p == 1.0:
        return float(values[-1])
    n = np.arange(1, n_sites + 1, dtype=np.float64)
    log_ratio = np.log((n_sites - n + 1.0) / n) + math.log(p) - math.log1p(-p)
    log_w = np.empty(n_sites + 1)
    log_w[0] = 0.0
    np.cumsum(log_ratio, out=log_w[1:])
    log_w -= log_w.max()
    w = np.exp(log_w)
    w /= w.sum()
    return float(w @ values)


@dataclass(eq=False)
class ThresholdEstimate:
    p_c_hat: float
    stderr: float
    realizations: int
    n_star: np.ndarray


def _crossing_p(n_star: np.ndarray, n_sites: int) -> float:
    # mean_r sf(n*_r - 1; N, p) is exactly the binomial convolution of the
    # spanning ECDF; the sentinel n* = N + 1 contributes sf(N) = 0
    k = np.asarray(n_star, dtype=np.int64) - 1

    def f(p: float) -> float:
        return float(np.mean(binom.sf(k, n_sites, p))) - 0.5

    top = f(1.0)
    if top < 0.0:
        raise NoCrossingError("spanning probability at p = 1 is below 1/2")
    if top == 0.0:
        return 1.0
    return float(brentq(f, 0.0, 1.0, xtol=1e-12))


def threshold_from_ensemble(ens: SweepEnsemble, bootstrap: int = 200) -> ThresholdEstimate:
    """Crossing estimate from an already-run sweep ensemble.

    The bootstrap stream is seeded from (master_seed, realizations), the
    first spawn index no sweep realization used.
    """
    n_sites = ens.geometry.site_count
    realizations = ens.realizations
    n_star = ens.n_star
    p_hat = _crossing_p(n_star, n_sites)

    boot = []
    if bootstrap > 0 and realizations > 1:
        gen = _rng.spawn_stream(ens.master_seed, realizations)
        for _ in range(bootstrap):
            resample = n_star[gen.integers(0, realizations, size=realizations)]
            try:
                boot.append(_crossing_p(resample, n_sites))
            except NoCrossingError:
                continue
    stderr = float(np.std(boot, ddof=1)) if len(boot) >= 2 else float("nan")
    return ThresholdEstimate(
        p_c_hat=p_hat,
        stderr=stderr,
        realizations=realizations,
        n_star=n_star,
    )


def estimate_threshold(geometry: LatticeGeometry, realizations: int, master_seed: int,
                       workers: int = 1, bootstrap: int = 200) -> ThresholdEstimate:
    """p at which the canonical spanning probability crosses 1/2.

    Each sweep contributes its first-spanning step n*; the spanning ECDF
    over n is convolved to fixed p and the crossing located by Brent root
    finding. stderr is the standard deviation of the crossing over
    bootstrap resamples of the realizations.
    """
    ens = run_sweep_ensemble(
        geometry, realizations, master_seed,
        observables=(), record_curves=False, workers=workers,
    )
    return threshold_from_ensemble(ens, bootstrap=bootstrap)


# ---------------------------------------------------------------------------
# fixed-p census ensembles (tiny lattices, oracle comparisons)


@dataclass(eq=False)
class CensusEnsembleSummary:
    """Pooled census sums over a fixed-p ensemble.

    counts[s] is the total number of size-s clusters over all
    realizations; m1/m2 are pooled first and second size moments;
    span_count is the number of spanning realizations.
    """

    geometry: LatticeGeometry
    p: float
    realizations: int
    counts: np.ndarray
    m1: int
    m2: int
    span_count: int

    @property
    def spanning_fraction(self) -> float:
        return self.span_count / self.realizations

    @property
    def mean_size(self) -> float:
        """Pooled ratio estimator of S = E[M2]/E[M1]."""
        if self.m1 == 0:
            raise ValueError("no occupied sites in the whole ensemble")
        return self.m2 / self.m1

    @property
    def n_s_estimate(self) -> np.ndarray:
        """Estimated cluster numbers per site."""
        return self.counts / (self.realizations * self.geometry.site_count)


def run_census_ensemble(geometry: LatticeGeometry, p: float, realizations: int,
                        master_seed: int, block: int = 1 << 14) -> CensusEnsembleSummary:
    """Pooled cluster census over many independent configurations.

    Occupancy is drawn from a single documented PCG64 stream (seeded by
    the master seed) in blocks, then every realization is labeled with the
    same union-find kernel as label_clusters. Single-threaded and
    deterministic. Intended for small lattices; memory scales with
    block * site_count.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"occupation probability must be in [0, 1], got {p}")
    if realizations < 1:
        raise ValueError(f"realizations must be >= 1, got {realizations}")
    n_sites = geometry.site_count
    gen = _rng.stream(master_seed)
    counts = np.zeros(n_sites + 1, np.int64)
    m1 = 0
    m2 = 0
    span = 0
    done = 0
    while done < realizations:
        nb = min(block, realizations - done)
        occ = gen.random((nb, n_sites)) < p
        bm1, bm2, bspan = _census_batch(
            np.ascontiguousarray(occ),
            geometry.sides_array, geometry.strides, geometry.periodic,
            np.int64(geometry.spanning_axes_mask), counts,
        )
        m1 += int(bm1)
        m2 += int(bm2)
        span += int(bspan)
        done += nb
    return CensusEnsembleSummary(
        geometry=geometry,
        p=float(p),
        realizations=realizations,
        counts=counts,
        m1=m1,
        m2=m2,
        span_count=span,
    )
