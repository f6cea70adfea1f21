"""Cluster statistics and scaling estimators.

Empirical counterparts of the standard percolation observables: cluster
census with per-cluster radii of gyration, chemical and Euclidean
correlation measures, discrete power-law (tau), fractal-dimension (D),
and exponential-cutoff (c) estimators, plus an exhaustive enumeration
oracle for tiny lattices that the Monte Carlo pipeline is validated
against. The oracle never touches the union-find machinery: it finds
components by breadth-first search over explicit site sets, so oracle
and engine disagreeing means one of them is wrong.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit
from scipy.optimize import brentq
from scipy.special import zeta

from perclab.lattice import LatticeGeometry
from perclab import rng as _rng

_ENUMERATION_CAP = 20


class UndefinedValueError(ValueError):
    """An observable is undefined for this input (e.g. empty census)."""


class DegenerateFitError(ValueError):
    """The data cannot constrain the requested fit."""


# ---------------------------------------------------------------------------
# census


@dataclass(eq=False)
class ClusterCensus:
    """Cluster-size census of one labeled configuration.

    size_histogram maps size s to the number of clusters of that size.
    cluster_sizes / cluster_spanning / cluster_wrapped hold one entry per
    cluster; cluster_radii is populated only when the census is built
    with_radii, and radii of wrapping clusters are NaN (their spatial
    extent is not defined on the torus).
    """

    size_histogram: dict[int, int]
    site_count: int
    d: int
    occupied: int
    largest: int
    spanning: bool
    cluster_sizes: np.ndarray | None = None
    cluster_radii: np.ndarray | None = None
    cluster_spanning: np.ndarray | None = None
    cluster_wrapped: np.ndarray | None = None


def cluster_census(labeling, with_radii: bool = True) -> ClusterCensus:
    """Histogram root sizes of a cluster labeling; optionally measure radii.

    Radii come from the unwrapped displacement vectors carried by the
    union-find, so they are correct under periodic boundaries as long as
    the cluster does not wrap; wrapping clusters get NaN.
    """
    geometry: LatticeGeometry = labeling.geometry
    parent = labeling.parent
    occupied_sites = np.flatnonzero(parent >= 0)
    occupied = occupied_sites.size
    if occupied == 0:
        return ClusterCensus(
            size_histogram={},
            site_count=geometry.site_count,
            d=geometry.d,
            occupied=0,
            largest=0,
            spanning=False,
            cluster_sizes=np.empty(0, np.int64),
            cluster_radii=np.empty(0, np.float64) if with_radii else None,
            cluster_spanning=np.empty(0, bool),
            cluster_wrapped=np.empty(0, bool),
        )
    roots = occupied_sites[parent[occupied_sites] == occupied_sites]
    sizes = labeling.size[roots]
    hist_arr = np.bincount(sizes)
    histogram = {int(s): int(c) for s, c in enumerate(hist_arr) if c > 0 and s > 0}
    largest = int(sizes.max())

    if geometry.periodic:
        span_flags = labeling.wrap_mask[roots] != 0
    else:
        eligible = np.int64(geometry.spanning_axes_mask)
        span_flags = (labeling.face_lo[roots] & labeling.face_hi[roots] & eligible) != 0
    wrapped_flags = labeling.wrap_mask[roots] != 0

    cluster_radii = None
    if with_radii:
        labels = np.searchsorted(roots, parent[occupied_sites])
        # unwrapped position = root coordinates + displacement to root
        pos = geometry.coords_of(roots)[labels].astype(np.float64)
        pos += labeling.disp[occupied_sites]
        k = roots.size
        s_f = sizes.astype(np.float64)
        rsq = np.zeros(k, np.float64)
        for a in range(geometry.d):
            tot = np.bincount(labels, weights=pos[:, a], minlength=k)
            tot_sq = np.bincount(labels, weights=pos[:, a] ** 2, minlength=k)
            rsq += tot_sq / s_f - (tot / s_f) ** 2
        np.clip(rsq, 0.0, None, out=rsq)
        cluster_radii = np.sqrt(rsq)
        cluster_radii[wrapped_flags] = np.nan

    return ClusterCensus(
        size_histogram=histogram,
        site_count=geometry.site_count,
        d=geometry.d,
        occupied=int(occupied),
        largest=largest,
        spanning=bool(span_flags.any()),
        cluster_sizes=sizes.astype(np.int64),
        cluster_radii=cluster_radii,
        cluster_spanning=span_flags,
        cluster_wrapped=wrapped_flags,
    )


def mean_cluster_size(census: ClusterCensus, exclude_largest: bool = False) -> float:
    """Size-weighted mean cluster size S = sum s^2 count / sum s count.

    With exclude_largest, exactly one instance of the largest cluster is
    removed before taking the ratio (ties keep their remaining instances).
    """
    if census.occupied == 0:
        raise UndefinedValueError("mean cluster size of an empty configuration")
    m1 = 0
    m2 = 0
    for s, c in census.size_histogram.items():
        m1 += s * c
        m2 += s * s * c
    if exclude_largest:
        m1 -= census.largest
        m2 -= census.largest**2
    if m1 == 0:
        return 0.0
    return m2 / m1


def percolation_strength(census: ClusterCensus) -> float:
    """Fraction of occupied sites contained in the largest cluster."""
    if census.occupied == 0:
        raise UndefinedValueError("percolation strength of an empty configuration")
    return census.largest / census.occupied


# ---------------------------------------------------------------------------
# correlation functions


@dataclass(eq=False)
class CorrelationEstimate:
    """Mean same-cluster site count versus distance."""

    kind: str  # "chemical" or "euclidean"
    values: dict[int, float]
    stderr: dict[int, float]
    sample_size: int


@njit(cache=True, nogil=True)
def _chemical_counts(occ, sides, strides, periodic, origins, l_max):
    n_sites = occ.shape[0]
    d = sides.shape[0]
    out = np.zeros((origins.shape[0], l_max + 1), np.int64)
    dist = np.full(n_sites, -1, np.int32)
    queue = np.empty(n_sites, np.int64)
    for oi in range(origins.shape[0]):
        origin = origins[oi]
        head = 0
        tail = 0
        dist[origin] = 0
        queue[tail] = origin
        tail += 1
        out[oi, 0] += 1
        while head < tail:
            u = queue[head]
            head += 1
            du = dist[u]
            if du >= l_max:
                continue
            for a in range(d):
                c = (u // strides[a]) % sides[a]
                for t in range(2):
                    if t == 0:
                        if c > 0:
                            v = u - strides[a]
                        elif periodic:
                            v = u + (sides[a] - 1) * strides[a]
                        else:
                            continue
                    else:
                        if c < sides[a] - 1:
                            v = u + strides[a]
                        elif periodic:
                            v = u - (sides[a] - 1) * strides[a]
                        else:
                            continue
                    if occ[v] and dist[v] < 0:
                        dist[v] = du + 1
                        out[oi, du + 1] += 1
                        queue[tail] = v
                        tail += 1
        for q in range(tail):
            dist[queue[q]] = -1
    return out


def chemical_correlation(config, origin_count: int, l_max: int, seed: int = 0) -> CorrelationEstimate:
    """g(l): mean number of same-cluster sites at chemical distance l.

    Origins are drawn uniformly over occupied sites with replacement
    (size-biased, the convention under which S = 1 + sum_l g(l)).
    """
    if l_max < 1:
        raise ValueError(f"l_max must be >= 1, got {l_max}")
    if origin_count < 1:
        raise ValueError(f"origin_count must be >= 1, got {origin_count}")
    geometry: LatticeGeometry = config.geometry
    occ = config.occupied_mask
    occupied_sites = np.flatnonzero(occ)
    if occupied_sites.size == 0:
        raise UndefinedValueError("no occupied sites to draw origins from")
    gen = _rng.stream(seed)
    origins = occupied_sites[gen.integers(0, occupied_sites.size, size=origin_count)]
    counts = _chemical_counts(
        occ,
        geometry.sides_array,
        geometry.strides,
        geometry.periodic,
        origins.astype(np.int64),
        int(l_max),
    )
    means = counts.mean(axis=0)
    if origin_count > 1:
        sems = counts.std(axis=0, ddof=1) / math.sqrt(origin_count)
    else:
        sems = np.zeros(l_max + 1)
    values = {l: float(means[l]) for l in range(1, l_max + 1)}
    stderr = {l: float(sems[l]) for l in range(1, l_max + 1)}
    return CorrelationEstimate(kind="chemical", values=values, stderr=stderr, sample_size=origin_count)


def correlation_length_chemical(estimate: CorrelationEstimate) -> float:
    """xi_l = sqrt(sum l^2 g(l) / sum g(l)) over the measured range."""
    num = 0.0
    den = 0.0
    for l, g in estimate.values.items():
        num += l * l * g
        den += g
    if den <= 0.0:
        raise UndefinedValueError("correlation function is zero everywhere")
    return math.sqrt(num / den)


def radius_of_gyration(points, geometry: LatticeGeometry | None = None, method: str = "direct") -> float:
    """Root-mean-square distance of points from their centroid.

    Points must already be unwrapped (periodic images resolved). The
    "pairs" method evaluates the equivalent pairwise form
    sqrt(sum_ij |r_i - r_j|^2 / (2 s^2)) and exists as an independent
    cross-check; both agree to ~1e-9 on any input.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 1:
        raise ValueError("points must be a nonempty (s, d) array")
    if geometry is not None and pts.shape[1] != geometry.d:
        raise ValueError(f"points are {pts.shape[1]}-dimensional, lattice is {geometry.d}-dimensional")
    s = pts.shape[0]
    if method == "direct":
        centered = pts - pts.mean(axis=0)
        return float(np.sqrt((centered**2).sum() / s))
    if method == "pairs":
        diff = pts[:, None, :] - pts[None, :, :]
        total = float((diff**2).sum())
        return float(np.sqrt(total / (2 * s * s)))
    raise ValueError(f"unknown method {method!r}")


def euclidean_correlation_length_sq(census: ClusterCensus) -> float:
    """xi_r^2 = 2 sum_s R_s^2 s^2 n_s / sum_s s^2 n_s from measured radii.

    Uses per-cluster measured radii (not a fitted power law); wrapping
    clusters carry NaN radii and are excluded.
    """
    if census.cluster_sizes is None or census.cluster_radii is None:
        raise UndefinedValueError("census was built without per-cluster radii")
    valid = np.isfinite(census.cluster_radii)
    if not valid.any():
        raise UndefinedValueError("no clusters with a defined radius")
    s = census.cluster_sizes[valid].astype(np.float64)
    rsq = census.cluster_radii[valid] ** 2
    return float(2.0 * (rsq * s * s).sum() / (s * s).sum())


# ---------------------------------------------------------------------------
# estimators


@dataclass(frozen=True)
class PowerLawFit:
    tau_hat: float
    stderr: float
    s_min: int
    sample_size: int


@dataclass(frozen=True)
class FractalDimensionFit:
    D_hat: float
    stderr: float
    s_lo: float
    s_hi: float
    sample_size: int


@dataclass(frozen=True)
class CutoffFit:
    c_hat: float
    stderr: float
    bins_used: int


def _log_zeta_slope(tau: float, s_min: int) -> float:
    h = 1e-5
    return (math.log(zeta(tau + h, s_min)) - math.log(zeta(tau - h, s_min))) / (2 * h)


def fit_power_law(samples, s_min: int = 1) -> PowerLawFit:
    """Discrete maximum-likelihood estimate of the size-distribution exponent.

    Model: P(s) = s^-tau / zeta(tau, s_min) on s >= s_min. The likelihood
    equation -zeta'(tau)/zeta(tau) = mean(log s) is solved by bracketed
    root finding. stderr is the large-n approximation (tau_hat - 1)/sqrt(n).
    """
    s = np.asarray(samples, dtype=np.int64)
    if s_min < 1:
        raise ValueError(f"s_min must be >= 1, got {s_min}")
    s = s[s >= s_min]
    n = s.size
    if n < 100:
        raise ValueError(f"need at least 100 samples >= s_min, got {n}")
    if np.all(s == s[0]):
        raise DegenerateFitError("all samples equal; exponent unbounded")
    mean_log = float(np.log(s).mean())

    def f(tau):
        return -_log_zeta_slope(tau, s_min) - mean_log

    lo = 1.0001
    hi = 2.0
    while f(hi) > 0:
        hi *= 2.0
        if hi > 512:
            raise DegenerateFitError("samples too concentrated near s_min")
    tau_hat = float(brentq(f, lo, hi, xtol=1e-10))
    return PowerLawFit(tau_hat=tau_hat, stderr=(tau_hat - 1.0) / math.sqrt(n), s_min=int(s_min), sample_size=int(n))


def fit_fractal_dimension(sizes, radii, s_range) -> FractalDimensionFit:
    """Least-squares slope of log R_s vs log s; D_hat is its reciprocal.

    Pairs outside [s_lo, s_hi] and pairs with nonpositive or undefined
    radii are dropped; at least 10 must remain. R_s is the mean radius at
    size s, so pairs are first averaged in logarithmic size bins (four
    per decade); fitting raw pairs instead would let the dense small-s
    end dominate the slope. With fewer than three populated bins the
    regression falls back to the raw pairs.
    """
    s_lo, s_hi = s_range
    s = np.asarray(sizes, dtype=np.float64)
    r = np.asarray(radii, dtype=np.float64)
    if s.shape != r.shape:
        raise ValueError("sizes and radii must have matching shapes")
    keep = (s >= s_lo) & (s <= s_hi) & np.isfinite(r) & (r > 0)
    s = s[keep]
    r = r[keep]
    n = s.size
    if n < 10:
        raise ValueError(f"need at least 10 pairs inside [{s_lo}, {s_hi}], got {n}")
    x = np.log(s)
    y = np.log(r)
    n_bins = max(1, round(4 * math.log10(s_hi / s_lo)))
    edges = np.linspace(math.log(s_lo), math.log(s_hi), n_bins + 1)
    which = np.clip(np.digitize(x, edges) - 1, 0, n_bins - 1)
    filled = np.unique(which)
    if filled.size >= 3:
        x = np.array([x[which == b].mean() for b in filled])
        y = np.array([y[which == b].mean() for b in filled])
    xc = x - x.mean()
    sxx = float((xc**2).sum())
    if sxx == 0.0:
        raise DegenerateFitError("all sizes equal inside the fit range")
    slope = float((xc * y).sum() / sxx)
    resid = y - y.mean() - slope * xc
    dof = max(x.size - 2, 1)
    se_slope = math.sqrt(float((resid**2).sum()) / dof / sxx)
    if slope <= 0.0:
        raise DegenerateFitError(f"nonpositive log-log slope {slope:.3g}")
    return FractalDimensionFit(
        D_hat=1.0 / slope,
        stderr=se_slope / slope**2,
        s_lo=float(s_lo),
        s_hi=float(s_hi),
        sample_size=int(n),
    )


def fit_exponential_cutoff(counts_at_p, counts_at_pc, s_range) -> CutoffFit:
    """Cutoff rate c from the decay of the count ratio n_s(p)/n_s(p_c).

    Both inputs map cluster size to a raw cluster count. Sizes are grouped
    into factor-2 logarithmic bins over [s_lo, s_hi); within each bin the
    log ratio of total counts is regressed against the count-weighted mean
    size, weighted by the inverse Poisson variance 1/n1 + 1/n2. Any
    multiplicative sampling bias common to both histograms (for instance
    size-biased growth sampling) cancels in the ratio, leaving the slope
    -c. Bins with a zero count on either side are dropped; fewer than 3
    surviving bins cannot constrain the slope.
    """
    s_lo, s_hi = s_range
    if s_lo < 1 or s_hi <= s_lo:
        raise ValueError(f"bad size range [{s_lo}, {s_hi})")
    edges = [float(s_lo)]
    while edges[-1] * 2 < s_hi:
        edges.append(edges[-1] * 2)
    edges.append(float(s_hi))

    xs = []
    ys = []
    ws = []
    for e0, e1 in zip(edges[:-1], edges[1:]):
        n1 = 0
        n2 = 0
        sw = 0.0
        for hist, which in ((counts_at_p, 0), (counts_at_pc, 1)):
            for size, count in hist.items():
                if e0 <= size < e1 and count > 0:
                    if which == 0:
                        n1 += count
                    else:
                        n2 += count
                    sw += size * count
        if n1 == 0 or n2 == 0:
            continue
        xs.append(sw / (n1 + n2))
        ys.append(math.log(n1 / n2))
        ws.append(1.0 / (1.0 / n1 + 1.0 / n2))
    if len(xs) < 3:
        raise DegenerateFitError(f"only {len(xs)} usable log bins in [{s_lo}, {s_hi})")
    x = np.asarray(xs)
    y = np.asarray(ys)
    w = np.asarray(ws)
    xbar = float((w * x).sum() / w.sum())
    ybar = float((w * y).sum() / w.sum())
    sxx = float((w * (x - xbar) ** 2).sum())
    if sxx == 0.0:
        raise DegenerateFitError("all bins collapse to one abscissa")
    slope = float((w * (x - xbar) * (y - ybar)).sum() / sxx)
    stderr = math.sqrt(1.0 / sxx)
    return CutoffFit(c_hat=max(0.0, -slope), stderr=stderr, bins_used=len(xs))


# ---------------------------------------------------------------------------
# exhaustive enumeration oracle


@dataclass(frozen=True, eq=False)
class ExactReference:
    """Exact percolation expectations on a tiny lattice.

    Every quantity is an exact expectation over all 2^N configurations
    (floating-point only in the final p-weighting). Second moments are
    included so Monte Carlo estimators can be tested against exact
    sampling variances rather than their own noise.
    """

    geometry: LatticeGeometry
    p: float
    expected_counts: np.ndarray  # E[count_s], indexed by s
    count_variance: np.ndarray  # Var[count_s]
    mean_m1: float  # E[sum_s s count_s]  (the occupied count)
    mean_m2: float  # E[sum_s s^2 count_s]
    var_m1: float
    var_m2: float
    cov_m1_m2: float
    spanning_probability: float

    @property
    def n_s(self) -> np.ndarray:
        """Expected cluster numbers per site."""
        return self.expected_counts / self.geometry.site_count

    @property
    def mean_size(self) -> float:
        """S = E[M2]/E[M1], the ensemble size-weighted mean cluster size."""
        if self.mean_m1 == 0.0:
            raise UndefinedValueError("mean cluster size undefined at p = 0")
        return self.mean_m2 / self.mean_m1


def _unwrapped_step(cu, cv, sides):
    # neighbors differ along exactly one axis by +-1, possibly wrapped
    step = []
    for a, (x, y) in enumerate(zip(cu, cv)):
        delta = y - x
        if delta == sides[a] - 1:
            delta = -1
        elif delta == -(sides[a] - 1):
            delta = 1
        step.append(delta)
    return tuple(step)


@lru_cache(maxsize=32)
def _enumeration_tables(geometry: LatticeGeometry):
    """Per-popcount accumulators over all 2^N configurations.

    Everything downstream (counts, moments, spanning probability and all
    their variances) is a polynomial in p with these integer tables as
    coefficients.
    """
    n_sites = geometry.site_count
    if n_sites > _ENUMERATION_CAP:
        raise ValueError(
            f"exhaustive enumeration is limited to {_ENUMERATION_CAP} sites, got {n_sites}"
        )
    d = geometry.d
    sides = geometry.sides
    periodic = geometry.periodic
    nbrs = [geometry.neighbors(i) for i in range(n_sites)]
    coords = [geometry.index_to_coords(i) for i in range(n_sites)]
    eligible = [s >= 2 for s in sides]

    cnt = np.zeros(n_sites + 1, np.int64)
    count_by_size = np.zeros((n_sites + 1, n_sites + 1), np.int64)
    count_sq_by_size = np.zeros((n_sites + 1, n_sites + 1), np.int64)
    m2_tab = np.zeros(n_sites + 1, np.int64)
    m2_sq_tab = np.zeros(n_sites + 1, np.int64)
    span_tab = np.zeros(n_sites + 1, np.int64)

    for mask in range(1 << n_sites):
        occ = [i for i in range(n_sites) if (mask >> i) & 1]
        k = len(occ)
        cnt[k] += 1
        if k == 0:
            continue
        occ_set = set(occ)
        seen = set()
        sizes = []
        config_spans = False
        for start in occ:
            if start in seen:
                continue
            pos = {start: coords[start]}
            seen.add(start)
            stack = [start]
            comp_size = 0
            lo = [False] * d
            hi = [False] * d
            wraps = False
            while stack:
                u = stack.pop()
                comp_size += 1
                cu = coords[u]
                for a in range(d):
                    if cu[a] == 0:
                        lo[a] = True
                    if cu[a] == sides[a] - 1:
                        hi[a] = True
                for v in nbrs[u]:
                    if v not in occ_set:
                        continue
                    step = _unwrapped_step(cu, coords[v], sides)
                    pv = tuple(pos[u][a] + step[a] for a in range(d))
                    if v in pos:
                        if pos[v] != pv:
                            wraps = True
                    else:
                        pos[v] = pv
                        seen.add(v)
                        stack.append(v)
            sizes.append(comp_size)
            if periodic:
                if wraps:
                    config_spans = True
            elif any(lo[a] and hi[a] and eligible[a] for a in range(d)):
                config_spans = True
        m2 = 0
        per_size = {}
        for s in sizes:
            m2 += s * s
            per_size[s] = per_size.get(s, 0) + 1
        for s, c in per_size.items():
            count_by_size[k, s] += c
            count_sq_by_size[k, s] += c * c
        m2_tab[k] += m2
        m2_sq_tab[k] += m2 * m2
        if config_spans:
            span_tab[k] += 1
    return cnt, count_by_size, count_sq_by_size, m2_tab, m2_sq_tab, span_tab


def enumerate_exact(geometry: LatticeGeometry, p: float) -> ExactReference:
    """Exact cluster statistics by summation over all 2^N configurations.

    Works for any geometry with at most 20 sites. Spanning means touching
    both opposite faces along some axis of side >= 2 (free boundaries) or
    wrapping around some axis (periodic boundaries), matching the engine's
    convention but detected by an independent position-tracking BFS.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"occupation probability must be in [0, 1], got {p}")
    cnt, count_by_size, count_sq_by_size, m2_tab, m2_sq_tab, span_tab = _enumeration_tables(geometry)
    n_sites = geometry.site_count
    k = np.arange(n_sites + 1, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_w = k * np.log(p) + (n_sites - k) * np.log1p(-p)
    # p = 0 or 1 put all weight on one popcount; 0*log(0) terms become 0
    if p == 0.0:
        w = np.zeros(n_sites + 1)
        w[0] = 1.0
    elif p == 1.0:
        w = np.zeros(n_sites + 1)
        w[n_sites] = 1.0
    else:
        w = np.exp(log_w)

    expected_counts = w @ count_by_size
    second = w @ count_sq_by_size
    count_variance = np.clip(second - expected_counts**2, 0.0, None)

    mean_m1 = float(w @ (k * cnt))
    e_m1_sq = float(w @ (k * k * cnt))
    mean_m2 = float(w @ m2_tab)
    e_m2_sq = float(w @ m2_sq_tab)
    e_m1_m2 = float(w @ (k * m2_tab))
    return ExactReference(
        geometry=geometry,
        p=float(p),
        expected_counts=expected_counts,
        count_variance=count_variance,
        mean_m1=mean_m1,
        mean_m2=mean_m2,
        var_m1=max(0.0, e_m1_sq - mean_m1**2),
        var_m2=max(0.0, e_m2_sq - mean_m2**2),
        cov_m1_m2=e_m1_m2 - mean_m1 * mean_m2,
        spanning_probability=float(w @ span_tab),
    )
