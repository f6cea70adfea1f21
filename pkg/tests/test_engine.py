import numpy as np
import pytest
from scipy.stats import binom

from perclab import rng as _rng
from perclab.engine import (
    OBSERVABLES,
    Configuration,
    NoCrossingError,
    SweepEnsemble,
    _labeling_for_order,
    canonical_convolve,
    estimate_threshold,
    label_clusters,
    newman_ziff_sweep,
    run_census_ensemble,
    run_sweep_ensemble,
    sample_configuration,
    threshold_from_ensemble,
)
from perclab.lattice import LatticeGeometry


def config_from_sites(geometry, sites):
    mask = np.zeros(geometry.site_count, dtype=bool)
    mask[list(sites)] = True
    return Configuration(
        geometry=geometry,
        p=0.5,
        seed=0,
        occupied_bits=np.packbits(mask),
        occupied_count=len(sites),
    )


def reference_partition(geometry, sites):
    """Independent BFS labeling: set of frozensets, one per cluster."""
    occ = set(int(s) for s in sites)
    out = []
    seen = set()
    for start in occ:
        if start in seen:
            continue
        comp = {start}
        seen.add(start)
        frontier = [start]
        while frontier:
            u = frontier.pop()
            for v in geometry.neighbors(u):
                v = int(v)
                if v in occ and v not in seen:
                    seen.add(v)
                    comp.add(v)
                    frontier.append(v)
        out.append(frozenset(comp))
    return set(out)


def engine_partition(labeling):
    occ = np.flatnonzero(labeling.parent >= 0)
    groups = {}
    for i in occ:
        groups.setdefault(int(labeling.parent[i]), set()).add(int(i))
    return {frozenset(g) for g in groups.values()}


def test_all_occupied_single_cluster():
    g = LatticeGeometry((3, 3), boundary="free")
    lab = label_clusters(config_from_sites(g, range(9)))
    assert lab.cluster_count == 1
    assert lab.largest == 9
    assert lab.sum_sq == 81
    assert lab.spanning


def test_isolated_corners():
    g = LatticeGeometry((3, 3), boundary="free")
    lab = label_clusters(config_from_sites(g, [0, 8]))
    assert lab.cluster_count == 2
    assert lab.largest == 1
    assert lab.sum_sq == 2
    assert not lab.spanning


def test_empty_configuration():
    g = LatticeGeometry((3, 3), boundary="free")
    lab = label_clusters(config_from_sites(g, []))
    assert lab.cluster_count == 0
    assert lab.largest == 0
    assert not lab.spanning


def test_ring_wraps_only_when_complete():
    g = LatticeGeometry((5,), boundary="periodic")
    full = label_clusters(config_from_sites(g, range(5)))
    assert full.spanning
    assert full.wrap_mask[full.parent[0]] == 0b1
    partial = label_clusters(config_from_sites(g, [0, 1, 2, 3]))
    assert partial.cluster_count == 1
    assert not partial.spanning
    assert np.all(partial.wrap_mask[partial.parent[0]] == 0)


def test_labeling_matches_reference_bfs():
    cases = [
        LatticeGeometry((4, 5), boundary="free"),
        LatticeGeometry((3, 4), boundary="periodic"),
        LatticeGeometry((3, 3, 3), boundary="periodic"),
    ]
    gen = np.random.default_rng(7)
    for g in cases:
        for _ in range(25):
            sites = np.flatnonzero(gen.random(g.site_count) < 0.5)
            lab = label_clusters(config_from_sites(g, sites))
            assert engine_partition(lab) == reference_partition(g, sites)


def test_free_spanning_matches_coordinate_scan():
    g = LatticeGeometry((4, 4), boundary="free")
    gen = np.random.default_rng(3)
    for _ in range(50):
        sites = np.flatnonzero(gen.random(16) < 0.55)
        lab = label_clusters(config_from_sites(g, sites))
        expect = False
        for comp in reference_partition(g, sites):
            coords = np.array([g.index_to_coords(i) for i in comp])
            for a in range(2):
                if coords[:, a].min() == 0 and coords[:, a].max() == 3:
                    expect = True
        assert lab.spanning == expect


def test_sweep_prefix_equals_direct_labeling():
    g = LatticeGeometry((3, 4), boundary="free")
    for seed in range(8):
        res = newman_ziff_sweep(g, seed)
        order = _rng.stream(seed).permutation(12).astype(np.int64)
        assert np.array_equal(order, res.order)
        for n in (0, 1, 5, 9, 12):
            lab = _labeling_for_order(g, order[:n])
            assert res.largest[n] == lab.largest
            assert res.cluster_count[n] == lab.cluster_count
            assert res.sum_sq[n] == lab.sum_sq
            spanned = res.first_span >= 0 and res.first_span <= n
            assert spanned == lab.spanning


def test_sweep_curve_shape_and_monotonicity():
    g = LatticeGeometry((6, 6), boundary="free")
    res = newman_ziff_sweep(g, 11)
    assert res.largest.shape == (37,)
    assert res.largest[0] == 0 and res.largest[-1] == 36
    assert res.cluster_count[-1] == 1
    assert np.all(np.diff(res.largest) >= 0)
    assert np.all(np.diff(res.cluster_count) <= 1)
    assert 2 <= res.first_span <= 36


def test_mean_finite_curve_two_by_two():
    # at n = 2 on a 2x2 block: adjacent pair (prob 2/3) gives one cluster
    # (finite mean 0), diagonal pair gives two singletons (finite mean 1)
    g = LatticeGeometry((2, 2), boundary="free")
    trials = 4000
    largest2 = np.empty(trials)
    finite2 = np.empty(trials)
    for seed in range(trials):
        res = newman_ziff_sweep(g, seed)
        largest2[seed] = res.largest[2]
        finite2[seed] = res.mean_finite_curve()[2]
    sem = np.sqrt((2 / 9) / trials)
    assert abs(largest2.mean() - 5 / 3) < 3 * sem
    assert abs(finite2.mean() - 1 / 3) < 3 * sem
    assert set(np.unique(finite2)) <= {0.0, 1.0}


def test_ensemble_worker_independence():
    g = LatticeGeometry((8, 8), boundary="periodic")
    e1 = run_sweep_ensemble(g, 12, 99, workers=1)
    e4 = run_sweep_ensemble(g, 12, 99, workers=4)
    assert np.array_equal(e1.first_span, e4.first_span)
    for obs in OBSERVABLES:
        assert np.array_equal(e1.curves[obs].values, e4.curves[obs].values)
        assert np.array_equal(e1.curves[obs].stderr, e4.curves[obs].stderr)


def test_ensemble_spanning_curve_is_ecdf():
    g = LatticeGeometry((5, 5), boundary="free")
    ens = run_sweep_ensemble(g, 30, 4)
    n_star = ens.n_star
    ecdf = np.array([(n_star <= n).mean() for n in range(26)])
    assert np.array_equal(ens.curves["spanning_indicator"].values, ecdf)


def test_observable_validation():
    g = LatticeGeometry((4, 4), boundary="free")
    with pytest.raises(ValueError):
        newman_ziff_sweep(g, 0, observables=("no_such_thing",))
    with pytest.raises(ValueError):
        newman_ziff_sweep(g, 0, observables=("largest_cluster_size",), record_curves=False)
    with pytest.raises(ValueError):
        run_sweep_ensemble(g, 0, 0)
    ens = run_sweep_ensemble(g, 5, 0, observables=("spanning_indicator",), record_curves=False)
    assert set(ens.curves) == {"spanning_indicator"}


def test_canonical_convolve_against_direct_sum():
    gen = np.random.default_rng(0)
    values = gen.random(31)
    for p in (0.2, 0.5, 0.9):
        w = binom.pmf(np.arange(31), 30, p)
        direct = float(w @ values)
        assert abs(canonical_convolve(values, p) - direct) < 1e-12

    assert canonical_convolve(values, 0.0) == values[0]
    assert canonical_convolve(values, 1.0) == values[-1]
    with pytest.raises(ValueError):
        canonical_convolve(values, 1.2)


def test_canonical_convolve_large_n_stable():
    # identity curve Q_n = n/N convolves to exactly E[n]/N = p
    n_sites = 1 << 15
    curve = np.arange(n_sites + 1) / n_sites
    for p in (0.1, 0.59, 0.97):
        assert abs(canonical_convolve(curve, p) - p) < 1e-10


def test_convolve_accepts_curve_objects():
    g = LatticeGeometry((4, 4), boundary="free")
    ens = run_sweep_ensemble(g, 10, 1)
    curve = ens.curves["spanning_indicator"]
    assert canonical_convolve(curve, 0.6) == canonical_convolve(curve.values, 0.6)


def test_threshold_matches_convolved_ecdf():
    # the crossing solver uses the closed-form binomial tail; it must agree
    # with convolving the spanning ECDF curve at the estimated root
    g = LatticeGeometry((4, 4), boundary="free")
    ens = run_sweep_ensemble(g, 40, 21)
    est = threshold_from_ensemble(ens, bootstrap=0)
    ecdf = ens.curves["spanning_indicator"].values
    assert abs(canonical_convolve(ecdf, est.p_c_hat) - 0.5) < 1e-9
    k = ens.n_star - 1
    for p in (0.3, 0.55, 0.8):
        sf_route = float(np.mean(binom.sf(k, 16, p)))
        assert abs(canonical_convolve(ecdf, p) - sf_route) < 1e-12


def test_threshold_1d_chain_is_deterministic():
    # a free chain spans only when fully occupied, so n* = N always and
    # the crossing sits exactly where p^N = 1/2
    g = LatticeGeometry((64,), boundary="free")
    est = estimate_threshold(g, realizations=5, master_seed=2, bootstrap=50)
    assert np.all(est.n_star == 64)
    assert abs(est.p_c_hat - 0.5 ** (1 / 64)) < 1e-9
    assert est.stderr < 1e-12


def test_threshold_no_crossing():
    g = LatticeGeometry((3, 3), boundary="free")
    ens = SweepEnsemble(
        geometry=g, master_seed=0, realizations=3,
        curves={}, first_span=np.array([-1, -1, -1]),
    )
    with pytest.raises(NoCrossingError):
        threshold_from_ensemble(ens, bootstrap=0)


def test_sample_configuration_deterministic_and_unbiased():
    g = LatticeGeometry((32, 32), boundary="periodic")
    a = sample_configuration(g, 0.3, 17)
    b = sample_configuration(g, 0.3, 17)
    assert np.array_equal(a.occupied_bits, b.occupied_bits)
    assert a.occupied_count == a.occupied_mask.sum()
    assert abs(a.occupied_count / 1024 - 0.3) < 3 * np.sqrt(0.3 * 0.7 / 1024)
    assert sample_configuration(g, 0.0, 1).occupied_count == 0
    assert sample_configuration(g, 1.0, 1).occupied_count == 1024
    with pytest.raises(ValueError):
        sample_configuration(g, -0.1, 0)


def test_census_ensemble_tiny_chain():
    g = LatticeGeometry((1, 2), boundary="free")
    r = 40000
    summary = run_census_ensemble(g, 0.5, r, 5)
    z1 = (summary.counts[1] / r - 0.5) / np.sqrt(0.25 / r)
    z2 = (summary.counts[2] / r - 0.25) / np.sqrt(0.1875 / r)
    zspan = (summary.spanning_fraction - 0.25) / np.sqrt(0.25 * 0.75 / r)
    zm1 = (summary.m1 / r - 1.0) / np.sqrt(0.5 / r)
    assert abs(z1) < 3 and abs(z2) < 3 and abs(zspan) < 3 and abs(zm1) < 3
    assert summary.n_s_estimate.shape == (3,)
