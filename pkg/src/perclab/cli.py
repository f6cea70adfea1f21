"""Batch command-line front end.

Seven subcommands route to the library: `sweep` (microcanonical curves
plus a spanning-threshold estimate), `sample` (fixed-p cluster census
ensembles), `bethe` (closed forms plus optional growth Monte Carlo),
`datagen` (labeled dataset export), `fit` (tau / fractal dimension /
cutoff estimators over CSV artifacts), `oracle` (exact enumeration
reference), and `render` (SVG snapshot of a 2-d configuration).

Every run writes its artifacts atomically and finishes with a
`manifest.json` recording the resolved configuration, the master seed,
the package version, and the artifact list; a `volatile` block holds
wall time and worker count, the only fields allowed to differ between
reruns. A flat KEY=VALUE file passed with --config is expanded to flags
ahead of the explicit command line, so explicit flags win. Exit codes:
0 success, 1 runtime failure, 2 usage or validation failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time

import numpy as np

from perclab import __version__
from perclab import analysis, bethe, datagen, engine
from perclab import rng as _rng
from perclab.lattice import GeometryError, LatticeGeometry

OUT_ENV = "PERCLAB_OUT"


# ---------------------------------------------------------------------------
# serialization helpers


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _atomic_text(path: str, text: str) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    try:
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise OSError(f"failed writing {path!r}: {exc}") from exc


def _write_json(path: str, payload) -> None:
    _atomic_text(path, json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")


def _write_csv(path: str, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    _atomic_text(path, "\n".join(lines) + "\n")


def _resolve_out(args) -> str:
    out = args.out or os.environ.get(OUT_ENV) or "."
    os.makedirs(out, exist_ok=True)
    return out


def _write_manifest(out: str, command: str, config: dict, seed: int,
                    artifacts: list[str], t0: float, workers: int = 1,
                    report: dict | None = None) -> None:
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "package_version": __version__,
        "artifacts": sorted(artifacts),
        "volatile": {"wall_time_s": round(time.perf_counter() - t0, 3), "workers": workers},
    }
    if report is not None:
        manifest["report"] = report
    _write_json(os.path.join(out, "manifest.json"), manifest)


# ---------------------------------------------------------------------------
# argument plumbing


def _expand_config(argv: list[str]) -> list[str]:
    """Inline --config KEY=VALUE files as flags before the explicit ones."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        raise ValueError("--config requires a file path")
    path = argv[i + 1]
    rest = argv[:i] + argv[i + 2:]
    if not rest or rest[0].startswith("-"):
        raise ValueError("--config requires a subcommand before it")
    tokens: list[str] = []
    try:
        with open(path, encoding="utf-8") as fh:
            for ln, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{ln}: expected KEY=VALUE, got {line!r}")
                key, val = line.split("=", 1)
                tokens += [f"--{key.strip().replace('_', '-')}", val.strip()]
    except OSError as exc:
        raise ValueError(f"cannot read config file {path!r}: {exc}") from exc
    return [rest[0], *tokens, *rest[1:]]


def _add_geometry_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--sides", help="comma-separated side lengths, e.g. 128,128")
    sub.add_argument("--d", type=int, help="dimension (with --side)")
    sub.add_argument("--side", type=int, help="uniform side length (with --d)")
    sub.add_argument("--boundary", choices=("periodic", "free"), default="periodic")


def _parse_geometry(args) -> LatticeGeometry:
    if args.sides:
        if args.d is not None or args.side is not None:
            raise ValueError("give either --sides or --d/--side, not both")
        try:
            sides = tuple(int(tok) for tok in args.sides.split(","))
        except ValueError:
            raise ValueError(f"--sides must be comma-separated integers, got {args.sides!r}")
    elif args.d is not None and args.side is not None:
        sides = (args.side,) * args.d
    else:
        raise ValueError("geometry required: --sides L1,L2,... or --d D --side L")
    return LatticeGeometry(sides, boundary=args.boundary)


def _geometry_config(geom: LatticeGeometry) -> dict:
    return {
        "sides": ",".join(str(s) for s in geom.sides),
        "boundary": geom.boundary,
    }


# ---------------------------------------------------------------------------
# subcommands


def _cmd_sweep(args) -> int:
    t0 = time.perf_counter()
    geom = _parse_geometry(args)
    observables = tuple(tok for tok in args.observables.split(",") if tok)
    out = _resolve_out(args)
    ens = engine.run_sweep_ensemble(
        geom, args.realizations, args.seed,
        observables=observables, workers=args.workers,
    )
    est = engine.threshold_from_ensemble(ens, bootstrap=args.threshold_bootstrap)

    rows = []
    for obs in observables:
        curve = ens.curves[obs]
        for n in range(curve.values.size):
            rows.append((n, obs, curve.values[n], curve.stderr[n]))
    _write_csv(os.path.join(out, "curves.csv"), ["n", "observable", "mean", "stderr"], rows)
    _write_json(os.path.join(out, "threshold.json"), {
        "p_c_hat": est.p_c_hat,
        "stderr": est.stderr,
        "realizations": est.realizations,
        "site_count": geom.site_count,
        "bootstrap": args.threshold_bootstrap,
    })
    config = {
        **_geometry_config(geom),
        "realizations": args.realizations,
        "seed": args.seed,
        "observables": args.observables,
        "threshold-bootstrap": args.threshold_bootstrap,
    }
    _write_manifest(out, "sweep", config, args.seed,
                    ["curves.csv", "threshold.json"], t0, args.workers)
    return 0


def _cmd_sample(args) -> int:
    t0 = time.perf_counter()
    geom = _parse_geometry(args)
    if not 0.0 <= args.p <= 1.0:
        raise ValueError(f"occupation probability must be in [0, 1], got {args.p}")
    out = _resolve_out(args)
    n_sites = geom.site_count
    counts = np.zeros(n_sites + 1, np.int64)
    occupied_tot = 0
    largest_tot = 0
    span = 0
    m1 = 0
    m2 = 0
    cluster_rows: list[tuple[int, float]] = []

    def one(k: int) -> analysis.ClusterCensus:
        config = engine.sample_configuration(geom, args.p, _rng.spawn_seed(args.seed, k))
        return analysis.cluster_census(engine.label_clusters(config))

    def accumulate(census: analysis.ClusterCensus) -> None:
        nonlocal occupied_tot, largest_tot, span, m1, m2
        for s, c in census.size_histogram.items():
            counts[s] += c
        occupied_tot += census.occupied
        largest_tot += census.largest
        span += census.spanning
        sizes = census.cluster_sizes
        m1 += census.occupied - census.largest
        m2 += int((sizes.astype(np.int64) ** 2).sum()) - census.largest**2
        keep = sizes >= args.min_size
        radii = census.cluster_radii
        for s, r in zip(sizes[keep], radii[keep]):
            if r == r:  # wrapped clusters carry NaN, useless for fits
                cluster_rows.append((int(s), float(r)))

    if args.workers <= 1:
        for k in range(args.realizations):
            accumulate(one(k))
    else:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=args.workers) as pool:
            for census in pool.map(one, range(args.realizations)):
                accumulate(census)

    _write_csv(os.path.join(out, "census.csv"), ["s", "count"],
               [(s, int(counts[s])) for s in range(1, n_sites + 1) if counts[s]])
    _write_csv(os.path.join(out, "clusters.csv"), ["s", "r_gyration"], cluster_rows)
    r = args.realizations
    _write_json(os.path.join(out, "summary.json"), {
        "p": args.p,
        "realizations": r,
        "site_count": n_sites,
        "occupied_mean": occupied_tot / r,
        "largest_mean": largest_tot / r,
        "spanning_fraction": span / r,
        "mean_finite_cluster_size": (m2 / m1) if m1 > 0 else None,
    })
    config = {
        **_geometry_config(geom),
        "p": args.p,
        "realizations": r,
        "seed": args.seed,
        "min-size": args.min_size,
    }
    _write_manifest(out, "sample", config, args.seed,
                    ["census.csv", "clusters.csv", "summary.json"], t0, args.workers)
    return 0


def _cmd_bethe(args) -> int:
    t0 = time.perf_counter()
    out = _resolve_out(args)
    z, p = args.z, args.p
    pc = bethe.bethe_pc(z)

    def guarded(fn, *a):
        try:
            return fn(*a)
        except bethe.DivergenceError:
            return None

    cutoff = guarded(bethe.bethe_cutoff, z, p)
    payload = {
        "z": z,
        "p": p,
        "p_c": pc,
        "correlation_g": [bethe.bethe_correlation_g(z, p, l) for l in range(1, args.l_max + 1)],
        "correlation_length_sq": guarded(bethe.bethe_correlation_length_sq, z, p),
        "mean_size": guarded(bethe.bethe_mean_size, z, p),
        "cutoff": None if cutoff is None else {"a": cutoff.a, "sigma": cutoff.sigma, "c": cutoff.c},
        "exponents": bethe.bethe_exponents(),
        "moments": None,
        "mc": None,
    }
    if p < pc:
        payload["moments"] = [
            {"k": k, "value": m.value, "predicted_exponent": m.predicted_exponent}
            for k, m in ((k, bethe.bethe_moment(z, p, k)) for k in (0, 1, 2))
        ]

    artifacts = ["bethe.json"]
    if args.mc > 0:
        ens = bethe.run_bethe_ensemble(
            z, p, args.mc, args.seed,
            cap=args.cap, shell_depth=args.shell_depth, workers=args.workers,
        )
        payload["mc"] = {
            "realizations": ens.realizations,
            "cap": ens.cap,
            "mean_size": ens.mean_size,
            "sem_size": ens.sem_size,
            "truncated_fraction": ens.truncated_fraction,
            "perimeter_identity_fraction": ens.perimeter_identity_fraction(),
            "shell_means": [ens.shell_mean(l) for l in range(1, args.shell_depth + 1)],
        }
        shell_names = [f"shell_{l}" for l in range(1, args.shell_depth + 1)]
        rows = (
            (k, ens.sizes[k], ens.perimeters[k], ens.truncated[k], *ens.shell_counts[k])
            for k in range(ens.realizations)
        )
        _write_csv(os.path.join(out, "bethe_mc.csv"),
                   ["realization", "size", "perimeter", "truncated", *shell_names], rows)
        artifacts.append("bethe_mc.csv")

    _write_json(os.path.join(out, "bethe.json"), payload)
    config = {
        "z": z, "p": p, "l-max": args.l_max, "seed": args.seed,
        "mc": args.mc, "cap": args.cap, "shell-depth": args.shell_depth,
    }
    _write_manifest(out, "bethe", config, args.seed, artifacts, t0, args.workers)
    return 0


def _cmd_datagen(args) -> int:
    t0 = time.perf_counter()
    geom = _parse_geometry(args)
    out = _resolve_out(args)
    spec = datagen.DatasetSpec(
        geometry=geom, p=args.p, label_space_size=args.labels,
        seed=args.seed, min_cluster_size=args.min_cluster_size,
    )
    dataset = datagen.generate_dataset(spec)
    name = "dataset.csv" if args.format == "csv" else "dataset.jsonl"
    datagen.export_dataset(dataset, args.format, os.path.join(out, name))

    if args.pc_hat is not None:
        pc_hat = args.pc_hat
    else:
        pc_hat = engine.estimate_threshold(geom, args.pc_realizations, args.seed).p_c_hat
    regime = datagen.classify_regime(args.p, pc_hat, band=args.band)
    config_sample = engine.sample_configuration(geom, args.p, args.seed)
    census = analysis.cluster_census(engine.label_clusters(config_sample), with_radii=False)
    inventory = datagen.feature_inventory(census, regime, s_min=args.feature_min_size)

    config = {
        **_geometry_config(geom),
        "p": args.p,
        "labels": args.labels,
        "seed": args.seed,
        "min-cluster-size": args.min_cluster_size,
        "format": args.format,
        "pc-hat": pc_hat,
        "band": args.band,
        "feature-min-size": args.feature_min_size,
    }
    report = {
        "pc_hat_used": pc_hat,
        "regime": regime.value,
        "examples": len(dataset),
        "clusters_keyed": len(dataset.assignment.keys),
        "context_feature_count": inventory.context_feature_count,
        "component_dim_per_cluster": inventory.component_dim_per_cluster,
        "spanning_fraction": inventory.spanning_fraction,
    }
    _write_manifest(out, "datagen", config, args.seed, [name], t0, report=report)
    return 0


def _read_csv(path: str, expected: list[str]) -> np.ndarray:
    try:
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().strip()
            if header.split(",") != expected:
                raise ValueError(
                    f"{path}: expected columns {','.join(expected)!r}, got {header!r}"
                )
            rows = [line.split(",") for line in fh if line.strip()]
    except OSError as exc:
        raise ValueError(f"cannot read {path!r}: {exc}") from exc
    if not rows:
        return np.empty((0, len(expected)))
    return np.asarray([[float(x) for x in row] for row in rows])


def _cmd_fit(args) -> int:
    t0 = time.perf_counter()
    out = _resolve_out(args)
    if args.kind == "tau":
        data = _read_csv(args.input, ["s", "count"])
        samples = np.repeat(data[:, 0].astype(np.int64), data[:, 1].astype(np.int64))
        fit = analysis.fit_power_law(samples, s_min=args.s_min)
        payload = {"kind": "tau", "tau_hat": fit.tau_hat, "stderr": fit.stderr,
                   "s_min": fit.s_min, "sample_size": fit.sample_size}
    elif args.kind == "dimension":
        if args.s_range is None:
            raise ValueError("--s-range LO,HI is required for --kind dimension")
        lo, hi = _parse_range(args.s_range)
        data = _read_csv(args.input, ["s", "r_gyration"])
        fit = analysis.fit_fractal_dimension(data[:, 0], data[:, 1], (lo, hi))
        payload = {"kind": "dimension", "D_hat": fit.D_hat, "stderr": fit.stderr,
                   "s_lo": fit.s_lo, "s_hi": fit.s_hi, "sample_size": fit.sample_size}
    elif args.kind == "cutoff":
        if args.baseline is None:
            raise ValueError("--baseline census is required for --kind cutoff")
        if args.s_range is None:
            raise ValueError("--s-range LO,HI is required for --kind cutoff")
        lo, hi = _parse_range(args.s_range)
        fit = analysis.fit_exponential_cutoff(
            _census_dict(args.input), _census_dict(args.baseline), (lo, hi)
        )
        payload = {"kind": "cutoff", "c_hat": fit.c_hat, "stderr": fit.stderr,
                   "bins_used": fit.bins_used}
    else:  # pragma: no cover - argparse restricts choices
        raise ValueError(f"unknown fit kind {args.kind!r}")

    _write_json(os.path.join(out, "fit.json"), payload)
    config = {"kind": args.kind, "input": args.input}
    if args.baseline is not None:
        config["baseline"] = args.baseline
    if args.s_range is not None:
        config["s-range"] = args.s_range
    if args.kind == "tau":
        config["s-min"] = args.s_min
    _write_manifest(out, "fit", config, 0, ["fit.json"], t0)
    return 0


def _parse_range(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(tok) for tok in text.split(","))
    except ValueError:
        raise ValueError(f"range must be LO,HI integers, got {text!r}")
    return lo, hi


def _census_dict(path: str) -> dict[int, int]:
    data = _read_csv(path, ["s", "count"])
    return {int(s): int(c) for s, c in data}


def _cmd_oracle(args) -> int:
    t0 = time.perf_counter()
    geom = _parse_geometry(args)
    out = _resolve_out(args)
    ref = analysis.enumerate_exact(geom, args.p)
    try:
        mean_size = ref.mean_size
    except analysis.UndefinedValueError:
        mean_size = None
    _write_json(os.path.join(out, "oracle.json"), {
        **_geometry_config(geom),
        "d": geom.d,
        "p": args.p,
        "spanning_probability": ref.spanning_probability,
        "mean_size": mean_size,
        "expected_counts": ref.expected_counts,
        "count_variance": ref.count_variance,
        "mean_m1": ref.mean_m1,
        "mean_m2": ref.mean_m2,
        "var_m1": ref.var_m1,
        "var_m2": ref.var_m2,
        "cov_m1_m2": ref.cov_m1_m2,
    })
    config = {**_geometry_config(geom), "p": args.p}
    _write_manifest(out, "oracle", config, 0, ["oracle.json"], t0)
    return 0


def render_lattice_svg(config, labeling, highlight: str = "largest", cell: int = 8) -> str:
    """SVG snapshot of a 2-d configuration, one square per occupied site.

    highlight="largest" paints the largest cluster near-black over gray;
    highlight="all" gives every cluster a deterministic hue keyed on its
    smallest site index. Output bytes depend only on the inputs.
    """
    geom = config.geometry
    if geom.d != 2:
        raise ValueError(f"rendering requires d = 2, got d = {geom.d}")
    if highlight not in ("largest", "all"):
        raise ValueError(f"highlight must be 'largest' or 'all', got {highlight!r}")
    if cell < 1:
        raise ValueError(f"cell size must be >= 1, got {cell}")
    rows_n, cols_n = geom.sides
    width, height = cols_n * cell, rows_n * cell
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="#ffffff"/>',
    ]
    occ = np.flatnonzero(config.occupied_mask)
    if occ.size:
        roots = labeling.parent[occ]
        uniq, first_pos = np.unique(roots, return_index=True)
        canonical = occ[first_pos]
        canon_of = canonical[np.searchsorted(uniq, roots)]
        largest_root = int(uniq[np.argmax(labeling.size[uniq])])
        coords = geom.coords_of(occ)
        for i in range(occ.size):
            r, c = int(coords[i, 0]), int(coords[i, 1])
            if highlight == "largest":
                fill = "#111111" if int(roots[i]) == largest_root else "#999999"
            else:
                hue = (int(canon_of[i]) * 2654435761) % 360
                fill = f"hsl({hue},62%,45%)"
            parts.append(
                f'<rect x="{c * cell}" y="{r * cell}" width="{cell}" height="{cell}" '
                f'fill="{fill}"/>'
            )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _cmd_render(args) -> int:
    t0 = time.perf_counter()
    geom = _parse_geometry(args)
    out = _resolve_out(args)
    config_sample = engine.sample_configuration(geom, args.p, args.seed)
    labeling = engine.label_clusters(config_sample)
    svg = render_lattice_svg(config_sample, labeling, highlight=args.highlight, cell=args.cell)
    _atomic_text(os.path.join(out, "lattice.svg"), svg)
    config = {
        **_geometry_config(geom),
        "p": args.p,
        "seed": args.seed,
        "highlight": args.highlight,
        "cell": args.cell,
    }
    _write_manifest(out, "render", config, args.seed, ["lattice.svg"], t0)
    return 0


# ---------------------------------------------------------------------------
# parser and dispatch


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="perclab",
        description="site percolation laboratory: sweeps, censuses, exact references",
    )
    parser.add_argument("--version", action="version", version=f"perclab {__version__}")
    subs = parser.add_subparsers(dest="command")

    def common(sub):
        sub.add_argument("--out", default=None,
                         help=f"output directory (default: ${OUT_ENV} or '.')")
        sub.add_argument("--seed", type=int, default=0)
        sub.add_argument("--workers", type=int, default=1)

    sweep = subs.add_parser("sweep", help="microcanonical sweep ensemble + threshold")
    _add_geometry_flags(sweep)
    common(sweep)
    sweep.add_argument("--realizations", type=int, default=100)
    sweep.add_argument("--observables", default=",".join(engine.OBSERVABLES))
    sweep.add_argument("--threshold-bootstrap", type=int, default=200)
    sweep.set_defaults(func=_cmd_sweep)

    sample = subs.add_parser("sample", help="fixed-p census ensemble")
    _add_geometry_flags(sample)
    common(sample)
    sample.add_argument("--p", type=float, required=True)
    sample.add_argument("--realizations", type=int, default=100)
    sample.add_argument("--min-size", type=int, default=1,
                        help="smallest cluster written to clusters.csv")
    sample.set_defaults(func=_cmd_sample)

    bethe_p = subs.add_parser("bethe", help="Bethe lattice closed forms + growth MC")
    common(bethe_p)
    bethe_p.add_argument("--z", type=int, required=True)
    bethe_p.add_argument("--p", type=float, required=True)
    bethe_p.add_argument("--l-max", type=int, default=8)
    bethe_p.add_argument("--mc", type=int, default=0,
                         help="growth realizations (0 disables the MC block)")
    bethe_p.add_argument("--cap", type=int, default=10**6)
    bethe_p.add_argument("--shell-depth", type=int, default=12)
    bethe_p.set_defaults(func=_cmd_bethe)

    dg = subs.add_parser("datagen", help="labeled dataset over percolation clusters")
    _add_geometry_flags(dg)
    common(dg)
    dg.add_argument("--p", type=float, required=True)
    dg.add_argument("--labels", type=int, default=16, help="label space size")
    dg.add_argument("--min-cluster-size", type=int, default=1)
    dg.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    dg.add_argument("--pc-hat", type=float, default=None,
                    help="threshold estimate for regime classification "
                         "(default: estimate from sweeps)")
    dg.add_argument("--pc-realizations", type=int, default=50)
    dg.add_argument("--band", type=float, default=3.0)
    dg.add_argument("--feature-min-size", type=int, default=2)
    dg.set_defaults(func=_cmd_datagen)

    fit = subs.add_parser("fit", help="tau / dimension / cutoff fits over CSV artifacts")
    fit.add_argument("--out", default=None)
    fit.add_argument("--kind", choices=("tau", "dimension", "cutoff"), required=True)
    fit.add_argument("--input", required=True)
    fit.add_argument("--baseline", default=None, help="census at p_c (cutoff fits)")
    fit.add_argument("--s-min", type=int, default=1)
    fit.add_argument("--s-range", default=None, help="LO,HI size window")
    fit.set_defaults(func=_cmd_fit)

    oracle = subs.add_parser("oracle", help="exact enumeration reference")
    _add_geometry_flags(oracle)
    oracle.add_argument("--out", default=None)
    oracle.add_argument("--p", type=float, required=True)
    oracle.set_defaults(func=_cmd_oracle)

    render = subs.add_parser("render", help="SVG snapshot of a 2-d configuration")
    _add_geometry_flags(render)
    common(render)
    render.add_argument("--p", type=float, required=True)
    render.add_argument("--highlight", choices=("largest", "all"), default="largest")
    render.add_argument("--cell", type=int, default=8, help="pixels per site")
    render.set_defaults(func=_cmd_render)

    return parser


def dispatch(argv=None) -> int:
    """Route one command line; return the process exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv = _expand_config(argv)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        return int(args.func(args))
    except analysis.DegenerateFitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, GeometryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch())
