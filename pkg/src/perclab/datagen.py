"""Labeled synthetic datasets over percolation clusters.

Each occupied site becomes a classification example. The construction
runs in the generative direction: sample a configuration, label its
clusters, then assign every cluster one function from a keyed
pseudorandom family and evaluate it at each member site. Two sites that
share a cluster therefore share a target function by construction.
Isolated occupied sites (no occupied neighbor) get an independent
memorized label and are flagged out-of-distribution.

Labels carry no surface structure: the function family hashes raw
coordinates under a per-cluster 64-bit key, so nothing short of cluster
membership predicts y.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from perclab import engine as _engine
from perclab.analysis import ClusterCensus
from perclab.lattice import LatticeGeometry

ISOLATED_ID = -1

FUNCTION_FAMILY = "blake2b64.v1"

# mean-field fractal dimension D = 1/(sigma nu) of finite clusters
FINITE_CLUSTER_DIM = 4.0


class Regime(str, Enum):
    SUBCRITICAL = "subcritical"
    NEAR_CRITICAL = "near_critical"
    EXTREME_SUPERCRITICAL = "extreme_supercritical"


@dataclass(frozen=True)
class DatasetSpec:
    """Parameters that fully determine one dataset."""

    geometry: LatticeGeometry
    p: float
    label_space_size: int
    seed: int
    min_cluster_size: int = 1

    def __post_init__(self) -> None:
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"occupation probability must be in [0, 1], got {self.p}")
        if self.label_space_size < 2:
            raise ValueError(
                f"label space must hold >= 2 labels, got {self.label_space_size}"
            )
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        if self.min_cluster_size < 1:
            raise ValueError(
                f"min_cluster_size must be >= 1, got {self.min_cluster_size}"
            )

    def manifest_fields(self) -> dict:
        out = dict(self.geometry.manifest_fields())
        out.update(
            p=self.p,
            label_space_size=self.label_space_size,
            seed=self.seed,
            min_cluster_size=self.min_cluster_size,
            function_family=FUNCTION_FAMILY,
        )
        return out


@dataclass(frozen=True)
class LabeledExample:
    site_index: int
    coords: tuple[int, ...]
    y: int
    cluster_id: int
    in_distribution: bool


@dataclass(eq=False)
class ClusterFunctionAssignment:
    """cluster canonical id -> 64-bit function key, one per cluster."""

    keys: dict[int, int] = field(default_factory=dict)
    family_id: str = FUNCTION_FAMILY


@dataclass(eq=False)
class LabeledDataset:
    spec: DatasetSpec
    examples: list[LabeledExample]
    assignment: ClusterFunctionAssignment

    def __len__(self) -> int:
        return len(self.examples)


def _digest64(payload: bytes) -> int:
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "big")


def function_key(seed: int, canonical_id: int) -> int:
    """Per-cluster function key, stable under relabeling of union-find roots."""
    return _digest64(struct.pack(">Q", seed) + b"cluster" + struct.pack(">q", canonical_id))


def evaluate_function(key: int, coords: tuple[int, ...], label_space_size: int) -> int:
    """The function family F: hash of (key, raw coordinates), reduced mod |Y|."""
    payload = struct.pack(">Q", key) + struct.pack(f">{len(coords)}q", *coords)
    return _digest64(payload) % label_space_size


def memorized_label(seed: int, site_index: int, label_space_size: int) -> int:
    """Independent label for an isolated site; not derived from any cluster key."""
    payload = struct.pack(">Q", seed) + b"memo" + struct.pack(">q", site_index)
    return _digest64(payload) % label_space_size


def generate_dataset(spec: DatasetSpec) -> LabeledDataset:
    """Sample a configuration and label every qualifying occupied site.

    Sites in clusters of size >= max(2, min_cluster_size) get
    y = F(key(cluster), coords) under that cluster's key; isolated sites
    (cluster size 1, kept only when min_cluster_size == 1) get a
    memorized label and cluster_id = ISOLATED_ID. The canonical id of a
    cluster is its smallest flat site index, which no union-find
    ordering can change.
    """
    config = _engine.sample_configuration(spec.geometry, spec.p, spec.seed)
    labeling = _engine.label_clusters(config)
    occ = np.flatnonzero(config.occupied_mask)
    if occ.size == 0:
        return LabeledDataset(spec=spec, examples=[], assignment=ClusterFunctionAssignment())

    roots = labeling.parent[occ]
    uniq_roots, first_pos = np.unique(roots, return_index=True)
    canonical = occ[first_pos]  # occ ascending, so first occurrence is the minimum
    canon_of = canonical[np.searchsorted(uniq_roots, roots)]
    sizes = labeling.size[roots]
    coords = spec.geometry.coords_of(occ)

    keep = sizes >= spec.min_cluster_size
    examples: list[LabeledExample] = []
    keys: dict[int, int] = {}
    for i in np.flatnonzero(keep):
        site = int(occ[i])
        xy = tuple(int(c) for c in coords[i])
        if sizes[i] >= 2:
            cid = int(canon_of[i])
            key = keys.get(cid)
            if key is None:
                key = keys[cid] = function_key(spec.seed, cid)
            y = evaluate_function(key, xy, spec.label_space_size)
            examples.append(LabeledExample(site, xy, y, cid, True))
        else:
            y = memorized_label(spec.seed, site, spec.label_space_size)
            examples.append(LabeledExample(site, xy, y, ISOLATED_ID, False))

    assignment = ClusterFunctionAssignment(keys=keys)
    return LabeledDataset(spec=spec, examples=examples, assignment=assignment)


def classify_regime(p: float, pc_hat: float, band: float = 3.0) -> Regime:
    """Bucket p against an estimated threshold.

    subcritical below pc_hat, near_critical in [pc_hat, band * pc_hat),
    extreme_supercritical at or above band * pc_hat.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"occupation probability must be in [0, 1], got {p}")
    if pc_hat <= 0.0:
        raise ValueError(f"threshold estimate must be positive, got {pc_hat}")
    if band < 1.0:
        raise ValueError(f"band multiplier must be >= 1, got {band}")
    if p < pc_hat:
        return Regime.SUBCRITICAL
    if p < band * pc_hat:
        return Regime.NEAR_CRITICAL
    return Regime.EXTREME_SUPERCRITICAL


@dataclass(frozen=True)
class RegimeReport:
    regime: Regime
    context_feature_count: int
    component_dim_per_cluster: float
    spanning_fraction: float


def feature_inventory(census: ClusterCensus, regime: Regime, s_min: int = 1) -> RegimeReport:
    """Count context features and report per-cluster representation dimension.

    A context feature is a non-spanning cluster of size >= s_min. Finite
    clusters need FINITE_CLUSTER_DIM dimensions; a spanning cluster deep
    in the supercritical regime is Euclidean and needs d.
    """
    if s_min < 1:
        raise ValueError(f"s_min must be >= 1, got {s_min}")
    sizes = census.cluster_sizes
    spanning = census.cluster_spanning
    context = int(np.count_nonzero((sizes >= s_min) & ~spanning))
    span_sites = int(sizes[spanning].sum())
    span_fraction = span_sites / census.occupied if census.occupied else 0.0
    if regime is Regime.EXTREME_SUPERCRITICAL and census.spanning:
        dim = float(census.d)
    else:
        dim = FINITE_CLUSTER_DIM
    return RegimeReport(
        regime=regime,
        context_feature_count=context,
        component_dim_per_cluster=dim,
        spanning_fraction=span_fraction,
    )


def _atomic_write(path: str, text: str) -> None:
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
        raise OSError(f"failed writing dataset to {path!r}: {exc}") from exc


def export_dataset(dataset: LabeledDataset, format: str, path: str) -> None:
    """Serialize to CSV or JSONL; identical datasets give identical bytes.

    CSV: header then one row per example, booleans as 1/0. JSONL: one
    header object carrying the generating parameters, then one object
    per example with the same fields as the CSV columns.
    """
    d = dataset.spec.geometry.d
    coord_names = [f"coord_{a}" for a in range(d)]
    fields = ["site_index", *coord_names, "y", "cluster_id", "in_distribution"]
    if format == "csv":
        lines = [",".join(fields)]
        for ex in dataset.examples:
            row = [str(ex.site_index), *[str(c) for c in ex.coords],
                   str(ex.y), str(ex.cluster_id), str(int(ex.in_distribution))]
            lines.append(",".join(row))
        _atomic_write(path, "\n".join(lines) + "\n")
    elif format == "jsonl":
        header = {"spec": dataset.spec.manifest_fields(), "examples": len(dataset.examples)}
        lines = [json.dumps(header, separators=(",", ":"))]
        for ex in dataset.examples:
            obj = {"site_index": ex.site_index}
            obj.update(zip(coord_names, ex.coords))
            obj["y"] = ex.y
            obj["cluster_id"] = ex.cluster_id
            obj["in_distribution"] = ex.in_distribution
            lines.append(json.dumps(obj, separators=(",", ":")))
        _atomic_write(path, "\n".join(lines) + "\n")
    else:
        raise ValueError(f"unsupported export format {format!r}; use 'csv' or 'jsonl'")
