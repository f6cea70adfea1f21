"""Site percolation laboratory.

Finite hypercubic lattices in arbitrary dimension, an incremental
union-find sweep engine, cluster statistics and scaling fits, exact
Bethe lattice results with a matched stochastic grower, and labeled
dataset generation for studying memorization-to-generalization
transitions in synthetic classification tasks.
"""

from perclab.lattice import LatticeGeometry, GeometryError, FREE, PERIODIC
from perclab.engine import (
    OBSERVABLES,
    Configuration,
    ClusterLabeling,
    SweepResult,
    MicrocanonicalCurve,
    SweepEnsemble,
    ThresholdEstimate,
    CensusEnsembleSummary,
    NoCrossingError,
    sample_configuration,
    label_clusters,
    newman_ziff_sweep,
    run_sweep_ensemble,
    canonical_convolve,
    threshold_from_ensemble,
    estimate_threshold,
    run_census_ensemble,
)
from perclab.analysis import (
    ClusterCensus,
    CorrelationEstimate,
    PowerLawFit,
    FractalDimensionFit,
    CutoffFit,
    ExactReference,
    UndefinedValueError,
    DegenerateFitError,
    cluster_census,
    mean_cluster_size,
    percolation_strength,
    chemical_correlation,
    correlation_length_chemical,
    radius_of_gyration,
    euclidean_correlation_length_sq,
    fit_power_law,
    fit_fractal_dimension,
    fit_exponential_cutoff,
    enumerate_exact,
)
from perclab.bethe import (
    DivergenceError,
    CutoffParams,
    BetheMoment,
    BetheGrowth,
    BetheEnsemble,
    bethe_pc,
    bethe_correlation_g,
    bethe_correlation_length_sq,
    bethe_mean_size,
    bethe_cutoff,
    bethe_cutoff_amplitude,
    bethe_moment,
    bethe_exponents,
    grow_bethe_cluster,
    run_bethe_ensemble,
)
from perclab.datagen import (
    Regime,
    DatasetSpec,
    LabeledExample,
    ClusterFunctionAssignment,
    LabeledDataset,
    RegimeReport,
    generate_dataset,
    export_dataset,
    classify_regime,
    feature_inventory,
)

__version__ = "0.1.0"

__all__ = [
    "LatticeGeometry",
    "GeometryError",
    "FREE",
    "PERIODIC",
    "OBSERVABLES",
    "Configuration",
    "ClusterLabeling",
    "SweepResult",
    "MicrocanonicalCurve",
    "SweepEnsemble",
    "ThresholdEstimate",
    "CensusEnsembleSummary",
    "NoCrossingError",
    "sample_configuration",
    "label_clusters",
    "newman_ziff_sweep",
    "run_sweep_ensemble",
    "canonical_convolve",
    "threshold_from_ensemble",
    "estimate_threshold",
    "run_census_ensemble",
    "ClusterCensus",
    "CorrelationEstimate",
    "PowerLawFit",
    "FractalDimensionFit",
    "CutoffFit",
    "ExactReference",
    "UndefinedValueError",
    "DegenerateFitError",
    "cluster_census",
    "mean_cluster_size",
    "percolation_strength",
    "chemical_correlation",
    "correlation_length_chemical",
    "radius_of_gyration",
    "euclidean_correlation_length_sq",
    "fit_power_law",
    "fit_fractal_dimension",
    "fit_exponential_cutoff",
    "enumerate_exact",
    "DivergenceError",
    "CutoffParams",
    "BetheMoment",
    "BetheGrowth",
    "BetheEnsemble",
    "bethe_pc",
    "bethe_correlation_g",
    "bethe_correlation_length_sq",
    "bethe_mean_size",
    "bethe_cutoff",
    "bethe_cutoff_amplitude",
    "bethe_moment",
    "bethe_exponents",
    "grow_bethe_cluster",
    "run_bethe_ensemble",
    "Regime",
    "DatasetSpec",
    "LabeledExample",
    "ClusterFunctionAssignment",
    "LabeledDataset",
    "RegimeReport",
    "generate_dataset",
    "export_dataset",
    "classify_regime",
    "feature_inventory",
    "__version__",
]
