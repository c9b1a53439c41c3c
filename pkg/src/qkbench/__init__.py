"""qkbench: a desk-scale quantum-kernel SVM benchmark engine."""

__version__ = "0.1.0"

from .circuit import (Circuit, CircuitMetrics, FeatureMapSpec, Gate, adjoint,
                      build_feature_map, circuit_metrics, decompose_native)
from .sim import (DensityMatrix, NoiseModel, Statevector, run_density,
                  run_statevector)
from .kernels import (KernelAgreement, KernelMatrix, classical_kernel,
                      compare_kernels, quantum_kernel_ideal,
                      quantum_kernel_noisy)
from .kernel_io import (KernelCache, import_kernel, read_kernel,
                        read_kernel_csv, write_kernel, write_kernel_csv)
from .svm import KernelSVC, MetricBundle, SvmModel, compute_metrics, predict, train
from .prep import PipelineSpec, PreprocessingPipeline, fit_pipeline
from .qkt import QktResult, centered_kta, kta_gradient, optimize_theta
from .folds import FoldPlan, make_fold_plan
from .stats import (SpectralProfile, TestReport, chi2_sf, cov, friedman,
                    kruskal_wallis, nemenyi, ols_slope, pearson, spearman,
                    spectral_profile, suitability_correlation,
                    wilcoxon_signed_rank)
from .datasets import Dataset, load_dataset, make_blobs, make_xor, stratified_subsample
from .config import ExperimentConfig, KernelConfig, content_hash, load_config
from .harness import (LearningCurveResult, ResultRecord, SeedSweepResult,
                      compare_sweeps, learning_curve, nested_cv, run_experiment,
                      seed_sweep)
from .hwcompare import validate_backend
