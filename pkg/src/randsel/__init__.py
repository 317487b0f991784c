"""Randomised nonlinear feature selection by centered kernel-target alignment."""

from .baselines import FeatureRanking, bahsic, corr_filter, fohsic
from .contribution import ContributionTable, KernelEvalCounter, estimate_contributions
from .datagen import Dataset, gen_weston_linear, gen_weston_nonlinear, gen_xor, generate
from .errors import (
    DegenerateDataError,
    DegenerateKernelError,
    DegenerateLabelsError,
    InsufficientSamplesError,
    InvalidDataError,
    InvalidParameterError,
    RandSelError,
)
from .evaluation import (
    CvPlan,
    EvalReport,
    kernel_classifier_predict,
    kernel_classifier_train,
    nested_cv,
    run_benchmark,
    selection_precision_recall,
)
from .kernelcore import (
    BandwidthSpec,
    CenteredKernel,
    KernelMatrix,
    alignment,
    center,
    gaussian_kernel,
    label_kernel,
    median_heuristic,
)
from .resampling import DrawPair, derive_stream, draw_pair
from .selector import SelectionTrace, SelectorConfig, cull, randsel, update_fixed

__version__ = "0.1.0"
