"""toepkit: fast Toeplitz sequence operators.

Three ways to apply a learned relative-position kernel to a sequence:

* exact FFT Toeplitz matvecs with an exponential decay bias (the baseline),
* a sparse + low-rank decomposition using interpolation over a small
  inducing grid and an inverse time warp (linear-time bidirectional mixing),
* frequency-domain kernels, made causal with a discrete Hilbert transform
  or applied bidirectionally from a directly modeled complex response.

Plus the analysis tooling that certifies the approximation error bound and
the smoothness-implies-decay behavior, and sklearn-style estimator wrappers.
"""

from .analysis import (
    DecayReport,
    ErrorBoundReport,
    SmoothKernel,
    bound_suite_kernels,
    decay_diagnostics,
    fold_impulse,
    lagrange_factors,
    nystrom_dense,
    ski_bound_evaluate,
    spectral_norm,
)
from .config import TnoConfig
from .estimators import BaselineTno, BidirectionalFreqTno, CausalFreqTno, SkiTno
from .fitting import FitResult, fit_fd_causal, fit_ski, toy_fit
from .freqdom import (
    BIDIRECTIONAL,
    CAUSAL,
    REAL_EVEN,
    FreqResponse,
    causal_freq_kernel,
    discrete_hilbert,
    fd_tno_bidirectional,
    fd_tno_causal,
    frequency_bins,
    hilbert_periodic,
    impulse_response,
    sample_spectrum,
)
from .rpe import GradBundle, MlpRpe, ProbeReport, layer_norm, piecewise_linearity_probe
from .ski import (
    InducingGrid,
    InterpOperator,
    SparseFilter,
    WarpedRpe,
    eval_warped_rpe,
    interpolation_weights,
    inverse_time_warp,
    make_inducing_grid,
    ski_causal_scan,
    ski_lowrank_matvec,
    ski_tno,
    sparse_conv_matvec,
)
from .toeplitz import (
    DecayBias,
    FftWorkspace,
    ToeplitzKernel,
    apply_decay_bias,
    tno_baseline,
    toeplitz_dense,
    toeplitz_matvec,
)
from .validation import OracleSizeError

__version__ = "0.1.0"
