"""1-bit distributed detection of sparse stochastic signals.

Sensors quantize their local likelihood ratio (equivalently ``|y|``) to one
bit, and a fusion center combines the bits with a locally most powerful
test. The package also carries the centralized and direct-quantization
baselines, Fisher-information threshold design and a Monte Carlo engine.
"""

from .detectors import (
    CentralizedLMPT,
    Decision,
    DetectorSpec,
    Im1BitLMPT,
    OneBitLMPT,
    clmpt_statistic,
    decide,
    im1bit_statistic_normalized,
    im1bit_statistic_raw,
    onebit_statistic,
    theoretical_mean,
)
from .fisher_opt import (
    OptResult,
    PsoConfig,
    fi_factor,
    fisher_clmpt,
    fisher_im1bit,
    fisher_onebit,
    optimize_bank,
    optimize_threshold,
    pso_maximize,
    psi_direct,
    psi_lr,
    sensor_equivalence,
)
from .math_kernel import f_func, g_func, upper_tail, upper_tail_inverse
from .quantizers import QuantizerBank, bit_pmf_direct, bit_pmf_lr, lambda_to_tau, lr_value, quantize
from .signal_model import (
    Hypothesis,
    NetworkModel,
    ObservationBatch,
    SignalModel,
    generate,
    generate_asymptotic,
    generate_exact,
    make_gains,
)

__version__ = "0.1.0"
