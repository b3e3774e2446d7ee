"""Fusion-center LMPT statistics and the false-alarm calibrated decision.

Every statistic here is a score test at ``p = 0`` divided by the root Fisher
information, so it is asymptotically N(0, 1) under H0 and the decision
threshold ``Q^{-1}(P_fa)`` needs neither ``p`` nor ``sigma_0^2``.

For a sensor emitting a Bernoulli bit with ``P(b=1) = P(p)`` the score at zero
is ``P'(0) (b - P(0)) / (P(0) (1 - P(0)))``. The factor ``sigma_0^2`` in
``P'(0)`` is common to every sensor and cancels after normalization, so the
statistics below are computed with it set to one.

The module exposes plain functions and thin scikit-learn style estimators
(:class:`Im1BitLMPT`, :class:`OneBitLMPT`, :class:`CentralizedLMPT`).
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .fisher_opt import (
    CLMPT,
    IM1BIT,
    ONEBIT,
    PsoConfig,
    fisher_clmpt,
    fisher_im1bit,
    fisher_onebit,
    optimize_bank,
)
from .math_kernel import normal_pdf, upper_tail, upper_tail_inverse
from .quantizers import DIRECT, LR, QuantizerBank, quantize
from .signal_model import Hypothesis, NetworkModel

__all__ = [
    "Decision",
    "DetectorSpec",
    "im1bit_weights",
    "im1bit_statistic_raw",
    "im1bit_statistic_normalized",
    "onebit_statistic",
    "clmpt_statistic",
    "bernoulli_score_terms",
    "decision_threshold",
    "decide",
    "theoretical_mean",
    "expected_statistic",
    "Im1BitLMPT",
    "OneBitLMPT",
    "CentralizedLMPT",
]


@dataclass(frozen=True)
class Decision:
    statistic: float
    threshold: float
    declared: Hypothesis


@dataclass(frozen=True)
class DetectorSpec:
    """Detector kind, quantizer bank (None for the centralized test) and P_fa."""

    kind: str
    bank: QuantizerBank = None
    pfa: float = 0.05

    def __post_init__(self):
        if self.kind not in (IM1BIT, ONEBIT, CLMPT):
            raise ValueError(f"unknown detector kind {self.kind!r}")
        needed = {IM1BIT: LR, ONEBIT: DIRECT}.get(self.kind)
        if needed is not None and (self.bank is None or self.bank.kind != needed):
            raise ValueError(f"{self.kind} requires a {needed!r} quantizer bank")
        if not 0.0 < self.pfa < 1.0:
            raise ValueError("pfa must lie in (0, 1)")


def _bits(bits, n_sensors):
    bits = np.asarray(bits)
    if bits.shape[-1] != n_sensors:
        raise ValueError(f"expected {n_sensors} bits per report, got {bits.shape[-1]}")
    return bits.astype(float)


def bernoulli_score_terms(kind, network, thresholds):
    """Per-sensor ``(P(b=1|H0), dP(b=1)/dp at 0)`` with ``sigma_0^2 = 1``."""
    thresholds = np.broadcast_to(np.asarray(thresholds, dtype=float), (network.n_sensors,))
    t = thresholds / network.sigma_w
    slope = normal_pdf(t) * t * network.norms_sq / network.noise_var
    if kind == IM1BIT:
        return 2.0 * upper_tail(t), slope
    if kind == ONEBIT:
        return upper_tail(t), 0.5 * slope
    raise ValueError(f"{kind!r} is not a 1-bit detector")


def _normalized_bernoulli(kind, bits, network, thresholds):
    p0, slope = bernoulli_score_terms(kind, network, thresholds)
    bits = _bits(bits, network.n_sensors)
    scale = slope / (p0 * (1.0 - p0))
    fisher = np.sum(slope * scale)
    if not fisher > 0:
        raise ValueError("thresholds carry no Fisher information")
    return ((bits - p0) @ scale) / np.sqrt(fisher)


def im1bit_weights(network, taus):
    """Bit weights of the unnormalized Im-1-bit statistic, one per sensor."""
    taus = np.broadcast_to(np.asarray(taus, dtype=float), (network.n_sensors,))
    if np.any(taus <= 0):
        raise ValueError("taus must be strictly positive")
    tail = upper_tail(taus / network.sigma_w)
    return taus * network.norms_sq * np.exp(-(taus**2) / (2.0 * network.noise_var)) / ((0.5 - tail) * tail)


def im1bit_statistic_raw(bits, network, taus):
    """Weighted bit count; proportional to the score up to an additive constant."""
    return _bits(bits, network.n_sensors) @ im1bit_weights(network, taus)


def im1bit_statistic_normalized(bits, network, taus):
    """Score at ``p = 0`` of the LR-quantized bits over root Fisher information."""
    return _normalized_bernoulli(IM1BIT, bits, network, taus)


def onebit_statistic(bits, network, zetas):
    """Normalized LMPT statistic of sign-quantized observations."""
    return _normalized_bernoulli(ONEBIT, bits, network, zetas)


def raw_to_normalized(network, taus):
    """``(a, b)`` with normalized = ``a * raw + b`` for the Im-1-bit statistic."""
    p0, slope = bernoulli_score_terms(IM1BIT, network, taus)
    scale = slope / (p0 * (1.0 - p0))
    root_fi = np.sqrt(np.sum(slope * scale))
    a = (scale[0] / im1bit_weights(network, taus)[0]) / root_fi
    return a, -np.sum(scale * p0) / root_fi


def clmpt_statistic(y, network):
    """Centralized LMPT statistic of the analog observations.

    ``sum_q ||h_q||^2 (y_q^2 / sigma_w^2 - 1) / sqrt(2 sum_q ||h_q||^4)``
    """
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != network.n_sensors:
        raise ValueError(f"expected {network.n_sensors} observations, got {y.shape[-1]}")
    h2 = network.norms_sq
    return ((y**2 / network.noise_var - 1.0) @ h2) / np.sqrt(2.0 * np.sum(h2**2))


def decision_threshold(pfa):
    if not 0.0 < pfa < 1.0:
        raise ValueError("pfa must lie in (0, 1)")
    return upper_tail_inverse(pfa)


def decide(statistic, pfa):
    """Declare H1 iff the normalized statistic exceeds ``Q^{-1}(pfa)``."""
    eta = decision_threshold(pfa)
    statistic = float(statistic)
    return Decision(statistic, eta, Hypothesis.H1 if statistic > eta else Hypothesis.H0)


def theoretical_mean(kind, network, signal, thresholds=None):
    """Asymptotic H1 mean ``p sqrt(FI(0))`` of a normalized statistic."""
    if kind == CLMPT:
        fisher = fisher_clmpt(network, signal)
    elif kind == IM1BIT:
        fisher = fisher_im1bit(network, signal, thresholds)
    elif kind == ONEBIT:
        fisher = fisher_onebit(network, signal, thresholds)
    else:
        raise ValueError(f"unknown detector kind {kind!r}")
    return signal.sparsity * np.sqrt(fisher)


def expected_statistic(kind, network, signal, thresholds=None):
    """Exact H1 mean of a normalized statistic under the Gaussian surrogate law.

    Unlike :func:`theoretical_mean` this keeps the finite-``p`` bit
    probabilities instead of their first-order expansion.
    """
    var1 = network.noise_var + signal.sparsity * signal.nonzero_var * network.norms_sq
    if kind == CLMPT:
        h2 = network.norms_sq
        return float(((var1 / network.noise_var - 1.0) @ h2) / np.sqrt(2.0 * np.sum(h2**2)))
    p0, slope = bernoulli_score_terms(kind, network, thresholds)
    t1 = np.broadcast_to(np.asarray(thresholds, dtype=float), p0.shape) / np.sqrt(var1)
    p1 = 2.0 * upper_tail(t1) if kind == IM1BIT else upper_tail(t1)
    scale = slope / (p0 * (1.0 - p0))
    return float(((p1 - p0) @ scale) / np.sqrt(np.sum(slope * scale)))


# -- estimator API -----------------------------------------------------------


class _LMPTBase(ClassifierMixin, BaseEstimator):
    """Shared fit/predict plumbing.

    ``fit`` resolves the noise variance (from signal-free observations when
    ``noise_var`` is None) and, for the 1-bit detectors, the quantizer
    thresholds. ``decision_function`` returns the normalized statistic and
    ``predict`` thresholds it at ``Q^{-1}(pfa)``; label 1 means H1.
    """

    _kind = None

    def _resolve_network(self, X):
        gains = np.atleast_2d(np.asarray(self.gains, dtype=float))
        noise_var = self.noise_var
        if noise_var is None:
            if X is None:
                raise ValueError("noise_var is None: pass signal-free observations to fit")
            X = check_array(X)
            if X.shape[1] != gains.shape[0]:
                raise ValueError(f"X has {X.shape[1]} sensors, gains define {gains.shape[0]}")
            noise_var = float(np.mean(X**2))
        return NetworkModel(gains, noise_var)

    def _check_X(self, X):
        check_is_fitted(self, "network_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} sensors, detector expects {self.n_features_in_}")
        return X

    def _fit_extra(self):
        pass

    def fit(self, X=None, y=None):
        if not 0.0 < self.pfa < 1.0:
            raise ValueError("pfa must lie in (0, 1)")
        self.network_ = self._resolve_network(X)
        self.n_features_in_ = self.network_.n_sensors
        self.classes_ = np.array([0, 1])
        self.threshold_ = decision_threshold(self.pfa)
        self._fit_extra()
        return self

    def predict(self, X):
        return (self.decision_function(X) > self.threshold_).astype(int)


class _OneBitBase(TransformerMixin, _LMPTBase):
    _quantizer = None

    def __init__(self, gains, noise_var=1.0, thresholds=None, pfa=0.05, pso_config=None):
        self.gains = gains
        self.noise_var = noise_var
        self.thresholds = thresholds
        self.pfa = pfa
        self.pso_config = pso_config

    def _fit_extra(self):
        if self.thresholds is None:
            self.bank_ = optimize_bank(self.network_, self._quantizer, self.pso_config or PsoConfig())
        else:
            th = np.broadcast_to(np.asarray(self.thresholds, dtype=float), (self.n_features_in_,))
            self.bank_ = QuantizerBank(self._quantizer, th)

    def transform(self, X):
        """Quantize observations into the bits each sensor sends."""
        return quantize(self._check_X(X), self.bank_)

    def decision_function_bits(self, bits):
        check_is_fitted(self, "bank_")
        return _normalized_bernoulli(self._kind, bits, self.network_, self.bank_.thresholds)

    def decision_function(self, X):
        return self.decision_function_bits(self.transform(X))


class Im1BitLMPT(_OneBitBase):
    """LMPT fusion of 1-bit quantized local likelihood ratios.

    Parameters
    ----------
    gains : array_like of shape (Q, N)
        Known sensor gain vectors.
    noise_var : float or None, default=1.0
        Noise variance; estimated in ``fit`` from signal-free data when None.
    thresholds : float, array_like or None, default=None
        ``|y|`` thresholds ``tau_q``; optimized for Fisher information when None.
    pfa : float, default=0.05
        Target false-alarm probability.
    pso_config : PsoConfig or None
        Settings for the threshold search.
    """

    _kind = IM1BIT
    _quantizer = LR

    def raw_statistic(self, X):
        return im1bit_statistic_raw(self.transform(X), self.network_, self.bank_.thresholds)


class OneBitLMPT(_OneBitBase):
    """LMPT fusion of directly sign-quantized observations (baseline)."""

    _kind = ONEBIT
    _quantizer = DIRECT


class CentralizedLMPT(_LMPTBase):
    """LMPT on unquantized observations."""

    _kind = CLMPT

    def __init__(self, gains, noise_var=1.0, pfa=0.05):
        self.gains = gains
        self.noise_var = noise_var
        self.pfa = pfa

    def decision_function(self, X):
        return clmpt_statistic(self._check_X(X), self.network_)
