"""Local 1-bit processing at the sensors.

Two rules are supported:

* ``lr``: quantize the local likelihood ratio. Because the ratio is an
  increasing function of ``|y|``, thresholding it at ``lambda`` is the same as
  ``b = 1{|y| >= tau}``, which is what is actually evaluated.
* ``direct``: the sign quantizer ``z = 1{y > zeta}`` used by the baseline
  1-bit LMPT detector.
"""

from dataclasses import dataclass

import numpy as np

from .math_kernel import f_func, upper_tail
from .signal_model import Hypothesis

__all__ = [
    "LR",
    "DIRECT",
    "QuantizerBank",
    "lr_coefficients",
    "lr_value",
    "lambda_to_tau",
    "quantize",
    "quantize_lr",
    "quantize_direct",
    "bit_pmf_lr",
    "bit_pmf_direct",
]

LR = "lr"
DIRECT = "direct"
KINDS = (LR, DIRECT)


@dataclass(frozen=True)
class QuantizerBank:
    """Rule kind and one threshold per sensor (``tau_q`` or ``zeta_q``)."""

    kind: str
    thresholds: np.ndarray

    def __post_init__(self):
        kind = str(self.kind).lower()
        if kind not in KINDS:
            raise ValueError(f"unknown quantizer kind {self.kind!r}; expected one of {KINDS}")
        thresholds = np.array(self.thresholds, dtype=float, ndmin=1)
        if thresholds.ndim != 1 or thresholds.size == 0:
            raise ValueError("thresholds must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(thresholds)):
            raise ValueError("thresholds must be finite")
        if kind == LR and np.any(thresholds <= 0):
            # a nonpositive tau makes every bit 1, so the sensor carries no information
            raise ValueError("LR thresholds must be strictly positive")
        thresholds.setflags(write=False)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "thresholds", thresholds)

    @property
    def n_sensors(self):
        return self.thresholds.size

    @classmethod
    def broadcast(cls, kind, threshold, n_sensors):
        return cls(kind, np.full(n_sensors, float(threshold)))

    def subset(self, n_sensors):
        return QuantizerBank(self.kind, self.thresholds[:n_sensors])

    def to_config(self):
        """Flat key/value form; a common threshold is written as a scalar."""
        th = self.thresholds
        if np.all(th == th[0]):
            value = format(th[0], ".17g")
        else:
            value = ",".join(format(t, ".17g") for t in th)
        return {"kind": self.kind, "n_sensors": str(self.n_sensors), "thresholds": value}

    @classmethod
    def from_config(cls, cfg):
        values = [float(v) for v in str(cfg["thresholds"]).split(",") if v.strip()]
        if len(values) == 1 and "n_sensors" in cfg:
            return cls.broadcast(cfg["kind"], values[0], int(cfg["n_sensors"]))
        return cls(cfg["kind"], values)


def _sensor_terms(network, q, signal):
    # p sigma_0^2 ||h_q||^2, the signal contribution to the H1 variance
    return signal.sparsity * signal.nonzero_var * network.norms_sq[q], network.noise_var


def lr_coefficients(network, q, signal):
    """``(c0, c1)`` such that LR_q(y) = c0 * exp(c1 * y^2)."""
    sig, nv = _sensor_terms(network, q, signal)
    c0 = np.sqrt(nv / (sig + nv))
    c1 = sig / (2.0 * nv * (sig + nv))
    return float(c0), float(c1)


def lr_value(y, network, q, signal):
    """Likelihood ratio of the H1 and H0 Gaussian laws of sensor ``q``."""
    if signal.sparsity == 0.0:
        return np.ones_like(np.asarray(y, dtype=float))[()]
    c0, c1 = lr_coefficients(network, q, signal)
    y = np.asarray(y, dtype=float)
    return (c0 * np.exp(c1 * y * y))[()]


def lambda_to_tau(lam, network, q, signal):
    """Map an LR threshold to the equivalent ``|y|`` threshold."""
    if signal.sparsity == 0.0:
        raise ValueError("the likelihood ratio is constant when p = 0")
    c0, c1 = lr_coefficients(network, q, signal)
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= c0):
        raise ValueError(
            f"lambda must exceed c0 = {c0:.6g}; smaller values give an uninformative quantizer"
        )
    return np.sqrt(np.log(lam / c0) / c1)[()]


def quantize_lr(y, thresholds):
    """``b_q = 1`` iff ``|y_q| >= tau_q``. Works row-wise on a trials x Q matrix."""
    y = np.asarray(y, dtype=float)
    thresholds = np.asarray(thresholds, dtype=float)
    if np.any(thresholds <= 0):
        raise ValueError("LR thresholds must be strictly positive")
    return (np.abs(y) >= thresholds).astype(np.uint8)


def quantize_direct(y, thresholds):
    """``z_q = 1`` iff ``y_q > zeta_q`` (equality maps to 0)."""
    y = np.asarray(y, dtype=float)
    return (y > np.asarray(thresholds, dtype=float)).astype(np.uint8)


def quantize(y, bank):
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != bank.n_sensors:
        raise ValueError(f"observations have {y.shape[-1]} sensors, bank has {bank.n_sensors}")
    if bank.kind == LR:
        return quantize_lr(y, bank.thresholds)
    return quantize_direct(y, bank.thresholds)


def _scaled(threshold, network, q, hypothesis, signal):
    hypothesis = Hypothesis.parse(hypothesis)
    if hypothesis is Hypothesis.H0:
        return f_func(threshold, 0.0, network.norms_sq[q], 0.0, network.noise_var)
    if signal is None:
        raise ValueError("the H1 probability needs a SignalModel")
    p, nonzero_var = signal.sparsity, signal.nonzero_var
    return f_func(threshold, p, network.norms_sq[q], nonzero_var, network.noise_var)


def bit_pmf_lr(tau, network, q, hypothesis, signal=None):
    """P(b_q = 1) for the LR quantizer under ``hypothesis``."""
    return 2.0 * upper_tail(_scaled(tau, network, q, hypothesis, signal))


def bit_pmf_direct(zeta, network, q, hypothesis, signal=None):
    """P(z_q = 1) for the direct quantizer under ``hypothesis``."""
    return upper_tail(_scaled(zeta, network, q, hypothesis, signal))
