"""Fisher information of the fusion statistics and threshold design by PSO.

At ``p = 0`` each sensor contributes ``Psi(t) ||h_q||^4 sigma_0^4 / (4 sigma_w^4)``
to the Fisher information, where ``t`` is the quantizer threshold divided by
``sigma_w``. ``Psi`` depends on nothing else, so maximizing the total over Q
thresholds reduces to a single scalar problem solved once and rescaled by
``sigma_w``.
"""

import logging
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .math_kernel import _unwrap, g_func, normal_pdf, upper_tail
from .quantizers import DIRECT, LR, QuantizerBank

__all__ = [
    "PsoConfig",
    "OptResult",
    "psi_lr",
    "psi_direct",
    "fisher_im1bit",
    "fisher_onebit",
    "fisher_clmpt",
    "pso_maximize",
    "optimize_threshold",
    "optimize_bank",
    "fi_factor",
    "sensor_equivalence",
]

logger = logging.getLogger(__name__)

IM1BIT = "im1bit"
ONEBIT = "onebit"
CLMPT = "clmpt"
DETECTOR_KINDS = (IM1BIT, ONEBIT, CLMPT)
QUANTIZER_FOR = {IM1BIT: LR, ONEBIT: DIRECT}


def _ratio(tau, sigma_w):
    if np.any(np.asarray(sigma_w) <= 0):
        raise ValueError("sigma_w must be positive")
    return np.asarray(tau, dtype=float) / sigma_w


def psi_lr(tau, sigma_w=1.0):
    """Per-sensor Fisher information kernel of the LR quantizer.

    ``g(t) / ([1/2 - Q(t)] Q(t))`` with ``t = tau / sigma_w`` and ``Q`` the
    Gaussian upper tail.
    """
    t = _ratio(tau, sigma_w)
    if np.any(t <= 0):
        raise ValueError("tau must be strictly positive")
    tail = upper_tail(t)
    return _unwrap(g_func(t) / ((0.5 - tail) * tail))


def psi_direct(zeta, sigma_w=1.0):
    """Per-sensor Fisher information kernel of the direct sign quantizer.

    ``g(t) / (Q(t) [1 - Q(t)])``; even in ``t`` and zero at ``t = 0``.
    """
    t = _ratio(zeta, sigma_w)
    tail = upper_tail(t)
    return _unwrap(g_func(t) / (tail * (1.0 - tail)))


def _variance_terms(network, signal, p_eval):
    # p sigma_0^2 ||h||^2 + sigma_w^2 and sigma_0^2 ||h||^2 per sensor
    signal_power = signal.nonzero_var * network.norms_sq
    return p_eval * signal_power + network.noise_var, signal_power


def _check_thresholds(network, thresholds):
    return np.broadcast_to(np.asarray(thresholds, dtype=float), (network.n_sensors,))


def fisher_im1bit(network, signal, taus, p_eval=0.0):
    """Fisher information of the LR-quantized bits with respect to ``p``."""
    taus = _check_thresholds(network, taus)
    if np.any(taus <= 0):
        raise ValueError("taus must be strictly positive")
    var, signal_power = _variance_terms(network, signal, p_eval)
    f = taus / np.sqrt(var)
    tail = upper_tail(f)
    terms = g_func(f) * signal_power**2 / (4.0 * var**2) / ((0.5 - tail) * tail)
    return float(terms.sum())


def fisher_onebit(network, signal, zetas, p_eval=0.0):
    """Fisher information of the sign-quantized bits with respect to ``p``."""
    zetas = _check_thresholds(network, zetas)
    var, signal_power = _variance_terms(network, signal, p_eval)
    f = zetas / np.sqrt(var)
    tail = upper_tail(f)
    # dP(z=1)/dp = pdf(f) * zeta * sigma_0^2 ||h||^2 / (2 var^{3/2})
    slope = normal_pdf(f) * f * signal_power / (2.0 * var)
    return float((slope**2 / (tail * (1.0 - tail))).sum())


def fisher_clmpt(network, signal, p_eval=0.0):
    """Fisher information of the analog observations with respect to ``p``."""
    var, signal_power = _variance_terms(network, signal, p_eval)
    return float((signal_power**2 / (2.0 * var**2)).sum())


@dataclass(frozen=True)
class PsoConfig:
    swarm_size: int = 50
    iterations: int = 200
    inertia: float = 0.7
    cognitive_weight: float = 1.5
    social_weight: float = 1.5
    restarts: int = 10
    search_interval: tuple = (1e-4, 10.0)
    seed: int = 0

    def __post_init__(self):
        if self.swarm_size < 2:
            raise ValueError("swarm_size must be >= 2")
        if self.iterations < 1 or self.restarts < 1:
            raise ValueError("iterations and restarts must be >= 1")
        if not 0.0 < self.inertia < 1.0:
            raise ValueError("inertia must lie in (0, 1)")
        lo, hi = self.search_interval
        if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
            raise ValueError("search_interval must be a finite (lo, hi) with lo < hi")
        object.__setattr__(self, "search_interval", (float(lo), float(hi)))


@dataclass(frozen=True)
class OptResult:
    argmax: float
    max_value: float
    converged_runs: int
    spread: float
    restart_argmaxes: tuple = ()


def _evaluate(objective, x, rng, lo, hi, max_resample=100):
    values = np.asarray(objective(x), dtype=float)
    for _ in range(max_resample):
        bad = ~np.isfinite(values)
        if not bad.any():
            return x, values
        logger.warning("objective not finite at %d probe point(s); resampling", int(bad.sum()))
        x = x.copy()
        x[bad] = rng.uniform(lo, hi, int(bad.sum()))
        values = np.asarray(objective(x), dtype=float)
    raise FloatingPointError("objective is not finite on the search interval")


def _pso_run(objective, config, rng):
    lo, hi = config.search_interval
    n = config.swarm_size
    span = hi - lo
    x = rng.uniform(lo, hi, n)
    v = rng.uniform(-span, span, n) * 0.1
    x, fx = _evaluate(objective, x, rng, lo, hi)
    best_x, best_f = x.copy(), fx.copy()
    g = int(np.argmax(best_f))
    for _ in range(config.iterations):
        r1 = rng.random(n)
        r2 = rng.random(n)
        v = (
            config.inertia * v
            + config.cognitive_weight * r1 * (best_x - x)
            + config.social_weight * r2 * (best_x[g] - x)
        )
        x = np.clip(x + v, lo, hi)
        x, fx = _evaluate(objective, x, rng, lo, hi)
        improved = fx > best_f
        best_x[improved] = x[improved]
        best_f[improved] = fx[improved]
        g = int(np.argmax(best_f))
    return float(best_x[g]), float(best_f[g])


def pso_maximize(objective, config=PsoConfig()):
    """Maximize a vectorized scalar objective on ``config.search_interval``.

    Runs ``config.restarts`` independent swarms, each with its own seeded
    stream, and returns the best of them. ``objective`` receives an array of
    particle positions and must return an array of values.
    """
    runs = [
        _pso_run(objective, config, np.random.default_rng([config.seed, r]))
        for r in range(config.restarts)
    ]
    xs = np.array([r[0] for r in runs])
    fs = np.array([r[1] for r in runs])
    best = int(np.argmax(fs))
    lo, hi = config.search_interval
    tol = 1e-6 * max(hi - lo, 1.0)
    return OptResult(
        argmax=float(xs[best]),
        max_value=float(fs[best]),
        converged_runs=int(np.sum(np.abs(xs - xs[best]) <= tol)),
        spread=float(xs.max() - xs.min()),
        restart_argmaxes=tuple(float(x) for x in xs),
    )


_PSI = {LR: psi_lr, DIRECT: psi_direct}


def _quantizer_kind(kind):
    kind = QUANTIZER_FOR.get(kind, kind)
    if kind not in _PSI:
        raise ValueError(f"unknown quantizer kind {kind!r}")
    return kind


@lru_cache(maxsize=32)
def _normalized_optimum(kind, config):
    return pso_maximize(lambda t: _PSI[kind](t, 1.0), config)


def optimize_threshold(kind, sigma_w=1.0, config=PsoConfig()):
    """Optimal threshold for a quantizer kind in units of ``y``.

    ``config.search_interval`` is expressed in units of ``sigma_w``. The
    returned ``max_value`` is the kernel maximum, i.e. four times the Fisher
    information factor.
    """
    if not sigma_w > 0:
        raise ValueError("sigma_w must be positive")
    res = _normalized_optimum(_quantizer_kind(kind), config)
    return replace(
        res,
        argmax=res.argmax * sigma_w,
        spread=res.spread * sigma_w,
        restart_argmaxes=tuple(x * sigma_w for x in res.restart_argmaxes),
    )


def optimize_bank(network, kind, config=PsoConfig()):
    """Quantizer bank maximizing the Fisher information at ``p = 0``.

    The per-sensor problems are identical up to the ``sigma_w`` scaling, so
    one optimization serves every sensor.
    """
    kind = _quantizer_kind(kind)
    res = optimize_threshold(kind, network.sigma_w, config)
    return QuantizerBank.broadcast(kind, res.argmax, network.n_sensors)


def fi_factor(kind, config=PsoConfig()):
    """Homogeneous Fisher information factor ``c`` in ``FI(0) = c Q ||h||^4 sigma_0^4 / sigma_w^4``.

    For the quantized detectors ``c`` is the optimized kernel maximum over 4.
    """
    if kind == CLMPT:
        return 0.5
    return optimize_threshold(kind, 1.0, config).max_value / 4.0


def sensor_equivalence(reference, quantized, network=None, config=PsoConfig()):
    """Sensor-count ratio ``Q_quantized / Q_reference`` giving equal asymptotic means."""
    for kind in (reference, quantized):
        if kind not in DETECTOR_KINDS:
            raise ValueError(f"unknown detector kind {kind!r}")
    if network is not None and not network.is_homogeneous():
        raise ValueError("sensor equivalence is defined for homogeneous networks only")
    return fi_factor(reference, config) / fi_factor(quantized, config)
