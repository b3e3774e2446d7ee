"""Bernoulli-Gaussian sparse signals observed through a network of linear sensors.

Under H0 every sensor sees noise only, ``y_q = w_q``. Under H1 a support
vector ``u`` with i.i.d. Bernoulli(p) entries is shared by all sensors; each
sensor carries its own i.i.d. N(0, sigma_0^2) values on that support and
observes ``y_q = h_q^T s_q + w_q``.

Random draws are organised in fixed-size trial blocks, each with its own
seed-derived stream, so that any partition of the blocks across workers
reproduces the serial batch exactly.
"""

import csv
import enum
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "BLOCK_SIZE",
    "Hypothesis",
    "Generator",
    "NetworkModel",
    "SignalModel",
    "ObservationBatch",
    "block_rng",
    "make_gains",
    "draw_support",
    "draw_sparse_signals",
    "generate_exact",
    "generate_asymptotic",
    "generate",
]

BLOCK_SIZE = 256

# stream tags keep the gain draw and the per-hypothesis trial streams disjoint
_GAINS_STREAM = 0
_TRIAL_STREAM = 1


class Hypothesis(enum.IntEnum):
    H0 = 0
    H1 = 1

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            return cls[value.strip().upper()]
        return cls(int(value))


class Generator(str, enum.Enum):
    EXACT = "exact"
    ASYMPTOTIC = "asymptotic"


def block_rng(seed, *tags):
    """Independent generator for the stream identified by ``(seed, *tags)``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, tags)]))


@dataclass(frozen=True)
class NetworkModel:
    """Fixed sensor geometry: one gain row per sensor and the noise variance."""

    gains: np.ndarray
    noise_var: float = 1.0
    norms_sq: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        gains = np.array(self.gains, dtype=float, ndmin=2)
        if gains.ndim != 2 or gains.shape[0] < 1 or gains.shape[1] < 1:
            raise ValueError("gains must be a non-empty (Q, N) matrix")
        if not np.all(np.isfinite(gains)):
            raise ValueError("gains must be finite")
        if not (np.isfinite(self.noise_var) and self.noise_var > 0):
            raise ValueError("noise_var must be positive")
        gains.setflags(write=False)
        norms_sq = np.einsum("qn,qn->q", gains, gains)
        norms_sq.setflags(write=False)
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "noise_var", float(self.noise_var))
        object.__setattr__(self, "norms_sq", norms_sq)

    @property
    def n_sensors(self):
        return self.gains.shape[0]

    @property
    def dim(self):
        return self.gains.shape[1]

    @property
    def sigma_w(self):
        return float(np.sqrt(self.noise_var))

    def is_homogeneous(self, rtol=1e-9):
        return bool(np.allclose(self.norms_sq, self.norms_sq[0], rtol=rtol, atol=0.0))

    def subset(self, n_sensors):
        """Network made of the first ``n_sensors`` sensors."""
        if not 1 <= n_sensors <= self.n_sensors:
            raise ValueError(f"n_sensors must be in [1, {self.n_sensors}]")
        return NetworkModel(self.gains[:n_sensors], self.noise_var)

    @classmethod
    def random(cls, n_sensors, dim, noise_var=1.0, seed=0):
        """Unit-norm Gaussian gains, reproducible from ``seed``."""
        return cls(make_gains(n_sensors, dim, block_rng(seed, _GAINS_STREAM)), noise_var)


@dataclass(frozen=True)
class SignalModel:
    sparsity: float
    nonzero_var: float
    dim: int

    def __post_init__(self):
        if not 0.0 <= self.sparsity < 1.0:
            raise ValueError("sparsity must lie in [0, 1)")
        if not self.nonzero_var > 0:
            raise ValueError("nonzero_var must be positive")
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError("dim must be a positive integer")

    def check_network(self, network):
        if network.dim != self.dim:
            raise ValueError(f"signal dim {self.dim} does not match network dim {network.dim}")


@dataclass(frozen=True)
class ObservationBatch:
    """Trials x sensors matrix of scalar observations."""

    values: np.ndarray
    hypothesis: Hypothesis
    generator: Generator
    seed: int
    degenerate: bool = False  # H1 requested with p = 0, i.e. the H0 law

    @property
    def n_trials(self):
        return self.values.shape[0]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["trial", "sensor", "value"])
            for t, row in enumerate(self.values):
                for q, v in enumerate(row):
                    writer.writerow([t, q, format(float(v), ".17g")])


def make_gains(n_sensors, dim, rng):
    """Gaussian gain vectors normalized to unit squared norm."""
    if n_sensors < 1 or dim < 1:
        raise ValueError("n_sensors and dim must be positive")
    gains = rng.standard_normal((n_sensors, dim))
    norms = np.linalg.norm(gains, axis=1)
    while np.any(norms == 0.0):
        bad = norms == 0.0
        gains[bad] = rng.standard_normal((int(bad.sum()), dim))
        norms = np.linalg.norm(gains, axis=1)
    return gains / norms[:, None]


def draw_support(signal, rng, size=None):
    """Joint sparsity pattern(s): Bernoulli(p) entries of length ``signal.dim``."""
    shape = (signal.dim,) if size is None else (size, signal.dim)
    return rng.random(shape) < signal.sparsity


def draw_sparse_signals(signal, n_sensors, rng):
    """One H1 draw of ``(u, S)`` with ``S[q]`` the sparse vector of sensor q."""
    u = draw_support(signal, rng)
    s = np.zeros((n_sensors, signal.dim))
    s[:, u] = np.sqrt(signal.nonzero_var) * rng.standard_normal((n_sensors, int(u.sum())))
    return u, s


def _block_bounds(trials):
    for start in range(0, trials, BLOCK_SIZE):
        yield start // BLOCK_SIZE, min(BLOCK_SIZE, trials - start)


def _exact_block(network, signal, hypothesis, n, rng):
    sigma_w = network.sigma_w
    noise = sigma_w * rng.standard_normal((n, network.n_sensors))
    if hypothesis is Hypothesis.H0:
        return noise
    support = draw_support(signal, rng, size=n)
    sigma0 = np.sqrt(signal.nonzero_var)
    y = noise
    for t in range(n):
        idx = np.flatnonzero(support[t])
        if idx.size:
            s = sigma0 * rng.standard_normal((network.n_sensors, idx.size))
            y[t] += np.einsum("qk,qk->q", network.gains[:, idx], s)
    return y


def _asymptotic_block(network, signal, hypothesis, n, rng):
    var = np.full(network.n_sensors, network.noise_var)
    if hypothesis is Hypothesis.H1:
        var = var + signal.sparsity * signal.nonzero_var * network.norms_sq
    return np.sqrt(var) * rng.standard_normal((n, network.n_sensors))


_BLOCK_FUNCS = {Generator.EXACT: _exact_block, Generator.ASYMPTOTIC: _asymptotic_block}


def generate_block(network, signal, hypothesis, generator, seed, block):
    """Observations for one trial block (``BLOCK_SIZE`` trials)."""
    hypothesis = Hypothesis.parse(hypothesis)
    generator = Generator(generator)
    rng = block_rng(seed, _TRIAL_STREAM, hypothesis, block)
    return _BLOCK_FUNCS[generator](network, signal, hypothesis, BLOCK_SIZE, rng)


def generate(network, signal, hypothesis, trials, seed, generator=Generator.EXACT):
    """Draw ``trials`` observation vectors under ``hypothesis``.

    Parameters
    ----------
    network : NetworkModel
    signal : SignalModel
    hypothesis : Hypothesis or {"H0", "H1"}
    trials : int
    seed : int
    generator : {"exact", "asymptotic"}
        ``exact`` simulates the sparse vectors and the linear measurement;
        ``asymptotic`` samples the zero-mean Gaussian with variance
        ``p sigma_0^2 ||h_q||^2 + sigma_w^2`` directly.

    Returns
    -------
    ObservationBatch
    """
    hypothesis = Hypothesis.parse(hypothesis)
    generator = Generator(generator)
    signal.check_network(network)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    blocks = [
        generate_block(network, signal, hypothesis, generator, seed, b)[:n]
        for b, n in _block_bounds(trials)
    ]
    return ObservationBatch(
        values=np.concatenate(blocks, axis=0),
        hypothesis=hypothesis,
        generator=generator,
        seed=int(seed),
        degenerate=hypothesis is Hypothesis.H1 and signal.sparsity == 0.0,
    )


def generate_exact(network, signal, hypothesis, trials, seed):
    return generate(network, signal, hypothesis, trials, seed, Generator.EXACT)


def generate_asymptotic(network, signal, hypothesis, trials, seed):
    return generate(network, signal, hypothesis, trials, seed, Generator.ASYMPTOTIC)
