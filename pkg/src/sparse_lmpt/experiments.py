"""Monte Carlo engine: paired ROC curves, null-law diagnostics and sensor equivalence.

All detectors in a run share one observation stream, so P_d differences
between detectors are paired. Detectors with fewer sensors than the network
use its leading sensors. Trials are generated in fixed blocks with their own
seeded streams, which makes the output independent of the worker count.
"""

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from .detectors import (
    clmpt_statistic,
    decision_threshold,
    im1bit_statistic_normalized,
    onebit_statistic,
    theoretical_mean,
)
from .fisher_opt import CLMPT, DETECTOR_KINDS, IM1BIT, ONEBIT, PsoConfig, optimize_threshold, sensor_equivalence
from .quantizers import quantize_direct, quantize_lr
from .signal_model import BLOCK_SIZE, Generator, Hypothesis, NetworkModel, SignalModel, generate_block

__all__ = [
    "DEFAULT_PFA_GRID",
    "ExperimentConfig",
    "ResolvedDetector",
    "RocPoint",
    "RocCurve",
    "NormalityRecord",
    "EquivalenceResult",
    "resolve_detectors",
    "simulate_statistics",
    "run_roc",
    "run_equivalence",
    "run_normality",
    "emit_roc_csv",
    "emit_normality_csv",
    "emit_equivalence_csv",
    "read_roc_csv",
]

DEFAULT_PFA_GRID = (0.05, 0.1, 0.2, 0.3, 0.4, 0.5)
ROC_HEADER = ["detector", "pfa_nominal", "pfa_empirical", "pd_empirical", "stderr_pd", "trials_h0", "trials_h1"]
NORMALITY_HEADER = ["detector", "hypothesis", "n", "mean", "variance", "ks_stat", "ks_pass_1pct", "theoretical_mean"]
GAP_TAG = "#max_abs_pd_gap"


def _fmt(x):
    return format(float(x), ".17g")


def _parse_detector(entry, default_q):
    kind, _, q = str(entry).strip().partition(":")
    kind = kind.strip().lower()
    if kind not in DETECTOR_KINDS:
        raise ValueError(f"unknown detector {kind!r}; expected one of {DETECTOR_KINDS}")
    return kind, int(q) if q else default_q


@dataclass(frozen=True)
class ExperimentConfig:
    """Network, signal and Monte Carlo settings of one run.

    ``detectors`` entries are ``kind`` or ``kind:Q``; a bare kind uses
    ``n_sensors``. The simulated network has as many sensors as the largest
    detector needs. ``tau``/``zeta`` override the optimized thresholds.
    """

    n_sensors: int = 300
    dim: int = 1000
    noise_var: float = 1.0
    sparsity: float = 0.05
    nonzero_var: float = 8.0
    generator: str = "exact"
    detectors: tuple = (IM1BIT, ONEBIT)
    trials_h0: int = 10_000
    trials_h1: int = 10_000
    pfa_grid: tuple = DEFAULT_PFA_GRID
    seed: int = 0
    tau: float = None
    zeta: float = None

    def __post_init__(self):
        object.__setattr__(self, "detectors", tuple(str(d).strip() for d in self.detectors))
        object.__setattr__(self, "pfa_grid", tuple(float(p) for p in self.pfa_grid))
        object.__setattr__(self, "generator", Generator(self.generator).value)
        if self.n_sensors < 1 or self.dim < 1:
            raise ValueError("n_sensors and dim must be positive")
        if not self.noise_var > 0:
            raise ValueError("noise_var must be positive")
        if self.trials_h0 < 1 or self.trials_h1 < 1:
            raise ValueError("trials must be >= 1")
        grid = np.asarray(self.pfa_grid)
        if grid.size == 0:
            raise ValueError("pfa_grid must not be empty")
        if np.any(grid <= 0) or np.any(grid >= 1) or np.any(np.diff(grid) <= 0):
            raise ValueError("pfa_grid must be strictly increasing inside (0, 1)")
        if not self.detectors:
            raise ValueError("at least one detector is required")
        for d in self.detectors:
            _, q = _parse_detector(d, self.n_sensors)
            if q < 1:
                raise ValueError(f"detector {d!r} needs a positive sensor count")
        if self.tau is not None and not self.tau > 0:
            raise ValueError("tau must be positive")
        SignalModel(self.sparsity, self.nonzero_var, self.dim)

    @property
    def network_size(self):
        return max(_parse_detector(d, self.n_sensors)[1] for d in self.detectors)

    def network(self):
        return NetworkModel.random(self.network_size, self.dim, self.noise_var, self.seed)

    def signal(self):
        return SignalModel(self.sparsity, self.nonzero_var, self.dim)


@dataclass(frozen=True)
class ResolvedDetector:
    id: str
    kind: str
    n_sensors: int
    threshold: float = None


def resolve_detectors(config, pso_config=PsoConfig()):
    sigma_w = math.sqrt(config.noise_var)
    out = []
    for entry in config.detectors:
        kind, q = _parse_detector(entry, config.n_sensors)
        if kind == CLMPT:
            threshold = None
        else:
            override = config.tau if kind == IM1BIT else config.zeta
            threshold = override if override is not None else optimize_threshold(kind, sigma_w, pso_config).argmax
        det_id = kind if q == config.n_sensors else f"{kind}_Q{q}"
        out.append(ResolvedDetector(det_id, kind, q, threshold))
    ids = [d.id for d in out]
    if len(set(ids)) != len(ids):
        raise ValueError(f"duplicate detectors in {config.detectors}")
    return out


def _statistic(det, y, network):
    y = y[:, : det.n_sensors]
    net = network if det.n_sensors == network.n_sensors else network.subset(det.n_sensors)
    if det.kind == CLMPT:
        return clmpt_statistic(y, net)
    if det.kind == IM1BIT:
        return im1bit_statistic_normalized(quantize_lr(y, det.threshold), net, det.threshold)
    return onebit_statistic(quantize_direct(y, det.threshold), net, det.threshold)


def _block_task(args):
    network, signal, generator, seed, hypothesis, block, detectors = args
    y = generate_block(network, signal, hypothesis, generator, seed, block)
    return np.stack([_statistic(d, y, network) for d in detectors])


def _run_blocks(tasks, workers):
    if workers is None:
        workers = os.cpu_count() or 1
    if workers <= 1 or len(tasks) <= 1:
        return [_block_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(_block_task, tasks))


def simulate_statistics(config, detectors=None, workers=1):
    """Normalized statistics of every detector on shared trials.

    Returns
    -------
    dict
        ``{detector_id: {Hypothesis.H0: ndarray, Hypothesis.H1: ndarray}}``
    """
    if detectors is None:
        detectors = resolve_detectors(config)
    network = config.network()
    signal = config.signal()
    counts = {Hypothesis.H0: config.trials_h0, Hypothesis.H1: config.trials_h1}
    tasks, layout = [], []
    for hyp, n in counts.items():
        n_blocks = -(-n // BLOCK_SIZE)
        for b in range(n_blocks):
            tasks.append((network, signal, config.generator, config.seed, hyp, b, detectors))
            layout.append(hyp)
    results = _run_blocks(tasks, workers)
    out = {d.id: {} for d in detectors}
    for hyp, n in counts.items():
        stacked = np.concatenate([r for r, h in zip(results, layout) if h is hyp], axis=1)[:, :n]
        for i, d in enumerate(detectors):
            out[d.id][hyp] = stacked[i]
    return out


@dataclass(frozen=True)
class RocPoint:
    pfa_nominal: float
    pfa_empirical: float
    pd_empirical: float
    stderr_pd: float


@dataclass(frozen=True)
class RocCurve:
    detector: str
    points: tuple
    trials_h0: int
    trials_h1: int

    @property
    def pd(self):
        return np.array([p.pd_empirical for p in self.points])

    @property
    def pfa(self):
        return np.array([p.pfa_empirical for p in self.points])


def roc_from_statistics(detector, t0, t1, pfa_grid):
    # each trial's statistic is computed once and compared against every threshold
    t0, t1 = np.sort(t0), np.sort(t1)
    points = []
    for pfa in pfa_grid:
        eta = decision_threshold(pfa)
        pfa_emp = (t0.size - np.searchsorted(t0, eta, side="right")) / t0.size
        pd = (t1.size - np.searchsorted(t1, eta, side="right")) / t1.size
        points.append(RocPoint(pfa, pfa_emp, pd, math.sqrt(pd * (1.0 - pd) / t1.size)))
    return RocCurve(detector, tuple(points), int(t0.size), int(t1.size))


def run_roc(config, workers=1, statistics=None):
    """Empirical ROC curve of every configured detector."""
    if statistics is None:
        statistics = simulate_statistics(config, workers=workers)
    return [
        roc_from_statistics(det_id, s[Hypothesis.H0], s[Hypothesis.H1], config.pfa_grid)
        for det_id, s in statistics.items()
    ]


@dataclass(frozen=True)
class EquivalenceResult:
    qc: int
    q_quantized: int
    ratio: float
    curves: list = field(default_factory=list)
    max_abs_pd_gap: float = float("nan")


def run_equivalence(config, qc, ratio=None, workers=1):
    """Centralized detector with ``qc`` sensors against Im-1-bit with ``round(ratio*qc)``."""
    if qc < 1:
        raise ValueError("qc must be positive")
    if ratio is None:
        ratio = sensor_equivalence(CLMPT, IM1BIT)
    q_im = max(1, int(round(ratio * qc)))
    cfg = replace(config, n_sensors=max(qc, q_im), detectors=(f"{CLMPT}:{qc}", f"{IM1BIT}:{q_im}"))
    if not cfg.network().is_homogeneous():
        raise ValueError("sensor equivalence requires homogeneous gains")
    curves = run_roc(cfg, workers=workers)
    gap = float(np.max(np.abs(curves[0].pd - curves[1].pd)))
    return EquivalenceResult(qc, q_im, float(ratio), curves, gap)


@dataclass(frozen=True)
class NormalityRecord:
    detector: str
    hypothesis: str
    n: int
    mean: float
    variance: float
    ks_stat: float
    ks_pass_1pct: bool
    theoretical_mean: float


def run_normality(config, detector_id=None, workers=1, statistics=None):
    """Moments and KS fit of a normalized statistic under both hypotheses.

    Under H0 the reference law is N(0, 1); under H1 it is N(mu, 1) with
    ``mu`` the asymptotic mean. Returns one record per (detector, hypothesis).
    """
    detectors = resolve_detectors(config)
    if detector_id is not None:
        detectors = [d for d in detectors if d.id == detector_id]
        if not detectors:
            raise ValueError(f"no detector {detector_id!r} in config")
    if statistics is None:
        statistics = simulate_statistics(config, detectors, workers=workers)
    network = config.network()
    signal = config.signal()
    records = []
    for det in detectors:
        net = network.subset(det.n_sensors)
        mu = theoretical_mean(det.kind, net, signal, det.threshold)
        for hyp, center in ((Hypothesis.H0, 0.0), (Hypothesis.H1, mu)):
            t = statistics[det.id][hyp]
            ks = stats.kstest(t, "norm", args=(center, 1.0))
            records.append(
                NormalityRecord(
                    det.id, hyp.name, int(t.size), float(np.mean(t)), float(np.var(t, ddof=1)),
                    float(ks.statistic), bool(ks.pvalue >= 0.01), float(mu),
                )
            )
    return records


def _open_for_write(path):
    try:
        return open(path, "w", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _roc_rows(curves):
    for c in curves:
        for p in c.points:
            yield [c.detector, _fmt(p.pfa_nominal), _fmt(p.pfa_empirical), _fmt(p.pd_empirical),
                   _fmt(p.stderr_pd), c.trials_h0, c.trials_h1]


def emit_roc_csv(curves, path):
    if not curves:
        raise ValueError("no ROC curves to write")
    with _open_for_write(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ROC_HEADER)
        writer.writerows(_roc_rows(curves))
    return path


def emit_equivalence_csv(result, path):
    with _open_for_write(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ROC_HEADER)
        writer.writerows(_roc_rows(result.curves))
        writer.writerow([GAP_TAG, _fmt(result.max_abs_pd_gap)])
    return path


def emit_normality_csv(records, path):
    if not records:
        raise ValueError("no normality records to write")
    with _open_for_write(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(NORMALITY_HEADER)
        for r in records:
            writer.writerow([r.detector, r.hypothesis, r.n, _fmt(r.mean), _fmt(r.variance),
                             _fmt(r.ks_stat), str(r.ks_pass_1pct).lower(), _fmt(r.theoretical_mean)])
    return path


def read_roc_csv(path):
    """Parse a ROC (or equivalence) CSV back into curves; summary rows are skipped."""
    curves = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ROC_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        for row in reader:
            if not row or row[0].startswith("#"):
                continue
            det, *nums, n0, n1 = row
            entry = curves.setdefault(det, {"points": [], "n": (int(n0), int(n1))})
            entry["points"].append(RocPoint(*map(float, nums)))
    return [RocCurve(d, tuple(e["points"]), *e["n"]) for d, e in curves.items()]
