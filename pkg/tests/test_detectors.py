import itertools

import mpmath
import numpy as np
import pytest
import sympy as sp
from scipy import stats
from scipy.stats import norm
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from sparse_lmpt.detectors import (
    CentralizedLMPT,
    DetectorSpec,
    Im1BitLMPT,
    OneBitLMPT,
    clmpt_statistic,
    decide,
    expected_statistic,
    im1bit_statistic_normalized,
    im1bit_statistic_raw,
    im1bit_weights,
    onebit_statistic,
    raw_to_normalized,
    theoretical_mean,
)
from sparse_lmpt.fisher_opt import fisher_im1bit, fisher_onebit, optimize_threshold
from sparse_lmpt.quantizers import QuantizerBank, quantize_direct, quantize_lr
from sparse_lmpt.signal_model import Hypothesis, NetworkModel, SignalModel, generate

TAU = optimize_threshold("lr").argmax
ZETA = optimize_threshold("direct").argmax


def homogeneous(q, nv=1.0):
    return NetworkModel(np.ones((q, 1)), nv)


# -- derivation obligation for the centralized statistic ---------------------


def test_clmpt_score_and_fisher_symbolic():
    y, p, s0, h, w = sp.symbols("y p sigma0 h sigma_w", positive=True)
    var = p * s0**2 * h**2 + w**2
    logpdf = -sp.log(2 * sp.pi * var) / 2 - y**2 / (2 * var)
    score = sp.simplify(sp.diff(logpdf, p).subs(p, 0))
    expected = s0**2 * h**2 / (2 * w**2) * (y**2 / w**2 - 1)
    assert sp.simplify(score - expected) == 0
    # moments of y ~ N(0, w^2): E y^2 = w^2, E y^4 = 3 w^4
    poly = sp.Poly(sp.expand(score**2), y)
    moments = {0: 1, 2: w**2, 4: 3 * w**4}
    fisher = sum(c * moments[m[0]] for m, c in zip(poly.monoms(), poly.coeffs()))
    assert sp.simplify(fisher - s0**4 * h**4 / (2 * w**4)) == 0
    assert sp.simplify(sp.diff(logpdf, p).subs(p, 0).subs(y, w)) == 0


def test_clmpt_matches_score_over_root_fisher():
    rng = np.random.default_rng(0)
    net = NetworkModel(rng.standard_normal((5, 3)), 1.7)
    y = rng.standard_normal((4, 5))
    h2, s0, nv = net.norms_sq, 8.0, 1.7
    score = (s0 * h2 / (2 * nv) * (y**2 / nv - 1)).sum(axis=1)
    fisher = np.sum(s0**2 * h2**2 / (2 * nv**2))
    np.testing.assert_allclose(clmpt_statistic(y, net), score / np.sqrt(fisher), rtol=1e-12)


def test_clmpt_centered():
    net = NetworkModel(np.random.default_rng(1).standard_normal((6, 4)), 2.0)
    assert clmpt_statistic(np.full(6, np.sqrt(2.0)), net) == pytest.approx(0.0, abs=1e-12)


# -- Im-1-bit statistic -------------------------------------------------------


def test_raw_statistic_examples():
    net = homogeneous(1)
    assert im1bit_statistic_raw([0], net, 1.482) == 0.0
    mp_tail = float(mpmath.erfc(mpmath.mpf("1.482") / mpmath.sqrt(2)) / 2)
    weight = 1.482 * np.exp(-(1.482**2) / 2) / ((0.5 - mp_tail) * mp_tail)
    assert im1bit_statistic_raw([1], net, 1.482) == pytest.approx(weight, rel=1e-10)
    assert weight == pytest.approx(16.57, abs=0.02)


def test_homogeneous_raw_ranks_like_bit_count():
    net = homogeneous(12)
    bits = np.random.default_rng(2).integers(0, 2, size=(200, 12))
    raw = im1bit_statistic_raw(bits, net, TAU)
    counts = bits.sum(1)
    np.testing.assert_allclose(raw, counts * im1bit_weights(net, TAU)[0], rtol=1e-12)
    order = np.argsort(raw)
    assert np.all(np.diff(counts[order]) >= 0)


def test_bits_length_checked():
    with pytest.raises(ValueError):
        im1bit_statistic_raw([1, 0], homogeneous(3), TAU)


def _enumerate(stat_fn, p_one):
    """Exact mean and variance of a statistic over all 2^Q H0 bit reports."""
    q = len(p_one)
    reports = np.array(list(itertools.product((0, 1), repeat=q)))
    probs = np.prod(np.where(reports == 1, p_one, 1 - p_one), axis=1)
    t = stat_fn(reports)
    mean = probs @ t
    return mean, probs @ (t - mean) ** 2


@pytest.mark.parametrize("q", [1, 3, 7, 10])
def test_enumeration_moments(q):
    rng = np.random.default_rng(q)
    net = NetworkModel(rng.standard_normal((q, 4)), 0.7)
    taus = rng.uniform(0.3, 2.5, q)
    zetas = rng.uniform(-2.0, 2.0, q)
    sw = np.sqrt(0.7)
    m, v = _enumerate(lambda b: im1bit_statistic_normalized(b, net, taus), 2 * norm.sf(taus / sw))
    assert abs(m) < 1e-10 and abs(v - 1) < 1e-10
    m, v = _enumerate(lambda b: onebit_statistic(b, net, zetas), norm.sf(zetas / sw))
    assert abs(m) < 1e-10 and abs(v - 1) < 1e-10


@pytest.mark.parametrize("q", [1, 4, 9])
def test_fisher_equals_enumerated_score_variance(q):
    rng = np.random.default_rng(10 + q)
    net = NetworkModel(rng.standard_normal((q, 3)), 1.3)
    sig = SignalModel(0.05, 8.0, 3)
    taus = rng.uniform(0.5, 2.5, q)
    sw = np.sqrt(1.3)
    p0 = 2 * norm.sf(taus / sw)
    # independent derivative: central difference of the exact H1 bit probability
    eps = 1e-6
    p_up = 2 * norm.sf(taus / np.sqrt(eps * 8.0 * net.norms_sq + 1.3))
    p_dn = 2 * norm.sf(taus / np.sqrt(-eps * 8.0 * net.norms_sq + 1.3))
    slope = (p_up - p_dn) / (2 * eps)

    def score(b):
        return (b * slope / p0 - (1 - b) * slope / (1 - p0)).sum(axis=1)

    _, v = _enumerate(score, p0)
    assert fisher_im1bit(net, sig, taus) == pytest.approx(v, rel=1e-7)


def test_raw_and_normalized_are_affine():
    net = NetworkModel.random(40, 50, 1.0, seed=3)
    bits = np.random.default_rng(4).integers(0, 2, size=(500, 40))
    raw = im1bit_statistic_raw(bits, net, TAU)
    nrm = im1bit_statistic_normalized(bits, net, TAU)
    a, b = raw_to_normalized(net, TAU)
    assert a > 0
    np.testing.assert_allclose(nrm, a * raw + b, rtol=1e-10, atol=1e-10)
    assert np.all(np.diff(nrm[np.argsort(raw)]) >= -1e-9)


def test_affine_decisions_match(net300):
    sig = SignalModel(0.05, 8.0, 1000)
    y = generate(net300, sig, "H1", 2000, seed=1, generator="asymptotic").values
    bits = quantize_lr(y, TAU)
    a, b = raw_to_normalized(net300, TAU)
    eta = decide(0.0, 0.1).threshold
    by_raw = im1bit_statistic_raw(bits, net300, TAU) > (eta - b) / a
    by_norm = im1bit_statistic_normalized(bits, net300, TAU) > eta
    # identical except possibly on exact ties (none expected on a lattice offset by b)
    np.testing.assert_array_equal(by_raw, by_norm)


def test_weights_positive_per_sensor():
    net = NetworkModel.random(5, 10, 1.0, seed=2)
    w = im1bit_weights(net, TAU)
    assert w.shape == (5,) and np.all(w > 0)


# -- 1-bit baseline -------------------------------------------------------------


def test_onebit_factor_at_optimum():
    net = homogeneous(1)
    sig = SignalModel(0.05, 8.0, 1)
    assert fisher_onebit(net, sig, ZETA) / 64.0 == pytest.approx(0.1521, abs=1e-3)
    assert fisher_onebit(net, sig, 30.0) < 1e-100


# -- decision rule --------------------------------------------------------------


def test_decide_examples():
    assert decide(0.3, 0.5).threshold == 0.0
    assert decide(0.0, 0.05).threshold == pytest.approx(1.6449, abs=1e-4)
    eta = decide(0.0, 0.05).threshold
    assert decide(eta, 0.05).declared is Hypothesis.H0
    assert decide(eta + 1e-9, 0.05).declared is Hypothesis.H1
    for bad in (0.0, 1.0):
        with pytest.raises(ValueError):
            decide(1.0, bad)


def test_detector_spec_validation():
    lr = QuantizerBank.broadcast("lr", TAU, 3)
    DetectorSpec("im1bit", lr, 0.1)
    DetectorSpec("clmpt", None, 0.1)
    with pytest.raises(ValueError):
        DetectorSpec("onebit", lr, 0.1)
    with pytest.raises(ValueError):
        DetectorSpec("im1bit", lr, 1.0)


# -- theoretical means ----------------------------------------------------------


def test_theoretical_means():
    net = homogeneous(300)
    sig = SignalModel(0.05, 8.0, 1)
    assert theoretical_mean("im1bit", net, sig, 1.482) == pytest.approx(0.05 * np.sqrt(0.3261 * 300 * 64), abs=0.01)
    assert theoretical_mean("im1bit", net, sig, 1.482) == pytest.approx(3.96, abs=0.01)
    assert theoretical_mean("clmpt", net, sig) == pytest.approx(4.90, abs=0.01)
    assert theoretical_mean("onebit", net, sig, ZETA) == pytest.approx(2.70, abs=0.01)


def test_heterogeneous_mean_sums_per_sensor_terms():
    net = NetworkModel(np.diag([1.0, 2.0, 0.5]), 1.0)
    sig = SignalModel(0.02, 4.0, 3)
    per = [theoretical_mean("im1bit", NetworkModel(net.gains[q : q + 1], 1.0), sig, TAU) ** 2 for q in range(3)]
    assert theoretical_mean("im1bit", net, sig, TAU) == pytest.approx(np.sqrt(sum(per)), rel=1e-12)


# -- Monte Carlo checks ---------------------------------------------------------


@pytest.fixture(scope="module")
def h0_stats(net300):
    sig = SignalModel(0.05, 8.0, 1000)
    y = generate(net300, sig, "H0", 10_000, seed=99, generator="asymptotic").values
    return {
        "clmpt": clmpt_statistic(y, net300),
        "im1bit": im1bit_statistic_normalized(quantize_lr(y, TAU), net300, TAU),
        "onebit": onebit_statistic(quantize_direct(y, ZETA), net300, ZETA),
    }


def test_clmpt_h0_moments(h0_stats):
    t = h0_stats["clmpt"]
    assert abs(t.mean()) < 0.02
    assert t.var() == pytest.approx(1.0, abs=0.05)
    assert stats.kstest(t, "norm").pvalue > 0.01


@pytest.mark.parametrize("kind", ["im1bit", "onebit"])
def test_one_bit_h0_moments(h0_stats, kind):
    t = h0_stats[kind]
    assert abs(t.mean()) < 3 / np.sqrt(t.size)
    assert t.var() == pytest.approx(1.0, abs=0.05)


@pytest.mark.parametrize("kind,threshold", [("im1bit", TAU), ("onebit", ZETA)])
@pytest.mark.parametrize("pfa", [0.01, 0.05, 0.1, 0.3])
def test_false_alarm_matches_exact_lattice_size(h0_stats, kind, threshold, pfa):
    """Homogeneous gains make the 1-bit statistics functions of the bit count.

    The exact size of the test is then a binomial tail, which the empirical
    false-alarm rate must reproduce.
    """
    q = 300
    net = homogeneous(q)
    counts = np.arange(q + 1)
    reports = (np.arange(q)[None, :] < counts[:, None]).astype(np.uint8)
    stat = im1bit_statistic_normalized if kind == "im1bit" else onebit_statistic
    t_of_k = stat(reports, net, threshold)
    p_one = 2 * norm.sf(threshold) if kind == "im1bit" else norm.sf(threshold)
    eta = decide(0.0, pfa).threshold
    exact = stats.binom.pmf(counts, q, p_one)[t_of_k > eta].sum()
    emp = np.mean(h0_stats[kind] > eta)
    assert abs(emp - exact) <= 3 * np.sqrt(exact * (1 - exact) / h0_stats[kind].size)


@pytest.mark.parametrize("pfa", [0.01, 0.05, 0.1, 0.3])
def test_clmpt_false_alarm_rate(h0_stats, pfa):
    emp = np.mean(h0_stats["clmpt"] > decide(0.0, pfa).threshold)
    assert abs(emp - pfa) <= 3 * np.sqrt(pfa * (1 - pfa) / h0_stats["clmpt"].size)


@pytest.mark.parametrize("p", [0.02, 0.05])
def test_h1_means(net300, p):
    sig = SignalModel(p, 8.0, 1000)
    y = generate(net300, sig, "H1", 10_000, seed=5, generator="asymptotic").values
    stats_ = {
        "clmpt": (clmpt_statistic(y, net300), None),
        "im1bit": (im1bit_statistic_normalized(quantize_lr(y, TAU), net300, TAU), TAU),
        "onebit": (onebit_statistic(quantize_direct(y, ZETA), net300, ZETA), ZETA),
    }
    for kind, (t, th) in stats_.items():
        se = t.std(ddof=1) / np.sqrt(t.size)
        # exact finite-p mean under the Gaussian surrogate law
        assert abs(t.mean() - expected_statistic(kind, net300, sig, th)) <= 3 * se, kind
    # the first-order mean is exact for the centralized statistic
    t = stats_["clmpt"][0]
    assert abs(t.mean() - theoretical_mean("clmpt", net300, sig)) <= 3 * t.std(ddof=1) / 100


def test_clmpt_h1_mean_example():
    net = homogeneous(300)
    sig = SignalModel(0.05, 8.0, 1)
    y = generate(net, sig, "H1", 10_000, seed=2, generator="asymptotic").values
    t = clmpt_statistic(y, net)
    assert abs(t.mean() - 4.90) <= 3 * t.std(ddof=1) / 100


def test_expected_statistic_tends_to_theoretical_mean():
    net = homogeneous(300)
    for kind, th in (("im1bit", TAU), ("onebit", ZETA)):
        sig = SignalModel(1e-5, 8.0, 1)
        assert expected_statistic(kind, net, sig, th) == pytest.approx(theoretical_mean(kind, net, sig, th), rel=1e-3)


# -- estimator API --------------------------------------------------------------


def test_estimators_match_functional_api(net300):
    sig = SignalModel(0.05, 8.0, 1000)
    y = generate(net300, sig, "H1", 300, seed=3, generator="asymptotic").values
    im = Im1BitLMPT(net300.gains, pfa=0.1).fit()
    np.testing.assert_allclose(im.bank_.thresholds, TAU)
    np.testing.assert_array_equal(im.transform(y), quantize_lr(y, TAU))
    np.testing.assert_allclose(im.decision_function(y), im1bit_statistic_normalized(quantize_lr(y, TAU), net300, TAU))
    np.testing.assert_array_equal(im.predict(y), (im.decision_function(y) > decide(0, 0.1).threshold).astype(int))
    ob = OneBitLMPT(net300.gains, thresholds=ZETA).fit()
    np.testing.assert_allclose(ob.decision_function(y), onebit_statistic(quantize_direct(y, ZETA), net300, ZETA))
    c = CentralizedLMPT(net300.gains).fit()
    np.testing.assert_allclose(c.decision_function(y), clmpt_statistic(y, net300))
    assert set(np.unique(c.predict(y))) <= {0, 1}


def test_estimator_params_and_clone():
    g = np.ones((4, 2)) / np.sqrt(2)
    est = Im1BitLMPT(g, noise_var=2.0, thresholds=1.0, pfa=0.2)
    params = est.get_params()
    assert params["noise_var"] == 2.0 and params["pfa"] == 0.2
    twin = clone(est)
    assert twin.get_params()["thresholds"] == 1.0
    with pytest.raises(NotFittedError):
        twin.decision_function(np.zeros((1, 4)))


def test_estimator_learns_noise_variance():
    net = NetworkModel.random(50, 20, 2.5, seed=1)
    y0 = generate(net, SignalModel(0.05, 8.0, 20), "H0", 4000, seed=2).values
    est = Im1BitLMPT(net.gains, noise_var=None).fit(y0)
    assert est.network_.noise_var == pytest.approx(2.5, rel=0.02)
    np.testing.assert_allclose(est.bank_.thresholds, TAU * np.sqrt(est.network_.noise_var))
    with pytest.raises(ValueError):
        Im1BitLMPT(net.gains, noise_var=None).fit()


def test_estimator_rejects_wrong_width():
    est = CentralizedLMPT(np.ones((3, 1))).fit()
    with pytest.raises(ValueError):
        est.decision_function(np.zeros((2, 4)))
