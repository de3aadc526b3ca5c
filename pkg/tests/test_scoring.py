import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oodgauge.model import MlpParams, forward, init_mlp
from oodgauge.numerics.rng import Rng
from oodgauge.scoring import (
    MahalanobisStats,
    OdinParams,
    fit_mahalanobis,
    md_score,
    msp_score,
    odin_perturb,
    odin_score,
    output_probs,
    score,
)


def test_msp_examples():
    assert msp_score(np.zeros((1, 2)), "ce")[0] == 0.5
    assert msp_score(np.array([[10.0, -10.0]]), "ce")[0] > 0.9999
    assert msp_score(np.array([[0.0, -3.0]]), "ovadm")[0] == 0.5


@settings(max_examples=60)
@given(st.lists(st.floats(-30, 30), min_size=3, max_size=3))
def test_msp_bounds(row):
    ce = msp_score(np.array([row]), "ce")[0]
    assert 1 / 3 - 1e-15 <= ce <= 1.0
    ova = msp_score(-np.abs(np.array([row])), "ovadm")[0]
    assert 0.0 < ova <= 0.5


def test_fit_degenerate_one_per_class():
    h = np.array([[1.0, 2.0], [-1.0, 0.5]])
    stats = fit_mahalanobis(h, np.array([0, 1]), lambda_reg=1.0)
    assert np.array_equal(stats.covariance, np.zeros((2, 2)))
    assert np.allclose(stats.precision, np.eye(2), rtol=0, atol=1e-15)
    x = np.array([[0.0, 0.0]])
    assert md_score(stats, x)[0] == pytest.approx(-min(5.0, 1.25))


def test_fit_recovers_identity_covariance(np_rng):
    y = np.repeat([0, 1], 50_000)
    mu = np.array([np.zeros(8), np.full(8, 3.0)])
    h = mu[y] + np_rng.normal(size=(100_000, 8))
    stats = fit_mahalanobis(h, y)
    assert np.max(np.abs(stats.covariance - np.eye(8))) < 0.05


@pytest.mark.parametrize("seed", range(10))
def test_precision_inverts_regularised_covariance(seed):
    r = np.random.default_rng(seed)
    h = r.normal(size=(300, 8)) @ r.normal(size=(8, 8))
    y = r.integers(0, 3, size=300)
    y[:3] = [0, 1, 2]
    stats = fit_mahalanobis(h, y, lambda_reg=1e-6)
    ident = stats.precision @ (stats.covariance + 1e-6 * np.eye(8))
    assert np.max(np.abs(ident - np.eye(8))) < 1e-8
    assert np.max(np.abs(stats.precision - stats.precision.T)) < 1e-10


def test_fit_empty_class_rejected():
    with pytest.raises(ValueError):
        fit_mahalanobis(np.zeros((4, 2)), np.array([0, 0, 2, 2]))
    with pytest.raises(ValueError):
        fit_mahalanobis(np.zeros((1, 2)), np.array([0]))


def _stats(means, precision):
    means = np.asarray(means, dtype=float)
    return MahalanobisStats(means, np.asarray(precision, dtype=float),
                            np.zeros_like(precision, dtype=float), 1e-6)


def test_md_examples():
    s = _stats([[0.0, 0.0], [3.0, 1.0]], np.eye(2))
    assert md_score(s, np.array([[3.0, 1.0]]))[0] == 0.0
    assert md_score(s, np.array([[1.0, 0.0]]))[0] == -1.0
    worked = _stats([[0.0, 0.0]], [[2.0, 0.0], [0.0, 1.0]])
    assert md_score(worked, np.array([[1.0, 1.0]]))[0] == -3.0


def test_md_nonpositive_and_relabel_invariant(np_rng):
    h = np_rng.normal(size=(200, 8))
    y = np_rng.integers(0, 3, size=200)
    perm = np.array([2, 0, 1])
    a = fit_mahalanobis(h, y)
    b = fit_mahalanobis(h, perm[y])
    q = np_rng.normal(size=(50, 8)) * 3
    assert np.all(md_score(a, q) <= 0)
    assert np.allclose(md_score(a, q), md_score(b, q), rtol=1e-12, atol=1e-12)


@pytest.fixture
def ce_model():
    return init_mlp(2, 2, "ce", Rng(11))


@pytest.mark.parametrize("head", ["ce", "ovadm"])
def test_odin_reduces_to_msp(np_rng, head):
    p = init_mlp(2, 2, head, Rng(12))
    x = np_rng.normal(size=(40, 2))
    _, logits = forward(p, x)
    assert np.array_equal(odin_score(p, x, OdinParams(1.0, 0.0)), msp_score(logits, head))


def test_odin_uniform_limit(ce_model, np_rng):
    s = odin_score(ce_model, np_rng.normal(size=(20, 2)), OdinParams(1e9, 0.0))
    assert np.all(np.abs(s - 0.5) < 1e-6)


def test_odin_perturbation_is_sign_step(np_rng):
    p = init_mlp(2, 2, "ce", Rng(13))
    p.b1[:] = 0.5  # keep some units alive so the input gradient is nonzero
    x = np_rng.normal(size=(30, 2))
    xt = odin_perturb(p, x, OdinParams(1000.0, 0.01))
    moved = np.abs(xt - x)
    assert np.allclose(moved[moved > 0], 0.01, rtol=0, atol=1e-15)
    assert np.max(moved) == pytest.approx(0.01, abs=1e-15)


def test_odin_argmax_independent_of_temperature(np_rng):
    p = init_mlp(2, 3, "ce", Rng(14))
    _, logits = forward(p, np_rng.normal(size=(50, 2)))
    base = np.argmax(output_probs(logits, "ce", 1.0), axis=1)
    for t in (0.5, 10.0, 1000.0):
        assert np.array_equal(np.argmax(output_probs(logits, "ce", t), axis=1), base)


def test_odin_params_validation():
    with pytest.raises(ValueError):
        OdinParams(0.0, 0.01)
    with pytest.raises(ValueError):
        OdinParams(1.0, -0.1)


def test_score_deterministic_and_batched(ce_model, np_rng):
    x = np_rng.normal(size=(100, 2))
    h, _ = forward(ce_model, x)
    stats = fit_mahalanobis(h, np.arange(100) % 2)
    for s in ("baseline", "md", "odin"):
        a = score(s, ce_model, x, stats)
        assert np.array_equal(a, score(s, ce_model, x, stats))
        assert np.array_equal(a, score(s, ce_model, x, stats, batch_size=7))


def test_score_errors(ce_model):
    with pytest.raises(ValueError):
        score("energy", ce_model, np.zeros((1, 2)))
    with pytest.raises(ValueError):
        score("md", ce_model, np.zeros((1, 2)))
