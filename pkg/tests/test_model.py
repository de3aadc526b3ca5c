import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oodgauge.model import (
    CheckpointError,
    MlpParams,
    ce_loss,
    forward,
    init_mlp,
    load_checkpoint,
    ovadm_loss,
    predict,
    save_checkpoint,
)
from oodgauge.numerics.rng import Rng


def test_init_shapes_and_bounds():
    p = init_mlp(2, 2, "ce", Rng(0))
    assert p.W1.shape == (2, 8) and p.W2.shape == (8, 8) and p.head["W_out"].shape == (2, 8)
    assert np.all(np.abs(p.W1) <= 1 / math.sqrt(2))
    assert np.all(p.b1 == 0) and np.all(p.b2 == 0)
    q = init_mlp(2, 3, "ovadm", Rng(0))
    assert q.head["centroids"].shape == (3, 8)


def test_init_deterministic():
    a, b = init_mlp(2, 2, "ovadm", Rng(4)), init_mlp(2, 2, "ovadm", Rng(4))
    for k in a.arrays():
        assert np.array_equal(a.arrays()[k], b.arrays()[k])


def test_init_validation():
    with pytest.raises(ValueError):
        init_mlp(2, 1, "ce", Rng(0))


def test_zero_model_zero_logits():
    p = init_mlp(2, 2, "ce", Rng(0))
    zero = MlpParams.from_arrays({k: np.zeros_like(v) for k, v in p.arrays().items()}, "ce")
    _, logits = forward(zero, np.ones((4, 2)))
    assert np.all(logits == 0)


def test_ovadm_logits_nonpositive(np_rng):
    p = init_mlp(2, 2, "ovadm", Rng(1))
    _, logits = forward(p, np_rng.normal(size=(100, 2)) * 5)
    assert np.all(logits <= 0)


def test_forward_matches_straight_line(np_rng):
    p = init_mlp(2, 3, "ce", Rng(2))
    p.b1[:] = np_rng.normal(size=8)
    p.head["b_out"][:] = np_rng.normal(size=3)
    x = np_rng.normal(size=(5, 2))
    h, logits = forward(p, x)
    for i in range(5):
        h1 = [max(0.0, sum(x[i, a] * p.W1[a, j] for a in range(2)) + p.b1[j]) for j in range(8)]
        h2 = [max(0.0, sum(h1[a] * p.W2[a, j] for a in range(8)) + p.b2[j]) for j in range(8)]
        assert np.allclose(h[i], h2, rtol=1e-13, atol=1e-15)
        for k in range(3):
            lk = sum(p.head["W_out"][k, j] * h2[j] for j in range(8)) + p.head["b_out"][k]
            assert logits[i, k] == pytest.approx(lk, rel=1e-13, abs=1e-15)

    q = init_mlp(2, 2, "ovadm", Rng(3))
    h, logits = forward(q, x)
    for i in range(5):
        for k in range(2):
            d = math.sqrt(sum((h[i, j] - q.head["centroids"][k, j]) ** 2 for j in range(8)))
            assert logits[i, k] == pytest.approx(-d, rel=1e-13)


def test_forward_shape_mismatch():
    with pytest.raises(ValueError):
        forward(init_mlp(2, 2, "ce", Rng(0)), np.zeros((3, 3)))


def test_ce_equal_logits_ln2():
    assert float(ce_loss(np.zeros((3, 2)), np.array([0, 1, 0]))) == pytest.approx(math.log(2), abs=1e-15)


def test_ce_saturation():
    assert float(ce_loss(np.array([[30.0, -30.0]]), np.array([0]))) < 1e-10


def test_ce_matches_direct_formula(np_rng):
    logits = np_rng.normal(size=(4, 3))
    y = np.array([0, 2, 1, 2])
    direct = np.mean([-math.log(math.exp(logits[i, y[i]]) / sum(math.exp(v) for v in logits[i]))
                      for i in range(4)])
    assert abs(float(ce_loss(logits, y)) - direct) < 1e-12


def test_ce_empty_batch():
    with pytest.raises(ValueError):
        ce_loss(np.zeros((0, 2)), np.zeros(0, dtype=int))


def test_ovadm_zero_logits():
    assert float(ovadm_loss(np.zeros((1, 2)), np.array([0]))) == pytest.approx(2 * math.log(2))


def test_ovadm_far_negatives_limit():
    assert float(ovadm_loss(np.array([[0.0, -1e6]]), np.array([0]))) == pytest.approx(math.log(2))


def _sig(v):
    return 1.0 / (1.0 + math.exp(-v))


def test_ovadm_matches_scalar_reference(np_rng):
    logits = -np.abs(np_rng.normal(size=(3, 3))) * 2
    y = np.array([2, 0, 1])
    ref = 0.0
    for i in range(3):
        s = -math.log(_sig(logits[i, y[i]]))
        s -= sum(math.log(1 - _sig(logits[i, k])) for k in range(3) if k != y[i])
        ref += s / 3
    assert abs(float(ovadm_loss(logits, y)) - ref) < 1e-12


@settings(max_examples=50)
@given(st.lists(st.floats(-50, 0), min_size=3, max_size=3), st.integers(0, 2))
def test_ovadm_positive_term_bound(row, y):
    logits = np.array([row])
    # -log s(l_y) >= ln 2 for l_y <= 0, so the loss is at least ln 2
    assert float(ovadm_loss(logits, np.array([y]))) >= math.log(2) - 1e-12


@settings(max_examples=50)
@given(st.lists(st.floats(-20, 20), min_size=3, max_size=3), st.integers(0, 2))
def test_ce_nonnegative(row, y):
    assert float(ce_loss(np.array([row]), np.array([y]))) >= 0


@settings(max_examples=50)
@given(st.lists(st.floats(-20, 20), min_size=3, max_size=3), st.floats(-100, 100))
def test_predict_shift_invariant(row, c):
    logits = np.array([row])
    top = sorted(row)
    if top[-1] - top[-2] < 1e-9:
        return  # near-ties can flip under rounding of the shift
    assert predict(logits)[0] == predict(logits + c)[0]


def test_predict_examples():
    assert predict(np.array([[0.1, 0.9]]))[0] == 1
    assert predict(np.array([[0.5, 0.5]]))[0] == 0
    assert predict(np.array([[-2.0, -1.0]]))[0] == 1


@pytest.mark.parametrize("head", ["ce", "ovadm"])
def test_checkpoint_byte_identical(tmp_path, head):
    p = init_mlp(2, 2, head, Rng(6))
    save_checkpoint(p, tmp_path / "a.ckpt")
    q = load_checkpoint(tmp_path / "a.ckpt")
    save_checkpoint(q, tmp_path / "b.ckpt")
    assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()
    for k, v in p.arrays().items():
        assert v.tobytes() == q.arrays()[k].tobytes()
    assert (tmp_path / "a.ckpt").read_text().startswith(f"oodgauge-ckpt v1 d_in=2 K=2 head={head}\n")


def test_checkpoint_truncated(tmp_path):
    save_checkpoint(init_mlp(2, 2, "ce", Rng(0)), tmp_path / "a.ckpt")
    text = (tmp_path / "a.ckpt").read_text()
    for cut in (len(text) // 3, len(text) - 12, len(text) - 5):
        (tmp_path / "t.ckpt").write_text(text[:cut])
        with pytest.raises(CheckpointError):
            load_checkpoint(tmp_path / "t.ckpt")


def test_checkpoint_bad_magic_and_shape(tmp_path):
    save_checkpoint(init_mlp(2, 2, "ce", Rng(0)), tmp_path / "a.ckpt")
    text = (tmp_path / "a.ckpt").read_text()
    (tmp_path / "m.ckpt").write_text(text.replace("oodgauge-ckpt", "other-ckpt", 1))
    with pytest.raises(CheckpointError) as e:
        load_checkpoint(tmp_path / "m.ckpt")
    assert e.value.field == "magic"
    (tmp_path / "s.ckpt").write_text(text.replace("W2 8 8", "W2 8 7", 1))
    with pytest.raises(CheckpointError) as e:
        load_checkpoint(tmp_path / "s.ckpt")
    assert e.value.field == "W2"
