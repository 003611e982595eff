"""Tests for the autodiff tensor: forward oracles, gradients, checkpoints."""

import math

import numpy as np
import pytest

from picrypt.errors import ShapeError
from picrypt.tensor import (
    CHECKPOINT_MAGIC,
    LAYER_NORM_EPS,
    Tensor,
    add,
    backward,
    concat_last_axis,
    concat_rows,
    cross_entropy,
    gelu,
    grad_check,
    layer_norm,
    load_checkpoint,
    matmul,
    mean_last_axis,
    save_checkpoint,
    scale,
    sigmoid,
    softmax_rows,
    transpose_last_two,
    zero_grads,
)


def t(arr):
    return Tensor(np.asarray(arr, dtype=np.float64))


def scalar_sum(x: Tensor) -> Tensor:
    # sum of a 2-D tensor: mean over columns, then over rows, scaled back up
    n, m = x.data.shape
    col = mean_last_axis(x)  # (n, 1)
    row = mean_last_axis(transpose_last_two(col))  # (1, 1)
    return scale(row, float(n * m))


# ---------------------------------------------------------------- forward


def test_matmul_matches_triple_loop_oracle():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((2, 3))
    b = rng.standard_normal((3, 2))
    got = matmul(t(a), t(b)).data
    want = np.zeros((2, 2))
    for i in range(2):
        for j in range(2):
            for k in range(3):
                want[i, j] += a[i, k] * b[k, j]
    assert np.max(np.abs(got - want)) < 1e-12


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(ShapeError, match=r"2, 3.*4, 2"):
        matmul(t(np.zeros((2, 3))), t(np.zeros((4, 2))))


def test_add_same_shape_and_bias_row():
    a = t([[1.0, 2.0], [3.0, 4.0]])
    b = t([[10.0, 20.0], [30.0, 40.0]])
    assert np.array_equal(add(a, b).data, [[11.0, 22.0], [33.0, 44.0]])
    bias = t([[100.0, 200.0]])
    assert np.array_equal(add(a, bias).data, [[101.0, 202.0], [103.0, 204.0]])


def test_add_bias_grad_is_column_sum():
    a = t(np.ones((3, 2)))
    bias = t(np.zeros((1, 2)))
    out = add(a, bias)
    backward(scalar_sum(out))
    assert np.array_equal(bias.grad, [[3.0, 3.0]])
    assert np.array_equal(a.grad, np.ones((3, 2)))


def test_scale_and_transpose():
    a = t([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(scale(a, 2.5).data, [[2.5, 5.0], [7.5, 10.0]])
    assert np.array_equal(transpose_last_two(a).data, [[1.0, 3.0], [2.0, 4.0]])


def test_concat_last_axis_and_rows():
    a, b = t([[1.0], [2.0]]), t([[3.0], [4.0]])
    assert np.array_equal(concat_last_axis([a, b]).data, [[1.0, 3.0], [2.0, 4.0]])
    assert np.array_equal(concat_rows([a, b]).data, [[1.0], [2.0], [3.0], [4.0]])


def test_mean_last_axis():
    a = t([[1.0, 3.0], [5.0, 7.0]])
    assert np.array_equal(mean_last_axis(a).data, [[2.0], [6.0]])


def test_softmax_symmetry_and_row_sums():
    out = softmax_rows(t([[0.0, 0.0]])).data
    assert np.array_equal(out, [[0.5, 0.5]])
    rng = np.random.default_rng(1)
    x = rng.standard_normal((5, 7))
    s = softmax_rows(t(x)).data
    assert np.max(np.abs(s.sum(axis=1) - 1.0)) < 1e-12


def test_softmax_shift_invariance():
    # max subtraction: adding a constant per row changes nothing, and huge
    # logits stay finite
    rng = np.random.default_rng(2)
    x = rng.standard_normal((4, 6))
    a = softmax_rows(t(x)).data
    b = softmax_rows(t(x + 1000.0)).data
    assert np.max(np.abs(a - b)) < 1e-12
    assert np.all(np.isfinite(softmax_rows(t(x * 1e4)).data))


def test_layer_norm_constant_row_is_zero():
    gamma, beta = t(np.ones(4)), t(np.zeros(4))
    out = layer_norm(t([[7.0, 7.0, 7.0, 7.0]]), gamma, beta).data
    assert np.max(np.abs(out)) < 1e-6


def test_layer_norm_standardizes_rows():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((6, 16)) * 3 + 5
    out = layer_norm(t(x), t(np.ones(16)), t(np.zeros(16))).data
    assert np.max(np.abs(out.mean(axis=1))) < 1e-12
    # population variance with eps=1e-5 folded into the denominator
    v = (x.var(axis=1) / (x.var(axis=1) + LAYER_NORM_EPS))
    assert np.max(np.abs(out.var(axis=1) - v)) < 1e-12


def test_gelu_pinned_constants():
    # oracle: tanh form evaluated directly with the pinned constants
    for v in (-2.0, -0.5, 0.0, 0.7, 1.0, 3.0):
        inner = 0.7978845608028654 * (v + 0.044715 * v ** 3)
        want = 0.5 * v * (1.0 + math.tanh(inner))
        got = float(gelu(t([v])).data[0])
        assert abs(got - want) < 1e-15


def test_sigmoid_range_and_values():
    assert float(sigmoid(t([0.0])).data[0]) == 0.5
    rng = np.random.default_rng(4)
    x = rng.standard_normal(100) * 10
    s = sigmoid(t(x)).data
    assert np.all((s > 0) & (s < 1))
    assert np.max(np.abs(s - 1 / (1 + np.exp(-x)))) < 1e-15


def test_cross_entropy_oracle():
    logits = t([[1.0, 2.0, 0.5]])
    flat = logits.data.reshape(-1)
    want = math.log(np.exp(flat).sum()) - flat[1]
    got = float(cross_entropy(logits, 1).data)
    assert abs(got - want) < 1e-12
    with pytest.raises(ShapeError):
        cross_entropy(logits, 3)


def test_cross_entropy_grad_is_probs_minus_onehot():
    logits = t([[1.0, 2.0, 0.5]])
    loss = cross_entropy(logits, 1)
    backward(loss)
    p = np.exp(logits.data) / np.exp(logits.data).sum()
    want = p.copy()
    want[0, 1] -= 1.0
    assert np.max(np.abs(logits.grad - want)) < 1e-12


# ---------------------------------------------------------------- backward


def test_sum_grad_is_ones():
    x = t(np.arange(6, dtype=np.float64).reshape(2, 3))
    backward(scalar_sum(x))
    assert np.array_equal(x.grad, np.ones((2, 3)))


def test_dot_grad_is_2x():
    x = t([[1.0, -2.0, 3.0]])
    y = matmul(x, transpose_last_two(x))
    backward(y)
    assert np.max(np.abs(x.grad - 2 * x.data)) < 1e-12


def test_backward_requires_scalar():
    x = t(np.ones((2, 2)))
    with pytest.raises(ShapeError):
        backward(add(x, x))


def test_grad_accumulates_across_backward_calls():
    x = t([[2.0]])
    backward(matmul(x, x))
    first = x.grad.copy()
    backward(matmul(x, x))
    assert np.array_equal(x.grad, 2 * first)
    zero_grads({"x": x})
    assert x.grad is None


def test_shared_subexpression_accumulates():
    # y = x@x + x@x: grad should be 2 * d(x@x)/dx = 8 at x=2
    x = t([[2.0]])
    y = matmul(x, x)
    backward(add(y, y))
    assert float(x.grad[0, 0]) == 8.0


def test_backward_deterministic():
    rng = np.random.default_rng(5)
    w = rng.standard_normal((4, 4))
    grads = []
    for _ in range(2):
        wt = t(w.copy())
        z = gelu(matmul(t(np.ones((2, 4))), wt))
        backward(scalar_sum(softmax_rows(z)))
        grads.append(wt.grad.copy())
    assert np.array_equal(grads[0], grads[1])


# ---------------------------------------------------------------- grad_check


def test_grad_check_quadratic_nearly_exact():
    params = {"x": t([[1.0, -2.0, 0.5]])}

    def f(p):
        return matmul(p["x"], transpose_last_two(p["x"]))

    rep = grad_check(f, params, tolerance=1e-9)
    assert rep.passed and rep.max_rel_error < 1e-9
    assert rep.n_checked == 3


def test_grad_check_gelu_chain():
    rng = np.random.default_rng(6)
    params = {"w": t(rng.standard_normal((3, 3)))}
    x = np.abs(rng.standard_normal((2, 3))) + 0.1

    def f(p):
        return scalar_sum(gelu(matmul(t(x), p["w"])))

    rep = grad_check(f, params, tolerance=1e-6)
    assert rep.passed, f"gelu chain grad error {rep.max_rel_error:.2e}"


def test_grad_check_each_primitive():
    rng = np.random.default_rng(7)
    x = rng.standard_normal((3, 4))
    gamma = rng.standard_normal(4) + 1.5
    beta = rng.standard_normal(4)
    proj = rng.standard_normal((4, 2))  # sum of raw softmax rows is constant
    cases = {
        "softmax": lambda p: scalar_sum(
            matmul(softmax_rows(matmul(t(x), p["w"])), t(proj))),
        "layer_norm": lambda p: scalar_sum(
            layer_norm(matmul(t(x), p["w"]), t(gamma), t(beta))),
        "sigmoid": lambda p: scalar_sum(sigmoid(matmul(t(x), p["w"]))),
        "mean": lambda p: scalar_sum(mean_last_axis(matmul(t(x), p["w"]))),
        "concat": lambda p: scalar_sum(
            concat_last_axis([matmul(t(x), p["w"]), matmul(t(x), p["w"])])),
        "rows": lambda p: scalar_sum(
            concat_rows([matmul(t(x), p["w"]), scale(matmul(t(x), p["w"]), 2.0)])),
        "xent": lambda p: cross_entropy(matmul(t(x[:1]), p["w"]), 2),
    }
    for name, f in cases.items():
        params = {"w": t(rng.standard_normal((4, 4)))}
        rep = grad_check(f, params, tolerance=1e-6)
        assert rep.passed, f"{name}: grad error {rep.max_rel_error:.2e} at {rep.param}[{rep.index}]"


def test_grad_check_sampling_is_deterministic():
    rng = np.random.default_rng(8)
    params = {"w": t(rng.standard_normal((5, 5)))}
    x = rng.standard_normal((2, 5))

    def f(p):
        return scalar_sum(gelu(matmul(t(x), p["w"])))

    a = grad_check(f, params, max_entries=10, seed=3)
    b = grad_check(f, params, max_entries=10, seed=3)
    assert a.n_checked == b.n_checked == 10
    assert a.max_rel_error == b.max_rel_error and a.param == b.param


def test_grad_check_rejects_bad_step():
    with pytest.raises(ValueError):
        grad_check(lambda p: p["x"], {"x": t([0.0])}, step=0.0)


# ---------------------------------------------------------------- checkpoint


def test_checkpoint_roundtrip(tmp_path):
    rng = np.random.default_rng(9)
    params = {
        "layer0.w": t(rng.standard_normal((3, 4))),
        "bias": t(rng.standard_normal(4)),
        "scalar": t(np.float64(2.5)),
    }
    path = tmp_path / "m.petn"
    save_checkpoint(path, params)
    back = load_checkpoint(path)
    assert sorted(back) == sorted(params)
    for name in params:
        assert np.array_equal(back[name].data, params[name].data)
        assert back[name].data.shape == params[name].data.shape


def test_checkpoint_bytes_deterministic(tmp_path):
    rng = np.random.default_rng(10)
    params = {"b": t(rng.standard_normal(3)), "a": t(rng.standard_normal((2, 2)))}
    p1, p2 = tmp_path / "1.petn", tmp_path / "2.petn"
    save_checkpoint(p1, params)
    save_checkpoint(p2, dict(reversed(list(params.items()))))
    assert p1.read_bytes() == p2.read_bytes()
    assert p1.read_bytes().startswith(CHECKPOINT_MAGIC)


def test_checkpoint_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.petn"
    path.write_bytes(b"NOPE" + b"\x00" * 8)
    with pytest.raises(Exception):
        load_checkpoint(path)


def test_checkpoint_rejects_bad_version(tmp_path):
    params = {"a": t([1.0])}
    path = tmp_path / "m.petn"
    save_checkpoint(path, params)
    data = bytearray(path.read_bytes())
    data[4] = 9  # bump the little-endian version field
    path.write_bytes(bytes(data))
    with pytest.raises(Exception, match="version"):
        load_checkpoint(path)
