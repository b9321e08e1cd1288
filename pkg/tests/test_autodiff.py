"""Reverse-mode tape vs central finite differences on every primitive."""
import numpy as np
import pytest

from consolve import autodiff as ad
from consolve.autodiff import Tensor, fd_gradients
from consolve.errors import ContractError, NumericError


def _check(build, x0, rtol=1e-5):
    """Gradient of scalar graph at x0 against finite differences (float64)."""
    x = Tensor(np.array(x0, dtype=np.float64), requires_grad=True, dtype=np.float64)
    loss = build(x)
    ad.Tape(loss).backward()
    fd = fd_gradients(lambda a: _eval(build, a), np.array(x0, dtype=np.float64))
    denom = np.maximum(np.abs(fd), 1e-8)
    rel = np.abs(x.grad - fd) / denom
    assert rel.max() < rtol, f"max rel err {rel.max():.2e}"


def _eval(build, arr):
    return float(build(Tensor(np.array(arr, dtype=np.float64), dtype=np.float64)).data)


def test_add_mul_grad():
    _check(lambda x: ad.reduce_sum(ad.mul(ad.add(x, 2.0), x)), [[1.0, -2.0], [0.5, 3.0]])


def test_matmul_grad():
    w = np.array([[0.3, -0.7], [1.1, 0.2]])
    _check(lambda x: ad.reduce_sum(ad.matmul(x, w)), [[1.0, 2.0], [3.0, -1.0]])


def test_matmul_grad_rhs():
    a = np.array([[0.5, -1.0], [2.0, 0.25]])
    _check(lambda x: ad.reduce_sum(ad.matmul(a, x)), [[1.0, 0.0], [0.5, -2.0]])


def test_relu_grad():
    _check(lambda x: ad.reduce_sum(ad.relu(x)), [[0.5, -0.5], [2.0, -2.0]])


def test_sigmoid_grad():
    _check(lambda x: ad.reduce_sum(ad.sigmoid(x)), [[0.0, 1.0], [-1.5, 2.5]])


def test_sin_cos_grad():
    _check(lambda x: ad.reduce_sum(ad.add(ad.sin(x), ad.cos(x))), [[0.3, 1.2], [-0.8, 2.0]])


def test_softmax_rows_grad():
    _check(lambda x: ad.reduce_sum(ad.mul(ad.softmax_rows(x), np.array([[1.0, 3.0], [2.0, -1.0]]))),
           [[0.2, -0.4], [1.5, 0.7]])


def test_reduce_mean_grad():
    _check(lambda x: ad.reduce_mean(ad.mul(x, x)), [[1.0, 2.0], [3.0, 4.0]])


def test_reshape_grad():
    _check(lambda x: ad.reduce_sum(ad.mul(ad.reshape(x, (4,)), np.array([1.0, -1.0, 2.0, 0.5]))),
           [[1.0, 2.0], [3.0, 4.0]])


def test_bce_grad():
    target = np.array([1.0, 0.0, 1.0, 0.5])

    def build(x):
        p = ad.sigmoid(x)
        return ad.reduce_mean(ad.bce(p, target))

    _check(build, [0.2, -0.3, 1.0, 0.0])


def test_concat_grad():
    def build(x):
        y = ad.concat([ad.reshape(x, x.shape + (1,)), ad.reshape(x, x.shape + (1,))], axis=-1)
        return ad.reduce_sum(ad.mul(y, y))

    _check(build, [1.0, -2.0, 0.5])


def test_broadcast_add_grad():
    b = np.array([0.5, -0.5])
    _check(lambda x: ad.reduce_sum(ad.mul(ad.add(x, b), ad.add(x, b))), [[1.0, 2.0], [3.0, 4.0]])


def test_grad_accumulates_over_reuse():
    x = Tensor(np.array([2.0]), requires_grad=True, dtype=np.float64)
    y = ad.add(ad.mul(x, x), ad.mul(x, 3.0))  # x^2 + 3x, d/dx = 2x + 3 = 7
    ad.Tape(y).backward()
    assert x.grad[0] == pytest.approx(7.0)


def test_no_grad_leaf_stays_none():
    x = Tensor(np.array([1.0]), requires_grad=False)
    y = ad.mul(x, 2.0)
    ad.Tape(y).backward()
    assert x.grad is None


def test_backward_requires_scalar():
    x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    y = ad.mul(x, 2.0)
    with pytest.raises(ContractError):
        ad.Tape(y).backward()


def test_nonfinite_forward_raises():
    x = Tensor(np.array([np.inf]), requires_grad=True)
    with pytest.raises(NumericError):
        ad.mul(x, 2.0)


def test_fd_gradients_list_form():
    a0 = np.array([1.0, 2.0])
    b0 = np.array([[3.0], [4.0]])

    def f(arrs):
        a, b = arrs
        return float(a @ b[:, 0] + (a * a).sum())

    ga, gb = fd_gradients(f, [a0, b0])
    assert np.allclose(ga, b0[:, 0] + 2 * a0, atol=1e-6)
    assert np.allclose(gb[:, 0], a0, atol=1e-6)


def test_bce_matches_closed_form():
    p = Tensor(np.array([0.3, 0.8]), dtype=np.float64)
    t = np.array([1.0, 0.0])
    val = ad.reduce_mean(ad.bce(p, t)).data
    expect = np.mean([-np.log(0.3), -np.log(1 - 0.8)])
    assert float(val) == pytest.approx(float(expect), rel=1e-9)
