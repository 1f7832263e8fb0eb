"""Kernels and BiLSTM: forward oracles and finite-difference gradient checks."""

import math

import numpy as np
import pytest

from suite_helpers import max_fd_rel_err, rel_err

from acroex.nn import (
    BiLstm,
    LinearParams,
    LstmParams,
    linear_backward,
    linear_forward,
    logsumexp,
    lstm_step,
    new_linear_params,
    new_lstm_params,
)
from acroex.rng import SplitMix64


class TestLogsumexp:
    def test_constant_vector(self):
        assert logsumexp([0.0] * 5) == pytest.approx(math.log(5.0), abs=1e-15)

    def test_constant_vector_exact_shift(self):
        # max shift makes the result exact for constant input
        assert logsumexp([7.5, 7.5]) == 7.5 + math.log(2.0)

    def test_no_overflow(self):
        assert logsumexp([1000.0, 1000.0]) == pytest.approx(1000.0 + math.log(2.0))

    def test_single_element(self):
        assert logsumexp([3.25]) == 3.25

    def test_matches_naive_at_small_magnitude(self):
        rng = SplitMix64(2)
        for _ in range(100):
            v = rng.uniform(-3.0, 3.0, (5,))
            naive = math.log(np.exp(v).sum())
            assert abs(logsumexp(v) - naive) < 1e-12

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            logsumexp([])


class TestLinear:
    def test_identity(self):
        p = LinearParams(weight=np.eye(3), bias=np.zeros(3))
        x = np.array([1.0, -2.0, 0.5])
        assert np.array_equal(linear_forward(x, p), x)

    def test_bias_only(self):
        p = LinearParams(weight=np.zeros((2, 3)), bias=np.array([4.0, -1.0]))
        assert np.array_equal(linear_forward(np.ones(3), p), p.bias)

    def test_stacked_rows(self):
        rng = SplitMix64(4)
        p = new_linear_params(3, 2, rng)
        xs = rng.uniform(-1, 1, (5, 3))
        stacked = linear_forward(xs, p)
        for t in range(5):
            assert np.allclose(stacked[t], linear_forward(xs[t], p), atol=1e-15)

    def test_dim_mismatch(self):
        p = new_linear_params(3, 2, SplitMix64(0))
        with pytest.raises(ValueError):
            linear_forward(np.zeros(4), p)
        with pytest.raises(ValueError):
            linear_backward(np.zeros(3), p, np.zeros(3))

    def test_gradients_match_finite_differences(self):
        rng = SplitMix64(8)
        p = new_linear_params(4, 3, rng)
        p.bias[:] = rng.uniform(-1, 1, (3,))
        x = rng.uniform(-1, 1, (4,))
        w_out = rng.uniform(-1, 1, (3,))

        def loss():
            return float(linear_forward(x, p) @ w_out)

        _, grads = linear_backward(x, p, w_out)
        assert max_fd_rel_err(loss, p.weight, grads.weight) < 1e-6
        assert max_fd_rel_err(loss, p.bias, grads.bias) < 1e-6
        grad_x, _ = linear_backward(x, p, w_out)
        assert max_fd_rel_err(loss, x, grad_x) < 1e-6


def oracle_lstm_step(x, h, c, params):
    """Direct transcription of the four gate equations, kept independent of
    the library implementation on purpose."""
    hd = params.hidden_dim
    a = params.w @ x + params.u @ h + params.b
    sig = lambda v: 1.0 / (1.0 + np.exp(-v))
    i = sig(a[:hd])
    f = sig(a[hd : 2 * hd])
    g = np.tanh(a[2 * hd : 3 * hd])
    o = sig(a[3 * hd :])
    c2 = f * c + i * g
    return o * np.tanh(c2), c2


class TestLstmStep:
    def test_zero_everything(self):
        p = LstmParams(w=np.zeros((12, 2)), u=np.zeros((12, 3)), b=np.zeros(12))
        h2, c2 = lstm_step(np.zeros(2), np.zeros(3), np.zeros(3), p)
        assert np.array_equal(h2, np.zeros(3))
        assert np.array_equal(c2, np.zeros(3))

    def test_zero_params_unit_cell(self):
        p = LstmParams(w=np.zeros((12, 2)), u=np.zeros((12, 3)), b=np.zeros(12))
        h2, c2 = lstm_step(np.zeros(2), np.zeros(3), np.ones(3), p)
        assert np.allclose(c2, 0.5)
        assert np.allclose(h2, 0.5 * math.tanh(0.5))
        assert h2[0] == pytest.approx(0.23105, abs=1e-5)

    def test_matches_oracle_on_random_inputs(self):
        rng = SplitMix64(13)
        for _ in range(50):
            p = new_lstm_params(3, 4, rng)
            x = rng.uniform(-2, 2, (3,))
            h = rng.uniform(-1, 1, (4,))
            c = rng.uniform(-1, 1, (4,))
            h2, c2 = lstm_step(x, h, c, p)
            oh, oc = oracle_lstm_step(x, h, c, p)
            assert np.allclose(h2, oh, atol=1e-12)
            assert np.allclose(c2, oc, atol=1e-12)

    def test_gate_ranges(self):
        rng = SplitMix64(14)
        p = new_lstm_params(2, 3, rng)
        h2, c2 = lstm_step(
            rng.uniform(-5, 5, (2,)), rng.uniform(-1, 1, (3,)), rng.uniform(-1, 1, (3,)), p
        )
        assert np.all(np.isfinite(h2)) and np.all(np.isfinite(c2))
        assert np.all(np.abs(h2) < 1.0)  # |o * tanh(c)| < 1

    def test_dimension_mismatch(self):
        p = new_lstm_params(2, 3, SplitMix64(0))
        with pytest.raises(ValueError):
            lstm_step(np.zeros(5), np.zeros(3), np.zeros(3), p)
        with pytest.raises(ValueError):
            lstm_step(np.zeros(2), np.zeros(4), np.zeros(3), p)

    def test_forget_bias_initialized_open(self):
        p = new_lstm_params(2, 3, SplitMix64(1))
        assert np.array_equal(p.b[3:6], np.ones(3))
        assert np.array_equal(p.b[:3], np.zeros(3))
        assert np.array_equal(p.b[6:], np.zeros(6))


class TestBiLstmForward:
    def test_length_one_shape(self):
        rng = SplitMix64(21)
        net = BiLstm(new_lstm_params(2, 3, rng), new_lstm_params(2, 3, rng))
        out = net.forward(rng.uniform(-1, 1, (1, 2)))
        assert out.shape == (1, 6)

    def test_zero_params_zero_output(self):
        zeros = LstmParams(w=np.zeros((12, 2)), u=np.zeros((12, 3)), b=np.zeros(12))
        net = BiLstm(zeros, zeros)
        out = net.forward(np.ones((4, 2)))
        assert np.array_equal(out, np.zeros((4, 6)))

    def test_palindrome_symmetry_with_shared_params(self):
        # same params both directions + mirror-symmetric input means the
        # output sequence reversed equals itself with halves swapped
        rng = SplitMix64(22)
        p = new_lstm_params(2, 3, rng)
        net = BiLstm(p, p)
        half = rng.uniform(-1, 1, (3, 2))
        xs = np.concatenate([half, half[::-1]], axis=0)
        out = net.forward(xs)
        swapped = np.concatenate([out[:, 3:], out[:, :3]], axis=1)
        assert np.allclose(out[::-1], swapped, atol=1e-12)

    def test_first_half_is_forward_direction(self):
        rng = SplitMix64(23)
        fwd = new_lstm_params(2, 3, rng)
        bwd = new_lstm_params(2, 3, rng)
        xs = rng.uniform(-1, 1, (4, 2))
        out = BiLstm(fwd, bwd).forward(xs)
        h = np.zeros(3)
        c = np.zeros(3)
        for t in range(4):
            h, c = lstm_step(xs[t], h, c, fwd)
            assert np.allclose(out[t, :3], h, atol=1e-12)

    def test_second_half_is_backward_direction(self):
        rng = SplitMix64(24)
        fwd = new_lstm_params(2, 3, rng)
        bwd = new_lstm_params(2, 3, rng)
        xs = rng.uniform(-1, 1, (4, 2))
        out = BiLstm(fwd, bwd).forward(xs)
        h = np.zeros(3)
        c = np.zeros(3)
        for t in range(3, -1, -1):
            h, c = lstm_step(xs[t], h, c, bwd)
            assert np.allclose(out[t, 3:], h, atol=1e-12)

    def test_empty_sequence_rejected(self):
        rng = SplitMix64(25)
        net = BiLstm(new_lstm_params(2, 3, rng), new_lstm_params(2, 3, rng))
        with pytest.raises(ValueError):
            net.forward(np.zeros((0, 2)))

    def test_mismatched_directions_rejected(self):
        rng = SplitMix64(26)
        with pytest.raises(ValueError):
            BiLstm(new_lstm_params(2, 3, rng), new_lstm_params(2, 4, rng))

    def test_deterministic(self):
        rng = SplitMix64(27)
        fwd = new_lstm_params(3, 2, rng)
        bwd = new_lstm_params(3, 2, rng)
        xs = rng.uniform(-1, 1, (5, 3))
        a = BiLstm(fwd, bwd).forward(xs)
        b = BiLstm(fwd, bwd).forward(xs)
        assert np.array_equal(a, b)


class TestBiLstmBackward:
    def _setup(self, seed, n=3, d=2, hd=3):
        rng = SplitMix64(seed)
        fwd = new_lstm_params(d, hd, rng)
        bwd = new_lstm_params(d, hd, rng)
        xs = rng.uniform(-1, 1, (n, d))
        w_out = rng.uniform(-1, 1, (n, 2 * hd))
        return fwd, bwd, xs, w_out

    def test_requires_cached_forward(self):
        fwd, bwd, xs, w_out = self._setup(30)
        net = BiLstm(fwd, bwd)
        with pytest.raises(RuntimeError):
            net.backward(w_out)
        net.forward(xs, keep_cache=False)
        with pytest.raises(RuntimeError):
            net.backward(w_out)

    def test_zero_grad_out_gives_zero_grads(self):
        fwd, bwd, xs, _ = self._setup(31)
        net = BiLstm(fwd, bwd)
        net.forward(xs)
        gx, gf, gb = net.backward(np.zeros((3, 6)))
        assert not gx.any()
        for grads in (gf, gb):
            assert not grads.w.any() and not grads.u.any() and not grads.b.any()

    def test_linearity_in_grad_out(self):
        fwd, bwd, xs, w_out = self._setup(32)
        net = BiLstm(fwd, bwd)
        net.forward(xs)
        gx1, gf1, gb1 = net.backward(w_out)
        gx2, gf2, gb2 = net.backward(2.0 * w_out)
        assert np.allclose(gx2, 2.0 * gx1, atol=1e-12)
        assert np.allclose(gf2.w, 2.0 * gf1.w, atol=1e-12)
        assert np.allclose(gb2.u, 2.0 * gb1.u, atol=1e-12)

    def test_gradients_match_finite_differences(self):
        fwd, bwd, xs, w_out = self._setup(33)

        def loss():
            return float((BiLstm(fwd, bwd).forward(xs, keep_cache=False) * w_out).sum())

        net = BiLstm(fwd, bwd)
        net.forward(xs)
        gx, gf, gb = net.backward(w_out)
        for params, grads in ((fwd, gf), (bwd, gb)):
            for name in ("w", "u", "b"):
                err = max_fd_rel_err(loss, getattr(params, name), getattr(grads, name))
                assert err < 1e-4, name
        assert max_fd_rel_err(loss, xs, gx) < 1e-4

    def test_gradients_length_one(self):
        fwd, bwd, xs, w_out = self._setup(34, n=1)

        def loss():
            return float((BiLstm(fwd, bwd).forward(xs, keep_cache=False) * w_out).sum())

        net = BiLstm(fwd, bwd)
        net.forward(xs)
        gx, gf, gb = net.backward(w_out)
        assert max_fd_rel_err(loss, fwd.w, gf.w) < 1e-4
        assert max_fd_rel_err(loss, bwd.w, gb.w) < 1e-4
        assert max_fd_rel_err(loss, xs, gx) < 1e-4

    def test_no_nonfinite_escape(self):
        rng = SplitMix64(35)
        fwd = new_lstm_params(2, 3, rng)
        bwd = new_lstm_params(2, 3, rng)
        xs = rng.uniform(-50, 50, (6, 2))  # saturating inputs
        net = BiLstm(fwd, bwd)
        out = net.forward(xs)
        assert np.all(np.isfinite(out))
        gx, gf, gb = net.backward(rng.uniform(-1, 1, (6, 6)))
        assert np.all(np.isfinite(gx))
        assert np.all(np.isfinite(gf.w)) and np.all(np.isfinite(gb.u))


def test_rel_err_helper_floor():
    assert rel_err(0.0, 0.0) == 0.0
    assert rel_err(1e-9, 0.0) < 1e-1
