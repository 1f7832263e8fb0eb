"""Dense numeric kernels and a bidirectional LSTM with hand-derived backprop.

All math runs in float64. LSTM gates are packed into one (4H,) block per
step in the fixed order [input i, forget f, cell g, output o]:

    a  = W x_t + U h_{t-1} + b
    i, f, o = sigmoid of their slices,  g = tanh of its slice
    c_t = f * c_{t-1} + i * g
    h_t = o * tanh(c_t)

The backward pass re-derives exact gradients from cached intermediates; it
is checked against central finite differences in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import SplitMix64


def logsumexp(values) -> float:
    """log(sum(exp(values))) with max shift; exact for constant vectors."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("logsumexp of an empty vector")
    m = float(v.max())
    return m + float(np.log(np.exp(v - m).sum()))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # split by sign to avoid overflow in exp for large |x|
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class LinearParams:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)


def new_linear_params(in_dim: int, out_dim: int, rng: SplitMix64) -> LinearParams:
    s = 1.0 / np.sqrt(in_dim)
    return LinearParams(
        weight=rng.uniform(-s, s, (out_dim, in_dim)),
        bias=np.zeros(out_dim, dtype=np.float64),
    )


def linear_forward(x: np.ndarray, params: LinearParams) -> np.ndarray:
    """y = W x + b. Accepts a single vector (in,) or a stack (n, in)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != params.weight.shape[1]:
        raise ValueError(
            f"input dim {x.shape[-1]} does not match weight in-dim {params.weight.shape[1]}"
        )
    return x @ params.weight.T + params.bias


def linear_backward(
    x: np.ndarray, params: LinearParams, grad_out: np.ndarray
) -> tuple[np.ndarray, LinearParams]:
    """Gradients of a scalar loss given d loss / d y. Returns (dx, dparams)."""
    x = np.asarray(x, dtype=np.float64)
    grad_out = np.asarray(grad_out, dtype=np.float64)
    if grad_out.shape[-1] != params.weight.shape[0]:
        raise ValueError(
            f"grad dim {grad_out.shape[-1]} does not match weight out-dim "
            f"{params.weight.shape[0]}"
        )
    if x.ndim == 1:
        grad_w = np.outer(grad_out, x)
        grad_b = grad_out.copy()
    else:
        grad_w = grad_out.T @ x
        grad_b = grad_out.sum(axis=0)
    grad_x = grad_out @ params.weight
    return grad_x, LinearParams(weight=grad_w, bias=grad_b)


@dataclass
class LstmParams:
    w: np.ndarray  # (4H, D) input weights
    u: np.ndarray  # (4H, H) recurrent weights
    b: np.ndarray  # (4H,)

    @property
    def input_dim(self) -> int:
        return self.w.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.u.shape[1]


def new_lstm_params(input_dim: int, hidden_dim: int, rng: SplitMix64) -> LstmParams:
    sw = 1.0 / np.sqrt(input_dim)
    su = 1.0 / np.sqrt(hidden_dim)
    b = np.zeros(4 * hidden_dim, dtype=np.float64)
    b[hidden_dim : 2 * hidden_dim] = 1.0  # forget-gate bias keeps early memory open
    return LstmParams(
        w=rng.uniform(-sw, sw, (4 * hidden_dim, input_dim)),
        u=rng.uniform(-su, su, (4 * hidden_dim, hidden_dim)),
        b=b,
    )


def zero_lstm_grads(params: LstmParams) -> LstmParams:
    return LstmParams(
        w=np.zeros_like(params.w), u=np.zeros_like(params.u), b=np.zeros_like(params.b)
    )


def lstm_step(
    x: np.ndarray, h: np.ndarray, c: np.ndarray, params: LstmParams
) -> tuple[np.ndarray, np.ndarray]:
    """One LSTM cell update; returns (h', c')."""
    x = np.asarray(x, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    hd = params.hidden_dim
    if x.shape != (params.input_dim,):
        raise ValueError(f"x has shape {x.shape}, expected ({params.input_dim},)")
    if h.shape != (hd,) or c.shape != (hd,):
        raise ValueError(f"state has shape {h.shape}/{c.shape}, expected ({hd},)")
    a = params.w @ x + params.u @ h + params.b
    i = _sigmoid(a[:hd])
    f = _sigmoid(a[hd : 2 * hd])
    g = np.tanh(a[2 * hd : 3 * hd])
    o = _sigmoid(a[3 * hd :])
    c2 = f * c + i * g
    h2 = o * np.tanh(c2)
    return h2, c2


class _DirectionCache:
    """Everything a unidirectional pass must retain for exact backprop."""

    __slots__ = ("xs", "h_prev", "c_prev", "i", "f", "g", "o", "tanh_c")

    def __init__(self, n: int, d: int, hd: int):
        self.xs = np.empty((n, d))
        self.h_prev = np.empty((n, hd))
        self.c_prev = np.empty((n, hd))
        self.i = np.empty((n, hd))
        self.f = np.empty((n, hd))
        self.g = np.empty((n, hd))
        self.o = np.empty((n, hd))
        self.tanh_c = np.empty((n, hd))


def _run_direction(params: LstmParams, xs: np.ndarray) -> tuple[np.ndarray, _DirectionCache]:
    n = xs.shape[0]
    hd = params.hidden_dim
    cache = _DirectionCache(n, params.input_dim, hd)
    cache.xs[:] = xs
    # the input projection has no recurrence; batch it across time
    a_in = xs @ params.w.T + params.b
    h = np.zeros(hd)
    c = np.zeros(hd)
    hs = np.empty((n, hd))
    for t in range(n):
        a = a_in[t] + params.u @ h
        i = _sigmoid(a[:hd])
        f = _sigmoid(a[hd : 2 * hd])
        g = np.tanh(a[2 * hd : 3 * hd])
        o = _sigmoid(a[3 * hd :])
        cache.h_prev[t] = h
        cache.c_prev[t] = c
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        cache.i[t], cache.f[t], cache.g[t], cache.o[t] = i, f, g, o
        cache.tanh_c[t] = tc
        hs[t] = h
    return hs, cache


def _backprop_direction(
    params: LstmParams, cache: _DirectionCache, grad_hs: np.ndarray
) -> tuple[np.ndarray, LstmParams]:
    n, hd = grad_hs.shape
    das = np.empty((n, 4 * hd))
    dh_next = np.zeros(hd)
    dc_next = np.zeros(hd)
    for t in range(n - 1, -1, -1):
        i, f, g, o = cache.i[t], cache.f[t], cache.g[t], cache.o[t]
        tc = cache.tanh_c[t]
        dh = grad_hs[t] + dh_next
        do = dh * tc
        dc = dc_next + dh * o * (1.0 - tc * tc)
        di = dc * g
        df = dc * cache.c_prev[t]
        dg = dc * i
        dc_next = dc * f
        da = das[t]
        da[:hd] = di * i * (1.0 - i)
        da[hd : 2 * hd] = df * f * (1.0 - f)
        da[2 * hd : 3 * hd] = dg * (1.0 - g * g)
        da[3 * hd :] = do * o * (1.0 - o)
        dh_next = params.u.T @ da
    grads = LstmParams(w=das.T @ cache.xs, u=das.T @ cache.h_prev, b=das.sum(axis=0))
    grad_xs = das @ params.w
    return grad_xs, grads


class BiLstm:
    """Two LSTMs over opposite directions, outputs concatenated per position.

    forward() caches every intermediate; backward() replays the cache for
    exact gradients. The cache makes instances stateful: one forward/backward
    pair at a time per instance.
    """

    def __init__(self, fwd: LstmParams, bwd: LstmParams):
        if fwd.input_dim != bwd.input_dim or fwd.hidden_dim != bwd.hidden_dim:
            raise ValueError("forward and backward directions must share dimensions")
        self.fwd = fwd
        self.bwd = bwd
        self._cache: tuple[_DirectionCache, _DirectionCache] | None = None

    @property
    def input_dim(self) -> int:
        return self.fwd.input_dim

    @property
    def hidden_dim(self) -> int:
        return self.fwd.hidden_dim

    def forward(self, inputs: np.ndarray, keep_cache: bool = True) -> np.ndarray:
        """(n, D) -> (n, 2H). Position t is [forward h_t ; backward h_t]."""
        inputs = np.asarray(inputs, dtype=np.float64)
        if inputs.ndim != 2 or inputs.shape[1] != self.input_dim:
            raise ValueError(
                f"inputs must have shape (n, {self.input_dim}), got {inputs.shape}"
            )
        if inputs.shape[0] == 0:
            raise ValueError("cannot run a BiLSTM over an empty sequence")
        hf, cache_f = _run_direction(self.fwd, inputs)
        hb, cache_b = _run_direction(self.bwd, inputs[::-1])
        if keep_cache:
            self._cache = (cache_f, cache_b)
        return np.concatenate([hf, hb[::-1]], axis=1)

    def backward(
        self, grad_outputs: np.ndarray
    ) -> tuple[np.ndarray, LstmParams, LstmParams]:
        """Gradients of the cached forward pass.

        Returns (grad_inputs (n, D), grads for the forward direction, grads
        for the backward direction).
        """
        if self._cache is None:
            raise RuntimeError("backward() called with no cached forward pass")
        cache_f, cache_b = self._cache
        grad_outputs = np.asarray(grad_outputs, dtype=np.float64)
        n = cache_f.xs.shape[0]
        hd = self.hidden_dim
        if grad_outputs.shape != (n, 2 * hd):
            raise ValueError(
                f"grad_outputs must have shape ({n}, {2 * hd}), got {grad_outputs.shape}"
            )
        gx_f, grads_f = _backprop_direction(self.fwd, cache_f, grad_outputs[:, :hd])
        gx_b, grads_b = _backprop_direction(self.bwd, cache_b, grad_outputs[::-1, hd:])
        return gx_f + gx_b[::-1], grads_f, grads_b
