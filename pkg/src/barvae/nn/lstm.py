"""LSTM ops built on the autodiff tensor.

Three execution paths share one weight layout:

* `lstm_layer` runs a whole teacher-forced sequence as a single graph node
  with hand-derived BPTT. The input projection and all weight gradients are
  single large GEMMs, and the sequential recurrence loops are compiled with
  numba when it is installed (they fall back to plain numpy otherwise),
  which is what makes CPU training and full finite-difference sweeps
  tractable.
* `lstm_cell` is a per-step graph node for paths whose input depends on the
  previous step's output (scheduled sampling).
* `lstm_step_np` is the raw numpy step for sampling without gradients.

Weights follow the (out, in) convention of `linear`: wx is (4H, D),
wh is (4H, H), b is (4H,). Gate order along the 4H axis is i, f, g, o.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tensor import Tensor, _accum, _make, sigmoid_np


@dataclass
class LstmWeights:
    """One layer's parameters; hidden size H = wh.shape[1]."""

    wx: Tensor
    wh: Tensor
    b: Tensor

    @property
    def hidden(self) -> int:
        return self.wh.data.shape[1]

    def tensors(self) -> tuple[Tensor, Tensor, Tensor]:
        return (self.wx, self.wh, self.b)


def _gate_split(gates: np.ndarray, h: int):
    return gates[..., :h], gates[..., h : 2 * h], gates[..., 2 * h : 3 * h], gates[..., 3 * h :]


def _forward_loop_small(xw, wh_t, h0, c0):
    """Recurrence over (T, B, 4H) pre-projected inputs; returns activations.

    hs, i, f, g, o, tanh(c), c_prev are all (T, B, H); the caches feed the
    matching backward loop. Scalar-loop variant, compiled with numba: it
    wins when B*H is small and per-call overhead dominates.
    """
    T, B, four_h = xw.shape
    H = four_h // 4
    hs = np.empty((T, B, H), dtype=xw.dtype)
    ci = np.empty_like(hs)
    cf = np.empty_like(hs)
    cg = np.empty_like(hs)
    co = np.empty_like(hs)
    ctc = np.empty_like(hs)
    ccp = np.empty_like(hs)
    h = h0.copy()
    c = c0.copy()
    for t in range(T):
        gates = xw[t] + np.dot(h, wh_t)
        for b in range(B):
            for j in range(H):
                zi = gates[b, j]
                zf = gates[b, H + j]
                zg = gates[b, 2 * H + j]
                zo = gates[b, 3 * H + j]
                if zi >= 0.0:
                    i = 1.0 / (1.0 + math.exp(-zi))
                else:
                    e = math.exp(zi)
                    i = e / (1.0 + e)
                if zf >= 0.0:
                    f = 1.0 / (1.0 + math.exp(-zf))
                else:
                    e = math.exp(zf)
                    f = e / (1.0 + e)
                g = math.tanh(zg)
                if zo >= 0.0:
                    o = 1.0 / (1.0 + math.exp(-zo))
                else:
                    e = math.exp(zo)
                    o = e / (1.0 + e)
                ccp[t, b, j] = c[b, j]
                cn = f * c[b, j] + i * g
                tc = math.tanh(cn)
                c[b, j] = cn
                h[b, j] = o * tc
                ci[t, b, j] = i
                cf[t, b, j] = f
                cg[t, b, j] = g
                co[t, b, j] = o
                ctc[t, b, j] = tc
        hs[t] = h
    return hs, ci, cf, cg, co, ctc, ccp


def _backward_loop_small(ghs, wh, ci, cf, cg, co, ctc, ccp):
    """Reverse recurrence; returns (dgates (T,B,4H), dh0, dc0)."""
    T, B, H = ghs.shape
    dgates = np.empty((T, B, 4 * H), dtype=ghs.dtype)
    dh = np.zeros((B, H), dtype=ghs.dtype)
    dc = np.zeros((B, H), dtype=ghs.dtype)
    for t in range(T - 1, -1, -1):
        for b in range(B):
            for j in range(H):
                i = ci[t, b, j]
                f = cf[t, b, j]
                g = cg[t, b, j]
                o = co[t, b, j]
                tc = ctc[t, b, j]
                dht = ghs[t, b, j] + dh[b, j]
                dct = dc[b, j] + dht * o * (1.0 - tc * tc)
                dgates[t, b, j] = dct * g * i * (1.0 - i)
                dgates[t, b, H + j] = dct * ccp[t, b, j] * f * (1.0 - f)
                dgates[t, b, 2 * H + j] = dct * i * (1.0 - g * g)
                dgates[t, b, 3 * H + j] = dht * tc * o * (1.0 - o)
                dc[b, j] = dct * f
        dh = np.dot(dgates[t], wh)
    return dgates, dh, dc


def _forward_loop_wide(xw, wh_t, h0, c0):
    """Same recurrence with whole-batch numpy ops per step.

    numpy's SIMD tanh makes this the faster variant once B*H is large
    enough to amortize per-call dispatch. All three sigmoid gates are
    computed in one shot via sigmoid(x) = (tanh(x/2) + 1) / 2, which is
    stable for any x and avoids the branchy masked-exp form.
    """
    T, B, four_h = xw.shape
    H = four_h // 4
    hs = np.empty((T, B, H), dtype=xw.dtype)
    ci = np.empty_like(hs)
    cf = np.empty_like(hs)
    cg = np.empty_like(hs)
    co = np.empty_like(hs)
    ctc = np.empty_like(hs)
    ccp = np.empty_like(hs)
    half = xw.dtype.type(0.5)
    h = h0
    c = c0
    sig_cols = np.empty((B, 3 * H), dtype=xw.dtype)
    for t in range(T):
        gates = xw[t] + h @ wh_t
        sig_cols[:, : 2 * H] = gates[:, : 2 * H]
        sig_cols[:, 2 * H :] = gates[:, 3 * H :]
        sig = np.tanh(sig_cols * half)
        sig += 1.0
        sig *= half
        i = sig[:, :H].copy()
        f = sig[:, H : 2 * H].copy()
        o = sig[:, 2 * H :].copy()
        g = np.tanh(gates[:, 2 * H : 3 * H])
        ccp[t] = c
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        ci[t] = i
        cf[t] = f
        cg[t] = g
        co[t] = o
        ctc[t] = tc
        hs[t] = h
    return hs, ci, cf, cg, co, ctc, ccp


def _backward_loop_wide(ghs, wh, ci, cf, cg, co, ctc, ccp):
    T, B, H = ghs.shape
    dgates = np.empty((T, B, 4 * H), dtype=ghs.dtype)
    dh = np.zeros((B, H), dtype=ghs.dtype)
    dc = np.zeros((B, H), dtype=ghs.dtype)
    for t in range(T - 1, -1, -1):
        i, f, g, o, tc = ci[t], cf[t], cg[t], co[t], ctc[t]
        dht = ghs[t] + dh
        dct = dc + dht * o * (1.0 - tc * tc)
        dgates[t, :, :H] = dct * g * i * (1.0 - i)
        dgates[t, :, H : 2 * H] = dct * ccp[t] * f * (1.0 - f)
        dgates[t, :, 2 * H : 3 * H] = dct * i * (1.0 - g * g)
        dgates[t, :, 3 * H :] = dht * tc * o * (1.0 - o)
        dc = dct * f
        dh = dgates[t] @ wh
    return dgates, dh, dc


# Below this many state elements per step, compiled scalar loops beat
# numpy dispatch; above it, numpy's SIMD transcendentals win.
_WIDE_THRESHOLD = 512

try:
    from numba import njit

    _forward_loop_small = njit(cache=True)(_forward_loop_small)
    _backward_loop_small = njit(cache=True)(_backward_loop_small)
except ImportError:  # pragma: no cover - numba is an optional accelerator
    _forward_loop_small = _forward_loop_wide
    _backward_loop_small = _backward_loop_wide


def _forward_loop(xw, wh_t, h0, c0):
    B, H = h0.shape
    if B * H >= _WIDE_THRESHOLD:
        return _forward_loop_wide(xw, wh_t, h0, c0)
    return _forward_loop_small(xw, wh_t, h0, c0)


def _backward_loop(ghs, wh, ci, cf, cg, co, ctc, ccp):
    return _backward_loop_small(ghs, wh, ci, cf, cg, co, ctc, ccp)


def lstm_step_np(
    x: np.ndarray,
    h: np.ndarray,
    c: np.ndarray,
    wx: np.ndarray,
    wh: np.ndarray,
    b: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Single step on raw arrays, no graph. Returns (h_next, c_next)."""
    hid = wh.shape[1]
    gates = x @ wx.T + h @ wh.T + b
    zi, zf, zg, zo = _gate_split(gates, hid)
    i = sigmoid_np(zi)
    f = sigmoid_np(zf)
    g = np.tanh(zg)
    o = sigmoid_np(zo)
    c_next = f * c + i * g
    h_next = o * np.tanh(c_next)
    return h_next, c_next


def lstm_cell(x: Tensor, hc: Tensor, w: LstmWeights) -> Tensor:
    """One recurrent step on the graph.

    `hc` packs state as (B, 2H) = [h | c]; the return value packs the next
    state the same way, so a single node carries both output gradients.
    """
    hid = w.hidden
    h = hc.data[:, :hid]
    c = hc.data[:, hid:]
    gates = x.data @ w.wx.data.T + h @ w.wh.data.T + w.b.data
    zi, zf, zg, zo = _gate_split(gates, hid)
    i = sigmoid_np(zi)
    f = sigmoid_np(zf)
    g = np.tanh(zg)
    o = sigmoid_np(zo)
    c_next = f * c + i * g
    tc = np.tanh(c_next)
    h_next = o * tc
    out_data = np.concatenate([h_next, c_next], axis=1)

    def bw(grad):
        dh = grad[:, :hid]
        dc = grad[:, hid:] + dh * o * (1.0 - tc * tc)
        d_i = dc * g * i * (1.0 - i)
        d_f = dc * c * f * (1.0 - f)
        d_g = dc * i * (1.0 - g * g)
        d_o = dh * tc * o * (1.0 - o)
        dgates = np.concatenate([d_i, d_f, d_g, d_o], axis=1)
        _accum(x, dgates @ w.wx.data)
        dh_prev = dgates @ w.wh.data
        dc_prev = dc * f
        _accum(hc, np.concatenate([dh_prev, dc_prev], axis=1))
        _accum(w.wx, dgates.T @ x.data)
        _accum(w.wh, dgates.T @ h)
        _accum(w.b, dgates.sum(axis=0))

    return _make(out_data, (x, hc) + w.tensors(), bw)


def pack_state(h: Tensor, c: Tensor) -> Tensor:
    from .tensor import concat

    return concat([h, c], axis=1)


def unpack_state(hc: Tensor, hidden: int) -> tuple[Tensor, Tensor]:
    from .tensor import narrow

    return narrow(hc, 1, 0, hidden), narrow(hc, 1, hidden, hidden)


def lstm_layer(xs: Tensor, h0: Tensor, c0: Tensor, w: LstmWeights) -> Tensor:
    """Run a full (T, B, D) sequence through one layer; returns hs (T, B, H).

    The whole unroll is one graph node. Forward precomputes the input
    projection for all steps at once; backward replays the recurrence in
    reverse and reduces every weight gradient with a single GEMM over the
    flattened (T*B) axis.
    """
    T, B, _ = xs.data.shape
    hid = w.hidden
    xw = xs.data.reshape(T * B, -1) @ w.wx.data.T
    xw = (xw + w.b.data).reshape(T, B, 4 * hid)
    wh_t = np.ascontiguousarray(w.wh.data.T)
    hs, ci, cf, cg, co, ctc, ccp = _forward_loop(xw, wh_t, h0.data, c0.data)

    def bw(ghs):
        dgates, dh0, dc0 = _backward_loop(np.ascontiguousarray(ghs), w.wh.data, ci, cf, cg, co, ctc, ccp)
        flat = dgates.reshape(T * B, 4 * hid)
        _accum(xs, (flat @ w.wx.data).reshape(xs.data.shape))
        _accum(h0, dh0)
        _accum(c0, dc0)
        _accum(w.wx, flat.T @ xs.data.reshape(T * B, -1))
        hprev = np.concatenate([h0.data[None], hs[:-1]], axis=0)
        _accum(w.wh, flat.T @ hprev.reshape(T * B, hid))
        _accum(w.b, flat.sum(axis=0))

    return _make(hs, (xs, h0, c0) + w.tensors(), bw)
