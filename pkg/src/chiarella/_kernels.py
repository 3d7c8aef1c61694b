"""Compiled inner loops of the Euler-Maruyama integrator.

Each kernel advances one path through a chunk of pre-drawn standard-normal
increments, appending retained samples to caller-owned output arrays.  The
``tanh`` saturation is short-circuited for |argument| >= 20 where the
double-precision result is exactly ±1; this keeps strongly-coupled runs out
of libm without changing a single bit of output.

Kernels return ``(state..., out_pos, next_record, bad_step)`` where
``bad_step`` is the 1-based global index of the first non-finite step, or
-1 if the chunk completed cleanly.
"""

from __future__ import annotations

import math

from numba import njit


@njit(cache=True, nogil=True)
def run_reduced(
    delta,
    m,
    kappa,
    beta,
    gamma,
    alpha,
    sn_dt,
    sv_dt,
    dt,
    xi_n,
    xi_v,
    k_start,
    stride,
    out_delta,
    out_m,
    out_pos,
    next_record,
):
    n = xi_n.shape[0]
    pos = out_pos
    nxt = next_record
    for i in range(n):
        z = gamma * m
        if z >= 20.0:
            th = 1.0
        elif z <= -20.0:
            th = -1.0
        else:
            th = math.tanh(z)
        dv = sv_dt * xi_v[i]
        dd = (beta * th - kappa * delta) * dt + sn_dt * xi_n[i] - dv
        m = m + (alpha * (dd + dv) - alpha * m * dt)
        delta = delta + dd
        k = k_start + i + 1
        if not (math.isfinite(delta) and math.isfinite(m)):
            return delta, m, pos, nxt, k
        if k == nxt:
            out_delta[pos] = delta
            out_m[pos] = m
            pos += 1
            nxt += stride
    return delta, m, pos, nxt, -1


@njit(cache=True, nogil=True)
def run_full(
    price,
    m,
    value,
    kappa,
    beta,
    gamma,
    alpha,
    g,
    sn_dt,
    sv_dt,
    dt,
    xi_n,
    xi_v,
    k_start,
    stride,
    out_delta,
    out_m,
    out_pos,
    next_record,
):
    n = xi_n.shape[0]
    pos = out_pos
    nxt = next_record
    g_dt = g * dt
    for i in range(n):
        z = gamma * m
        if z >= 20.0:
            th = 1.0
        elif z <= -20.0:
            th = -1.0
        else:
            th = math.tanh(z)
        dp = (kappa * (value - price) + beta * th + g) * dt + sn_dt * xi_n[i]
        dval = g_dt + sv_dt * xi_v[i]
        m = m + (alpha * (dp - g_dt) - alpha * m * dt)
        price = price + dp
        value = value + dval
        k = k_start + i + 1
        if not (math.isfinite(price) and math.isfinite(m) and math.isfinite(value)):
            return price, m, value, pos, nxt, k
        if k == nxt:
            out_delta[pos] = price - value
            out_m[pos] = m
            pos += 1
            nxt += stride
    return price, m, value, pos, nxt, -1
