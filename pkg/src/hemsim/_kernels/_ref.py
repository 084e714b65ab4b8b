"""Pure-numpy reference kernels.

Same signatures and arithmetic order as the compiled extension, so the two
backends agree to floating-point round-off.  The hot spots are the per-layer
network ops used inside the training loop and the backward-induction sweep of
the planning oracle.
"""

from __future__ import annotations

import numpy as np

ACT_IDENTITY, ACT_RELU, ACT_TANH, ACT_SIGMOID = 0, 1, 2, 3


def _apply_activation(z: np.ndarray, act: np.ndarray) -> None:
    codes = np.unique(act)
    for code in codes:
        if code == ACT_IDENTITY:
            continue
        cols = act == code
        view = z[:, cols]
        if code == ACT_RELU:
            z[:, cols] = np.maximum(view, 0.0)
        elif code == ACT_TANH:
            z[:, cols] = np.tanh(view)
        elif code == ACT_SIGMOID:
            with np.errstate(over="ignore"):
                z[:, cols] = 1.0 / (1.0 + np.exp(-view))
        else:
            raise ValueError(f"unknown activation code {code}")


def affine_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray, act: np.ndarray) -> np.ndarray:
    """act(x @ w + b) with per-output-unit activation codes."""
    z = x @ w
    z += b
    _apply_activation(z, act)
    return z


def _activation_grad(out: np.ndarray, act: np.ndarray) -> np.ndarray:
    grad = np.ones_like(out)
    for code in np.unique(act):
        cols = act == code
        if code == ACT_IDENTITY:
            continue
        if code == ACT_RELU:
            grad[:, cols] = (out[:, cols] > 0.0).astype(np.float64)
        elif code == ACT_TANH:
            grad[:, cols] = 1.0 - out[:, cols] ** 2
        elif code == ACT_SIGMOID:
            grad[:, cols] = out[:, cols] * (1.0 - out[:, cols])
        else:
            raise ValueError(f"unknown activation code {code}")
    return grad


def affine_backward(d_out, out, x, w, act, need_dw=True, need_dx=True):
    """Backprop through act(x @ w + b).

    Activation derivatives are recovered from the activated outputs, so no
    pre-activation cache is needed.  Returns (d_w, d_b, d_x); entries not
    requested are None.
    """
    dz = d_out * _activation_grad(out, act)
    d_w = x.T @ dz if need_dw else None
    d_b = dz.sum(axis=0) if need_dw else None
    d_x = dz @ w.T if need_dx else None
    return d_w, d_b, d_x


def adam_step(p, g, m, v, t, lr, beta1, beta2, eps) -> int:
    """One fused Adam update, in place on flat float64 arrays.

    Returns nonzero (without touching the state) if the gradient contains a
    NaN or infinity."""
    if not np.isfinite(g).all():
        return 1
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * (g * g)
    inv_bc1 = 1.0 / (1.0 - beta1 ** t)
    inv_sqrt_bc2 = 1.0 / np.sqrt(1.0 - beta2 ** t)
    p -= lr * (m * inv_bc1) / (np.sqrt(v) * inv_sqrt_bc2 + eps)
    return 0


def blend(target, online, tau) -> None:
    """target = (1 - tau) * target + tau * online, in place on flat arrays."""
    target *= 1.0 - tau
    target += tau * online


def dp_backward_sweep(v_next, b_grid, t_grid, f_levels, e_levels,
                      solar_kw, demand_kw, outdoor_f, price_buy,
                      charge_eff, discharge_eff, ess_min, ess_max,
                      charge_max, discharge_max, hvac_max,
                      comfort_min, comfort_max, inertia, hvac_gain,
                      wear_cost, sell_ratio, comfort_weight,
                      v_out, best_f_idx, best_e_idx) -> None:
    """One slot of backward induction over the (stored energy, indoor temp) grid.

    For every grid node and every (storage, HVAC) action level the action is
    feasibility-clipped exactly as the environment clips it, the deterministic
    dynamics are advanced, and the stage cost (energy + wear + weighted
    comfort violation) plus the bilinear-interpolated next value is minimized.
    Ties resolve to the first action in (storage-level, HVAC-level) order.
    """
    bv = b_grid[:, None]
    tv = t_grid[None, :]
    nb, nt = len(b_grid), len(t_grid)
    db = (b_grid[-1] - b_grid[0]) / (nb - 1)
    dt = (t_grid[-1] - t_grid[0]) / (nt - 1)

    f_lo = np.minimum(np.maximum(-discharge_max, (ess_min - bv) * discharge_eff), 0.0)
    f_hi = np.maximum(np.minimum(charge_max, (ess_max - bv) / charge_eff), 0.0)
    below_band = tv < comfort_min
    sell = sell_ratio * price_buy

    # Per-HVAC-level quantities depend only on the temperature axis.
    e_pre = []
    for e0 in e_levels:
        e_base = min(max(e0, 0.0), hvac_max)
        e = np.where(below_band, 0.0, e_base)                # (1, nt)
        t_next = inertia * tv + (1.0 - inertia) * (outdoor_f - hvac_gain * e)
        c_comfort = np.maximum(0.0, t_next - comfort_max) + np.maximum(0.0, comfort_min - t_next)
        xt = np.clip((t_next - t_grid[0]) / dt, 0.0, nt - 1.0)
        it = np.minimum(xt.astype(np.int64), nt - 2)
        wt = xt - it
        e_pre.append((e, c_comfort, it, wt))

    best = np.full((nb, nt), np.inf)
    bf = np.zeros((nb, nt), dtype=np.int32)
    be = np.zeros((nb, nt), dtype=np.int32)

    for fi, f0 in enumerate(f_levels):
        f = np.minimum(np.maximum(f0, f_lo), f_hi)           # (nb, 1)
        charge = np.maximum(f, 0.0)
        discharge = np.minimum(f, 0.0)
        b_next = bv + charge_eff * charge + discharge / discharge_eff
        wear = wear_cost * np.abs(f)

        xb = np.clip((b_next - b_grid[0]) / db, 0.0, nb - 1.0)
        ib = np.minimum(xb.astype(np.int64), nb - 2)
        wb = xb - ib

        for ei, (e, c_comfort, it, wt) in enumerate(e_pre):
            g = demand_kw + e + charge + discharge - solar_kw
            c_energy = 0.5 * (price_buy - sell) * np.abs(g) + 0.5 * (price_buy + sell) * g

            v00 = v_next[ib, it]
            v10 = v_next[ib + 1, it]
            v01 = v_next[ib, it + 1]
            v11 = v_next[ib + 1, it + 1]
            vi = (v00 * (1.0 - wb) + v10 * wb) * (1.0 - wt) + (v01 * (1.0 - wb) + v11 * wb) * wt

            cost = c_energy + wear + comfort_weight * c_comfort + vi
            better = cost < best
            if np.any(better):
                best = np.where(better, cost, best)
                bf = np.where(better, fi, bf)
                be = np.where(better, ei, be)

    v_out[...] = best
    best_f_idx[...] = bf
    best_e_idx[...] = be
