"""Pure-numpy backend: the fused per-unit step and the window-sum scan.

Semantics are identical to the compiled backend in ``_core.pyx``; this module
is the fallback when the extension is not built (or when PVM_PURE_PYTHON is
set) and the reference the extension is benchmarked against.
"""

from __future__ import annotations

import numpy as np

NAME = "python"


def unit_step(
    P, P_prev, I, D, E, C, H, P_star, input_prev,
    W_h, b_h, W_p, b_p,
    P_new, err_sq,
    tau: float, lr: float, do_train: bool, first: bool,
) -> int:
    """Fused precompute + (train) + forward for one unit.

    Returns 0 on success, 1 if a non-finite activation was produced.
    Training (when enabled) consumes the forward record left by the previous
    call (input_prev, H, P_star) with the newly arrived signal as target,
    then the forward pass overwrites that record.
    """
    s = P.shape[0]
    if first:
        P_prev[:] = P_new
        P_star[:] = P_new
        I[:] = P_new
    else:
        P_prev[:] = P
    I[:] = tau * I + (1.0 - tau) * P_new
    D[:] = 0.5 + (P_new - P_prev) / 2.0
    diff = P_star - P_new
    err_sq[:] = diff * diff
    E[:] = 0.5 + diff / 2.0
    P[:] = P_new

    if do_train:
        d_out = (P_star - P) * P_star * (1.0 - P_star)
        d_hid = (W_p.T @ d_out) * H * (1.0 - H)
        W_p -= lr * np.outer(d_out, H)
        b_p -= lr * d_out
        W_h -= lr * np.outer(d_hid, input_prev)
        b_h -= lr * d_hid

    input_prev[:s] = P
    input_prev[s:2 * s] = D
    input_prev[2 * s:3 * s] = I
    input_prev[3 * s:4 * s] = E
    input_prev[4 * s:] = C
    H[:] = 1.0 / (1.0 + np.exp(-(W_h @ input_prev + b_h)))
    P_star[:] = 1.0 / (1.0 + np.exp(-(W_p @ H + b_p)))
    if not (np.all(np.isfinite(H)) and np.all(np.isfinite(P_star))):
        return 1
    return 0


def window_sum_argmax(err_map: np.ndarray, win_h: int, win_w: int):
    """Max and argmax of channel-summed sliding-window totals, stride 1.

    Accumulation order matches the compiled backend: channels summed
    per pixel first, then window cells added row-major. Ties resolve to the
    smallest (y, x) window origin.
    """
    s = err_map[:, :, 0] + err_map[:, :, 1] + err_map[:, :, 2]
    out_h = s.shape[0] - win_h + 1
    out_w = s.shape[1] - win_w + 1
    acc = np.zeros((out_h, out_w), dtype=np.float64)
    for wy in range(win_h):
        for wx in range(win_w):
            acc += s[wy:wy + out_h, wx:wx + out_w]
    flat = int(np.argmax(acc))
    y, x = divmod(flat, out_w)
    return float(acc[y, x]), y, x
