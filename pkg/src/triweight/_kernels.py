"""Compiled inner loops for the minimize and concur phases.

The engine flattens the graph into slot arrays (one slot per edge,
grouped contiguously by factor) plus a per-variable gather order. These
kernels run over per-thread queues of node indices; every node writes
only its own slots, so queues can execute concurrently with the GIL
released. fastmath stays off: results must be bit-identical for any
thread count.

Weight encoding: 0.0 silent, positive finite standard, +inf certain.
"""

from __future__ import annotations

import numpy as np
from numba import njit

K_ONE_ON = 0
K_BOX = 1
K_PAIR = 2
K_EMITTER = 3

KIND_CODES = {"one_on": K_ONE_ON, "box": K_BOX, "pair": K_PAIR, "emitter": K_EMITTER}

_INF = np.inf


@njit(cache=True, nogil=True)
def minimize_kernel(
    queue,
    f_kind,
    f_ptr,
    f_alive,
    f_pinned,
    f_radius,
    f_dirx,
    f_diry,
    s_alive,
    e_n,
    e_wnf,
    e_x,
    e_m,
    e_u,
    e_wmv,
    rho,
    infeasible,
):
    for qi in range(queue.shape[0]):
        fi = queue[qi]
        if f_alive[fi] == 0:
            continue
        p0 = f_ptr[fi]
        p1 = f_ptr[fi + 1]
        kind = f_kind[fi]

        if kind == K_ONE_ON:
            # Classify inputs: certain-on pins, certain-off exclusions,
            # and free candidates scored by the cost change of turning
            # that slot on: w*(1 - 2n)/2 (lower is better).
            live = 0
            n_pinned_on = 0
            pinned_on_slot = -1
            n_cand = 0
            last_cand = -1
            best_slot = -1
            best_score = _INF
            best_tie = _INF
            for s in range(p0, p1):
                if s_alive[s] == 0:
                    continue
                live += 1
                w = e_wnf[s]
                n = e_n[s]
                if w == _INF:
                    if n >= 0.5:
                        n_pinned_on += 1
                        pinned_on_slot = s
                else:
                    n_cand += 1
                    last_cand = s
                    score = 0.5 * w * (1.0 - 2.0 * n)
                    tie = abs(1.0 - n)
                    if score < best_score or (score == best_score and tie < best_tie):
                        best_score = score
                        best_tie = tie
                        best_slot = s
            if live == 0:
                continue
            if f_pinned[fi] == 1:
                # The constraint is already satisfied outside the graph:
                # every remaining slot is certainly off.
                if n_pinned_on > 0:
                    infeasible[fi] = 1
                    continue
                for s in range(p0, p1):
                    if s_alive[s] == 0:
                        continue
                    e_x[s] = 0.0
                    e_wmv[s] = _INF
                    e_m[s] = 0.0
                continue
            if n_pinned_on >= 2:
                infeasible[fi] = 1
                continue
            certain_out = False
            if n_pinned_on == 1:
                winner = pinned_on_slot
                certain_out = True
            elif n_cand == 0:
                infeasible[fi] = 1
                continue
            elif n_cand == 1:
                winner = last_cand
                certain_out = True
            else:
                winner = best_slot
            w_out = _INF if certain_out else rho
            for s in range(p0, p1):
                if s_alive[s] == 0:
                    continue
                x = 1.0 if s == winner else 0.0
                e_x[s] = x
                e_wmv[s] = w_out
                if certain_out:
                    e_m[s] = x
                else:
                    e_m[s] = x + e_u[s]

        elif kind == K_BOX:
            r = f_radius[fi]
            lo = r
            hi = 1.0 - r
            for s in range(p0, p1):
                if s_alive[s] == 0:
                    continue
                n = e_n[s]
                if n < lo:
                    x = lo
                    w = rho
                elif n > hi:
                    x = hi
                    w = rho
                else:
                    x = n
                    w = 0.0
                e_x[s] = x
                e_wmv[s] = w
                if w > 0.0:
                    e_m[s] = x + e_u[s]
                else:
                    e_m[s] = x

        elif kind == K_PAIR:
            s0 = p0
            if s_alive[s0] == 0:
                continue  # detached to the pool
            r2 = 2.0 * f_radius[fi]
            xi = e_n[s0]
            yi = e_n[s0 + 1]
            xj = e_n[s0 + 2]
            yj = e_n[s0 + 3]
            dx = xj - xi
            dy = yj - yi
            d = np.sqrt(dx * dx + dy * dy)
            if d >= r2:
                for s in range(s0, s0 + 4):
                    e_x[s] = e_n[s]
                    e_wmv[s] = 0.0
                    e_m[s] = e_n[s]
                continue
            wi = max(e_wnf[s0], e_wnf[s0 + 1])
            wj = max(e_wnf[s0 + 2], e_wnf[s0 + 3])
            if wi == _INF and wj == _INF:
                infeasible[fi] = 1
                continue
            if wi == _INF:
                ai = 0.0
                aj = 1.0
            elif wj == _INF:
                ai = 1.0
                aj = 0.0
            elif wi == 0.0 and wj == 0.0:
                ai = 0.5
                aj = 0.5
            else:
                tot = wi + wj
                ai = wj / tot
                aj = wi / tot
            if d > 1e-12:
                ux = dx / d
                uy = dy / d
            else:
                ux = f_dirx[fi]
                uy = f_diry[fi]
            gap = r2 - d
            t0 = xi - ai * gap * ux
            t1 = yi - ai * gap * uy
            t2 = xj + aj * gap * ux
            t3 = yj + aj * gap * uy
            e_x[s0] = t0
            e_x[s0 + 1] = t1
            e_x[s0 + 2] = t2
            e_x[s0 + 3] = t3
            for s in range(s0, s0 + 4):
                e_wmv[s] = rho
                e_m[s] = e_x[s] + e_u[s]
        # K_EMITTER handled outside the kernel.


@njit(cache=True, nogil=True)
def concur_kernel(
    queue,
    v_ptr,
    v_slots,
    v_z,
    v_wout,
    v_certain,
    v_alive,
    s_alive,
    e_m,
    e_wmv,
    e_x,
    e_u,
    e_n,
    e_prev,
    e_wnf,
    rho,
    eps,
    conflict,
    max_out,
    newly,
    newly_count,
):
    local_max = 0.0
    cnt = 0
    for qi in range(queue.shape[0]):
        vi = queue[qi]
        if v_alive[vi] == 0:
            continue
        a = v_ptr[vi]
        b = v_ptr[vi + 1]
        if v_certain[vi] == 1:
            # Sticky certainty: z frozen; still check incoming certainty.
            z = v_z[vi]
            new_w = _INF
            for si in range(a, b):
                s = v_slots[si]
                if s_alive[s] == 0:
                    continue
                if e_wmv[s] == _INF and abs(e_m[s] - z) > eps:
                    conflict[vi] = 1
        else:
            inf_cnt = 0
            inf_sum = 0.0
            inf_lo = _INF
            inf_hi = -_INF
            wsum = 0.0
            msum = 0.0
            for si in range(a, b):
                s = v_slots[si]
                if s_alive[s] == 0:
                    continue
                w = e_wmv[s]
                m = e_m[s]
                if w == _INF:
                    inf_cnt += 1
                    inf_sum += m
                    if m < inf_lo:
                        inf_lo = m
                    if m > inf_hi:
                        inf_hi = m
                elif w > 0.0:
                    wsum += w
                    msum += w * m
            if inf_cnt > 0:
                z = inf_sum / inf_cnt
                new_w = _INF
                if inf_hi - inf_lo > eps:
                    conflict[vi] = 1
                v_certain[vi] = 1
                newly[cnt] = vi
                cnt += 1
            elif wsum > 0.0:
                z = msum / wsum
                new_w = rho
            else:
                z = v_z[vi]
                new_w = 0.0
        v_z[vi] = z
        v_wout[vi] = new_w
        for si in range(a, b):
            s = v_slots[si]
            if s_alive[s] == 0:
                continue
            e_wnf[s] = new_w
            wmv = e_wmv[s]
            if 0.0 < wmv < _INF and 0.0 < new_w < _INF:
                e_u[s] = e_u[s] + (e_x[s] - z)
            else:
                e_u[s] = 0.0
            e_prev[s] = e_n[s]
            e_n[s] = z - e_u[s]
            delta = abs(e_n[s] - e_prev[s])
            if delta > local_max:
                local_max = delta
    max_out[0] = local_max
    newly_count[0] = cnt


def warmup() -> None:
    """Force-compile both kernels on a one-factor toy problem."""
    queue = np.zeros(1, dtype=np.int64)
    f_kind = np.array([K_ONE_ON], dtype=np.int8)
    f_ptr = np.array([0, 2], dtype=np.int64)
    ones_u8 = np.ones(1, dtype=np.uint8)
    zeros_u8 = np.zeros(1, dtype=np.uint8)
    fz = np.zeros(1, dtype=np.float64)
    s_alive = np.ones(2, dtype=np.uint8)
    e = lambda *vals: np.array(vals, dtype=np.float64)  # noqa: E731
    e_n = e(0.6, 0.4)
    e_wnf = e(1.0, 1.0)
    e_x = e(0.0, 0.0)
    e_m = e(0.0, 0.0)
    e_u = e(0.0, 0.0)
    e_wmv = e(1.0, 1.0)
    minimize_kernel(
        queue, f_kind, f_ptr, ones_u8, zeros_u8, fz, fz, fz,
        s_alive, e_n, e_wnf, e_x, e_m, e_u, e_wmv, 1.0,
        np.zeros(1, dtype=np.uint8),
    )
    v_ptr = np.array([0, 1, 2], dtype=np.int64)
    v_slots = np.array([0, 1], dtype=np.int64)
    concur_kernel(
        np.array([0, 1], dtype=np.int64), v_ptr, v_slots,
        e(0.0, 0.0), e(1.0, 1.0),
        np.zeros(2, dtype=np.uint8), np.ones(2, dtype=np.uint8),
        s_alive, e_m, e_wmv, e_x, e_u, e_n, e(0.0, 0.0), e_wnf,
        1.0, 1e-5,
        np.zeros(2, dtype=np.uint8), np.zeros(1, dtype=np.float64),
        np.zeros(2, dtype=np.int64), np.zeros(1, dtype=np.int64),
    )
