"""Compiled inner loops. Each kernel consumes a chunk of step offsets and
returns how many it used, so callers can refill and continue."""
import numpy as np
from numba import njit

PLANAR = 0
TORAL_MASK = 1


@njit(cache=True)
def _wrap(u, d, K):
    # u in [0, K); d any integer
    v = (u + d) % K
    if v < 0:
        v += K
    return v


@njit(cache=True)
def _planar_member(x, y, cx, cy, lo, hi):
    ddx = x - cx
    ddy = y - cy
    d2 = ddx * ddx + ddy * ddy
    if d2 < lo:
        return False
    if hi >= 0 and d2 > hi:
        return False
    return True


@njit(cache=True)
def run_planar(x, y, dx, dy, start, budget, kind, cx, cy, lo, hi, mask, K):
    """Advance a planar walk until it enters the target or the budget is spent.

    Returns (steps_used, x, y, hit)."""
    h = K // 2
    m = dx.shape[0]
    used = 0
    i = start
    while i < m and used < budget:
        x += dx[i]
        y += dy[i]
        i += 1
        used += 1
        if kind == PLANAR:
            if _planar_member(x, y, cx, cy, lo, hi):
                return used, x, y, True
        else:
            u = _wrap(x + h, 0, K)
            v = _wrap(y + h, 0, K)
            if mask[u, v]:
                return used, x, y, True
    return used, x, y, False


@njit(cache=True)
def run_toral(u, v, dx, dy, start, budget, mask, K):
    """Toral walk in index coordinates [0, K)^2 until mask[u, v] is hit."""
    m = dx.shape[0]
    used = 0
    i = start
    while i < m and used < budget:
        u = _wrap(u, dx[i], K)
        v = _wrap(v, dy[i], K)
        i += 1
        used += 1
        if mask[u, v]:
            return used, u, v, True
    return used, u, v, False


@njit(cache=True)
def coupled(x, y, u, v, dx, dy, start, budget, t0, K,
            band_lo, band_hi, disc_hi, band_mask, disc_mask, times):
    """Planar walk (x, y) and its toral image (u, v) driven by the same steps.

    times[0..5] hold (-1 = not yet):
      0 planar band, 1 pulled-back band, 2 pulled-back toral complement,
      3 planar complement, 4 toral band (own walk), 5 toral complement (own walk)
    """
    h = K // 2
    m = dx.shape[0]
    used = 0
    i = start
    t = t0
    while i < m and used < budget:
        x += dx[i]
        y += dy[i]
        u = _wrap(u, dx[i], K)
        v = _wrap(v, dy[i], K)
        i += 1
        used += 1
        t += 1
        d2 = x * x + y * y
        if times[0] < 0 and d2 >= band_lo and d2 <= band_hi:
            times[0] = t
        if times[3] < 0 and d2 > disc_hi:
            times[3] = t
        pu = _wrap(x + h, 0, K)
        pv = _wrap(y + h, 0, K)
        if times[1] < 0 and band_mask[pu, pv]:
            times[1] = t
        if times[2] < 0 and not disc_mask[pu, pv]:
            times[2] = t
        if times[4] < 0 and band_mask[u, v]:
            times[4] = t
        if times[5] < 0 and not disc_mask[u, v]:
            times[5] = t
        if times[0] >= 0 and times[1] >= 0 and times[2] >= 0 and times[3] >= 0 \
                and times[4] >= 0 and times[5] >= 0:
            return used, x, y, u, v, True
    return used, x, y, u, v, False


@njit(cache=True)
def excursions(u, v, dx, dy, start, K, cu, cv, band_mask, far_mask,
               phase, t, seg_start, sigma_mark, visits_before, visits_after,
               target, out_tau, out_sigma, out_ybefore, out_yafter, done):
    """Excursion state machine on the torus.

    phase 0: seeking the band for the first time (tau^(0));
    phase 1: left the band, seeking the far set (first leg sigma);
    phase 2: seeking the band again (rest of the excursion).
    Returns the updated scalars; completed excursions are appended to the
    out arrays at position ``done``.
    """
    m = dx.shape[0]
    i = start
    while i < m and done < target:
        u = _wrap(u, dx[i], K)
        v = _wrap(v, dy[i], K)
        i += 1
        t += 1
        at_center = u == cu and v == cv
        if phase == 0:
            if band_mask[u, v]:
                # tau^(0) recorded by caller through seg_start
                seg_start = t
                phase = 1
                visits_before = 0
                visits_after = 0
        elif phase == 1:
            if at_center:
                visits_before += 1
            if far_mask[u, v]:
                sigma_mark = t
                phase = 2
        else:
            if at_center:
                visits_after += 1
            if band_mask[u, v]:
                out_tau[done] = t - seg_start
                out_sigma[done] = sigma_mark - seg_start
                out_ybefore[done] = visits_before
                out_yafter[done] = visits_after
                done += 1
                seg_start = t
                phase = 1
                visits_before = 0
                visits_after = 0
    return i - start, u, v, phase, t, seg_start, sigma_mark, visits_before, visits_after, done


@njit(cache=True)
def cover(u, v, dx, dy, start, budget, t, K, first, remaining):
    """Record first-visit times until every site is visited or budget spent."""
    m = dx.shape[0]
    used = 0
    i = start
    while i < m and used < budget and remaining > 0:
        u = _wrap(u, dx[i], K)
        v = _wrap(v, dy[i], K)
        i += 1
        used += 1
        t += 1
        if first[u, v] < 0:
            first[u, v] = t
            remaining -= 1
    return used, u, v, t, remaining


@njit(cache=True)
def census(u, v, dx, dy, start, budget, t, K, cu, cv,
           in_hi, out_lo, band_out_hi, enter_hi, band_in_lo,
           armed, counts, top_target, state):
    """Level-crossing census around (cu, cv) on the torus.

    Level l (index into arrays, 1..L) counts upcrossings from
    D(x, r'_{l-1}) (squared distance <= enter_hi[l-1]) to D(x, r_l)^c
    (squared distance >= out_lo[l]).  counts[0] counts visits to the centre.
    Band checks: leaving D(x, r_k) must land with d2 <= band_out_hi[k];
    entering the entrance disc of level k (d2 <= enter_hi[k]) from outside
    must land with d2 >= band_in_lo[k].
    state = [faithful, finished, finish_time]
    """
    m = dx.shape[0]
    L = out_lo.shape[0] - 1
    used = 0
    i = start
    h = K // 2
    du = (u - cu + h) % K - h
    dv = (v - cv + h) % K - h
    d2 = du * du + dv * dv
    while i < m and used < budget:
        u = _wrap(u, dx[i], K)
        v = _wrap(v, dy[i], K)
        i += 1
        used += 1
        t += 1
        prev = d2
        du = (u - cu + h) % K - h
        dv = (v - cv + h) % K - h
        d2 = du * du + dv * dv
        if d2 == 0:
            counts[0] += 1
        for k in range(L + 1):
            # escape from D(x, r_k): prev inside (d2 < out_lo), now outside
            if prev < out_lo[k] and d2 >= out_lo[k] and d2 > band_out_hi[k]:
                state[0] = 0
            # entrance into the entrance disc of level k
            if prev > enter_hi[k] and d2 <= enter_hi[k] and d2 < band_in_lo[k]:
                state[0] = 0
        if state[0] == 0:
            state[2] = t
            return used, u, v, t
        for l in range(1, L + 1):
            if d2 <= enter_hi[l - 1]:
                armed[l] = 1
            elif armed[l] == 1 and d2 >= out_lo[l]:
                armed[l] = 0
                counts[l] += 1
                if l == L and counts[L] >= top_target:
                    state[1] = 1
                    state[2] = t
                    return used, u, v, t
    return used, u, v, t


def empty_mask(K):
    return np.zeros((max(K, 1), max(K, 1)), dtype=np.bool_)
