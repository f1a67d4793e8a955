"""Hot inner loop of the sliding-window SIC receiver.

The sweep is compiled with numba when available; set IRASIM_NO_NUMBA=1 to
select the identical code as plain Python over numpy arrays (slow path, same
results). Both variants are always exported so the benchmark under
benchmarks/ can compare them directly:

* ``sic_sweep``          active implementation (compiled unless disabled)
* ``sic_sweep_python``   plain-Python build of the same code
* ``sic_sweep_compiled`` numba build, or None when numba is unavailable
"""

from __future__ import annotations

import math
import os

import numpy as np

ENV_FLAG = "IRASIM_NO_NUMBA"


def _numba_requested() -> bool:
    return os.environ.get(ENV_FLAG, "").strip().lower() not in {"1", "true", "yes", "on"}


def _plain(func):
    return func


def _build_sweep(jit):
    """Build the sweep with ``jit`` applied to every stage."""

    @jit
    def bisect_right(a, x):
        lo = 0
        hi = a.shape[0]
        while lo < hi:
            mid = (lo + hi) // 2
            if a[mid] <= x:
                lo = mid + 1
            else:
                hi = mid
        return lo

    @jit
    def bisect_left(a, x):
        lo = 0
        hi = a.shape[0]
        while lo < hi:
            mid = (lo + hi) // 2
            if a[mid] < x:
                lo = mid + 1
            else:
                hi = mid
        return lo

    @jit
    def avg_mi(rep_start, active, i, snr, t_p, mi_table, ev_a, ev_b):
        # Average MI of replica i against every currently active replica.
        # Same-owner replicas never land in the search range because of the
        # one-packet placement separation.
        s = rep_start[i]
        lo = bisect_right(rep_start, s - t_p)
        hi = bisect_left(rep_start, s + t_p)
        k = 0
        cap = ev_a.shape[0]
        for j in range(lo, hi):
            if j == i or not active[j]:
                continue
            a = rep_start[j]
            if a < s:
                a = s
            b = rep_start[j] + t_p
            if b > s + t_p:
                b = s + t_p
            if b <= a:
                continue
            if k >= cap:
                return -1.0  # caller retries with bigger event buffers
            ev_a[k] = a
            ev_b[k] = b
            k += 1
        if k == 0:
            return mi_table[0]
        for p in range(1, k):  # insertion sorts, k stays small
            va = ev_a[p]
            q = p - 1
            while q >= 0 and ev_a[q] > va:
                ev_a[q + 1] = ev_a[q]
                q -= 1
            ev_a[q + 1] = va
        for p in range(1, k):
            vb = ev_b[p]
            q = p - 1
            while q >= 0 and ev_b[q] > vb:
                ev_b[q + 1] = ev_b[q]
                q -= 1
            ev_b[q + 1] = vb
        acc = 0.0
        prev = s
        ia = 0
        ib = 0
        run = 0
        n_mi = mi_table.shape[0]
        while ib < k:
            if ia < k and ev_a[ia] <= ev_b[ib]:
                x = ev_a[ia]
                ia += 1
                delta = 1
            else:
                x = ev_b[ib]
                ib += 1
                delta = -1
            if x > prev:
                if run < n_mi:
                    mi_k = mi_table[run]
                else:
                    mi_k = math.log2(1.0 + snr / (1.0 + run * snr))
                acc += (x - prev) * mi_k
                prev = x
            run += delta
        if prev < s + t_p:
            acc += (s + t_p - prev) * mi_table[0]
        return acc / t_p

    @jit
    def sweep(
        rep_start,
        rep_owner,
        user_ptr,
        rep_of_user,
        vf_end,
        w0,
        n_steps,
        step_len,
        win_len,
        snr,
        rate,
        t_p,
    ):
        # Slide the window over one trace and classify every user. Returns
        # (decoded, decided_w, n_classified); decided_w[u] is the window start
        # at the moment user u was decoded or declared lost.
        n_rep = rep_start.shape[0]
        n_user = user_ptr.shape[0] - 1
        active = np.ones(n_rep, np.bool_)
        queued = np.zeros(n_rep, np.bool_)
        decoded = np.zeros(n_user, np.bool_)
        decided_w = np.full(n_user, np.nan)
        stack = np.empty(n_rep, np.int64)
        top = 0
        n_done = 0
        admit = 0
        trail = 0

        mi_table = np.empty(64)
        for k in range(64):
            mi_table[k] = math.log2(1.0 + snr / (1.0 + k * snr))
        ev_a = np.empty(256)
        ev_b = np.empty(256)

        for step in range(n_steps):
            w = w0 + step * step_len
            w_end = w + win_len

            # users whose whole virtual frame slid past the trailing edge
            while trail < n_user and vf_end[trail] < w:
                u = trail
                if not decoded[u]:
                    decided_w[u] = w
                    n_done += 1
                    for jj in range(user_ptr[u], user_ptr[u + 1]):
                        active[rep_of_user[jj]] = False
                trail += 1

            # replicas newly contained in the window become candidates
            while admit < n_rep and rep_start[admit] + t_p <= w_end:
                i = admit
                if active[i] and not decoded[rep_owner[i]] and not queued[i]:
                    queued[i] = True
                    stack[top] = i
                    top += 1
                admit += 1

            # cancel until no candidate decodes; cancelling a user re-queues
            # the active replicas its copies overlapped
            while top > 0:
                top -= 1
                i = stack[top]
                queued[i] = False
                if not active[i]:
                    continue
                u = rep_owner[i]
                if decoded[u]:
                    continue
                s = rep_start[i]
                if s < w or s + t_p > w_end:
                    continue
                mi = avg_mi(rep_start, active, i, snr, t_p, mi_table, ev_a, ev_b)
                while mi < 0.0:
                    ev_a = np.empty(ev_a.shape[0] * 2)
                    ev_b = np.empty(ev_b.shape[0] * 2)
                    mi = avg_mi(rep_start, active, i, snr, t_p, mi_table, ev_a, ev_b)
                if mi >= rate:
                    decoded[u] = True
                    decided_w[u] = w
                    n_done += 1
                    for jj in range(user_ptr[u], user_ptr[u + 1]):
                        r = rep_of_user[jj]
                        active[r] = False
                        sr = rep_start[r]
                        lo = bisect_right(rep_start, sr - t_p)
                        hi = bisect_left(rep_start, sr + t_p)
                        for nb in range(lo, hi):
                            if nb == r or nb >= admit or queued[nb] or not active[nb]:
                                continue
                            if decoded[rep_owner[nb]] or rep_start[nb] < w:
                                continue
                            queued[nb] = True
                            stack[top] = nb
                            top += 1

            if n_done >= n_user:
                break

        return decoded, decided_w, n_done

    return sweep


sic_sweep_python = _build_sweep(_plain)

sic_sweep_compiled = None
try:
    from numba import njit as _njit
except ImportError:
    _njit = None
if _njit is not None:
    sic_sweep_compiled = _build_sweep(_njit(cache=True))

NUMBA_ENABLED = sic_sweep_compiled is not None and _numba_requested()
sic_sweep = sic_sweep_compiled if NUMBA_ENABLED else sic_sweep_python
