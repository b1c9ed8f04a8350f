"""Hot numerical loops: RK4 rollout with cost quadrature, ADP data collection.

Both kernels are written in a numba-compilable numpy subset and compiled with
@njit when numba is available.  Setting HLQR_PURE_NUMPY=1 (or missing numba)
selects the identical source uncompiled as a pure-numpy fallback, so the two
backends share one arithmetic definition; parity is exact up to summation
order inside the dot products.

Exogenous signals (excitation, disturbance) are tabulated on the half-step
grid (2*n_steps + 1 samples) so RK4 stage evaluations see exact signal values.

Status codes: 0 = ran to completion, 1 = state guard exceeded (blowup),
2 = stopped early because the running cost converged.
"""

import os

import numpy as np

__all__ = [
    "USING_NUMBA",
    "OK",
    "BLOWUP",
    "EARLY_STOP",
    "rollout_kernel",
    "collect_kernel",
    "kernel_backends",
]

_FORCE_NUMPY = os.environ.get("HLQR_PURE_NUMPY", "").strip() not in ("", "0")

if _FORCE_NUMPY:
    _HAVE_NUMBA = False
else:
    try:
        from numba import njit

        _HAVE_NUMBA = True
    except ImportError:
        _HAVE_NUMBA = False

USING_NUMBA = _HAVE_NUMBA

OK = 0
BLOWUP = 1
EARLY_STOP = 2


def _rollout_impl(a, b, k, exo_cmd, exo_dist, x0, dt, n_steps, q, r,
                  guard, stop_rtol, check_every):
    """Closed-loop RK4 rollout of xdot = A x + B(u + d), u = -K x + e.

    exo_cmd/exo_dist are (2*n_steps+1, m) half-grid tables for e and d.
    Returns (states, inputs, cost, ju, status, last_step); cost and ju carry
    the RK4-quadrature running integrals of x'Qx + u'Ru and u'u.
    """
    n = a.shape[0]
    m = b.shape[1]
    xs = np.zeros((n_steps + 1, n))
    us = np.zeros((n_steps + 1, m))
    cost = np.zeros(n_steps + 1)
    ju = np.zeros(n_steps + 1)
    x = x0.copy()
    xs[0] = x
    us[0] = -np.dot(k, x) + exo_cmd[0]
    status = OK
    last = n_steps

    for step in range(n_steps):
        u1 = -np.dot(k, x) + exo_cmd[2 * step]
        f1 = np.dot(a, x) + np.dot(b, u1 + exo_dist[2 * step])
        c1 = np.dot(x, np.dot(q, x)) + np.dot(u1, np.dot(r, u1))
        j1 = np.dot(u1, u1)

        x2 = x + 0.5 * dt * f1
        u2 = -np.dot(k, x2) + exo_cmd[2 * step + 1]
        f2 = np.dot(a, x2) + np.dot(b, u2 + exo_dist[2 * step + 1])
        c2 = np.dot(x2, np.dot(q, x2)) + np.dot(u2, np.dot(r, u2))
        j2 = np.dot(u2, u2)

        x3 = x + 0.5 * dt * f2
        u3 = -np.dot(k, x3) + exo_cmd[2 * step + 1]
        f3 = np.dot(a, x3) + np.dot(b, u3 + exo_dist[2 * step + 1])
        c3 = np.dot(x3, np.dot(q, x3)) + np.dot(u3, np.dot(r, u3))
        j3 = np.dot(u3, u3)

        x4 = x + dt * f3
        u4 = -np.dot(k, x4) + exo_cmd[2 * step + 2]
        f4 = np.dot(a, x4) + np.dot(b, u4 + exo_dist[2 * step + 2])
        c4 = np.dot(x4, np.dot(q, x4)) + np.dot(u4, np.dot(r, u4))
        j4 = np.dot(u4, u4)

        x = x + (dt / 6.0) * (f1 + 2.0 * f2 + 2.0 * f3 + f4)
        xs[step + 1] = x
        us[step + 1] = -np.dot(k, x) + exo_cmd[2 * step + 2]
        cost[step + 1] = cost[step] + (dt / 6.0) * (c1 + 2.0 * c2 + 2.0 * c3 + c4)
        ju[step + 1] = ju[step] + (dt / 6.0) * (j1 + 2.0 * j2 + 2.0 * j3 + j4)

        bad = False
        for i in range(n):
            if not np.isfinite(x[i]) or abs(x[i]) > guard:
                bad = True
        if bad:
            status = BLOWUP
            last = step + 1
            break
        if stop_rtol > 0.0 and (step + 1) % check_every == 0 and step + 1 >= 2 * check_every:
            tail = cost[step + 1] - cost[step + 1 - check_every]
            if tail < stop_rtol * max(cost[step + 1], 1e-300):
                status = EARLY_STOP
                last = step + 1
                break

    return xs, us, cost, ju, status, last


def _collect_impl(a, b, k0, exo_cmd, exo_dist, x0, dt, steps_per_window,
                  n_windows, guard):
    """Learning-data rollout under u = -K0 x + e with applied input v = u + d.

    Accumulates per-window RK4 quadratures of x x' and x v', records window
    boundary states and the raw per-step (x, v) samples.  Returns
    (boundaries, i_xx, i_xv, raw_x, raw_v, status, windows_done).
    """
    n = a.shape[0]
    m = b.shape[1]
    total = steps_per_window * n_windows
    xb = np.zeros((n_windows + 1, n))
    ixx = np.zeros((n_windows, n, n))
    ixv = np.zeros((n_windows, n, m))
    raw_x = np.zeros((total + 1, n))
    raw_v = np.zeros((total + 1, m))

    x = x0.copy()
    xb[0] = x
    raw_x[0] = x
    raw_v[0] = -np.dot(k0, x) + exo_cmd[0] + exo_dist[0]
    status = OK
    done = 0
    h6 = dt / 6.0

    for w in range(n_windows):
        acc_xx = np.zeros((n, n))
        acc_xv = np.zeros((n, m))
        for inner in range(steps_per_window):
            step = w * steps_per_window + inner

            v1 = -np.dot(k0, x) + exo_cmd[2 * step] + exo_dist[2 * step]
            f1 = np.dot(a, x) + np.dot(b, v1)

            x2 = x + 0.5 * dt * f1
            v2 = -np.dot(k0, x2) + exo_cmd[2 * step + 1] + exo_dist[2 * step + 1]
            f2 = np.dot(a, x2) + np.dot(b, v2)

            x3 = x + 0.5 * dt * f2
            v3 = -np.dot(k0, x3) + exo_cmd[2 * step + 1] + exo_dist[2 * step + 1]
            f3 = np.dot(a, x3) + np.dot(b, v3)

            x4 = x + dt * f3
            v4 = -np.dot(k0, x4) + exo_cmd[2 * step + 2] + exo_dist[2 * step + 2]
            f4 = np.dot(a, x4) + np.dot(b, v4)

            acc_xx = acc_xx + h6 * (
                x.reshape(n, 1) * x.reshape(1, n)
                + 2.0 * (x2.reshape(n, 1) * x2.reshape(1, n))
                + 2.0 * (x3.reshape(n, 1) * x3.reshape(1, n))
                + x4.reshape(n, 1) * x4.reshape(1, n)
            )
            acc_xv = acc_xv + h6 * (
                x.reshape(n, 1) * v1.reshape(1, m)
                + 2.0 * (x2.reshape(n, 1) * v2.reshape(1, m))
                + 2.0 * (x3.reshape(n, 1) * v3.reshape(1, m))
                + x4.reshape(n, 1) * v4.reshape(1, m)
            )

            x = x + h6 * (f1 + 2.0 * f2 + 2.0 * f3 + f4)
            raw_x[step + 1] = x
            raw_v[step + 1] = (
                -np.dot(k0, x) + exo_cmd[2 * step + 2] + exo_dist[2 * step + 2]
            )
            bad = False
            for i in range(n):
                if not np.isfinite(x[i]) or abs(x[i]) > guard:
                    bad = True
            if bad:
                status = BLOWUP
                break
        if status == BLOWUP:
            break
        xb[w + 1] = x
        ixx[w] = acc_xx
        ixv[w] = acc_xv
        done = w + 1

    return xb, ixx, ixv, raw_x, raw_v, status, done


if USING_NUMBA:
    rollout_kernel = njit(cache=True, nogil=True)(_rollout_impl)
    collect_kernel = njit(cache=True, nogil=True)(_collect_impl)
else:
    rollout_kernel = _rollout_impl
    collect_kernel = _collect_impl


def kernel_backends():
    """(active, pure-python) callables per kernel, for benchmarks and tests.

    When numba is active the second member is the uncompiled source of the
    same function; without numba both members are identical.
    """
    return {
        "rollout": (rollout_kernel, _rollout_impl),
        "collect": (collect_kernel, _collect_impl),
    }
