"""Compiled kernels for method-of-lines time stepping."""

from __future__ import annotations

import math

import numpy as np
from numba import njit

STATUS_DONE = 0
STATUS_COLLAPSE = 1
STATUS_NONFINITE = 2

TRIGGER_NONE = 0
TRIGGER_AMPLITUDE = 1
TRIGGER_INTENSITY = 2

N_OBS = 9  # xi, peak_abs2, power, hamiltonian, momentum, center, width, core_fwhm, peak_eta


@njit(cache=True)
def rhs(q, dx, beta, gamma, cubic, damp, out):
    n = q.shape[0]
    inv2 = 1.0 / (2.0 * dx)
    invh2 = 1.0 / (dx * dx)
    for j in range(n):
        qm = q[j - 1] if j > 0 else 0j
        qp = q[j + 1] if j < n - 1 else 0j
        qj = q[j]
        d1 = (qp - qm) * inv2
        # (qp + qm) first keeps mirrored data bitwise mirrored
        d2 = ((qp + qm) - 2.0 * qj) * invh2
        a2 = qj.real * qj.real + qj.imag * qj.imag
        qc = qj.conjugate()
        t = d2 + cubic * a2 * qj
        t -= 0.5 * beta * (a2 * d2 + qc * d1 * d1)
        t += 0.5 * gamma * (qc * d1 * d1 - 2.0 * qj * (d1.real * d1.real + d1.imag * d1.imag)
                            - qj * qj * d2.conjugate())
        out[j] = 1j * t - damp[j] * qj


@njit(cache=True)
def core_fwhm(a, i, dx):
    """Intensity FWHM of the structure around index i of the intensity array a."""
    n = a.shape[0]
    half = 0.5 * a[i]
    j = i
    while j < n - 1 and a[j] > half:
        j += 1
    if a[j] > half:
        right = j * dx
    else:
        right = (j - 1 + (a[j - 1] - half) / (a[j - 1] - a[j])) * dx
    j = i
    while j > 0 and a[j] > half:
        j -= 1
    if a[j] > half:
        left = j * dx
    else:
        left = (j + 1 - (a[j + 1] - half) / (a[j + 1] - a[j])) * dx
    return right - left


@njit(cache=True)
def observe(q, eta, dx, beta, gamma, cubic, row):
    """Fill row[1:] with peak, power, H, M, center, rms width, core FWHM, peak eta."""
    n = q.shape[0]
    a = np.empty(n)
    peak = 0.0
    ip = 0
    for j in range(n):
        a[j] = q[j].real * q[j].real + q[j].imag * q[j].imag
        if a[j] > peak:
            peak = a[j]
            ip = j
    s0 = 0.0
    s1 = 0.0
    s2 = 0.0
    h = 0.0
    m = 0.0
    for j in range(n):
        if j == 0:
            g = (-3.0 * q[0] + 4.0 * q[1] - q[2]) / (2.0 * dx)
        elif j == n - 1:
            g = (3.0 * q[n - 1] - 4.0 * q[n - 2] + q[n - 3]) / (2.0 * dx)
        else:
            g = (q[j + 1] - q[j - 1]) / (2.0 * dx)
        w = 0.5 if (j == 0 or j == n - 1) else 1.0
        g2 = g.real * g.real + g.imag * g.imag
        qc = q[j].conjugate()
        cross = (qc * qc * g * g).real
        h += w * (g2 - 0.5 * cubic * a[j] * a[j] - 0.5 * beta * a[j] * g2 - 0.5 * gamma * cross)
        m += w * (1j * g.conjugate() * q[j]).real
        s0 += w * a[j]
        s1 += w * a[j] * eta[j]
        s2 += w * a[j] * eta[j] * eta[j]
    row[1] = peak
    row[2] = s0 * dx / math.sqrt(math.pi)
    row[3] = h * dx
    row[4] = m * dx
    if s0 > 0.0:
        c = s1 / s0
        row[5] = c
        var = s2 / s0 - c * c
        row[6] = math.sqrt(var) if var > 0.0 else 0.0
    else:
        row[5] = 0.0
        row[6] = 0.0
    row[7] = core_fwhm(a, ip, dx) if peak > 0.0 else 0.0
    row[8] = eta[ip]


@njit(cache=True)
def integrate(q, eta, dx, beta, gamma, cubic, damp, dt, nsteps, obs_stride, snap_stride,
              obs, snaps, snap_xi, peak0, amp_factor, width_cells, crit_level):
    """Classic RK4 with in-loop collapse and finiteness checks.

    Returns (steps, status, trigger, n_obs, n_snap).  obs row 0 and snapshot
    0 hold the initial state; the final state is always recorded.
    """
    n = q.shape[0]
    k1 = np.empty(n, np.complex128)
    k2 = np.empty(n, np.complex128)
    k3 = np.empty(n, np.complex128)
    k4 = np.empty(n, np.complex128)
    tmp = np.empty(n, np.complex128)
    obs[0, 0] = 0.0
    observe(q, eta, dx, beta, gamma, cubic, obs[0])
    snaps[0, :] = q
    snap_xi[0] = 0.0
    no = 1
    ns = 1
    status = STATUS_DONE
    trigger = TRIGGER_NONE
    it = 0
    while it < nsteps:
        rhs(q, dx, beta, gamma, cubic, damp, k1)
        for j in range(n):
            tmp[j] = q[j] + 0.5 * dt * k1[j]
        rhs(tmp, dx, beta, gamma, cubic, damp, k2)
        for j in range(n):
            tmp[j] = q[j] + 0.5 * dt * k2[j]
        rhs(tmp, dx, beta, gamma, cubic, damp, k3)
        for j in range(n):
            tmp[j] = q[j] + dt * k3[j]
        rhs(tmp, dx, beta, gamma, cubic, damp, k4)
        peak = 0.0
        ip = 0
        finite = True
        for j in range(n):
            q[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
            a = q[j].real * q[j].real + q[j].imag * q[j].imag
            if not (a < 1e300):
                finite = False
            if a > peak:
                peak = a
                ip = j
        it += 1
        if not finite:
            status = STATUS_NONFINITE
            break
        if peak >= crit_level:
            status = STATUS_COLLAPSE
            trigger = TRIGGER_INTENSITY
        elif peak > amp_factor * peak0:
            a_arr = np.empty(n)
            for j in range(n):
                a_arr[j] = q[j].real * q[j].real + q[j].imag * q[j].imag
            if core_fwhm(a_arr, ip, dx) < width_cells * dx:
                status = STATUS_COLLAPSE
                trigger = TRIGGER_AMPLITUDE
        last = status != STATUS_DONE or it == nsteps
        if it % obs_stride == 0 or last:
            obs[no, 0] = it * dt
            observe(q, eta, dx, beta, gamma, cubic, obs[no])
            no += 1
        if it % snap_stride == 0 or last:
            snaps[ns, :] = q
            snap_xi[ns] = it * dt
            ns += 1
        if status != STATUS_DONE:
            break
    return it, status, trigger, no, ns
