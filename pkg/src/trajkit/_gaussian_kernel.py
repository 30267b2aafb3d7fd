"""Compiled inner loop of the Gaussian-trajectory engine.

Trajectories evolve independently (loop over the batch index), so results
are identical for any batch composition; the caller owns the random
streams and passes pre-drawn uniforms, one per trajectory per step.
"""

import numpy as np
from numba import njit

__all__ = ["evolve_block"]


@njit(cache=True)
def _rhs(a, ub, vb, delta, kerr, drive, hop, loss, da, du, dv):
    l = a.shape[0]
    dlr = 0.0
    for j in range(l):
        nj = a[j].real ** 2 + a[j].imag ** 2 + vb[j, j].real
        dlr -= loss[j] * nj
    for n in range(l):
        acc = (-0.5 * loss[n] + 1j * delta[n]) * a[n] - 1j * drive[n]
        for j in range(l):
            acc += 1j * hop[n, j] * a[j]
            acc -= loss[j] * (a[j] * vb[j, n] + np.conj(a[j]) * ub[j, n])
        an2 = a[n].real ** 2 + a[n].imag ** 2
        acc -= 1j * kerr[n] * (
            an2 * a[n] + 2.0 * a[n] * vb[n, n] + np.conj(a[n]) * ub[n, n]
        )
        da[n] = acc
    for n in range(l):
        an2 = a[n].real ** 2 + a[n].imag ** 2
        for m in range(l):
            am2 = a[m].real ** 2 + a[m].imag ** 2
            t = (-0.5 * (loss[n] + loss[m]) + 1j * (delta[n] + delta[m])) * ub[n, m]
            for k in range(l):
                t += 1j * (hop[n, k] * ub[k, m] + hop[m, k] * ub[n, k])
                t -= loss[k] * (vb[k, n] * ub[k, m] + vb[k, m] * ub[k, n])
            t += -1j * kerr[n] * (
                vb[n, m] * (a[n] * a[n] + ub[n, n])
                + 2.0 * ub[n, m] * (an2 + vb[n, n])
            )
            extra = a[m] * a[m] + ub[m, m]
            t += -1j * kerr[m] * (
                vb[m, n] * extra + 2.0 * ub[m, n] * (am2 + vb[m, m])
            )
            if n == m:
                t += -1j * kerr[m] * extra
            du[n, m] = t

            tv = (1j * (delta[m] - delta[n]) - 0.5 * (loss[n] + loss[m])) * vb[n, m]
            for k in range(l):
                tv += 1j * (hop[m, k] * vb[n, k] - hop[k, n] * vb[k, m])
                tv -= loss[k] * (vb[k, m] * vb[n, k] + np.conj(ub[k, n]) * ub[m, k])
            tv += 1j * kerr[n] * (
                2.0 * vb[n, m] * (an2 + vb[n, n])
                + ub[n, m] * (np.conj(a[n]) ** 2 + np.conj(ub[n, n]))
            )
            tv += -1j * kerr[m] * (
                2.0 * vb[n, m] * (am2 + vb[m, m])
                + np.conj(ub[n, m]) * (a[m] * a[m] + ub[m, m])
            )
            dv[n, m] = tv
    return dlr


@njit(cache=True)
def _jump(a, ub, vb, site, aa, au, av):
    l = a.shape[0]
    nj = a[site].real ** 2 + a[site].imag ** 2 + vb[site, site].real
    for n in range(l):
        aa[n] = a[site] * vb[site, n] + np.conj(a[site]) * ub[site, n]
    for n in range(l):
        for m in range(l):
            au[n, m] = vb[site, n] * ub[site, m] + vb[site, m] * ub[site, n]
            av[n, m] = vb[site, m] * vb[n, site] + np.conj(ub[site, n]) * ub[m, site]
    for n in range(l):
        for m in range(l):
            ub[n, m] += au[n, m] / nj - aa[n] * aa[m] / (nj * nj)
            vb[n, m] += av[n, m] / nj - np.conj(aa[n]) * aa[m] / (nj * nj)
    for n in range(l):
        a[n] += aa[n] / nj


@njit(cache=True)
def evolve_block(alpha, u, v, log_r, delta, kerr, drive, hop, loss, dt,
                 uniforms, max_prob, want_log, log_steps, log_sites):
    """Advance every trajectory in the block by uniforms.shape[1] steps.

    Returns (status, counts): status 0 on success, 1 when the per-step
    jump probability reached max_prob (counts then holds the partial
    totals).  With want_log != 0, per-trajectory jump (step, site) pairs
    are written to log_steps/log_sites up to their capacity.
    """
    batch, l = alpha.shape
    n_steps = uniforms.shape[1]
    counts = np.zeros(batch, np.int64)
    da1 = np.empty(l, np.complex128); du1 = np.empty((l, l), np.complex128)
    dv1 = np.empty((l, l), np.complex128)
    da2 = np.empty(l, np.complex128); du2 = np.empty((l, l), np.complex128)
    dv2 = np.empty((l, l), np.complex128)
    da3 = np.empty(l, np.complex128); du3 = np.empty((l, l), np.complex128)
    dv3 = np.empty((l, l), np.complex128)
    da4 = np.empty(l, np.complex128); du4 = np.empty((l, l), np.complex128)
    dv4 = np.empty((l, l), np.complex128)
    aw = np.empty(l, np.complex128); uw = np.empty((l, l), np.complex128)
    vw = np.empty((l, l), np.complex128)
    aa = np.empty(l, np.complex128); au = np.empty((l, l), np.complex128)
    av = np.empty((l, l), np.complex128)
    status = 0
    for b in range(batch):
        a = alpha[b]
        ub = u[b]
        vb = v[b]
        lr = log_r[b]
        for s in range(n_steps):
            ptot = 0.0
            for j in range(l):
                nj = a[j].real ** 2 + a[j].imag ** 2 + vb[j, j].real
                ptot += loss[j] * nj * dt
            if ptot >= max_prob:
                log_r[b] = lr
                return 1, counts
            uu = uniforms[b, s]
            if uu < ptot:
                acc = 0.0
                site = l - 1
                for j in range(l):
                    nj = a[j].real ** 2 + a[j].imag ** 2 + vb[j, j].real
                    acc += loss[j] * nj * dt
                    if uu < acc:
                        site = j
                        break
                _jump(a, ub, vb, site, aa, au, av)
                lr = 0.0
                if want_log != 0 and counts[b] < log_steps.shape[1]:
                    log_steps[b, counts[b]] = s
                    log_sites[b, counts[b]] = site
                counts[b] += 1
            else:
                dlr1 = _rhs(a, ub, vb, delta, kerr, drive, hop, loss, da1, du1, dv1)
                for n in range(l):
                    aw[n] = a[n] + 0.5 * dt * da1[n]
                    for m in range(l):
                        uw[n, m] = ub[n, m] + 0.5 * dt * du1[n, m]
                        vw[n, m] = vb[n, m] + 0.5 * dt * dv1[n, m]
                dlr2 = _rhs(aw, uw, vw, delta, kerr, drive, hop, loss, da2, du2, dv2)
                for n in range(l):
                    aw[n] = a[n] + 0.5 * dt * da2[n]
                    for m in range(l):
                        uw[n, m] = ub[n, m] + 0.5 * dt * du2[n, m]
                        vw[n, m] = vb[n, m] + 0.5 * dt * dv2[n, m]
                dlr3 = _rhs(aw, uw, vw, delta, kerr, drive, hop, loss, da3, du3, dv3)
                for n in range(l):
                    aw[n] = a[n] + dt * da3[n]
                    for m in range(l):
                        uw[n, m] = ub[n, m] + dt * du3[n, m]
                        vw[n, m] = vb[n, m] + dt * dv3[n, m]
                dlr4 = _rhs(aw, uw, vw, delta, kerr, drive, hop, loss, da4, du4, dv4)
                sixth = dt / 6.0
                for n in range(l):
                    a[n] += sixth * (da1[n] + 2.0 * da2[n] + 2.0 * da3[n] + da4[n])
                    for m in range(l):
                        ub[n, m] += sixth * (
                            du1[n, m] + 2.0 * du2[n, m] + 2.0 * du3[n, m]
                            + du4[n, m]
                        )
                        vb[n, m] += sixth * (
                            dv1[n, m] + 2.0 * dv2[n, m] + 2.0 * dv3[n, m]
                            + dv4[n, m]
                        )
                lr += sixth * (dlr1 + 2.0 * dlr2 + 2.0 * dlr3 + dlr4)
        log_r[b] = lr
    return status, counts
