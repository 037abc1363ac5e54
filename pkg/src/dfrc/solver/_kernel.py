"""Compiled ADMM loop for structured ``T = tau I + U diag(g) U^H``.

Mirrors :func:`dfrc.solver.admm.admm_solve` step for step; the dense numpy
path is the reference it is tested against.
"""

from __future__ import annotations

import numba as nb
import numpy as np


@nb.njit(cache=True)
def _lowrank(v, shift, U, g):
    # shift * v + U diag(g) U^H v
    n, r = U.shape
    out = shift * v
    for k in range(r):
        s = 0j
        for i in range(n):
            s += np.conj(U[i, k]) * v[i]
        s *= g[k]
        for i in range(n):
            out[i] += U[i, k] * s
    return out


@nb.njit(cache=True)
def _hx(x, H, L, nt):
    M = H.shape[0]
    out = np.zeros((L, M), np.complex128)
    for l in range(L):
        for m in range(M):
            s = 0j
            for j in range(nt):
                s += H[m, j] * x[l * nt + j]
            out[l, m] = s
    return out


@nb.njit(cache=True)
def _hadj(V, H, L, nt):
    M = H.shape[0]
    out = np.zeros(L * nt, np.complex128)
    for l in range(L):
        for m in range(M):
            v = V[l, m]
            for j in range(nt):
                out[l * nt + j] += np.conj(H[m, j]) * v
    return out


@nb.njit(cache=True)
def _ball(P, budgets):
    L, M = P.shape
    out = P.copy()
    for m in range(M):
        nm2 = 0.0
        for l in range(L):
            nm2 += P[l, m].real ** 2 + P[l, m].imag ** 2
        if nm2 > budgets[m]:
            f = np.sqrt(budgets[m]) / np.sqrt(nm2)
            for l in range(L):
                out[l, m] = f * P[l, m]
    return out


@nb.njit(cache=True)
def _papr_block(v, prev, rho, energy):
    L = v.shape[0]
    mag = np.abs(v)
    phase = np.empty(L)
    for l in range(L):
        phase[l] = np.angle(v[l]) if mag[l] > 0 else np.angle(prev[l])
    peak = rho * energy / L
    cap = np.sqrt(peak)
    clipped = np.zeros(L, np.bool_)
    a = np.zeros(L)
    for _ in range(L + 1):
        nfree = 0
        nclip = 0
        s = 0.0
        for l in range(L):
            if clipped[l]:
                nclip += 1
            else:
                nfree += 1
                s += mag[l] ** 2
        if nfree == 0:
            break
        rem = max(energy - nclip * peak, 0.0)
        for l in range(L):
            if not clipped[l]:
                a[l] = mag[l] * np.sqrt(rem / s) if s > 0 else np.sqrt(rem / nfree)
        any_over = False
        for l in range(L):
            if not clipped[l] and a[l] > cap:
                clipped[l] = True
                any_over = True
        if not any_over:
            break
        for l in range(L):
            if clipped[l]:
                a[l] = cap
    return a * np.exp(1j * phase)


@nb.njit(cache=True)
def _project(c, x, amp, rho, energy, L, nt):
    n = c.shape[0]
    out = np.empty(n, np.complex128)
    if rho <= 0.0:
        for i in range(n):
            a = np.abs(c[i])
            out[i] = amp * (c[i] / a) if a > 0 else x[i]
        return out
    per_ant = energy / nt
    blk = np.empty(L, np.complex128)
    prv = np.empty(L, np.complex128)
    for j in range(nt):
        for l in range(L):
            blk[l] = c[l * nt + j]
            prv[l] = x[l * nt + j]
        res = _papr_block(blk, prv, rho, per_ant)
        for l in range(L):
            out[l * nt + j] = res[l]
    return out


@nb.njit(cache=True)
def _bx(x, tau, U, g, H, L, nt):
    return _lowrank(x, tau, U, g) + _hadj(_hx(x, H, L, nt), H, L, nt)


@nb.njit(cache=True)
def _obj(x, Bx, b):
    return np.real(np.vdot(x, Bx)) - 2.0 * np.real(np.vdot(b, x))


@nb.njit(cache=True)
def admm_kernel(
    x0, tau, U, g, root_tau, root_g, H, S, budgets,
    amp, rho, energy, lam_max, margin, mu, eps_primal, eps_dual,
    max_admm, max_mm, tol_mm, L, nt,
):
    """Returns (x, iterations, primal max trace, dual max trace, final primal norms, final dual norms)."""
    n = x0.shape[0]
    M = H.shape[0]
    kappa = mu / (mu - 2.0)
    delta = lam_max * margin
    x = x0.copy()
    xh = _lowrank(x, root_tau, U, root_g)
    xt = _ball(_hx(x, H, L, nt) - S, budgets)
    nu = np.zeros(n, np.complex128)
    ups = np.zeros((L, M), np.complex128)
    ptrace = np.zeros(max_admm)
    dtrace = np.zeros(max_admm)
    primal = np.zeros(M + 1)
    dual = np.zeros(M + 2)
    it = 0
    for t in range(max_admm):
        it = t + 1
        b = _lowrank(xh + nu, root_tau, U, root_g) + _hadj(xt + S + ups, H, L, nt)
        x_prev = x
        Bx = _bx(x, tau, U, g, H, L, nt)
        obj = _obj(x, Bx, b)
        for _ in range(max_mm):
            x = _project(delta * x + (lam_max * x - Bx) + b, x, amp, rho, energy, L, nt)
            Bx = _bx(x, tau, U, g, H, L, nt)
            new = _obj(x, Bx, b)
            done = abs(obj - new) <= tol_mm * abs(obj)
            obj = new
            if done:
                break
        Tx = _lowrank(x, root_tau, U, root_g)
        Hx = _hx(x, H, L, nt)
        xh_old = xh
        xh = kappa * (Tx - nu)
        xt_old = xt
        xt = _ball(Hx - ups - S, budgets)
        nu = nu + xh - Tx
        ups = ups + xt - Hx + S
        for m in range(M):
            primal[m] = np.linalg.norm(Hx[:, m] - S[:, m] - xt[:, m])
            dual[m] = np.linalg.norm(xt[:, m] - xt_old[:, m])
        primal[M] = np.linalg.norm(Tx - xh)
        dual[M] = np.linalg.norm(xh - xh_old)
        dual[M + 1] = np.linalg.norm(x - x_prev)
        ptrace[t] = primal.max()
        dtrace[t] = dual.max()
        if ptrace[t] <= eps_primal and dtrace[t] <= eps_dual:
            break
    return x, it, ptrace[:it], dtrace[:it], primal, dual
