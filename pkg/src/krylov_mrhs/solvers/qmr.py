"""QMR for many right-hand sides: loop-interchanged, global and economic
global variants.

The single right-hand side recurrence is the coupled two-term QMR without
look-ahead, with unit-norm Lanczos vectors on both sides and unit weights.
``tau`` is the quasi-residual norm; ``sqrt(k+1) * tau`` bounds the true
residual norm.  Convergence declared from that bound is confirmed with an
explicitly computed residual (one extra block matvec).  After three failed
confirmations the recursively updated residual is used instead.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..instrumentation import count
from ..linalg import block_axpy, col_inner, col_norms, frob_norm, sum_inner, trace_inner
from .common import BREAKDOWN, CONVERGED, MAXIT, SolveContext, initial_shadow

MAX_RESUMPTIONS = 3


@dataclass
class QMRWorkspace:
    k: int
    x: np.ndarray
    r: np.ndarray | None = None
    v: np.ndarray | None = None
    w: np.ndarray | None = None
    p: np.ndarray | None = None
    q: np.ndarray | None = None
    tau: object = None
    theta: object = None
    eta: object = None
    estimate: float | None = None


def _qmr(method, mode, op, b, cfg, callback):
    ctx = SolveContext(method, op, b, cfg)
    ctr = ctx.ctr
    eps = ctx.cfg.eps_brk
    n, s = ctx.b.shape
    li, economic = mode == "li", mode == "egl"

    if li:
        inner = lambda u, w: col_inner(u, w, ctr)  # noqa: E731
    elif economic:
        inner = lambda u, w: sum_inner(w, u, ctr)  # noqa: E731
    else:
        inner = lambda u, w: trace_inner(u, w, ctr)  # noqa: E731

    def norm(u, shadow=False):
        if economic and shadow:
            count(ctr, vector_ops=1)
            return np.sqrt(s) * np.linalg.norm(u)
        count(ctr, vector_ops=s)
        return col_norms(u) if li else frob_norm(u)

    def scale(u, c, shadow=False):
        count(ctr, vector_ops=1 if (economic and shadow) else s)
        return np.asfortranarray(u * c) if u.ndim == 2 else u * c

    def shadow_axpy(y, u, c):
        if economic:
            count(ctr, vector_ops=1)
            return y + u * c
        return block_axpy(y, u, c, counters=ctr)

    x = np.zeros((n, s), dtype=np.complex128, order="F")
    r = ctx.b.copy(order="F")
    v_t = r
    w_t = initial_shadow(ctx.cfg, r, economic=economic)
    rho_v = norm(v_t)
    xi = norm(w_t, shadow=True)
    xi0 = np.array(xi, copy=True) if li else float(xi)
    ctr.close_setup()

    zero = np.zeros(s) if li else 0.0
    frozen = np.zeros(s, dtype=bool)
    gamma_prev = zero + 1.0
    theta_prev = zero
    eta = zero - 1.0
    tau = np.array(rho_v, dtype=float, copy=True) if li else float(rho_v)
    eps_prev = None
    p = q_s = d = s_vec = None
    settle_tol = eps * ctx.r0_norm

    def safe(den):
        if li:
            return np.where(frozen, 1.0, den)
        return den

    def bound(k):
        return np.sqrt(k + 1) * (np.linalg.norm(tau) if li else tau)

    ws = QMRWorkspace(k=0, x=x, r=r)
    if callback:
        callback(ws)
    res = frob_norm(r)
    ctx.record(res, estimate=bound(0))
    if ctx.converged(res):
        return ctx.finish(x, CONVERGED, 0)

    status, k = MAXIT, 0
    resumptions = 0
    use_recursive = False
    for k in range(1, ctx.cfg.maxit + 1):
        if li:
            frozen |= rho_v <= settle_tol
            bad = ~frozen & (xi <= eps * xi0)
            for i in np.nonzero(bad)[0]:
                ctx.breakdown("shadow Lanczos vector vanished", k, int(i))
            frozen |= bad
            if frozen.all():
                status = BREAKDOWN
                break
        elif rho_v <= settle_tol or xi <= eps * xi0:
            ctx.breakdown("Lanczos vector vanished", k)
            status = BREAKDOWN
            break

        v = scale(v_t, 1.0 / safe(rho_v))
        w = scale(w_t, 1.0 / safe(xi), shadow=True)
        delta = inner(v, w)
        if li:
            bad = ~frozen & (np.abs(delta) <= eps)
            for i in np.nonzero(bad)[0]:
                ctx.breakdown("delta", k, int(i))
            frozen |= bad
            if frozen.all():
                status = BREAKDOWN
                break
        elif ctx.tiny(delta):
            ctx.breakdown("delta", k)
            status = BREAKDOWN
            break

        if k == 1:
            p, q_s = v, w
        else:
            p = block_axpy(v, p, xi * delta / safe(eps_prev), sign=-1, counters=ctr)
            q_s = shadow_axpy(w, q_s, -np.conj(rho_v * delta / safe(eps_prev)))
        p_t = ctx.matvec(p)
        eps_k = inner(p_t, q_s)
        if li:
            qn = col_norms(q_s)
            bad = ~frozen & (np.abs(eps_k) <= eps * col_norms(p_t) * qn)
            for i in np.nonzero(bad)[0]:
                ctx.breakdown("epsilon", k, int(i))
            frozen |= bad
            if frozen.all():
                status = BREAKDOWN
                break
        else:
            qn = np.linalg.norm(q_s) * (np.sqrt(s) if economic else 1.0)
            if ctx.tiny(eps_k, frob_norm(p_t), qn):
                ctx.breakdown("epsilon", k)
                status = BREAKDOWN
                break
        beta = eps_k / safe(delta)
        v_t = block_axpy(p_t, v, beta, sign=-1, counters=ctr)
        rho_new = norm(v_t)
        w_t = shadow_axpy(ctx.matvec(q_s, adjoint=True), w, -np.conj(beta))
        xi_new = norm(w_t, shadow=True)

        theta = rho_new / (gamma_prev * np.abs(safe(beta)))
        gamma = 1.0 / np.sqrt(1.0 + theta * theta)
        eta = -eta * rho_v * gamma ** 2 / (safe(beta) * gamma_prev ** 2)
        if li:
            theta = np.where(frozen, 0.0, theta)
            gamma = np.where(frozen, 1.0, gamma)
            eta = np.where(frozen, 0.0, eta)
        if k == 1:
            d = scale(p, eta)
            s_vec = scale(p_t, eta)
        else:
            damp = (theta_prev * gamma) ** 2
            d = block_axpy(scale(d, damp), p, eta, counters=ctr)
            s_vec = block_axpy(scale(s_vec, damp), p_t, eta, counters=ctr)
        x = block_axpy(x, d, 1.0, counters=ctr)
        r = block_axpy(r, s_vec, 1.0, sign=-1, counters=ctr)
        if li:
            tau = np.where(frozen, tau, tau * theta * gamma)
        else:
            tau = tau * theta * gamma

        res = frob_norm(r)
        est = bound(k)
        ctx.record(res, estimate=est)
        if callback:
            ws.k, ws.x, ws.r, ws.v, ws.w, ws.p, ws.q = k, x, r, v, w, p, q_s
            ws.tau, ws.theta, ws.eta, ws.estimate = tau, theta, eta, est
            callback(ws)
        if not np.isfinite(res):
            ctx.breakdown("nonfinite", k)
            status = BREAKDOWN
            break
        if use_recursive:
            if ctx.converged(res):
                status = CONVERGED
                break
        elif ctx.converged(est):
            true_res = frob_norm(ctx.b - ctx.matvec(x))
            if ctx.converged(true_res):
                status = CONVERGED
                break
            resumptions += 1
            use_recursive = resumptions >= MAX_RESUMPTIONS

        rho_v, xi, eps_prev = rho_new, xi_new, eps_k
        gamma_prev, theta_prev = gamma, theta
    return ctx.finish(x, status, k)


def li_qmr(op, b, cfg=None, callback=None):
    """Loop-interchanged QMR: s coupled two-term QMR recurrences in lockstep."""
    return _qmr("li-qmr", "li", op, b, cfg, callback)


def gl_qmr(op, b, cfg=None, callback=None):
    """Global QMR: QMR on (I kron A) with trace inner products."""
    return _qmr("gl-qmr", "gl", op, b, cfg, callback)


def egl_qmr(op, b, cfg=None, callback=None):
    """Economic global QMR: the left Lanczos sequence is a single vector."""
    return _qmr("egl-qmr", "egl", op, b, cfg, callback)
