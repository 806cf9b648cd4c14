"""BiCGStab for many right-hand sides (loop-interchanged, global, block and
block with QR-factored residuals).

All variants use the two-stage van der Vorst recurrence: a BiCG step giving
the intermediate residual S, then a one-parameter minimal-residual step with
T = A S.  The stopping test is also applied to S, and the second stage is
skipped when S already satisfies it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import SingularSmallMatrix
from ..linalg import (SmallLU, block_axpy, block_gram, col_inner, col_norms, frob_norm,
                      thin_qr, trace_inner)
from .common import BREAKDOWN, CONVERGED, MAXIT, SolveContext, initial_shadow


@dataclass
class BiCGStabWorkspace:
    k: int
    x: np.ndarray
    r: np.ndarray | None = None
    r_hat0: np.ndarray | None = None
    p: np.ndarray | None = None
    v: np.ndarray | None = None
    s_res: np.ndarray | None = None
    t: np.ndarray | None = None
    alpha: object = None
    beta: object = None
    omega: object = None
    c: np.ndarray | None = None
    q_orth: np.ndarray | None = None


def _lg_bicgstab(method, mode, op, b, cfg, callback):
    ctx = SolveContext(method, op, b, cfg)
    ctr = ctx.ctr
    eps = ctx.cfg.eps_brk
    n, s = ctx.b.shape
    li = mode == "li"
    inner = (lambda u, w: col_inner(u, w, ctr)) if li else (lambda u, w: trace_inner(u, w, ctr))

    x = np.zeros((n, s), dtype=np.complex128, order="F")
    r = ctx.b.copy(order="F")
    r_hat0 = initial_shadow(ctx.cfg, r)
    p = r
    rho = inner(r, r_hat0)
    ctr.close_setup()
    frozen = np.zeros(s, dtype=bool)
    ws = BiCGStabWorkspace(k=0, x=x, r=r, r_hat0=r_hat0, p=p)
    if callback:
        callback(ws)
    res = frob_norm(r)
    ctx.record(res)
    if ctx.converged(res):
        return ctx.finish(x, CONVERGED, 0)
    settle_tol = eps * ctx.r0_norm

    status, k = MAXIT, 0
    for k in range(1, ctx.cfg.maxit + 1):
        if li:
            frozen |= col_norms(r) <= settle_tol
        v = ctx.matvec(p)
        den = inner(v, r_hat0)
        if li:
            bad = ~frozen & (np.abs(den) <= eps * col_norms(v) * col_norms(r_hat0))
            for i in np.nonzero(bad)[0]:
                ctx.breakdown("denominator", k, int(i))
            frozen |= bad
            if frozen.all():
                status = BREAKDOWN
                break
            alpha = np.where(frozen, 0.0, rho / np.where(frozen, 1.0, den))
        else:
            if ctx.tiny(den, frob_norm(v), frob_norm(r_hat0)):
                ctx.breakdown("denominator", k)
                status = BREAKDOWN
                break
            alpha = rho / den
        s_res = block_axpy(r, v, alpha, sign=-1, counters=ctr)
        s_norm = frob_norm(s_res)
        if ctx.converged(s_norm):
            x = block_axpy(x, p, alpha, counters=ctr)
            r = s_res
            ctx.record(s_norm)
            ctx.report.half_step_exit = True
            if callback:
                ws.k, ws.x, ws.r, ws.s_res, ws.alpha = k, x, r, s_res, alpha
                callback(ws)
            status = CONVERGED
            break
        t = ctx.matvec(s_res)
        ts = inner(s_res, t)
        tt = inner(t, t)
        if li:
            s_cols = col_norms(s_res)
            done = ~frozen & (s_cols <= settle_tol)
            bad = ~frozen & ~done & (np.abs(ts) <= eps * col_norms(t) * s_cols)
            for i in np.nonzero(bad)[0]:
                ctx.breakdown("omega", k, int(i))
            skip = frozen | done | bad
            omega = np.where(skip, 0.0, ts / np.where(skip, 1.0, tt))
            frozen |= bad
        else:
            if tt == 0 or ctx.tiny(ts, frob_norm(t), s_norm):
                ctx.breakdown("omega", k)
                status = BREAKDOWN
                x = block_axpy(x, p, alpha, counters=ctr)
                break
            omega = ts / tt
        x = block_axpy(x, p, alpha, counters=ctr)
        x = block_axpy(x, s_res, omega, counters=ctr)
        r = block_axpy(s_res, t, omega, sign=-1, counters=ctr)
        res = frob_norm(r)
        ctx.record(res)
        if callback:
            ws.k, ws.x, ws.r, ws.v, ws.s_res, ws.t = k, x, r, v, s_res, t
            ws.alpha, ws.omega = alpha, omega
            callback(ws)
        if not np.isfinite(res):
            ctx.breakdown("nonfinite", k)
            status = BREAKDOWN
            break
        if ctx.converged(res):
            status = CONVERGED
            break
        rho_new = inner(r, r_hat0)
        if li:
            live = ~frozen & (omega != 0)
            bad = live & (np.abs(rho_new) <= eps * col_norms(r) * col_norms(r_hat0))
            for i in np.nonzero(bad)[0]:
                ctx.breakdown("rho", k, int(i))
            frozen |= bad
            live &= ~bad
            beta = np.zeros(s, dtype=np.complex128)
            beta[live] = (rho_new[live] / rho[live]) * (alpha[live] / omega[live])
            if frozen.all():
                status = BREAKDOWN
                break
        else:
            if ctx.tiny(rho_new, res, frob_norm(r_hat0)):
                ctx.breakdown("rho", k)
                status = BREAKDOWN
                break
            beta = (rho_new / rho) * (alpha / omega)
        tmp = block_axpy(p, v, omega, sign=-1, counters=ctr)
        p = block_axpy(r, tmp, beta, counters=ctr)
        rho = rho_new
        ws.p, ws.beta = p, beta
    return ctx.finish(x, status, k)


def li_bicgstab(op, b, cfg=None, callback=None):
    """Loop-interchanged BiCGStab: per-column scalars, batched matvecs."""
    return _lg_bicgstab("li-bicgstab", "li", op, b, cfg, callback)


def gl_bicgstab(op, b, cfg=None, callback=None):
    """Global BiCGStab: BiCGStab on (I kron A) with trace inner products."""
    return _lg_bicgstab("gl-bicgstab", "gl", op, b, cfg, callback)


def bl_bicgstab(op, b, cfg=None, callback=None):
    """Block BiCGStab.

    The BiCG stage uses s x s coefficients against the fixed shadow block
    R_hat0; the stabilizing stage uses one scalar omega for all columns
    (a global minimal-residual step).  beta = -(R_hat0^H V)^{-1} R_hat0^H T,
    reusing the factorization from alpha; alpha itself is recomputed from
    R_hat0^H R at every step.
    """
    ctx = SolveContext("bl-bicgstab", op, b, cfg)
    ctr = ctx.ctr
    n, s = ctx.b.shape
    x = np.zeros((n, s), dtype=np.complex128, order="F")
    r = ctx.b.copy(order="F")
    r_hat0 = initial_shadow(ctx.cfg, r)
    p = r
    g = block_gram(r, r_hat0, ctr)
    ctr.close_setup()
    ws = BiCGStabWorkspace(k=0, x=x, r=r, r_hat0=r_hat0, p=p)
    if callback:
        callback(ws)
    res = frob_norm(r)
    ctx.record(res)
    if ctx.converged(res):
        return ctx.finish(x, CONVERGED, 0)

    status, k = MAXIT, 0
    for k in range(1, ctx.cfg.maxit + 1):
        v = ctx.matvec(p)
        m = block_gram(v, r_hat0, ctr)
        try:
            m_lu = SmallLU(m, ctx.cfg.eps_brk)
        except SingularSmallMatrix:
            ctx.breakdown("singular R_hat0^H A P", k)
            status = BREAKDOWN
            break
        alpha = m_lu.solve(g, counters=ctr)
        s_res = block_axpy(r, v, alpha, sign=-1, counters=ctr)
        s_norm = frob_norm(s_res)
        if ctx.converged(s_norm):
            x = block_axpy(x, p, alpha, counters=ctr)
            r = s_res
            ctx.record(s_norm)
            ctx.report.half_step_exit = True
            if callback:
                ws.k, ws.x, ws.r, ws.s_res, ws.alpha = k, x, r, s_res, alpha
                callback(ws)
            status = CONVERGED
            break
        t = ctx.matvec(s_res)
        ts = trace_inner(s_res, t, ctr)
        tt = trace_inner(t, t, ctr)
        if tt == 0 or ctx.tiny(ts, frob_norm(t), s_norm):
            ctx.breakdown("omega", k)
            x = block_axpy(x, p, alpha, counters=ctr)
            status = BREAKDOWN
            break
        omega = ts / tt
        x = block_axpy(x, p, alpha, counters=ctr)
        x = block_axpy(x, s_res, omega, counters=ctr)
        r = block_axpy(s_res, t, omega, sign=-1, counters=ctr)
        res = frob_norm(r)
        ctx.record(res)
        if callback:
            ws.k, ws.x, ws.r, ws.v, ws.s_res, ws.t = k, x, r, v, s_res, t
            ws.alpha, ws.omega = alpha, omega
            callback(ws)
        if not np.isfinite(res):
            ctx.breakdown("nonfinite", k)
            status = BREAKDOWN
            break
        if ctx.converged(res):
            status = CONVERGED
            break
        beta = -m_lu.solve(block_gram(t, r_hat0, ctr), counters=ctr)
        g = block_gram(r, r_hat0, ctr)
        tmp = block_axpy(p, v, omega, sign=-1, counters=ctr)
        p = block_axpy(r, tmp, beta, counters=ctr)
        ws.p, ws.beta = p, beta
    return ctx.finish(x, status, k)


def bl_bicgstab_rq(op, b, cfg=None, callback=None):
    """Block BiCGStab with the residual kept as R = Q C (two QRs per iteration).

    With P = V C and the shadow block replaced by its orthonormal factor,
    every coefficient is formed from orthonormal blocks:

        alpha' = (Qh0^H A V)^{-1} (Qh0^H Q)
        Q_s S_s = Q - A V alpha',           C_s = S_s C
        omega   = tr(C_s^H T^H Q_s C_s) / tr(C_s^H T^H T C_s),  T = A Q_s
        Q' S'   = Q_s - omega T,            C' = S' C_s
        V'      = Q' + (V - omega A V) (Qh0^H A V)^{-1} (Qh0^H Q') / omega

    and X advances by V alpha' C + omega Q_s C_s.
    """
    ctx = SolveContext("bl-bicgstab-rq", op, b, cfg)
    ctr = ctx.ctr
    n, s = ctx.b.shape
    x = np.zeros((n, s), dtype=np.complex128, order="F")
    r0 = ctx.b.copy(order="F")
    f0 = thin_qr(r0, counters=ctr)
    if f0.rank_deficient:
        ctx.breakdown("rank-deficient initial residual (absorbed)", 0)
    q, c = f0.q, f0.c
    q_hat0 = thin_qr(initial_shadow(ctx.cfg, r0), counters=ctr).q
    v = q
    g = block_gram(q, q_hat0, ctr)
    ctr.close_setup()
    ws = BiCGStabWorkspace(k=0, x=x, r_hat0=q_hat0, c=c, q_orth=q)
    if callback:
        callback(ws)
    res = frob_norm(c)
    ctx.record(res)
    if ctx.converged(res):
        return ctx.finish(x, CONVERGED, 0)

    status, k = MAXIT, 0
    for k in range(1, ctx.cfg.maxit + 1):
        w = ctx.matvec(v)
        m = block_gram(w, q_hat0, ctr)
        try:
            m_lu = SmallLU(m, ctx.cfg.eps_brk)
        except SingularSmallMatrix:
            ctx.breakdown("singular Qh0^H A V", k)
            status = BREAKDOWN
            break
        alpha = m_lu.solve(g, counters=ctr)
        f = thin_qr(block_axpy(q, w, alpha, sign=-1, counters=ctr), counters=ctr)
        q_s, c_s = f.q, f.c @ c
        s_norm = frob_norm(c_s)
        if ctx.converged(s_norm):
            x = block_axpy(x, v, alpha @ c, counters=ctr)
            ctx.record(s_norm)
            ctx.report.half_step_exit = True
            if callback:
                ws.k, ws.x, ws.c, ws.q_orth, ws.alpha = k, x, c_s, q_s, alpha
                callback(ws)
            status = CONVERGED
            break
        t = ctx.matvec(q_s)
        g1 = block_gram(q_s, t, ctr)
        g2 = block_gram(t, t, ctr)
        ts = complex(np.trace(c_s.conj().T @ g1 @ c_s))
        tt = complex(np.trace(c_s.conj().T @ g2 @ c_s))
        if tt == 0 or ctx.tiny(ts, np.sqrt(abs(tt)), s_norm):
            ctx.breakdown("omega", k)
            x = block_axpy(x, v, alpha @ c, counters=ctr)
            status = BREAKDOWN
            break
        omega = ts / tt
        x = block_axpy(x, v, alpha @ c, counters=ctr)
        x = block_axpy(x, q_s, omega * c_s, counters=ctr)
        f2 = thin_qr(block_axpy(q_s, t, omega, sign=-1, counters=ctr), counters=ctr)
        for fac in (f, f2):
            if fac.rank_deficient:
                ctx.breakdown("rank-deficient residual (absorbed)", k)
        q_new = f2.q
        c = f2.c @ c_s
        res = frob_norm(c)
        ctx.record(res)
        if callback:
            ws.k, ws.x, ws.c, ws.q_orth, ws.v, ws.t = k, x, c, q_new, v, t
            ws.alpha, ws.omega = alpha, omega
            callback(ws)
        if not np.isfinite(res):
            ctx.breakdown("nonfinite", k)
            status = BREAKDOWN
            break
        if ctx.converged(res):
            status = CONVERGED
            break
        g = block_gram(q_new, q_hat0, ctr)
        beta = m_lu.solve(g, counters=ctr) / omega
        tmp = block_axpy(v, w, omega, sign=-1, counters=ctr)
        v = block_axpy(q_new, tmp, beta, counters=ctr)
        q = q_new
        ws.v, ws.beta = v, beta
    return ctx.finish(x, status, k)
