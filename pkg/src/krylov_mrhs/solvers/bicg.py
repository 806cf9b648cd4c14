"""BiCG for many right-hand sides: loop-interchanged, global, economic
global, block, and block with QR-factored residuals."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import SingularSmallMatrix
from ..instrumentation import count
from ..linalg import (SmallLU, block_axpy, block_gram, col_inner, col_norms, frob_norm,
                      sum_inner, thin_qr, trace_inner)
from .common import (BREAKDOWN, CONVERGED, MAXIT, SolveContext, initial_shadow)


@dataclass
class BiCGWorkspace:
    """Iteration state handed to callbacks.

    Arrays are rebound, not overwritten, between iterations, so a callback
    may keep references.  ``k`` counts completed updates of ``x``.
    """

    k: int
    x: np.ndarray
    r: np.ndarray | None = None
    r_hat: np.ndarray | None = None
    p: np.ndarray | None = None
    p_hat: np.ndarray | None = None
    q: np.ndarray | None = None
    alpha: object = None
    beta: object = None
    # Bl-BiCG-rQ only
    q_orth: np.ndarray | None = None
    q_hat_orth: np.ndarray | None = None
    v: np.ndarray | None = None
    v_hat: np.ndarray | None = None
    w: np.ndarray | None = None
    w_hat: np.ndarray | None = None
    c: np.ndarray | None = None
    c_hat: np.ndarray | None = None
    s_fac: np.ndarray | None = None
    s_hat_fac: np.ndarray | None = None


def _lanczos_bicg(method, mode, op, b, cfg, callback):
    """Shared driver for the variants with scalar or diagonal coefficients.

    ``mode`` is ``"li"`` (one coefficient per column), ``"gl"`` (one global
    coefficient, trace inner products) or ``"egl"`` (global with a rank-one
    shadow kept as a single vector).
    """
    ctx = SolveContext(method, op, b, cfg)
    ctr = ctx.ctr
    n, s = ctx.b.shape
    x = np.zeros((n, s), dtype=np.complex128, order="F")
    r = ctx.b.copy(order="F")
    economic = mode == "egl"
    r_hat = initial_shadow(ctx.cfg, r, economic=economic)
    p, p_hat = r, r_hat

    if mode == "li":
        inner = lambda u, w: col_inner(u, w, ctr)  # noqa: E731  (w^H u per column)
    elif mode == "gl":
        inner = lambda u, w: trace_inner(u, w, ctr)  # noqa: E731
    else:
        inner = lambda u, w: sum_inner(w, u, ctr)  # noqa: E731

    def shadow_update(y, xv, coeff):
        if economic:
            count(ctr, vector_ops=1)
            return y + xv * coeff
        return block_axpy(y, xv, coeff, counters=ctr)

    rho = inner(r, r_hat)
    ctr.close_setup()
    frozen = np.zeros(s, dtype=bool)
    ws = BiCGWorkspace(k=0, x=x, r=r, r_hat=r_hat, p=p, p_hat=p_hat)
    if callback:
        callback(ws)
    res = frob_norm(r)
    ctx.record(res)
    status, k = MAXIT, 0
    if ctx.converged(res):
        return ctx.finish(x, CONVERGED, 0)

    for k in range(1, ctx.cfg.maxit + 1):
        if mode == "li":
            settled = col_norms(r) <= ctx.cfg.eps_brk * ctx.r0_norm
            frozen |= settled
        q = ctx.matvec(p)
        q_hat = ctx.matvec(p_hat, adjoint=True)
        den = inner(q, p_hat)
        if mode == "li":
            bad = ~frozen & (np.abs(den) <= ctx.cfg.eps_brk * col_norms(q) * col_norms(p_hat))
            for i in np.nonzero(bad)[0]:
                ctx.breakdown("denominator", k, int(i))
            frozen |= bad
            if frozen.all():
                status = BREAKDOWN
                break
            alpha = np.where(frozen, 0.0, rho / np.where(frozen, 1.0, den))
        else:
            ph_norm = frob_norm(p_hat) * (np.sqrt(s) if economic else 1.0)
            if ctx.tiny(den, frob_norm(q), ph_norm):
                ctx.breakdown("denominator", k)
                status = BREAKDOWN
                break
            alpha = rho / den
        x = block_axpy(x, p, alpha, counters=ctr)
        r = block_axpy(r, q, alpha, sign=-1, counters=ctr)
        r_hat = shadow_update(r_hat, q_hat, -np.conj(alpha))
        res = frob_norm(r)
        ctx.record(res)
        if callback:
            ws.k, ws.x, ws.r, ws.r_hat, ws.q, ws.alpha = k, x, r, r_hat, q, alpha
            callback(ws)
        if not np.isfinite(res):
            ctx.breakdown("nonfinite", k)
            status = BREAKDOWN
            break
        if ctx.converged(res):
            status = CONVERGED
            break
        rho_new = inner(r, r_hat)
        if mode == "li":
            bad = ~frozen & (np.abs(rho_new) <= ctx.cfg.eps_brk * col_norms(r) * col_norms(r_hat))
            for i in np.nonzero(bad)[0]:
                ctx.breakdown("rho", k, int(i))
            frozen |= bad
            if frozen.all():
                status = BREAKDOWN
                break
            beta = np.where(frozen, 0.0, rho_new / np.where(frozen, 1.0, rho))
        else:
            rh_norm = frob_norm(r_hat) * (np.sqrt(s) if economic else 1.0)
            if ctx.tiny(rho_new, res, rh_norm):
                ctx.breakdown("rho", k)
                status = BREAKDOWN
                break
            beta = rho_new / rho
        p = block_axpy(r, p, beta, counters=ctr)
        p_hat = shadow_update(r_hat, p_hat, np.conj(beta))
        rho = rho_new
        ws.p, ws.p_hat, ws.beta = p, p_hat, beta
    return ctx.finish(x, status, k)


def li_bicg(op, b, cfg=None, callback=None):
    """Loop-interchanged BiCG: s independent BiCG recurrences in lockstep.

    A column whose recurrence breaks down is frozen and reported in
    ``report.breakdowns``; the others continue.  The Frobenius stopping
    test includes frozen columns.
    """
    return _lanczos_bicg("li-bicg", "li", op, b, cfg, callback)


def gl_bicg(op, b, cfg=None, callback=None):
    """Global BiCG: BiCG on (I kron A) x = b with trace inner products."""
    return _lanczos_bicg("gl-bicg", "gl", op, b, cfg, callback)


def egl_bicg(op, b, cfg=None, callback=None):
    """Economic global BiCG.

    Global BiCG started from a shadow block with identical columns keeps that
    structure, so the shadow side is a single vector and only one adjoint
    matvec column is needed per iteration.
    """
    return _lanczos_bicg("egl-bicg", "egl", op, b, cfg, callback)


def bl_bicg(op, b, cfg=None, callback=None):
    """Block BiCG with s x s coefficient matrices.

    The hatted coefficients are obtained from the adjoints of the Gram blocks
    already formed for alpha and beta, and the Gram block R_hat^H R is carried
    to the next iteration.
    """
    ctx = SolveContext("bl-bicg", op, b, cfg)
    ctr = ctx.ctr
    n, s = ctx.b.shape
    x = np.zeros((n, s), dtype=np.complex128, order="F")
    r = ctx.b.copy(order="F")
    r_hat = initial_shadow(ctx.cfg, r)
    p, p_hat = r, r_hat
    gram = block_gram(r, r_hat, ctr)
    ctr.close_setup()
    ws = BiCGWorkspace(k=0, x=x, r=r, r_hat=r_hat, p=p, p_hat=p_hat)
    if callback:
        callback(ws)
    res = frob_norm(r)
    ctx.record(res)
    if ctx.converged(res):
        return ctx.finish(x, CONVERGED, 0)

    status, k = MAXIT, 0
    for k in range(1, ctx.cfg.maxit + 1):
        q = ctx.matvec(p)
        q_hat = ctx.matvec(p_hat, adjoint=True)
        m = block_gram(q, p_hat, ctr)
        try:
            m_lu = SmallLU(m, ctx.cfg.eps_brk)
        except SingularSmallMatrix:
            ctx.breakdown("singular P_hat^H A P", k)
            status = BREAKDOWN
            break
        alpha = m_lu.solve(gram, counters=ctr)
        alpha_hat = m_lu.solve(gram.conj().T, adjoint=True, counters=ctr)
        x = block_axpy(x, p, alpha, counters=ctr)
        r = block_axpy(r, q, alpha, sign=-1, counters=ctr)
        r_hat = block_axpy(r_hat, q_hat, alpha_hat, sign=-1, counters=ctr)
        res = frob_norm(r)
        ctx.record(res)
        if callback:
            ws.k, ws.x, ws.r, ws.r_hat, ws.q, ws.alpha = k, x, r, r_hat, q, alpha
            callback(ws)
        if not np.isfinite(res):
            ctx.breakdown("nonfinite", k)
            status = BREAKDOWN
            break
        if ctx.converged(res):
            status = CONVERGED
            break
        gram_new = block_gram(r, r_hat, ctr)
        try:
            g_lu = SmallLU(gram, ctx.cfg.eps_brk)
        except SingularSmallMatrix:
            ctx.breakdown("singular R_hat^H R", k)
            status = BREAKDOWN
            break
        beta = g_lu.solve(gram_new, counters=ctr)
        beta_hat = g_lu.solve(gram_new.conj().T, adjoint=True, counters=ctr)
        p = block_axpy(r, p, beta, counters=ctr)
        p_hat = block_axpy(r_hat, p_hat, beta_hat, counters=ctr)
        gram = gram_new
        ws.p, ws.p_hat, ws.beta = p, p_hat, beta
    return ctx.finish(x, status, k)


def bl_bicg_rq(op, b, cfg=None, callback=None):
    """Block BiCG carrying the residuals in factored form R = Q C.

    Search directions are P = V C, so no inverse of C is ever formed.  The
    residual norm is monitored through ||C||_F.
    """
    ctx = SolveContext("bl-bicg-rq", op, b, cfg)
    ctr = ctx.ctr
    n, s = ctx.b.shape
    x = np.zeros((n, s), dtype=np.complex128, order="F")
    r0 = ctx.b.copy(order="F")
    r_hat0 = initial_shadow(ctx.cfg, r0)
    qr0 = thin_qr(r0, counters=ctr)
    qr0_hat = thin_qr(r_hat0, counters=ctr)
    if qr0.rank_deficient:
        ctx.breakdown("rank-deficient initial residual (absorbed)", 0)
    q, c = qr0.q, qr0.c
    q_hat, c_hat = qr0_hat.q, qr0_hat.c
    v, v_hat = q, q_hat
    gram = block_gram(q, q_hat, ctr)  # Q_hat^H Q
    ctr.close_setup()
    ws = BiCGWorkspace(k=0, x=x, q_orth=q, q_hat_orth=q_hat, v=v, v_hat=v_hat, c=c, c_hat=c_hat)
    if callback:
        callback(ws)
    res = frob_norm(c)
    ctx.record(res)
    if ctx.converged(res):
        return ctx.finish(x, CONVERGED, 0)

    status, k = MAXIT, 0
    for k in range(1, ctx.cfg.maxit + 1):
        w = ctx.matvec(v)
        w_hat = ctx.matvec(v_hat, adjoint=True)
        m = block_gram(w, v_hat, ctr)  # V_hat^H A V; V^H A^H V_hat is its adjoint
        try:
            m_lu = SmallLU(m, ctx.cfg.eps_brk)
        except SingularSmallMatrix:
            ctx.breakdown("singular V_hat^H A V", k)
            status = BREAKDOWN
            break
        alpha = m_lu.solve(gram, counters=ctr)
        alpha_hat = m_lu.solve(gram.conj().T, adjoint=True, counters=ctr)
        x = block_axpy(x, v, alpha @ c, counters=ctr)
        f = thin_qr(block_axpy(q, w, alpha, sign=-1, counters=ctr), counters=ctr)
        f_hat = thin_qr(block_axpy(q_hat, w_hat, alpha_hat, sign=-1, counters=ctr), counters=ctr)
        for fac, side in ((f, "residual"), (f_hat, "shadow residual")):
            if fac.rank_deficient:
                ctx.breakdown(f"rank-deficient {side} (absorbed)", k)
        q_new, s_fac = f.q, f.c
        q_hat_new, s_hat_fac = f_hat.q, f_hat.c
        c = s_fac @ c
        c_hat = s_hat_fac @ c_hat
        res = frob_norm(c)
        ctx.record(res)
        if callback:
            ws.k, ws.x, ws.w, ws.w_hat, ws.alpha = k, x, w, w_hat, alpha
            ws.q_orth, ws.q_hat_orth, ws.c, ws.c_hat = q_new, q_hat_new, c, c_hat
            ws.s_fac, ws.s_hat_fac = s_fac, s_hat_fac
            callback(ws)
        if not np.isfinite(res):
            ctx.breakdown("nonfinite", k)
            status = BREAKDOWN
            break
        if ctx.converged(res):
            status = CONVERGED
            break
        gram_new = block_gram(q_new, q_hat_new, ctr)
        try:
            g_lu = SmallLU(gram, ctx.cfg.eps_brk)
        except SingularSmallMatrix:
            ctx.breakdown("singular Q_hat^H Q", k)
            status = BREAKDOWN
            break
        beta = g_lu.solve(s_hat_fac.conj().T @ gram_new, counters=ctr)
        beta_hat = g_lu.solve(s_fac.conj().T @ gram_new.conj().T, adjoint=True, counters=ctr)
        v = block_axpy(q_new, v, beta, counters=ctr)
        v_hat = block_axpy(q_hat_new, v_hat, beta_hat, counters=ctr)
        q, q_hat, gram = q_new, q_hat_new, gram_new
        ws.v, ws.v_hat, ws.beta = v, v_hat, beta
    return ctx.finish(x, status, k)
