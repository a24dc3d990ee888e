"""Finite-difference curvature oracle.

Independent cross-check for the symbolic pipeline: metric components are
evaluated pointwise and their first/second derivatives taken by second-order
central differences (default step 1e-4), after which Christoffel, Riemann,
Ricci and scalar curvature are assembled with plain numpy algebra.  Nothing
here touches the symbolic differentiation code, so agreement between the two
pipelines is evidence, not tautology.
"""

from __future__ import annotations

import numpy as np

from . import expr as ex


def _component_program(inst):
    n = inst.dim
    mat = inst.metric.matrix()
    flat = [mat[i][j] for i in range(n) for j in range(n)]
    return ex.Program(flat)


def _eval_g(prog, inst, pts):
    pts = np.atleast_2d(pts)
    env = {c: pts[:, i] for i, c in enumerate(inst.chart.coords)}
    env.update(inst.params)
    vals = prog(env)
    k = pts.shape[0]
    n = inst.dim
    out = np.stack([np.broadcast_to(np.asarray(v, float), (k,)) for v in vals], axis=-1)
    return out.reshape(k, n, n)


def fd_metric_derivatives(inst, pts, step=1e-4):
    """g, dg[a,i,j] = d_a g_ij, d2g[a,b,i,j] = d_a d_b g_ij by central
    differences at every point in pts."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    k, n = pts.shape
    prog = _component_program(inst)
    h = step

    def g_at(shift):
        return _eval_g(prog, inst, pts + shift)

    g0 = g_at(np.zeros(n))
    dg = np.empty((k, n, n, n))
    d2g = np.empty((k, n, n, n, n))
    plus = {}
    minus = {}
    for a in range(n):
        e = np.zeros(n)
        e[a] = h
        plus[a] = g_at(e)
        minus[a] = g_at(-e)
        dg[:, a] = (plus[a] - minus[a]) / (2 * h)
        d2g[:, a, a] = (plus[a] - 2 * g0 + minus[a]) / (h * h)
    for a in range(n):
        for b in range(a + 1, n):
            ea = np.zeros(n)
            ea[a] = h
            eb = np.zeros(n)
            eb[b] = h
            mixed = (g_at(ea + eb) - g_at(ea - eb) - g_at(-ea + eb) + g_at(-ea - eb)) / (4 * h * h)
            d2g[:, a, b] = mixed
            d2g[:, b, a] = mixed
    return g0, dg, d2g


def assemble_christoffel(g, dg):
    ginv = np.linalg.inv(g)
    # Gamma^k_ij = 1/2 g^{kl} (dg_i g_jl + dg_j g_il - dg_l g_ij)
    bracket = (np.einsum("kijl->kijl", np.transpose(dg, (0, 1, 2, 3)))  # d_i g_jl
               + np.transpose(dg, (0, 2, 1, 3))                          # d_j g_il
               - np.transpose(dg, (0, 3, 1, 2)))                         # d_l g_ij (l last)
    # bracket[p, i, j, l]
    return 0.5 * np.einsum("pkl,pijl->pkij", ginv, bracket), ginv


def fd_christoffel(inst, pts, step=1e-4):
    g, dg, _ = fd_metric_derivatives(inst, pts, step)
    gamma, _ = assemble_christoffel(g, dg)
    return gamma


def fd_curvature(inst, pts, step=1e-4):
    """(riemann, ricci, scalar) arrays for all points; riemann indexed
    [p, l, i, j, k] matching the symbolic convention."""
    g, dg, d2g = fd_metric_derivatives(inst, pts, step)
    gamma, ginv = assemble_christoffel(g, dg)
    dginv = -np.einsum("pka,plab,pbm->plkm", ginv, dg, ginv)  # [p, l(=deriv), k, m]
    bracket = (np.transpose(dg, (0, 1, 2, 3))
               + np.transpose(dg, (0, 2, 1, 3))
               - np.transpose(dg, (0, 3, 1, 2)))  # [p, i, j, l]
    dbracket = (np.transpose(d2g, (0, 1, 2, 3, 4))
                + np.transpose(d2g, (0, 1, 3, 2, 4))
                - np.transpose(d2g, (0, 1, 4, 2, 3)))  # [p, a, i, j, l]
    dgamma = 0.5 * (np.einsum("pakl,pijl->pakij", dginv, bracket)
                    + np.einsum("pkl,paijl->pakij", ginv, dbracket))
    # R^l_{ijk} = d_i G^l_jk - d_j G^l_ik + G^l_im G^m_jk - G^l_jm G^m_ik
    riem = (np.einsum("piljk->plijk", dgamma)
            - np.einsum("pjlik->plijk", dgamma)
            + np.einsum("plim,pmjk->plijk", gamma, gamma)
            - np.einsum("pljm,pmik->plijk", gamma, gamma))
    ricci = np.einsum("piijk->pjk", riem)
    scalar = np.einsum("pjk,pjk->p", ginv, ricci)
    return riem, ricci, scalar


def fd_scalar_calculus(inst, h, pts, step=1e-4):
    """(grad, hess, laplacian, |grad|^2) of h by the FD pipeline."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    k, n = pts.shape
    prog = ex.Program([h])

    def h_at(shift):
        env = {c: (pts + shift)[:, i] for i, c in enumerate(inst.chart.coords)}
        env.update(inst.params)
        return np.broadcast_to(np.asarray(prog(env)[0], float), (k,)).astype(float)

    h0 = h_at(np.zeros(n))
    dh = np.empty((k, n))
    d2h = np.empty((k, n, n))
    for a in range(n):
        e = np.zeros(n)
        e[a] = step
        hp, hm = h_at(e), h_at(-e)
        dh[:, a] = (hp - hm) / (2 * step)
        d2h[:, a, a] = (hp - 2 * h0 + hm) / step ** 2
    for a in range(n):
        for b in range(a + 1, n):
            ea = np.zeros(n)
            ea[a] = step
            eb = np.zeros(n)
            eb[b] = step
            mixed = (h_at(ea + eb) - h_at(ea - eb) - h_at(-ea + eb) + h_at(-ea - eb)) / (4 * step ** 2)
            d2h[:, a, b] = mixed
            d2h[:, b, a] = mixed

    g, dg, _ = fd_metric_derivatives(inst, pts, step)
    gamma, ginv = assemble_christoffel(g, dg)
    hess = d2h - np.einsum("pkij,pk->pij", gamma, dh)
    lap = np.einsum("pij,pij->p", ginv, hess)
    gnsq = np.einsum("pij,pi,pj->p", ginv, dh, dh)
    grad = np.einsum("pij,pj->pi", ginv, dh)
    return grad, hess, lap, gnsq
