"""Chart-level curvature pipeline.

A ChartInstance bundles a coordinate chart, symbolic metric components, a
potential (f-form or u-form) and the constants (m, lambda).  All curvature
quantities are produced by building symbolic expressions once per instance
(Christoffel symbols, Riemann/Ricci/scalar curvature, Hessians, divergences)
and evaluating them at sample points; there is no numeric differentiation
anywhere on this path, so fourth-order quantities such as the Laplacian of
the scalar curvature stay at full double precision.

Sign conventions: Riemann is
    R^l_{ijk} = d_i Gamma^l_{jk} - d_j Gamma^l_{ik}
                + Gamma^l_{im} Gamma^m_{jk} - Gamma^l_{jm} Gamma^m_{ik},
Ricci_{jk} = R^i_{ijk}, and the Laplacian is the metric trace of the
Hessian.  Under these choices the unit round sphere has Ric = (n-1) g and
the trace of the u-form equation reads  Lap u = (u/m)(R - lambda n).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import expr as ex
from .errors import FormUnavailableError, NonPositiveUError, SingularMetricError
from .rng import DEFAULT_SEED, sample_box
from .tensors import TensorValue

INFINITY = math.inf


# --- charts and instances ----------------------------------------------------

@dataclass(frozen=True)
class Chart:
    """A coordinate patch: names, sampling box, optional per-coordinate
    period, and (for closed surfaces) the full closure box used by
    quadrature.  The sampling box excludes degenerate loci by construction."""

    coords: tuple
    box: tuple
    periodic: tuple = None
    closure_box: tuple = None

    def __post_init__(self):
        coords = tuple(self.coords)
        box = tuple((float(lo), float(hi)) for lo, hi in self.box)
        periodic = self.periodic
        if periodic is None:
            periodic = (None,) * len(coords)
        periodic = tuple(None if p is None else float(p) for p in periodic)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "periodic", periodic)
        if self.closure_box is not None:
            object.__setattr__(self, "closure_box",
                               tuple((float(lo), float(hi)) for lo, hi in self.closure_box))
        if len(coords) < 1:
            raise ValueError("chart needs at least one coordinate")
        if len(box) != len(coords) or len(periodic) != len(coords):
            raise ValueError("box/periodic length must match coordinate count")
        for lo, hi in box:
            if not (lo < hi):
                raise ValueError(f"degenerate box interval [{lo}, {hi}]")
        for p in periodic:
            if p is not None and p <= 0:
                raise ValueError("periods must be positive")

    @property
    def dim(self) -> int:
        return len(self.coords)


class MetricField:
    """Symmetric matrix of expressions, stored as the upper triangle."""

    def __init__(self, dim: int, upper):
        self.dim = dim
        upper = tuple(upper)
        if len(upper) != dim * (dim + 1) // 2:
            raise ValueError("upper triangle needs n(n+1)/2 entries")
        self.upper = upper

    @classmethod
    def diagonal(cls, entries):
        entries = list(entries)
        n = len(entries)
        upper = []
        for i in range(n):
            for j in range(i, n):
                upper.append(entries[i] if i == j else ex.ZERO)
        return cls(n, upper)

    def entry(self, i: int, j: int) -> ex.Expr:
        if i > j:
            i, j = j, i
        n = self.dim
        return self.upper[i * n - i * (i - 1) // 2 + (j - i)]

    def matrix(self):
        n = self.dim
        return tuple(tuple(self.entry(i, j) for j in range(n)) for i in range(n))


class ChartInstance:
    """A chart with metric components, a potential and constants; the unit of
    all verification.  Immutable after construction; the symbolic derivative
    cache hangs off `.geo`."""

    def __init__(self, chart: Chart, metric: MetricField, potential_kind: str,
                 potential, m, lam: float, params=None, label: str = ""):
        if metric.dim != chart.dim:
            raise ValueError("metric dimension must match chart dimension")
        if potential_kind not in ("f", "u", "none"):
            raise ValueError("potential kind must be 'f', 'u' or 'none'")
        if potential_kind == "none":
            potential = ex.ZERO
        elif potential is None:
            raise ValueError(f"{potential_kind}-form potential requires an expression")
        m = float(m)
        if not m > 0:
            raise ValueError("m must be positive (possibly inf)")
        if potential_kind == "u" and math.isinf(m):
            raise FormUnavailableError("u-form potential requires finite m")
        self.chart = chart
        self.metric = metric
        self.potential_kind = potential_kind
        self.potential = potential
        self.m = m
        self.lam = float(lam)
        self.params = dict(params or {})
        self.label = label
        self._geo = None

    @property
    def dim(self) -> int:
        return self.chart.dim

    @property
    def geo(self) -> "SymbolicGeometry":
        if self._geo is None:
            self._geo = SymbolicGeometry(self)
        return self._geo

    # potential in both forms (conversion u = e^{-f/m}  <->  f = -m log u)

    def f_expr(self) -> ex.Expr:
        if self.potential_kind in ("f", "none"):
            return self.potential
        if math.isinf(self.m):
            raise FormUnavailableError("cannot convert u-form with m = inf")
        return ex.neg(ex.mul(ex.const(self.m), ex.log(self.potential)))

    def u_expr(self) -> ex.Expr:
        if self.potential_kind == "u":
            return self.potential
        if self.potential_kind == "none":
            return ex.ONE
        if math.isinf(self.m):
            raise FormUnavailableError("cannot convert f-form with m = inf to u-form")
        return ex.exp(ex.neg(ex.div(self.potential, ex.const(self.m))))

    def sample(self, count: int, seed: int = DEFAULT_SEED) -> np.ndarray:
        return sample_box(self.chart.box, count, seed)

    def point_array(self, p) -> np.ndarray:
        """Normalise a point (mapping or sequence) to a flat coordinate array."""
        if isinstance(p, dict):
            return np.array([float(p[c]) for c in self.chart.coords])
        arr = np.asarray(p, dtype=float).reshape(-1)
        if arr.shape != (self.dim,):
            raise ValueError(f"point has wrong dimension {arr.shape}")
        return arr


# --- symbolic determinant / inverse ------------------------------------------

def det_expr(mat) -> ex.Expr:
    n = len(mat)
    if n == 1:
        return mat[0][0]
    terms = []
    for j in range(n):
        if ex._is_const(mat[0][j], 0.0):
            continue
        minor = [[mat[r][c] for c in range(n) if c != j] for r in range(1, n)]
        t = ex.mul(mat[0][j], det_expr(minor))
        terms.append(t if j % 2 == 0 else ex.neg(t))
    return ex.add_many(terms)


def inverse_exprs(mat):
    """Adjugate over determinant; one shared determinant node."""
    n = len(mat)
    det = det_expr(mat)
    if n == 1:
        return ((ex.div(ex.ONE, mat[0][0]),),), mat[0][0]
    inv = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [[mat[r][c] for c in range(n) if c != j] for r in range(n) if r != i]
            cof = det_expr(minor)
            if (i + j) % 2 == 1:
                cof = ex.neg(cof)
            inv[j][i] = ex.div(cof, det)
    return tuple(tuple(row) for row in inv), det


# --- the per-instance symbolic cache -----------------------------------------

class SymbolicGeometry:
    def __init__(self, inst: ChartInstance):
        self.inst = inst
        self.n = inst.dim
        self.coords = inst.chart.coords
        self.g = inst.metric.matrix()
        self.ginv, self.det = inverse_exprs(self.g)
        self.gamma = self._christoffel_exprs()
        self._riemann = None
        self._ricci = None
        self._scalar = None
        self._hess_cache = {}
        self._div_cache = {}
        self._prog_cache = {}

    def d(self, e: ex.Expr, i: int) -> ex.Expr:
        return ex.differentiate(e, self.coords[i])

    def _christoffel_exprs(self):
        n, g, ginv = self.n, self.g, self.ginv
        half = ex.const(0.5)
        gamma = [[[None] * n for _ in range(n)] for _ in range(n)]
        for k in range(n):
            for i in range(n):
                for j in range(i, n):
                    terms = [ex.mul(ginv[k][l],
                                    ex.sub(ex.add(self.d(g[j][l], i), self.d(g[i][l], j)),
                                           self.d(g[i][j], l)))
                             for l in range(n)]
                    val = ex.mul(half, ex.add_many(terms))
                    gamma[k][i][j] = val
                    gamma[k][j][i] = val
        return gamma

    @property
    def riemann(self):
        if self._riemann is None:
            n, gm = self.n, self.gamma
            riem = [[[[None] * n for _ in range(n)] for _ in range(n)] for _ in range(n)]
            for l in range(n):
                for i in range(n):
                    for j in range(n):
                        for k in range(n):
                            terms = [self.d(gm[l][j][k], i), ex.neg(self.d(gm[l][i][k], j))]
                            for m_ in range(n):
                                terms.append(ex.mul(gm[l][i][m_], gm[m_][j][k]))
                                terms.append(ex.neg(ex.mul(gm[l][j][m_], gm[m_][i][k])))
                            riem[l][i][j][k] = ex.add_many(terms)
            self._riemann = riem
        return self._riemann

    @property
    def ricci(self):
        if self._ricci is None:
            n, riem = self.n, self.riemann
            self._ricci = tuple(tuple(ex.add_many([riem[i][i][j][k] for i in range(n)])
                                      for k in range(n)) for j in range(n))
        return self._ricci

    @property
    def scalar_curvature(self) -> ex.Expr:
        if self._scalar is None:
            n = self.n
            self._scalar = ex.add_many([ex.mul(self.ginv[j][k], self.ricci[j][k])
                                        for j in range(n) for k in range(n)])
        return self._scalar

    # -- scalar field machinery ------------------------------------------

    def scalar_fields(self, h: ex.Expr) -> dict:
        """Symbolic gradient / Hessian / Laplacian / |grad|^2 of h; memoised
        per expression object."""
        key = id(h)
        hit = self._hess_cache.get(key)
        if hit is not None:
            return hit[1]
        n = self.n
        dh = [self.d(h, i) for i in range(n)]
        hess = [[None] * n for _ in range(n)]
        for i in range(n):
            for j in range(i, n):
                corr = ex.add_many([ex.mul(self.gamma[k][i][j], dh[k]) for k in range(n)])
                val = ex.sub(self.d(dh[i], j), corr)
                hess[i][j] = val
                hess[j][i] = val
        lap = ex.add_many([ex.mul(self.ginv[i][j], hess[i][j])
                           for i in range(n) for j in range(n)])
        gnsq = ex.add_many([ex.mul(self.ginv[i][j], ex.mul(dh[i], dh[j]))
                            for i in range(n) for j in range(n)])
        grad_up = [ex.add_many([ex.mul(self.ginv[i][j], dh[j]) for j in range(n)])
                   for i in range(n)]
        fields = {"dh": dh, "hess": hess, "lap": lap, "gnsq": gnsq, "grad_up": grad_up}
        self._hess_cache[key] = (h, fields)
        return fields

    def divergence_exprs(self, T):
        """(div T)_j for a symmetric 2-tensor field of expressions."""
        key = tuple(id(T[i][j]) for i in range(self.n) for j in range(self.n))
        hit = self._div_cache.get(key)
        if hit is not None:
            return hit
        n, gm = self.n, self.gamma
        out = []
        for j in range(n):
            terms = []
            for i in range(n):
                for k in range(n):
                    inner = [self.d(T[k][j], i)]
                    for l in range(n):
                        inner.append(ex.neg(ex.mul(gm[l][i][k], T[l][j])))
                        inner.append(ex.neg(ex.mul(gm[l][i][j], T[k][l])))
                    terms.append(ex.mul(self.ginv[i][k], ex.add_many(inner)))
            out.append(ex.add_many(terms))
        out = tuple(out)
        self._div_cache[key] = out
        return out

    # -- evaluation --------------------------------------------------------

    def env(self, pts: np.ndarray) -> dict:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        e = {c: pts[:, i] for i, c in enumerate(self.coords)}
        e.update(self.inst.params)
        return e

    def eval_exprs(self, roots, pts) -> list:
        """Evaluate a flat list of expressions at pts (k, n); returns list of
        arrays of shape (k,)."""
        key = tuple(id(r) for r in roots)
        prog = self._prog_cache.get(key)
        if prog is None:
            prog = ex.Program(roots)
            self._prog_cache[key] = prog
        k = np.atleast_2d(np.asarray(pts, dtype=float)).shape[0]
        out = prog(self.env(pts))
        return [np.broadcast_to(np.asarray(v, dtype=float), (k,)).astype(float) for v in out]

    def eval_matrix(self, mat, pts) -> np.ndarray:
        n = len(mat)
        flat = [mat[i][j] for i in range(n) for j in range(n)]
        vals = self.eval_exprs(flat, pts)
        k = vals[0].shape[0]
        return np.stack(vals, axis=-1).reshape(k, n, n)

    def eval_vector(self, vec, pts) -> np.ndarray:
        vals = self.eval_exprs(list(vec), pts)
        return np.stack(vals, axis=-1)

    def eval_scalar(self, e, pts) -> np.ndarray:
        return self.eval_exprs([e], pts)[0]

    def metric_values(self, pts) -> np.ndarray:
        return self.eval_matrix(self.g, pts)


# --- point validity -----------------------------------------------------------

def positive_definite_mask(gvals: np.ndarray) -> np.ndarray:
    """True where the metric value is symmetric positive definite."""
    finite = np.all(np.isfinite(gvals), axis=(1, 2))
    mask = finite.copy()
    if np.any(finite):
        eig = np.full(gvals.shape[0], -np.inf)
        eig[finite] = np.linalg.eigvalsh(gvals[finite])[..., 0]
        mask &= eig > 0.0
    return mask


def check_point_valid(inst: ChartInstance, p) -> np.ndarray:
    """PD metric and (u-form) u > 0 at a single point; raises otherwise."""
    pt = inst.point_array(p)
    g = inst.geo.metric_values(pt[None, :])
    if not positive_definite_mask(g)[0]:
        raise SingularMetricError(tuple(pt))
    if inst.potential_kind == "u":
        u = inst.geo.eval_scalar(inst.potential, pt[None, :])[0]
        if not u > 0.0:
            raise NonPositiveUError(tuple(pt), float(u))
    return pt


def validity_mask(inst: ChartInstance, pts: np.ndarray) -> np.ndarray:
    """Batch form of the point gate: PD metric, and u > 0 on u-form
    instances.  Invalid points are skipped by callers, not fatal."""
    pts = np.atleast_2d(pts)
    mask = positive_definite_mask(inst.geo.metric_values(pts))
    if inst.potential_kind == "u":
        u = inst.geo.eval_scalar(inst.potential, pts)
        mask &= u > 0.0
    return mask


# --- public operations ---------------------------------------------------------

def christoffel(inst: ChartInstance, p) -> TensorValue:
    """Levi-Civita connection coefficients Gamma^k_{ij} at p (up-down-down)."""
    pt = check_point_valid(inst, p)
    n = inst.dim
    geo = inst.geo
    flat = [geo.gamma[k][i][j] for k in range(n) for i in range(n) for j in range(n)]
    vals = geo.eval_exprs(flat, pt[None, :])
    arr = np.array([v[0] for v in vals]).reshape(n, n, n)
    return TensorValue("udd", n, arr, tuple(pt))


def curvature(inst: ChartInstance, p):
    """(riemann, ricci, scalar) at p.  riemann is R^l_{ijk} (up-down-down-down)."""
    pt = check_point_valid(inst, p)
    n = inst.dim
    geo = inst.geo
    riem = geo.riemann
    flat = [riem[l][i][j][k] for l in range(n) for i in range(n)
            for j in range(n) for k in range(n)]
    vals = geo.eval_exprs(flat, pt[None, :])
    riem_arr = np.array([v[0] for v in vals]).reshape(n, n, n, n)
    ric_arr = geo.eval_matrix(geo.ricci, pt[None, :])[0]
    scalar = float(geo.eval_scalar(geo.scalar_curvature, pt[None, :])[0])
    return (TensorValue("uddd", n, riem_arr, tuple(pt)),
            TensorValue("dd", n, ric_arr, tuple(pt)),
            scalar)


def scalar_calculus(inst: ChartInstance, h: ex.Expr, p):
    """(grad, hess, laplacian, |grad|^2) of the scalar field h at p."""
    pt = check_point_valid(inst, p)
    n = inst.dim
    geo = inst.geo
    fields = geo.scalar_fields(h)
    grad = geo.eval_vector(fields["grad_up"], pt[None, :])[0]
    hess = geo.eval_matrix(fields["hess"], pt[None, :])[0]
    lap = float(geo.eval_scalar(fields["lap"], pt[None, :])[0])
    gnsq = float(geo.eval_scalar(fields["gnsq"], pt[None, :])[0])
    return (TensorValue("u", n, grad, tuple(pt)),
            TensorValue("dd", n, hess, tuple(pt)),
            lap, gnsq)


def divergence_sym2(inst: ChartInstance, T, p) -> TensorValue:
    """Divergence (a 1-form) of a symmetric 2-tensor field given as an n x n
    nest of expressions: (div T)_j = g^{ik} (d_i T_kj - Gamma T - Gamma T)."""
    pt = check_point_valid(inst, p)
    geo = inst.geo
    out = geo.divergence_exprs(T)
    vals = geo.eval_vector(out, pt[None, :])[0]
    return TensorValue("d", inst.dim, vals, tuple(pt))


@dataclass
class ConformalReport:
    is_conformal: bool
    k_values: list
    max_residual: float
    nontrivial: bool


def conformal_hessian_test(inst: ChartInstance, h: ex.Expr, points, tol: float) -> ConformalReport:
    """Does Hess h = k g hold on the sample?  Returns the pointwise
    k = (Lap h)/n values and the sup-norm residual; a constant h passes with
    k = 0 but is flagged nontrivial=False."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    geo = inst.geo
    fields = geo.scalar_fields(h)
    g = geo.metric_values(pts)
    hess = geo.eval_matrix(fields["hess"], pts)
    lap = geo.eval_scalar(fields["lap"], pts)
    gnsq = geo.eval_scalar(fields["gnsq"], pts)
    k = lap / inst.dim
    resid = np.max(np.abs(hess - k[:, None, None] * g), axis=(1, 2))
    max_resid = float(np.max(resid)) if resid.size else 0.0
    nontrivial = bool(np.max(gnsq) > 1e-20) if gnsq.size else False
    return ConformalReport(bool(max_resid <= tol), [float(v) for v in k],
                           max_resid, nontrivial)
