"""Exact polynomial calculus on metric jets.

A metric jet stores the homogeneous Taylor components of a chart metric
around the origin, g(x) = I + G1_x + ... + Gk_x, with exact rational
coefficients.  From it we compute the curvature jet: the family of Jacobi
operators of all orders at the origin, again as homogeneous polynomial maps
from directions to symmetric matrices.  The map is inverted degree by degree
(the inverse is solved from the forward map, not hard-coded), which also
yields normalization of arbitrary jets and prescription of Jacobi operators.

Normalization convention: a CurvatureJet component of degree i stores the
Taylor-normalized operator, i.e. (1/i!) times the (i-2)-nd iterated covariant
derivative of the curvature operator contracted with the direction.  The raw
derivative-convention operator (what a transported-operator derivative along
a geodesic produces) is recovered by `operator_at`, which multiplies by i!.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .polynomials import (
    QQ,
    TensorPoly,
    exact_rank,
    monomials_of_degree,
    rational_array,
    rational_nullspace,
    rational_rref,
    _zeros,
    _is_zero_array,
)


class JetError(ValueError):
    pass


# --------------------------------------------------------------------------
# jet containers
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MetricJet:
    """Homogeneous components G1..Gk of a metric jet; constant term is I."""

    m: int
    k: int
    components: tuple  # TensorPoly, shape (m, m), degree i at slot i-1

    def __post_init__(self):
        if self.k < 1 or len(self.components) != self.k:
            raise JetError("need components for degrees 1..k")
        for i, comp in enumerate(self.components, start=1):
            if comp.shape != (self.m, self.m):
                raise JetError("component %d has wrong shape" % i)
            if not comp.is_homogeneous(i):
                raise JetError("component %d is not homogeneous of degree %d" % (i, i))

    def component(self, i):
        return self.components[i - 1]

    def metric_polynomial(self):
        g = TensorPoly.constant(np.eye(self.m, dtype=object), self.m)
        for comp in self.components:
            g = g + comp
        return g

    def truncate(self, k):
        return MetricJet(self.m, k, self.components[:k])

    def extend(self, k):
        if k < self.k:
            return self.truncate(k)
        extra = tuple(TensorPoly.zero(self.m, (self.m, self.m))
                      for _ in range(self.k, k))
        return MetricJet(self.m, k, self.components + extra)

    def is_zero(self):
        return all(c.is_zero() for c in self.components)

    def evaluate(self, x):
        """Exact metric value I + sum Gi(x) at a rational point."""
        g = np.eye(self.m, dtype=object)
        for comp in self.components:
            g = g + comp.eval(x)
        return g


@dataclass(frozen=True)
class CurvatureJet:
    """Taylor-normalized Jacobi-operator components R2..Rk (R1 = 0)."""

    m: int
    k: int
    components: tuple  # TensorPoly, shape (m, m), degree i at slot i-2

    def __post_init__(self):
        if self.k < 2 or len(self.components) != self.k - 1:
            raise JetError("need components for degrees 2..k")
        for i, comp in enumerate(self.components, start=2):
            if comp.shape != (self.m, self.m):
                raise JetError("component %d has wrong shape" % i)
            if not comp.is_homogeneous(i):
                raise JetError("component %d is not homogeneous of degree %d" % (i, i))
            viol = _annihilation_violation(comp)
            if viol is not None:
                raise JetError("component %d violates the annihilation identity" % i)

    def component(self, i):
        if i == 1:
            return TensorPoly.zero(self.m, (self.m, self.m))
        return self.components[i - 2]

    def operator_at(self, x, i):
        """Raw derivative-convention operator at a rational direction."""
        if i == 1:
            return _zeros((self.m, self.m))
        return self.component(i).eval(x) * QQ(math.factorial(i))

    def operators_at(self, x):
        return [self.operator_at(x, i) for i in range(2, self.k + 1)]

    def operator_evaluator(self):
        """Float evaluator: x (..., m) -> raw operators (..., k-1, m, m)."""
        comps = [self.component(i).compile_float() for i in range(2, self.k + 1)]
        facts = np.array([math.factorial(i) for i in range(2, self.k + 1)])

        def evaluate(x):
            mats = np.stack([c(x) for c in comps], axis=-3)
            return mats * facts[:, None, None]

        return evaluate

    def truncate(self, k):
        return CurvatureJet(self.m, k, self.components[:k - 1])

    def is_zero(self):
        return all(c.is_zero() for c in self.components)


def _annihilation_violation(comp):
    """First nonzero coefficient of P_x . x, or None if identically zero."""
    m = comp.shape[0]
    acc = {}
    for e, c in comp.terms.items():
        for col in range(m):
            ne = list(e)
            ne[col] += 1
            key = tuple(ne)
            vec = acc.setdefault(key, _zeros((m,)))
            vec += c[:, col]
    for key in sorted(acc):
        vec = acc[key]
        for r in range(m):
            if vec[r] != 0:
                return (key, r, vec[r])
    return None


def check_normal(jet):
    """True iff Gi_x . x == 0 holds identically for every component.

    Returns (flag, certificate); the certificate names the first offending
    (degree, monomial, row, coefficient) or is None.
    """
    for i in range(1, jet.k + 1):
        viol = _annihilation_violation(jet.component(i))
        if viol is not None:
            key, r, coeff = viol
            return False, {"degree": i, "monomial": key, "row": r,
                           "coefficient": coeff}
    return True, None


# --------------------------------------------------------------------------
# forward map: metric jet -> curvature jet
# --------------------------------------------------------------------------

def _inverse_metric_series(g, cap):
    """(I + H)^{-1} as a truncated Neumann series; H = g - I has no constant."""
    m = g.shape[0]
    eye = TensorPoly.constant(np.eye(m, dtype=object), g.nvars)
    H = g - eye
    acc = eye
    power = eye
    for _ in range(cap):
        power = power.dot(H, 1, 0, cap=cap).scale(-1)
        if power.is_zero():
            break
        acc = acc + power
    return acc


def _christoffel_poly(g, ginv, cap):
    """Gamma[l, i, j] with exact coefficients, truncated at degree cap."""
    dg = g.gradient()  # dg[a, b, d] = d_d g_ab
    B = (dg.transpose((0, 2, 1))        # [s, i, j] = d_i g_sj
         + dg                           # [s, i, j] = d_j g_si
         - dg.transpose((2, 0, 1)))     # [s, i, j] = d_s g_ij
    return ginv.dot(B, 1, 0, cap=cap).scale(QQ(1, 2))


def _curvature_poly(gamma, cap):
    """Rm[l, i, j, k]: the l-component of Rm(e_i, e_j) e_k, truncated."""
    dG = gamma.gradient()               # dG[l, a, b, d] = d_d Gamma^l_ab
    first = dG.transpose((0, 3, 1, 2)).truncate(cap)   # d_i Gamma^l_jk
    gg = gamma.dot(gamma, 2, 0, cap=cap)               # Gamma^l_is Gamma^s_jk
    rm = first - first.transpose((0, 2, 1, 3)) + gg - gg.transpose((0, 2, 1, 3))
    return rm.truncate(cap)


def _cov_deriv(T, gamma, cap):
    """Covariant derivative of a (1, s)-tensor polynomial; new axis last."""
    ndim = len(T.shape)
    out = T.gradient().truncate(cap)
    # upper slot: + Gamma^l_{d s} T^s_{...}
    up = gamma.dot(T, 2, 0, cap=cap)     # axes [l, d, rest...]
    perm = (0,) + tuple(range(2, ndim + 1)) + (1,)
    out = out + up.transpose(perm)
    # lower slots: - Gamma^s_{d r_i} T^l_{.. s ..}
    for slot in range(1, ndim):
        dn = gamma.dot(T, 0, slot, cap=cap)  # axes [d, r, l, rest-minus-slot...]
        # rebuild to [l, r1..rs, d] with the fresh r at position `slot`
        order = [2]
        for j in range(1, ndim):
            if j == slot:
                order.append(1)
            elif j < slot:
                order.append(2 + j)
            else:
                order.append(1 + j)
        order.append(0)
        out = out - dn.transpose(tuple(order))
    return out.truncate(cap)


def _operator_component(const_tensor, m, degree):
    """Contract trailing direction slots of a constant tensor with x symbolically.

    const_tensor axes: [l, a, slot1..slotN]; returns the homogeneous TensorPoly
    of the given degree (N == degree) mapping x to the (l, a) matrix.
    """
    ncontract = len(const_tensor.shape) - 2
    terms = {}
    for combo in itertools.product(range(m), repeat=ncontract):
        exps = [0] * m
        for c in combo:
            exps[c] += 1
        key = tuple(exps)
        mat = const_tensor[(slice(None), slice(None)) + combo]
        if key in terms:
            terms[key] = terms[key] + mat
        else:
            terms[key] = mat.copy()
    terms = {e: c for e, c in terms.items() if not _is_zero_array(c)}
    return TensorPoly(m, (m, m), terms)


def curvature_jet(jet, upto=None):
    """Curvature jet of a metric jet (Taylor-normalized components).

    Works for arbitrary jets with identity constant term, normal or not.
    """
    k = jet.k if upto is None else upto
    if k < 2:
        raise JetError("curvature jet needs order k >= 2")
    if k > jet.k:
        jet = jet.extend(k)
    m = jet.m
    g = jet.metric_polynomial().truncate(k)
    ginv = _inverse_metric_series(g, k)
    gamma = _christoffel_poly(g, ginv, k - 1)
    rm = _curvature_poly(gamma, k - 2)
    comps = []
    T = rm
    for i in range(2, k + 1):
        const = T.terms.get((0,) * m)
        if const is None:
            const = _zeros((m,) * (2 + i))
        op = _operator_component(const, m, i).scale(QQ(1, math.factorial(i)))
        comps.append(op)
        if i < k:
            T = _cov_deriv(T, gamma, k - 2 - (i - 1))
    return CurvatureJet(m, k, tuple(comps))


# --------------------------------------------------------------------------
# homogeneous component spaces and the degree-by-degree inverse
# --------------------------------------------------------------------------

_BASIS_CACHE = {}
_SOLVER_CACHE = {}


def _sym_entries(m):
    return [(r, c) for r in range(m) for c in range(r, m)]


def _component_from_coords(m, degree, coords):
    monos = monomials_of_degree(m, degree)
    entries = _sym_entries(m)
    terms = {}
    idx = 0
    for e in monos:
        mat = _zeros((m, m))
        nz = False
        for (r, c) in entries:
            v = coords[idx]
            idx += 1
            if v != 0:
                mat[r, c] = v
                if r != c:
                    mat[c, r] = v
                nz = True
        if nz:
            terms[e] = mat
    return TensorPoly(m, (m, m), terms)


def _component_coords(comp, m, degree):
    monos = monomials_of_degree(m, degree)
    entries = _sym_entries(m)
    coords = []
    zero = _zeros((m, m))
    for e in monos:
        mat = comp.terms.get(e, zero)
        for (r, c) in entries:
            coords.append(mat[r, c])
    return coords


def component_basis(m, degree):
    """Basis of degree-`degree` symmetric-matrix polynomials with P_x.x == 0.

    This is the shared shape of normal-jet components and curvature-jet
    components; its length is the derived slice dimension.
    """
    key = (m, degree)
    if key in _BASIS_CACHE:
        return _BASIS_CACHE[key]
    monos = monomials_of_degree(m, degree)
    entries = _sym_entries(m)
    ncols = len(monos) * len(entries)
    col_index = {}
    for mi, e in enumerate(monos):
        for si, rc in enumerate(entries):
            col_index[(e, rc)] = mi * len(entries) + si
    target_monos = monomials_of_degree(m, degree + 1)
    rows = []
    for f in target_monos:
        for r in range(m):
            row = [QQ(0)] * ncols
            nz = False
            for col in range(m):
                e = list(f)
                e[col] -= 1
                if e[col] < 0:
                    continue
                rc = (min(r, col), max(r, col))
                row[col_index[(tuple(e), rc)]] += QQ(1)
                nz = True
            if nz:
                rows.append(row)
    null = rational_nullspace(rows, ncols)
    basis = [_component_from_coords(m, degree, v) for v in null]
    _BASIS_CACHE[key] = basis
    return basis


def component_space_dim(m, degree):
    return len(component_basis(m, degree))


def curvature_space_dim(m, k):
    """dim of the space of order-k curvature jets (components 2..k)."""
    return sum(component_space_dim(m, i) for i in range(2, k + 1))


def _rational_inverse(matrix):
    n = len(matrix)
    aug = [list(matrix[r]) + [QQ(1) if c == r else QQ(0) for c in range(n)]
           for r in range(n)]
    rref, pivots = rational_rref(aug)
    if pivots[:n] != list(range(n)):
        raise JetError("matrix is singular")
    return [row[n:] for row in rref]


def _degree_solver(m, degree):
    """Exact solver for the linear top-degree piece of the forward map.

    The degree-i curvature component of a jet depends on its degree-i metric
    component linearly (scaling forbids cross terms), so the increment map is
    assembled on the component basis by running the forward map on each basis
    element.  Cached per (m, degree).
    """
    key = (m, degree)
    if key in _SOLVER_CACHE:
        return _SOLVER_CACHE[key]
    basis = component_basis(m, degree)
    cols = []
    for E in basis:
        comps = [TensorPoly.zero(m, (m, m)) for _ in range(degree)]
        comps[degree - 1] = E
        jet = MetricJet(m, degree, tuple(comps))
        cj = curvature_jet(jet, upto=degree)
        cols.append(_component_coords(cj.component(degree), m, degree))
    nrows = len(cols[0])
    lam = [[cols[j][r] for j in range(len(basis))] for r in range(nrows)]
    # precompute (L^T L)^{-1} L^T for fast exact solves
    nb = len(basis)
    ltl = [[sum(lam[r][a] * lam[r][b] for r in range(nrows))
            for b in range(nb)] for a in range(nb)]
    ltl_inv = _rational_inverse(ltl)
    solver = {"basis": basis, "lam": lam, "ltl_inv": ltl_inv, "nrows": nrows}
    _SOLVER_CACHE[key] = solver
    return solver


def _solve_degree(m, degree, target_comp):
    sol = _degree_solver(m, degree)
    rhs = _component_coords(target_comp, m, degree)
    lam, ltl_inv = sol["lam"], sol["ltl_inv"]
    nb = len(sol["basis"])
    ltr = [sum(lam[r][a] * rhs[r] for r in range(sol["nrows"])) for a in range(nb)]
    coeffs = [sum(ltl_inv[a][b] * ltr[b] for b in range(nb)) for a in range(nb)]
    # exact consistency check
    for r in range(sol["nrows"]):
        acc = QQ(0)
        for a in range(nb):
            if coeffs[a] != 0:
                acc += lam[r][a] * coeffs[a]
        if acc != rhs[r]:
            raise JetError("curvature data is not realizable at degree %d" % degree)
    out = TensorPoly.zero(m, (m, m))
    for a, c in enumerate(coeffs):
        if c != 0:
            out = out + sol["basis"][a].scale(c)
    return out


def normal_jet_from_curvature(cjet):
    """Unique normal metric jet with the given curvature jet (exact)."""
    m, k = cjet.m, cjet.k
    comps = [TensorPoly.zero(m, (m, m))]  # G1 = 0 for normal jets
    for i in range(2, k + 1):
        partial = MetricJet(m, i, tuple(comps[:i - 1])
                            + (TensorPoly.zero(m, (m, m)),))
        produced = curvature_jet(partial, upto=i).component(i)
        delta = cjet.component(i) - produced
        comps.append(_solve_degree(m, i, delta))
    return MetricJet(m, k, tuple(comps))


def normalize_jet(jet):
    """Normal representative with the same curvature jet (exact round trip)."""
    if jet.k < 2:
        raise JetError("normalization needs order k >= 2")
    return normal_jet_from_curvature(curvature_jet(jet))


# --------------------------------------------------------------------------
# prescription of Jacobi operators
# --------------------------------------------------------------------------

def _rational_vector(x, m):
    v = rational_array(list(x)).reshape((m,))
    if _is_zero_array(v):
        raise JetError("direction must be nonzero")
    return v


def _basis_of_orthogonal(x):
    m = len(x)
    xx = sum(v * v for v in x)
    pivot = 0
    best = abs(x[0])
    for j in range(1, m):
        if abs(x[j]) > best:
            best = abs(x[j])
            pivot = j
    basis = []
    for j in range(m):
        if j == pivot:
            continue
        u = _zeros((m,))
        u[j] = QQ(1)
        u = u - x * (x[j] / xx)
        basis.append(u)
    return basis


def _sym_rank_one_decomposition(M):
    """Symmetric rational M as a list of (weight, vector) rank-one terms."""
    n = M.shape[0]
    M = M.copy()
    terms = []
    for _ in range(3 * n * n):  # generous bound; loop exits when M == 0
        if _is_zero_array(M):
            break
        pivot = None
        for j in range(n):
            if M[j, j] != 0:
                pivot = j
                break
        if pivot is not None:
            w = M[:, pivot] / M[pivot, pivot]
            lam = M[pivot, pivot]
            terms.append((lam, w.copy()))
            M = M - lam * np.outer(w, w)
            continue
        off = None
        for a in range(n):
            for b in range(a + 1, n):
                if M[a, b] != 0:
                    off = (a, b)
                    break
            if off:
                break
        a, b = off
        c = M[a, b]
        y1 = _zeros((n,)); y1[a] = QQ(1); y1[b] = QQ(1)
        y2 = _zeros((n,)); y2[a] = QQ(1); y2[b] = QQ(-1)
        terms.append((c / QQ(2), y1))
        terms.append((-c / QQ(2), y2))
        M = M - (c / QQ(2)) * np.outer(y1, y1) + (c / QQ(2)) * np.outer(y2, y2)
    return terms


def _rank_one_curvature_component(m, degree, x, y, weight):
    """Homogeneous degree-`degree` polynomial P with P_w.w == 0 and P_x = weight*yy^T.

    P_w = c * <w,x>^(d-2) * (<w,x>^2 yy^T - <w,x><w,y>(xy^T+yx^T) + <w,y>^2 xx^T)
    with c = weight / <x,x>^d, all rational.
    """
    wx = TensorPoly(m, (), {tuple(1 if idx == c else 0 for idx in range(m)):
                            np.array(x[c], dtype=object).reshape(())
                            for c in range(m) if x[c] != 0})
    wy = TensorPoly(m, (), {tuple(1 if idx == c else 0 for idx in range(m)):
                            np.array(y[c], dtype=object).reshape(())
                            for c in range(m) if y[c] != 0})
    yy = TensorPoly.constant(np.outer(y, y), m)
    xy = TensorPoly.constant(np.outer(x, y) + np.outer(y, x), m)
    xx_mat = TensorPoly.constant(np.outer(x, x), m)

    def poly_pow(p, n):
        out = TensorPoly.constant(np.array(1), m)
        for _ in range(n):
            out = _scalar_times(out, p)
        return out

    part = (_scalar_times(poly_pow(wx, 2), yy)
            - _scalar_times(_scalar_times(wx, wy), xy)
            + _scalar_times(poly_pow(wy, 2), xx_mat))
    full = _scalar_times(poly_pow(wx, degree - 2), part)
    xx = sum(v * v for v in x)
    return full.scale(weight / xx ** degree)


def _scalar_times(s, t):
    from .polynomials import scalar_mul
    if s.shape == ():
        return scalar_mul(s, t)
    return scalar_mul(t, s)


def prescribe_jacobi_operators(x, operators, m=None):
    """Normal metric jet whose raw Jacobi operators at direction x are given.

    `operators` lists A_2..A_k (rational symmetric matrices annihilating x).
    The resulting jet, fed to the operator stack at the origin with direction
    x, reproduces the list exactly.
    """
    if m is None:
        m = len(x)
    x = _rational_vector(x, m)
    k = len(operators) + 1
    if k < 2:
        raise JetError("need at least the order-2 operator")
    comps = []
    for idx, A in enumerate(operators):
        degree = idx + 2
        A = rational_array(A).reshape((m, m))
        if not _is_zero_array(A - A.T):
            raise JetError("operator of order %d is not symmetric" % degree)
        Ax = A.dot(x)
        if not _is_zero_array(Ax):
            raise JetError("operator of order %d does not annihilate x" % degree)
        comp = TensorPoly.zero(m, (m, m))
        if not _is_zero_array(A):
            basis = _basis_of_orthogonal(x)
            U = np.stack(basis, axis=1)
            UtU = U.T.dot(U)
            UtU_inv = np.array(_rational_inverse([list(r) for r in UtU]),
                               dtype=object)
            Mred = UtU_inv.dot(U.T.dot(A).dot(U)).dot(UtU_inv)
            for lam, w in _sym_rank_one_decomposition(Mred):
                y = U.dot(w)
                comp = comp + _rank_one_curvature_component(m, degree, x, y, lam)
        comps.append(comp.scale(QQ(1, math.factorial(degree))))
    cjet = CurvatureJet(m, k, tuple(comps))
    return normal_jet_from_curvature(cjet)


# --------------------------------------------------------------------------
# differential rank of the jet-to-curvature map
# --------------------------------------------------------------------------

class DualQQ:
    """Rational dual numbers a + b*eps with eps^2 = 0 (forward derivative)."""

    __slots__ = ("re", "eps")

    def __init__(self, re, eps=QQ(0)):
        self.re = re
        self.eps = eps

    def __add__(self, other):
        if isinstance(other, DualQQ):
            return DualQQ(self.re + other.re, self.eps + other.eps)
        return DualQQ(self.re + other, self.eps)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, DualQQ):
            return DualQQ(self.re - other.re, self.eps - other.eps)
        return DualQQ(self.re - other, self.eps)

    def __rsub__(self, other):
        return DualQQ(other - self.re, -self.eps)

    def __mul__(self, other):
        if isinstance(other, DualQQ):
            return DualQQ(self.re * other.re,
                          self.re * other.eps + self.eps * other.re)
        return DualQQ(self.re * other, self.eps * other)

    __rmul__ = __mul__

    def __neg__(self):
        return DualQQ(-self.re, -self.eps)

    def __eq__(self, other):
        if isinstance(other, DualQQ):
            return self.re == other.re and self.eps == other.eps
        return self.re == other and self.eps == 0

    def __repr__(self):  # pragma: no cover
        return "DualQQ(%s, %s)" % (self.re, self.eps)


def _dualize(jet, direction_jet):
    """Metric jet over dual rationals: base + eps * direction."""
    m, k = jet.m, jet.k
    comps = []
    for i in range(1, k + 1):
        base = jet.component(i)
        dirc = direction_jet.component(i)
        keys = set(base.terms) | set(dirc.terms)
        terms = {}
        for e in keys:
            b = base.terms.get(e)
            d = dirc.terms.get(e)
            arr = np.empty((m, m), dtype=object)
            for r in range(m):
                for c in range(m):
                    arr[r, c] = DualQQ(
                        b[r, c] if b is not None else QQ(0),
                        d[r, c] if d is not None else QQ(0))
            terms[e] = arr
        comps.append(TensorPoly(m, (m, m), terms))
    return MetricJet(m, k, tuple(comps))


def metric_space_basis(m, k, normal_only=False):
    """Coordinate directions of the jet space (all components, or normal slices)."""
    dirs = []
    for i in range(1, k + 1):
        if normal_only:
            if i == 1:
                continue
            for E in component_basis(m, i):
                comps = [TensorPoly.zero(m, (m, m)) for _ in range(k)]
                comps[i - 1] = E
                dirs.append(MetricJet(m, k, tuple(comps)))
        else:
            for e in monomials_of_degree(m, i):
                for (r, c) in _sym_entries(m):
                    mat = _zeros((m, m))
                    mat[r, c] = QQ(1)
                    mat[c, r] = QQ(1) if r != c else mat[c, r]
                    if r == c:
                        mat[r, c] = QQ(1)
                    comps = [TensorPoly.zero(m, (m, m)) for _ in range(k)]
                    comps[i - 1] = TensorPoly.monomial(m, e, mat)
                    dirs.append(MetricJet(m, k, tuple(comps)))
    return dirs


@dataclass
class RankReport:
    m: int
    k: int
    restricted_to_normal: bool
    rank: int
    curvature_dim: int
    domain_dim: int

    @property
    def full_rank(self):
        return self.rank == self.curvature_dim


def curvature_map_differential_rank(base, restrict_to_normal=False):
    """Exact rank of the differential of the jet-to-curvature map at `base`.

    The differential is assembled by exact forward-mode differentiation (dual
    rationals) along every coordinate direction of the jet space; at normal
    bases restricted to the normal slice it must equal the full curvature
    dimension (bijectivity), and on the full jet space it must reach the same
    rank (submersion).
    """
    m, k = base.m, base.k
    dirs = metric_space_basis(m, k, normal_only=restrict_to_normal)
    columns = []
    for d in dirs:
        dual = _dualize(base, d)
        cj = curvature_jet(dual)
        col = []
        for i in range(2, k + 1):
            coords = _component_coords(cj.component(i), m, i)
            col.extend(v.eps if isinstance(v, DualQQ) else QQ(0) for v in coords)
        columns.append(col)
    nrows = len(columns[0]) if columns else 0
    matrix = [[columns[j][r] for j in range(len(columns))] for r in range(nrows)]
    rank = exact_rank(matrix) if matrix else 0
    return RankReport(m=m, k=k, restricted_to_normal=restrict_to_normal,
                      rank=rank, curvature_dim=curvature_space_dim(m, k),
                      domain_dim=len(dirs))


# --------------------------------------------------------------------------
# serialization (documented plain-text format, bit-exact round trip)
# --------------------------------------------------------------------------

def jet_to_text(jet):
    """Serialize a MetricJet or CurvatureJet.

    Format:
      tensorjet kind=<metric|curvature> m=<m> k=<k> normal=<0|1>
      component <degree> terms=<n>
      <row> <col> <e_1> ... <e_m> <coefficient as num[/den]>
      ...
      end
    Only entries with row <= col are stored (matrices are symmetric).
    """
    if isinstance(jet, MetricJet):
        kind = "metric"
        degrees = range(1, jet.k + 1)
        normal = 1 if check_normal(jet)[0] else 0
    elif isinstance(jet, CurvatureJet):
        kind = "curvature"
        degrees = range(2, jet.k + 1)
        normal = 1
    else:
        raise JetError("unsupported jet type")
    lines = ["tensorjet kind=%s m=%d k=%d normal=%d" % (kind, jet.m, jet.k, normal)]
    for i in degrees:
        comp = jet.component(i)
        rows = []
        for e in sorted(comp.terms):
            mat = comp.terms[e]
            for (r, c) in _sym_entries(jet.m):
                if mat[r, c] != 0:
                    rows.append("%d %d %s %s" % (
                        r, c, " ".join(str(v) for v in e), str(mat[r, c])))
        lines.append("component %d terms=%d" % (i, len(rows)))
        lines.extend(rows)
    lines.append("end")
    return "\n".join(lines) + "\n"


def jet_from_text(text):
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    header = lines[0].split()
    if header[0] != "tensorjet":
        raise JetError("not a tensorjet file")
    fields = dict(part.split("=") for part in header[1:])
    kind = fields["kind"]
    m = int(fields["m"])
    k = int(fields["k"])
    degrees = list(range(1, k + 1)) if kind == "metric" else list(range(2, k + 1))
    comps = {}
    pos = 1
    while pos < len(lines) and lines[pos] != "end":
        head = lines[pos].split()
        if head[0] != "component":
            raise JetError("malformed component header: %r" % lines[pos])
        degree = int(head[1])
        nterms = int(head[2].split("=")[1])
        terms = {}
        for row_line in lines[pos + 1: pos + 1 + nterms]:
            parts = row_line.split()
            r, c = int(parts[0]), int(parts[1])
            e = tuple(int(v) for v in parts[2:2 + m])
            coeff = QQ(parts[2 + m])
            mat = terms.setdefault(e, _zeros((m, m)))
            mat[r, c] = coeff
            if r != c:
                mat[c, r] = coeff
        comps[degree] = TensorPoly(m, (m, m), terms)
        pos += 1 + nterms
    components = tuple(comps.get(i, TensorPoly.zero(m, (m, m))) for i in degrees)
    if kind == "metric":
        return MetricJet(m, k, components)
    return CurvatureJet(m, k, components)
