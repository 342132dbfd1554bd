"""Sparse multivariate polynomials with exact rational tensor coefficients.

A TensorPoly maps exponent tuples to small numpy object arrays of rationals,
so a whole matrix- or tensor-valued polynomial shares one monomial index.
All arithmetic is exact; gmpy2.mpq is used when available (it is roughly an
order of magnitude faster than fractions.Fraction on this workload).
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

try:
    from gmpy2 import mpq as QQ
except ImportError:  # pragma: no cover - gmpy2 is a declared dependency
    QQ = Fraction


def as_rational(value):
    """Coerce ints, Fractions, strings like '-2/3', and exact floats to QQ."""
    if isinstance(value, (int, np.integer)):
        return QQ(int(value))
    if isinstance(value, Fraction):
        return QQ(value.numerator, value.denominator)
    if isinstance(value, str):
        return QQ(value)
    if isinstance(value, float):
        f = Fraction(value)  # exact binary expansion
        return QQ(f.numerator, f.denominator)
    return QQ(value)


def rational_array(data, shape=None):
    """Object ndarray of QQ from nested sequences (or a flat fill)."""
    arr = np.array(data, dtype=object)
    if shape is not None:
        arr = arr.reshape(shape)
    flat = arr.ravel()
    for i, v in enumerate(flat):
        flat[i] = as_rational(v)
    return flat.reshape(arr.shape)


def _zeros(shape):
    a = np.zeros(shape, dtype=object)
    a.fill(QQ(0))
    return a


def _is_zero_array(arr):
    arr = np.asarray(arr, dtype=object)
    return all(v == 0 for v in arr.ravel())


class TensorPoly:
    """Polynomial in `nvars` variables with ndarray coefficients of `shape`.

    terms: dict mapping exponent tuples to object ndarrays (QQ entries).
    Zero coefficient arrays are dropped eagerly.
    """

    __slots__ = ("nvars", "shape", "terms")

    def __init__(self, nvars, shape, terms=None):
        self.nvars = nvars
        self.shape = tuple(shape)
        self.terms = terms if terms is not None else {}

    # ---------------------------------------------------------------- build
    @classmethod
    def zero(cls, nvars, shape):
        return cls(nvars, shape)

    @classmethod
    def constant(cls, arr, nvars):
        arr = rational_array(arr)
        t = {}
        if not _is_zero_array(arr):
            t[(0,) * nvars] = arr
        return cls(nvars, arr.shape, t)

    @classmethod
    def monomial(cls, nvars, exps, arr):
        arr = rational_array(arr)
        t = {}
        if not _is_zero_array(arr):
            t[tuple(exps)] = arr
        return cls(nvars, arr.shape, t)

    @classmethod
    def variable(cls, nvars, index):
        e = [0] * nvars
        e[index] = 1
        return cls.monomial(nvars, e, np.array(1))

    def copy(self):
        return TensorPoly(self.nvars, self.shape,
                          {e: c.copy() for e, c in self.terms.items()})

    # ------------------------------------------------------------ structure
    def is_zero(self):
        return not self.terms

    def degree(self):
        return max((sum(e) for e in self.terms), default=-1)

    def __eq__(self, other):
        if not isinstance(other, TensorPoly):
            return NotImplemented
        if self.nvars != other.nvars or self.shape != other.shape:
            return False
        keys = set(self.terms) | set(other.terms)
        for e in keys:
            a = self.terms.get(e)
            b = other.terms.get(e)
            if a is None:
                if not _is_zero_array(b):
                    return False
            elif b is None:
                if not _is_zero_array(a):
                    return False
            elif not _is_zero_array(a - b):
                return False
        return True

    def __hash__(self):  # pragma: no cover - dict use only via identity
        raise TypeError("TensorPoly is unhashable")

    # ----------------------------------------------------------- arithmetic
    def __add__(self, other):
        self._check_compat(other)
        out = {e: np.asarray(c, dtype=object).copy()
               for e, c in self.terms.items()}
        for e, c in other.terms.items():
            if e in out:
                s = np.asarray(out[e] + c, dtype=object)
                if _is_zero_array(s):
                    del out[e]
                else:
                    out[e] = s
            else:
                out[e] = np.asarray(c, dtype=object).copy()
        return TensorPoly(self.nvars, self.shape, out)

    def __sub__(self, other):
        return self + other.scale(-1)

    def __neg__(self):
        return self.scale(-1)

    def scale(self, c):
        c = as_rational(c)
        if c == 0:
            return TensorPoly(self.nvars, self.shape)
        return TensorPoly(self.nvars, self.shape,
                          {e: np.asarray(arr * c, dtype=object)
                           for e, arr in self.terms.items()})

    def _check_compat(self, other):
        if self.nvars != other.nvars or self.shape != other.shape:
            raise ValueError("incompatible TensorPoly operands")

    def dot(self, other, axis_self, axis_other, cap=None):
        """Contract one axis of self with one axis of other.

        Output axes: remaining self axes, then remaining other axes.
        Terms of total degree above `cap` are discarded.
        """
        if self.nvars != other.nvars:
            raise ValueError("variable count mismatch")
        axis_self = axis_self % len(self.shape)
        axis_other = axis_other % len(other.shape)
        out = {}
        for e1, c1 in self.terms.items():
            d1 = sum(e1)
            for e2, c2 in other.terms.items():
                if cap is not None and d1 + sum(e2) > cap:
                    continue
                prod = np.tensordot(c1, c2, axes=(axis_self, axis_other))
                key = tuple(a + b for a, b in zip(e1, e2))
                if key in out:
                    out[key] = out[key] + prod
                else:
                    out[key] = prod
        out = {e: c for e, c in out.items() if not _is_zero_array(c)}
        shape = (self.shape[:axis_self] + self.shape[axis_self + 1:]
                 + other.shape[:axis_other] + other.shape[axis_other + 1:])
        return TensorPoly(self.nvars, shape, out)

    def transpose(self, axes):
        return TensorPoly(self.nvars, tuple(self.shape[a] for a in axes),
                          {e: np.transpose(c, axes) for e, c in self.terms.items()})

    # -------------------------------------------------------------- calculus
    def diff(self, var):
        out = {}
        for e, c in self.terms.items():
            if e[var] == 0:
                continue
            ne = list(e)
            ne[var] -= 1
            out[tuple(ne)] = np.asarray(c * QQ(e[var]), dtype=object)
        return TensorPoly(self.nvars, self.shape, out)

    def gradient(self):
        """Stack partial derivatives into a trailing axis of length nvars."""
        out = {}
        for v in range(self.nvars):
            for e, c in self.diff(v).terms.items():
                tgt = out.setdefault(e, _zeros(self.shape + (self.nvars,)))
                tgt[..., v] = tgt[..., v] + c
        out = {e: c for e, c in out.items() if not _is_zero_array(c)}
        return TensorPoly(self.nvars, self.shape + (self.nvars,), out)

    def truncate(self, cap):
        return TensorPoly(self.nvars, self.shape,
                          {e: c for e, c in self.terms.items() if sum(e) <= cap})

    def homogeneous_part(self, deg):
        return TensorPoly(self.nvars, self.shape,
                          {e: c for e, c in self.terms.items() if sum(e) == deg})

    def is_homogeneous(self, deg):
        return all(sum(e) == deg for e in self.terms)

    # ------------------------------------------------------------ evaluation
    def eval(self, point):
        """Exact evaluation at a rational point; returns an object ndarray."""
        point = [as_rational(v) for v in point]
        acc = _zeros(self.shape)
        for e, c in self.terms.items():
            mono = QQ(1)
            for x, k in zip(point, e):
                if k:
                    mono *= x ** k
            acc = acc + c * mono
        return acc

    def evalf(self, point):
        point = np.asarray(point, dtype=float)
        acc = np.zeros(self.shape, dtype=float)
        for e, c in self.terms.items():
            mono = 1.0
            for x, k in zip(point, e):
                if k:
                    mono *= x ** k
            acc += c.astype(float) * mono
        return acc

    def compile_float(self):
        return FloatPoly(self)

    def compose_linear(self, matrix):
        """Substitute x -> matrix @ y (exact); matrix is nvars x nvars rational."""
        matrix = rational_array(matrix)
        rows = [
            TensorPoly(self.nvars, (),
                       {tuple(1 if j == c else 0 for c in range(self.nvars)):
                        np.array(matrix[r, j], dtype=object).reshape(())
                        for j in range(self.nvars) if matrix[r, j] != 0})
            for r in range(self.nvars)
        ]
        out = TensorPoly(self.nvars, self.shape)
        one = TensorPoly.constant(np.array(1), self.nvars)
        pow_cache = {}

        def power(r, k):
            key = (r, k)
            if key not in pow_cache:
                if k == 0:
                    pow_cache[key] = one
                else:
                    pow_cache[key] = scalar_mul(power(r, k - 1), rows[r])
            return pow_cache[key]

        for e, c in self.terms.items():
            factor = one
            for r, k in enumerate(e):
                if k:
                    factor = scalar_mul(factor, power(r, k))
            for fe, fc in factor.terms.items():
                term = c * fc[()] if fc.shape == () else c * fc
                if fe in out.terms:
                    out.terms[fe] = out.terms[fe] + term
                else:
                    out.terms[fe] = term
        out.terms = {e: c for e, c in out.terms.items() if not _is_zero_array(c)}
        return out


def scalar_mul(a, b, cap=None):
    """Product of two scalar-shaped TensorPolys (or scalar * tensor)."""
    if a.shape != () and b.shape == ():
        a, b = b, a
    if a.shape != ():
        raise ValueError("scalar_mul needs at least one scalar operand")
    out = {}
    for e1, c1 in a.terms.items():
        d1 = sum(e1)
        s = c1[()]
        for e2, c2 in b.terms.items():
            if cap is not None and d1 + sum(e2) > cap:
                continue
            key = tuple(x + y for x, y in zip(e1, e2))
            prod = np.asarray(c2 * s, dtype=object)
            if key in out:
                out[key] = out[key] + prod
            else:
                out[key] = prod
    out = {e: np.asarray(c, dtype=object) for e, c in out.items()
           if not _is_zero_array(c)}
    return TensorPoly(a.nvars, b.shape, out)


class FloatPoly:
    """Float-coefficient snapshot of a TensorPoly for fast batched evaluation."""

    def __init__(self, poly):
        self.nvars = poly.nvars
        self.shape = poly.shape
        if poly.terms:
            self.exps = np.array(sorted(poly.terms), dtype=np.int64)
            self.coeffs = np.stack(
                [poly.terms[tuple(e)].astype(float) for e in self.exps])
        else:
            self.exps = np.zeros((0, poly.nvars), dtype=np.int64)
            self.coeffs = np.zeros((0,) + poly.shape)

    def __call__(self, points):
        """points: (..., nvars) real or complex -> (..., *shape)."""
        pts = np.asarray(points)
        batch = pts.shape[:-1]
        if len(self.exps) == 0:
            dt = complex if np.iscomplexobj(pts) else float
            return np.zeros(batch + self.shape, dtype=dt)
        # monomials: (..., nterms)
        monos = np.ones(batch + (len(self.exps),),
                        dtype=complex if np.iscomplexobj(pts) else float)
        for v in range(self.nvars):
            emax = int(self.exps[:, v].max())
            if emax == 0:
                continue
            powers = [np.ones_like(pts[..., v])]
            for _ in range(emax):
                powers.append(powers[-1] * pts[..., v])
            powers = np.stack(powers, axis=-1)
            monos = monos * powers[..., self.exps[:, v]]
        return np.tensordot(monos, self.coeffs, axes=(-1, 0))


def exact_rank(matrix):
    """Rank of a rational matrix by fraction-free Gaussian elimination."""
    rows = [list(r) for r in matrix]
    nrows = len(rows)
    ncols = len(rows[0]) if nrows else 0
    rank = 0
    for col in range(ncols):
        pivot = None
        for r in range(rank, nrows):
            if rows[r][col] != 0:
                pivot = r
                break
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        pv = rows[rank][col]
        for r in range(rank + 1, nrows):
            f = rows[r][col] / pv
            if f != 0:
                rows[r] = [a - f * b for a, b in zip(rows[r], rows[rank])]
        rank += 1
        if rank == nrows:
            break
    return rank


def rational_rref(matrix):
    """Reduced row echelon form over QQ; returns (rref rows, pivot columns)."""
    rows = [list(r) for r in matrix]
    nrows = len(rows)
    ncols = len(rows[0]) if nrows else 0
    pivots = []
    r = 0
    for col in range(ncols):
        pivot = None
        for rr in range(r, nrows):
            if rows[rr][col] != 0:
                pivot = rr
                break
        if pivot is None:
            continue
        rows[r], rows[pivot] = rows[pivot], rows[r]
        pv = rows[r][col]
        rows[r] = [a / pv for a in rows[r]]
        for rr in range(nrows):
            if rr != r and rows[rr][col] != 0:
                f = rows[rr][col]
                rows[rr] = [a - f * b for a, b in zip(rows[rr], rows[r])]
        pivots.append(col)
        r += 1
        if r == nrows:
            break
    return rows[:r], pivots


def rational_nullspace(matrix, ncols):
    """Basis (list of QQ lists) of the nullspace of a rational matrix."""
    if not matrix:
        basis = []
        for j in range(ncols):
            v = [QQ(0)] * ncols
            v[j] = QQ(1)
            basis.append(v)
        return basis
    rref, pivots = rational_rref(matrix)
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for fc in free:
        v = [QQ(0)] * ncols
        v[fc] = QQ(1)
        for r, pc in enumerate(pivots):
            v[pc] = -rref[r][fc]
        basis.append(v)
    return basis


def rational_solve(matrix, rhs):
    """Solve an (possibly overdetermined, consistent) rational system exactly.

    Returns the solution vector, or None if the system is inconsistent.
    """
    nrows = len(matrix)
    ncols = len(matrix[0]) if nrows else 0
    aug = [list(matrix[r]) + [rhs[r]] for r in range(nrows)]
    rref, pivots = rational_rref(aug)
    if ncols in pivots:
        return None  # pivot in the rhs column: inconsistent
    x = [QQ(0)] * ncols
    for r, pc in enumerate(pivots):
        x[pc] = rref[r][ncols]
    # verify exactly (guards against free-variable rows we zeroed)
    for r in range(nrows):
        acc = QQ(0)
        for c in range(ncols):
            if matrix[r][c] != 0:
                acc += matrix[r][c] * x[c]
        if acc != rhs[r]:
            return None
    return x


def binomial(n, k):
    return math.comb(n, k)


def monomials_of_degree(nvars, deg):
    """All exponent tuples of total degree deg, lexicographic order."""
    out = []

    def rec(prefix, remaining, slots):
        if slots == 1:
            out.append(tuple(prefix + [remaining]))
            return
        for k in range(remaining, -1, -1):
            rec(prefix + [k], remaining - k, slots - 1)

    if nvars == 0:
        return [()] if deg == 0 else []
    rec([], deg, nvars)
    return out
