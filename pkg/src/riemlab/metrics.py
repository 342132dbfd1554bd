"""Chart metrics: catalog, connection, curvature, and Jacobi operator stacks.

A MetricField is a smooth symmetric-positive-definite matrix field on an open
axis-aligned box.  Derivatives come from one of three modes:

* ``exact-polynomial``  -- the metric is I + (stored jet); derivatives are
  exact polynomial differentiation (and exact rational arithmetic at the
  chart center),
* ``analytic-callback`` -- the metric callable is complex-analytic in each
  coordinate; first derivatives use complex-step differentiation and second
  derivatives a Richardson central difference of the complex-step gradient,
* ``finite-difference`` -- Richardson-extrapolated central differences with
  steps eps_mach^(1/3) and eps_mach^(1/4) times the box scale.

All metric callables are vectorized: g(P) accepts (..., m) and returns
(..., m, m).  Operator stacks are expressed in a g-orthonormal frame, so the
stored matrices are plain symmetric matrices and `x` appears as `x_frame`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .polynomials import QQ, TensorPoly, as_rational
from . import jets as jetmod

EPS = np.finfo(float).eps


class CatalogError(ValueError):
    pass


class DomainError(ValueError):
    pass


class StencilError(RuntimeError):
    """Derivative estimation failed (stencil left the domain or too noisy)."""


@dataclass(frozen=True)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    @classmethod
    def cube(cls, half, m):
        return cls(lo=-half * np.ones(m), hi=half * np.ones(m))

    @property
    def m(self):
        return len(self.lo)

    @property
    def scale(self):
        return float(np.min(self.hi - self.lo))

    def contains(self, p, slack=0.0):
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= self.lo - slack) and np.all(p <= self.hi + slack))

    def contains_batch(self, P, slack=0.0):
        P = np.asarray(P, dtype=float)
        return np.all((P >= self.lo - slack) & (P <= self.hi + slack), axis=-1)

    def margin(self, p):
        p = np.asarray(p, dtype=float)
        return float(min(np.min(p - self.lo), np.min(self.hi - p)))

    def sample_points(self, n_grid=4, n_random=64, seed=0):
        center = 0.5 * (self.lo + self.hi)
        chunks = [center[None, :]]
        for shrink in (1.0, 0.5, 0.2):
            lo = center + shrink * (self.lo - center)
            hi = center + shrink * (self.hi - center)
            axes = [np.linspace(a, b, n_grid + 2)[1:-1]
                    for a, b in zip(lo, hi)]
            grid = np.stack(np.meshgrid(*axes, indexing="ij"),
                            axis=-1).reshape(-1, self.m)
            chunks.append(grid)
        rng = np.random.default_rng(seed)
        chunks.append(self.lo + (self.hi - self.lo)
                      * rng.random((n_random, self.m)))
        return np.vstack(chunks)


class MetricField:
    """Metric on a chart box with derivative callables (all batched)."""

    def __init__(self, name, m, domain, mode, gfun, dgfun=None, d2gfun=None,
                 jet=None, params=None, spd_check=True):
        self.name = name
        self.m = m
        self.domain = domain
        self.derivative_mode = mode
        self.params = dict(params or {})
        self.jet = jet
        self._gfun = gfun
        scale = domain.scale
        if dgfun is None:
            if mode == "finite-difference":
                dgfun = _dg_central(gfun, m, scale)
            else:
                dgfun = _dg_complex_step(gfun, m)
        if d2gfun is None:
            if mode == "finite-difference":
                d2gfun = _d2g_central(gfun, m, scale)
            else:
                d2gfun = _d2g_of_dg(dgfun, m, scale)
        self._dgfun = dgfun
        self._d2gfun = d2gfun
        self._cjet = None
        if spd_check:
            self._check_spd()

    # ------------------------------------------------------------- plumbing
    def _check_spd(self):
        pts = self.domain.sample_points()
        gs = self.g(pts)
        sym_err = np.max(np.abs(gs - np.swapaxes(gs, -1, -2)))
        if sym_err > 1e-10:
            raise CatalogError("metric %r is not symmetric (err %.2e)"
                               % (self.name, sym_err))
        eigs = np.linalg.eigvalsh(gs)
        if np.min(eigs) <= 0:
            raise CatalogError("metric %r is not positive definite on its "
                               "domain (min eigenvalue %.3e)" % (self.name,
                                                                 float(np.min(eigs))))

    def g(self, P):
        return self._gfun(np.asarray(P, dtype=float))

    def dg(self, P):
        """(..., m, m, m); last axis is the derivative direction."""
        return self._dgfun(np.asarray(P, dtype=float))

    def d2g(self, P):
        """(..., m, m, m, m); last two axes are derivative directions."""
        return self._d2gfun(np.asarray(P, dtype=float))

    def curvature_jet(self):
        if self.jet is None:
            raise CatalogError("metric %r has no exact jet" % self.name)
        if self._cjet is None:
            self._cjet = jetmod.curvature_jet(self.jet)
        return self._cjet

    def __repr__(self):  # pragma: no cover
        return "MetricField(%r, m=%d, mode=%s)" % (self.name, self.m,
                                                   self.derivative_mode)


# --------------------------------------------------------------------------
# derivative engines
# --------------------------------------------------------------------------

def _dg_complex_step(gfun, m, h=1e-100):
    def dg(P):
        P = np.asarray(P, dtype=float)
        out = np.empty(P.shape[:-1] + (m, m, m))
        for k in range(m):
            Pc = P.astype(complex)
            Pc[..., k] += 1j * h
            out[..., k] = gfun(Pc).imag / h
        return out
    return dg


def _dg_central(gfun, m, scale):
    h = EPS ** (1.0 / 3.0) * scale

    def dg_step(P, step):
        out = np.empty(P.shape[:-1] + (m, m, m))
        for k in range(m):
            dp = np.zeros(m)
            dp[k] = step
            out[..., k] = (gfun(P + dp) - gfun(P - dp)) / (2 * step)
        return out

    def dg(P):
        P = np.asarray(P, dtype=float)
        coarse = dg_step(P, h)
        fine = dg_step(P, h / 2)
        return (4 * fine - coarse) / 3

    return dg


def _d2g_of_dg(dgfun, m, scale):
    h = 2e-5 * max(scale, 1e-6)

    def d2_step(P, step):
        out = np.empty(P.shape[:-1] + (m, m, m, m))
        for l in range(m):
            dp = np.zeros(m)
            dp[l] = step
            out[..., l] = (dgfun(P + dp) - dgfun(P - dp)) / (2 * step)
        return out

    def d2g(P):
        P = np.asarray(P, dtype=float)
        coarse = d2_step(P, h)
        fine = d2_step(P, h / 2)
        return (4 * fine - coarse) / 3

    return d2g


def _d2g_central(gfun, m, scale):
    h = EPS ** (1.0 / 4.0) * scale

    def d2_step(P, step):
        out = np.empty(P.shape[:-1] + (m, m, m, m))
        gs0 = gfun(P)
        for k in range(m):
            dk = np.zeros(m); dk[k] = step
            for l in range(k, m):
                dl = np.zeros(m); dl[l] = step
                if k == l:
                    val = (gfun(P + dk) - 2 * gs0 + gfun(P - dk)) / step ** 2
                else:
                    val = (gfun(P + dk + dl) - gfun(P + dk - dl)
                           - gfun(P - dk + dl) + gfun(P - dk - dl)) / (4 * step ** 2)
                out[..., k, l] = val
                out[..., l, k] = val
        return out

    def d2g(P):
        P = np.asarray(P, dtype=float)
        coarse = d2_step(P, h)
        fine = d2_step(P, h / 2)
        return (4 * fine - coarse) / 3

    return d2g


# --------------------------------------------------------------------------
# connection and curvature（batched）
# --------------------------------------------------------------------------

def metric_eval(M, p):
    p = np.asarray(p, dtype=float)
    if not M.domain.contains(p):
        raise DomainError("point %s is outside the chart domain" % (p,))
    return M.g(p)


def christoffel_batch(M, P):
    g = M.g(P)
    dg = M.dg(P)
    ginv = np.linalg.inv(g)
    # B[s,i,j] = d_i g_sj + d_j g_si - d_s g_ij
    B = (np.einsum("...sji->...sij", dg) + dg
         - np.einsum("...ijs->...sij", dg))
    return 0.5 * np.einsum("...ls,...sij->...lij", ginv, B)


def christoffel(M, p):
    p = np.asarray(p, dtype=float)
    if not M.domain.contains(p):
        raise DomainError("point %s is outside the chart domain" % (p,))
    return christoffel_batch(M, p)


def christoffel_and_grad_batch(M, P):
    g = M.g(P)
    dg = M.dg(P)
    d2g = M.d2g(P)
    ginv = np.linalg.inv(g)
    B = (np.einsum("...sji->...sij", dg) + dg
         - np.einsum("...ijs->...sij", dg))
    gamma = 0.5 * np.einsum("...ls,...sij->...lij", ginv, B)
    dginv = -np.einsum("...la,...abd,...bs->...lsd", ginv, dg, ginv)
    dB = (np.einsum("...sjid->...sijd", d2g) + d2g
          - np.einsum("...ijsd->...sijd", d2g))
    dgamma = (0.5 * np.einsum("...lsd,...sij->...lijd", dginv, B)
              + 0.5 * np.einsum("...ls,...sijd->...lijd", ginv, dB))
    return gamma, dgamma


@dataclass
class CurvatureData:
    """Curvature tensor at a point: Rm[l, i, j, k] = (Rm(e_i, e_j) e_k)^l."""

    point: np.ndarray
    rm: np.ndarray
    christoffel: np.ndarray


def curvature_batch(M, P):
    gamma, dgamma = christoffel_and_grad_batch(M, P)
    first = np.einsum("...ljkd->...dljk", dgamma)
    first = np.einsum("...iljk->...lijk", first)
    gg = np.einsum("...lis,...sjk->...lijk", gamma, gamma)
    rm = (first - np.swapaxes(first, -3, -2)
          + gg - np.swapaxes(gg, -3, -2))
    return rm, gamma


def curvature(M, p):
    p = np.asarray(p, dtype=float)
    if not M.domain.contains(p):
        raise DomainError("point %s is outside the chart domain" % (p,))
    rm, gamma = curvature_batch(M, p)
    return CurvatureData(point=p, rm=rm, christoffel=gamma)


def curvature_operator_coord_batch(M, P, X):
    """Coordinate matrices of v -> Rm(v, x)x, batched over leading dims."""
    rm, _ = curvature_batch(M, P)
    return np.einsum("...lijk,...j,...k->...li", rm, X, X)


def orthonormal_frame(M, p):
    """Columns form a g-orthonormal basis at p (from a Cholesky factor)."""
    g = M.g(np.asarray(p, dtype=float))
    L = np.linalg.cholesky(g)
    return np.linalg.inv(L).T


def to_frame_operator(E, g, op_coord):
    """Express a coordinate (1,1) operator in the frame E (E^T g E = I)."""
    Einv = E.T @ g
    return Einv @ op_coord @ E


def curvature_operator(M, p, x):
    """Order-2 Jacobi operator at (p, x) as a symmetric matrix in a
    g-orthonormal frame; returns (matrix, frame)."""
    p = np.asarray(p, dtype=float)
    x = np.asarray(x, dtype=float)
    if not M.domain.contains(p):
        raise DomainError("point %s is outside the chart domain" % (p,))
    op = curvature_operator_coord_batch(M, p, x)
    E = orthonormal_frame(M, p)
    A = to_frame_operator(E, M.g(p), op)
    return 0.5 * (A + A.T), E


# --------------------------------------------------------------------------
# Jacobi operator stack
# --------------------------------------------------------------------------

@dataclass
class JacobiOperatorStack:
    """Operators of orders 2..k at (p, x), in a g-orthonormal frame at p.

    `operators[i]` follows the raw derivative convention: entry i is the
    (i-2)-nd derivative at 0 of the parallel-transported order-2 operator
    along the geodesic with initial velocity x.  By convention order 1 is 0.
    `symmetry_defect` is the relative asymmetry of the assembled operators
    before symmetrization (exactly zero in exact mode).
    """

    metric: MetricField
    point: np.ndarray
    direction: np.ndarray
    k: int
    frame: np.ndarray
    x_frame: np.ndarray
    operators: dict
    mode: str
    symmetry_defect: float = 0.0

    def operator(self, i):
        if i == 1:
            zero = self.operators[2] * 0
            return zero
        return self.operators[i]

    def as_list(self):
        return [self.operators[i] for i in range(2, self.k + 1)]

    def scale(self):
        return max(float(np.max(np.abs(self.operators[i])))
                   for i in range(2, self.k + 1))


def _stack_exact(M, p, x, k):
    cjet = M.curvature_jet()
    if cjet.k < k:
        cjet = jetmod.curvature_jet(M.jet, upto=k)
    xq = [as_rational(v) for v in np.asarray(x).tolist()]
    ops = {}
    for i in range(2, k + 1):
        ops[i] = cjet.operator_at(xq, i)
    m = M.m
    return JacobiOperatorStack(
        metric=M, point=np.zeros(m), direction=np.asarray(x, dtype=float),
        k=k, frame=np.eye(m), x_frame=np.asarray(x, dtype=float),
        operators=ops, mode="exact")


def _stack_numerical(M, p, x, k, h0, rtol, atol):
    from scipy.integrate import solve_ivp

    m = M.m
    p = np.asarray(p, dtype=float)
    x = np.asarray(x, dtype=float)
    g0 = M.g(p)
    speed = math.sqrt(float(x @ g0 @ x))
    # orders 2..5 use a 9-point stencil at spacing h; order 6 uses a second
    # 9-point stencil at spacing 2.5h (the wider stencil keeps the noise
    # amplification of the fourth derivative in check)
    wide_factor = 2.5
    nhalf = 4 if k <= 5 else int(4 * wide_factor)
    margin = M.domain.margin(p)
    if margin <= 0:
        raise DomainError("stack point is outside the chart domain")
    E0 = orthonormal_frame(M, p)

    def rhs(t, y):
        pos = y[:m]
        vel = y[m:2 * m]
        E = y[2 * m:].reshape(m, m)
        gamma = christoffel_batch(M, pos)
        acc = -np.einsum("lij,i,j->l", gamma, vel, vel)
        dE = -np.einsum("lij,i,jc->lc", gamma, vel, E)
        return np.concatenate([vel, acc, dE.ravel()])

    h_t = h0 / max(speed, 1e-12)
    y0 = np.concatenate([p, x, E0.ravel()])
    lo, hi = M.domain.lo, M.domain.hi

    def exit_event(t, y):
        pos = y[:m]
        return float(min(np.min(pos - lo), np.min(hi - pos)))

    exit_event.terminal = True
    exit_event.direction = -1

    # fit the stencil span to the domain: probe the exit times once, then
    # pick the largest step that keeps all nodes strictly inside
    sols = {}
    ok = True
    for attempt in range(3):
        span = nhalf * h_t
        sols = {}
        shrink = None
        try:
            for sign in (1.0, -1.0):
                sol = solve_ivp(rhs, (0.0, sign * span), y0, method="DOP853",
                                rtol=rtol, atol=atol, dense_output=True,
                                events=exit_event)
                if not sol.success:
                    raise StencilError("stack integration failed at %s" % (p,))
                if sol.t_events[0].size > 0:
                    t_exit = abs(float(sol.t_events[0][0]))
                    shrink = min(shrink or t_exit, t_exit)
                sols[sign] = sol
        except (CatalogError, DomainError, FloatingPointError):
            shrink = (shrink or span) / 4.0
        if shrink is None:
            ok = True
            break
        ok = False
        h_t = 0.85 * shrink / nhalf
        if h_t <= 0:
            break
    if not ok:
        raise StencilError("geodesic stencil leaves the domain at %s" % (p,))

    defect = 0.0

    def eval_op(t):
        nonlocal defect
        sol = sols[1.0] if t >= 0 else sols[-1.0]
        y = sol.sol(t)
        pos, vel = y[:m], y[m:2 * m]
        E = y[2 * m:].reshape(m, m)
        op = curvature_operator_coord_batch(M, pos, vel)
        Afull = E.T @ M.g(pos) @ op @ E
        defect = max(defect, float(np.linalg.norm(Afull - Afull.T)
                                   / max(np.linalg.norm(Afull), 1.0)))
        return 0.5 * (Afull + Afull.T)

    fine_nodes = np.arange(-4, 5) * h_t
    fine = np.stack([eval_op(t) for t in fine_nodes])
    weights_fine = _stencil_weights(min(k, 5) - 2, fine_nodes)
    ops = {}
    for i in range(2, min(k, 5) + 1):
        mat = np.tensordot(weights_fine[i - 2], fine, axes=(0, 0))
        ops[i] = 0.5 * (mat + mat.T)
    if k >= 6:
        wide_nodes = np.arange(-4, 5) * (wide_factor * h_t)
        wide = np.stack([eval_op(t) for t in wide_nodes])
        weights_wide = _stencil_weights(k - 2, wide_nodes)
        for i in range(6, k + 1):
            mat = np.tensordot(weights_wide[i - 2], wide, axes=(0, 0))
            ops[i] = 0.5 * (mat + mat.T)
    return JacobiOperatorStack(
        metric=M, point=p, direction=x, k=k, frame=E0,
        x_frame=E0.T @ g0 @ x, operators=ops, mode="numerical",
        symmetry_defect=defect)


def _stencil_weights(max_order, nodes):
    """Derivative weights 0..max_order at 0 via a local polynomial fit."""
    n = len(nodes)
    V = np.vander(nodes, n, increasing=True)  # V[i, j] = t_i^j
    Vinv = np.linalg.inv(V)
    return [Vinv[j] * math.factorial(j) for j in range(max_order + 1)]


def jacobi_operator_stack(M, p, x, k, mode="auto", h0=0.07,
                          rtol=1e-12, atol=1e-14):
    """Jacobi operators of orders 2..k at (p, x).

    In numerical mode the operators are derivatives at 0 of the parallel-
    transported order-2 operator along the geodesic with initial velocity x;
    in exact mode they are read off the stored curvature jet at the chart
    center.
    """
    x = np.asarray(x, dtype=float)
    if np.allclose(x, 0):
        raise ValueError("direction x must be nonzero")
    if k < 2:
        raise ValueError("stack order must be at least 2")
    at_center = bool(np.allclose(np.asarray(p, dtype=float), 0.0))
    if mode == "auto":
        mode = "exact" if (M.jet is not None and at_center) else "numerical"
    if mode == "exact":
        if M.jet is None:
            raise CatalogError("exact stacks need an exact-polynomial metric")
        if not at_center:
            raise CatalogError("exact stacks are available at the chart center")
        return _stack_exact(M, p, x, k)
    return _stack_numerical(M, p, x, k, h0, rtol, atol)


# --------------------------------------------------------------------------
# catalog
# --------------------------------------------------------------------------

def _euclidean(m, box_half):
    def g(P):
        P = np.asarray(P)
        shape = P.shape[:-1] + (m, m)
        out = np.zeros(shape, dtype=P.dtype)
        idx = np.arange(m)
        out[..., idx, idx] = 1.0
        return out

    def dg(P):
        P = np.asarray(P, dtype=float)
        return np.zeros(P.shape[:-1] + (m, m, m))

    def d2g(P):
        P = np.asarray(P, dtype=float)
        return np.zeros(P.shape[:-1] + (m, m, m, m))

    return MetricField("euclidean", m, Box.cube(box_half, m),
                       "analytic-callback", g, dg, d2g,
                       params={"m": m, "box_half": box_half})


def _sphere_normal_factors(u):
    """f(u) = sin^2(sqrt(u))/u and psi(u) = (u - sin^2 sqrt(u))/u^2, complex-safe."""
    u = np.asarray(u)
    small = np.abs(u) < 1e-2
    useries = np.where(small, u, 0.0)
    psi_series = (1.0 / 3.0 - 2.0 * useries / 45.0 + useries ** 2 / 315.0
                  - 2.0 * useries ** 3 / 14175.0)
    u_safe = np.where(small, 1.0, u)
    s = np.sqrt(u_safe)
    psi_closed = (u_safe - np.sin(s) ** 2) / u_safe ** 2
    psi = np.where(small, psi_series, psi_closed)
    f = 1.0 - u * psi
    return f, psi


def _round_sphere(K, m, chart, box_half):
    if K <= 0:
        raise CatalogError("round-sphere needs K > 0")
    if chart == "normal":
        if box_half is None:
            box_half = 0.9 * math.pi / math.sqrt(K) / math.sqrt(m) / 1.2

        def g(P):
            P = np.asarray(P)
            r2 = np.sum(P * P, axis=-1)
            f, psi = _sphere_normal_factors(K * r2)
            eye = np.eye(m, dtype=P.dtype)
            gp = f[..., None, None] * eye
            gp = gp + (K * psi)[..., None, None] * (P[..., :, None] * P[..., None, :])
            return gp

        return MetricField("round-sphere", m, Box.cube(box_half, m),
                           "analytic-callback", g,
                           params={"K": K, "m": m, "chart": chart})
    if chart == "stereographic":
        R2 = 1.0 / K
        if box_half is None:
            box_half = 2.0 / math.sqrt(K)

        def g(P):
            P = np.asarray(P)
            r2 = np.sum(P * P, axis=-1)
            lam = 4.0 * R2 * R2 / (R2 + r2) ** 2
            eye = np.eye(m, dtype=P.dtype)
            return lam[..., None, None] * eye

        return MetricField("round-sphere", m, Box.cube(box_half, m),
                           "analytic-callback", g,
                           params={"K": K, "m": m, "chart": chart})
    raise CatalogError("unknown sphere chart %r" % chart)


def _hyperbolic_ball(m, box_half):
    if box_half is None:
        box_half = 0.9 / math.sqrt(m)
    if box_half * math.sqrt(m) >= 1.0:
        raise CatalogError("hyperbolic-ball box must stay inside the unit ball")

    def g(P):
        P = np.asarray(P)
        r2 = np.sum(P * P, axis=-1)
        lam = 4.0 / (1.0 - r2) ** 2
        eye = np.eye(m, dtype=P.dtype)
        return lam[..., None, None] * eye

    return MetricField("hyperbolic-ball", m, Box.cube(box_half, m),
                       "analytic-callback", g,
                       params={"m": m, "box_half": box_half})


def _product_sphere_line(K, m, box_half, z_half):
    if m != 3:
        raise CatalogError("product-sphere-line is a 3-dimensional model")
    R2 = 1.0 / K
    if box_half is None:
        box_half = 1.4 / math.sqrt(K)
    z_half = z_half if z_half is not None else 1.5

    def g(P):
        P = np.asarray(P)
        r2 = P[..., 0] ** 2 + P[..., 1] ** 2
        lam = 4.0 * R2 * R2 / (R2 + r2) ** 2
        out = np.zeros(P.shape[:-1] + (3, 3), dtype=P.dtype)
        out[..., 0, 0] = lam
        out[..., 1, 1] = lam
        out[..., 2, 2] = 1.0
        return out

    lo = np.array([-box_half, -box_half, -z_half])
    hi = np.array([box_half, box_half, z_half])
    return MetricField("product-sphere-line", 3, Box(lo, hi),
                       "analytic-callback", g, params={"K": K})


def _revolution_product(c1, c2, m, box_half):
    """Polynomial rotationally-symmetric normal-form metric times a flat factor."""
    c1q, c2q = as_rational(c1), as_rational(c2)
    k = 4 if c2q != 0 else 2
    comps = []
    for i in range(1, k + 1):
        comps.append(TensorPoly.zero(m, (m, m)))

    def q_tensor(power):
        # (s^power) * (s I2 - q q^T) on the first two coordinates, s = |q|^2
        s = TensorPoly(m, (), {})
        for c in range(2):
            e = [0] * m
            e[c] = 2
            s.terms[tuple(e)] = np.array(QQ(1), dtype=object).reshape(())
        from .polynomials import scalar_mul, _zeros
        base_terms = {}
        for a in range(2):
            for c in range(2):
                e = [0] * m
                e[c] += 2
                mat = base_terms.setdefault(tuple(e), _zeros((m, m)))
                mat[a, a] = mat[a, a] + QQ(1)
        for a in range(2):
            for b in range(2):
                e = [0] * m
                e[a] += 1
                e[b] += 1
                mat = base_terms.setdefault(tuple(e), _zeros((m, m)))
                mat[a, b] = mat[a, b] - QQ(1)
        base = TensorPoly(m, (m, m), base_terms)
        out = base
        for _ in range(power):
            out = scalar_mul(s, out)
        return out

    comps[1] = q_tensor(0).scale(c1q)
    if c2q != 0:
        comps[3] = q_tensor(1).scale(c2q)
    jet = jetmod.MetricJet(m, k, tuple(comps))
    if box_half is None:
        box_half = 1.0
    return metric_from_jet(jet, box_half=box_half, name="revolution-product",
                           params={"c1": str(c1q), "c2": str(c2q), "m": m})


def metric_from_jet(jet, box_half=0.8, name="jet-metric", params=None,
                    auto_shrink=True):
    """Metric field I + (jet); the box shrinks until positivity holds."""
    m = jet.m
    gpoly = jet.metric_polynomial()
    g_eval = gpoly.compile_float()
    dg_eval = gpoly.gradient().compile_float()
    d2g_eval = gpoly.gradient().gradient().compile_float()

    def g(P):
        return g_eval(P)

    def dg(P):
        return dg_eval(np.asarray(P, dtype=float))

    def d2g(P):
        return d2g_eval(np.asarray(P, dtype=float))

    attempts = 8 if auto_shrink else 1
    last = None
    for _ in range(attempts):
        try:
            return MetricField(name, m, Box.cube(box_half, m),
                               "exact-polynomial", g, dg, d2g, jet=jet,
                               params=dict(params or {}))
        except CatalogError as exc:
            last = exc
            box_half *= 0.5
    raise last


def _random_normal_jet(m, k, amplitude, seed):
    rng = np.random.default_rng(seed)
    comps = [TensorPoly.zero(m, (m, m))]
    for i in range(2, k + 1):
        comp = TensorPoly.zero(m, (m, m))
        for E in jetmod.component_basis(m, i):
            num = int(rng.integers(-8, 9))
            if num:
                comp = comp + E.scale(QQ(num, 16) * as_rational(amplitude))
        comps.append(comp)
    return jetmod.MetricJet(m, k, tuple(comps))


def _jet_metric(params):
    jet = params.get("jet")
    m = params.get("m", 3)
    if jet is None:
        k = params.get("k", 4)
        amplitude = params.get("amplitude", 0.25)
        seed = params.get("seed")
        if seed is None:
            raise CatalogError("jet-metric needs either a jet or a seed")
        jet = _random_normal_jet(m, k, amplitude, seed)
    box_half = params.get("box_half", 0.8)
    return metric_from_jet(jet, box_half=box_half,
                           params={k: v for k, v in params.items() if k != "jet"})


def _perturbed(params):
    base_name = params.get("base", "euclidean")
    base_params = dict(params.get("base_params", {}))
    base_params.setdefault("m", params.get("m", 3))
    base = catalog_metric(base_name, base_params)
    m = base.m
    amplitude = float(params.get("amplitude", 0.02))
    seed = params.get("seed")
    if seed is None:
        raise CatalogError("perturbed metric needs a seed")
    center = np.asarray(params.get("center", np.zeros(m)), dtype=float)
    radius = float(params.get("radius", 0.75 * base.domain.scale / 2))
    power = 8

    rng = np.random.default_rng(seed)
    mats = []
    for _ in range(m + 1):
        S = rng.standard_normal((m, m))
        S = 0.5 * (S + S.T)
        S /= max(np.linalg.norm(S), 1e-12)
        mats.append(S)
    S0, Slin = mats[0], np.stack(mats[1:])  # Slin[k] multiplies (p - c)_k

    def bump(P):
        P = np.asarray(P)
        s = np.sum((P - center) ** 2, axis=-1) / radius ** 2
        u = 1.0 - s
        mask = np.real(u) > 0
        return np.where(mask, u, 0.0) ** power, u, mask

    def S_of(P):
        P = np.asarray(P)
        d = P - center
        return S0 + np.einsum("...k,kij->...ij", d, Slin)

    def g(P):
        b, _, _ = bump(P)
        return base.g(P) + amplitude * b[..., None, None] * S_of(P)

    def dg(P):
        P = np.asarray(P, dtype=float)
        b, u, mask = bump(P)
        d = P - center
        db = np.where(mask, u, 0.0) ** (power - 1) * power
        db = db[..., None] * (-2.0 * d / radius ** 2)  # (..., m)
        S = S_of(P)
        term1 = np.einsum("...d,...ij->...ijd", db, S)
        term2 = b[..., None, None, None] * np.einsum("dij->ijd", Slin)
        return base.dg(P) + amplitude * (term1 + term2)

    def d2g(P):
        P = np.asarray(P, dtype=float)
        b, u, mask = bump(P)
        d = P - center
        upos = np.where(mask, u, 0.0)
        b1 = power * upos ** (power - 1)
        b2 = power * (power - 1) * upos ** (power - 2)
        du = -2.0 * d / radius ** 2  # (..., m)
        ddb = (np.einsum("...k,...l->...kl", du, du) * b2[..., None, None]
               + b1[..., None, None] * (-2.0 / radius ** 2) * np.eye(m))
        db = b1[..., None] * du
        S = S_of(P)
        out = np.einsum("...kl,...ij->...ijkl", ddb, S)
        out = out + np.einsum("...k,lij->...ijkl", db, Slin)
        out = out + np.einsum("...l,kij->...ijkl", db, Slin)
        return base.d2g(P) + amplitude * out

    name = "perturbed-" + base.name
    return MetricField(name, m, base.domain, "analytic-callback", g, dg, d2g,
                       params={"base": base_name, "amplitude": amplitude,
                               "seed": seed, "radius": radius})


_CATALOG_NAMES = ("euclidean", "round-sphere", "hyperbolic-ball",
                  "product-sphere-line", "revolution-product", "jet-metric",
                  "perturbed")


def catalog_metric(name, params=None):
    """Construct a catalog metric; unknown names and bad parameters raise."""
    params = dict(params or {})
    if name == "euclidean":
        return _euclidean(int(params.get("m", 3)),
                          float(params.get("box_half", 2.0)))
    if name == "round-sphere":
        return _round_sphere(float(params.get("K", 1.0)),
                             int(params.get("m", 2)),
                             params.get("chart", "normal"),
                             params.get("box_half"))
    if name == "hyperbolic-ball":
        return _hyperbolic_ball(int(params.get("m", 2)),
                                params.get("box_half"))
    if name == "product-sphere-line":
        return _product_sphere_line(float(params.get("K", 1.0)),
                                    int(params.get("m", 3)),
                                    params.get("box_half"),
                                    params.get("z_half"))
    if name == "revolution-product":
        return _revolution_product(params.get("c1", "-1/6"),
                                   params.get("c2", "1/60"),
                                   int(params.get("m", 3)),
                                   params.get("box_half"))
    if name == "jet-metric":
        return _jet_metric(params)
    if name == "perturbed":
        return _perturbed(params)
    raise CatalogError("unknown catalog metric %r (known: %s)"
                       % (name, ", ".join(_CATALOG_NAMES)))
