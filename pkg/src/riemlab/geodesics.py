"""Geodesic integration, parallel transport, and Jacobi-field solvers.

The reference integrator is scipy's adaptive DOP853 with dense output; a
fixed-step batched RK4 kernel backs bulk probing (endpoint maps for shooting,
exponential-probe ladders for cones).  Jacobi solves reduce the second-order
equation to a linear system in a parallel orthonormal frame, whose coefficient
matrix is precomputed along the base geodesic and splined.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from .metrics import (
    DomainError,
    christoffel_batch,
    curvature_operator_coord_batch,
    orthonormal_frame,
)

TAU_GEO = 1e-7     # relative energy drift / resolution tolerance
TAU_JAC = 1e-6     # Jacobi residual tolerance (re-substitution)
TAU_CONJ = 1e-8    # reciprocal condition number for conjugate-point refusal
TAU_TIE = 1e-6     # relative near-tie threshold for minimizer ambiguity


class ConjugatePointError(RuntimeError):
    pass


class NoMinimizerError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# geodesic paths
# --------------------------------------------------------------------------

@dataclass
class GeodesicPath:
    metric: object
    ts: np.ndarray
    xs: np.ndarray
    vs: np.ndarray
    sol: object = field(repr=False)
    truncated: bool = False

    @property
    def t0(self):
        return float(self.ts[0])

    @property
    def t1(self):
        return float(self.ts[-1])

    def position(self, t):
        y = self.sol(np.atleast_1d(np.asarray(t, dtype=float)))
        out = y[: self.metric.m].T
        return out[0] if np.isscalar(t) else out

    def velocity(self, t):
        y = self.sol(np.atleast_1d(np.asarray(t, dtype=float)))
        out = y[self.metric.m:].T
        return out[0] if np.isscalar(t) else out

    def speeds(self):
        g = self.metric.g(self.xs)
        return np.sqrt(np.einsum("ti,tij,tj->t", self.vs, g, self.vs))

    def energy_drift(self):
        s = self.speeds()
        return float(np.max(np.abs(s - s[0])) / max(s[0], 1e-300))

    @property
    def length(self):
        s = self.speeds()
        return float(np.trapz(s, self.ts))


def shoot_geodesic(M, p, v, T, n=64, rtol=1e-11, atol=1e-13):
    """Integrate the geodesic from (p, v) over [0, T] with dense output.

    If the path exits the chart domain before T the result is truncated and
    flagged; n >= 8 grid points control the stored sample grid and the
    integrator's maximum step.
    """
    if n < 8:
        raise ValueError("need at least 8 grid steps")
    m = M.m
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    if not M.domain.contains(p):
        raise DomainError("geodesic start lies outside the chart domain")

    def rhs(t, y):
        pos, vel = y[:m], y[m:]
        gamma = christoffel_batch(M, pos)
        return np.concatenate([vel, -np.einsum("lij,i,j->l", gamma, vel, vel)])

    lo, hi = M.domain.lo, M.domain.hi

    def exit_event(t, y):
        pos = y[:m]
        return float(min(np.min(pos - lo), np.min(hi - pos)))

    exit_event.terminal = True
    exit_event.direction = -1

    sol = solve_ivp(rhs, (0.0, T), np.concatenate([p, v]), method="DOP853",
                    rtol=rtol, atol=atol, dense_output=True,
                    events=exit_event, max_step=abs(T) / n * 4)
    truncated = bool(sol.t_events[0].size > 0)
    t_end = sol.t[-1]
    ts = np.linspace(0.0, t_end, n + 1)
    ys = sol.sol(ts)
    return GeodesicPath(metric=M, ts=ts, xs=ys[:m].T, vs=ys[m:].T,
                        sol=sol.sol, truncated=truncated)


# --------------------------------------------------------------------------
# fixed-step batched kernels
# --------------------------------------------------------------------------

def _geodesic_rhs_batch(M, Y):
    m = M.m
    pos, vel = Y[..., :m], Y[..., m:]
    gamma = christoffel_batch(M, pos)
    acc = -np.einsum("...lij,...i,...j->...l", gamma, vel, vel)
    return np.concatenate([vel, acc], axis=-1)


def exp_map_batch(M, P, V, T=1.0, steps=48):
    """Fixed-step RK4 endpoints of geodesics from rows of (P, V) at time T."""
    Y = np.concatenate([np.broadcast_to(P, V.shape).copy(), V], axis=-1)
    h = T / steps
    for _ in range(steps):
        k1 = _geodesic_rhs_batch(M, Y)
        k2 = _geodesic_rhs_batch(M, Y + 0.5 * h * k1)
        k3 = _geodesic_rhs_batch(M, Y + 0.5 * h * k2)
        k4 = _geodesic_rhs_batch(M, Y + h * k3)
        Y = Y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    m = M.m
    return Y[..., :m], Y[..., m:]


def exp_map_points_batch(M, P, V, T=1.0, steps=48, n_save=None):
    """Sampled points along each geodesic, shape (B, n_save + 1, m)."""
    if n_save is None:
        n_save = steps
    stride = max(steps // n_save, 1)
    Y = np.concatenate([np.broadcast_to(P, V.shape).copy(), V], axis=-1)
    h = T / steps
    m = M.m
    saved = [Y[..., :m].copy()]
    for s in range(steps):
        k1 = _geodesic_rhs_batch(M, Y)
        k2 = _geodesic_rhs_batch(M, Y + 0.5 * h * k1)
        k3 = _geodesic_rhs_batch(M, Y + 0.5 * h * k2)
        k4 = _geodesic_rhs_batch(M, Y + h * k3)
        Y = Y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if (s + 1) % stride == 0 or s == steps - 1:
            saved.append(Y[..., :m].copy())
    return np.stack(saved, axis=-2)


# --------------------------------------------------------------------------
# parallel transport
# --------------------------------------------------------------------------

def transport_frames(path, ts, e0=None, rtol=1e-11, atol=1e-13):
    """Parallel frames along the path at the requested times.

    The frame starts as a g-orthonormal basis at path start (or `e0`).
    Returns an array (len(ts), m, m); columns are the transported vectors.
    """
    M = path.metric
    m = M.m
    ts = np.asarray(ts, dtype=float)
    if e0 is None:
        e0 = orthonormal_frame(M, path.position(path.t0))

    def rhs(t, y):
        E = y.reshape(m, m)
        pos = path.position(t)
        vel = path.velocity(t)
        gamma = christoffel_batch(M, pos)
        return (-np.einsum("lij,i,jc->lc", gamma, vel, E)).ravel()

    if np.min(ts) < path.t0 - 1e-12 or np.max(ts) > path.t1 + 1e-12:
        raise ValueError("transport times outside the geodesic span")
    out = np.empty((len(ts), m, m))
    t_hi = float(np.max(ts))
    at_start = np.abs(ts - path.t0) < 1e-15
    out[at_start] = e0
    rest = ~at_start
    if np.any(rest):
        sol = solve_ivp(rhs, (path.t0, t_hi), e0.ravel(), method="DOP853",
                        rtol=rtol, atol=atol, dense_output=True)
        out[rest] = np.moveaxis(sol.sol(ts[rest]), -1, 0).reshape(-1, m, m)
    return out


def parallel_transport(path, v, t_from=None, t_to=None):
    """Transport v from path.position(t_from) to t_to; preserves g-products."""
    t_from = path.t0 if t_from is None else float(t_from)
    t_to = path.t1 if t_to is None else float(t_to)
    M = path.metric
    frames = transport_frames(path, [t_from, t_to])
    # components of v in the transported frame at t_from, carried to t_to
    g_from = M.g(path.position(t_from))
    comps = frames[0].T @ g_from @ np.asarray(v, dtype=float)
    return frames[1] @ comps


# --------------------------------------------------------------------------
# Jacobi systems in a parallel frame
# --------------------------------------------------------------------------

class JacobiSystem:
    """Parallel frame + splined order-2 operator matrix along a geodesic.

    In the frame the Jacobi equation reads a'' + A(t) a = 0 with A(t)
    symmetric; fundamental 2m x 2m propagators are integrated with fixed-step
    RK4 on the spline.
    """

    def __init__(self, path, t_lo=None, t_hi=None, grid_per_unit=256,
                 min_grid=48):
        self.path = path
        M = path.metric
        self.m = M.m
        self.t_lo = path.t0 if t_lo is None else float(t_lo)
        self.t_hi = path.t1 if t_hi is None else float(t_hi)
        if not (path.t0 - 1e-12 <= self.t_lo < self.t_hi <= path.t1 + 1e-12):
            raise ValueError("Jacobi window outside the geodesic span")
        n = max(int(grid_per_unit * (self.t_hi - self.t_lo)), min_grid)
        self.grid = np.linspace(self.t_lo, self.t_hi, n + 1)
        self.frames = transport_frames(path, self.grid)
        pos = path.position(self.grid)
        vel = path.velocity(self.grid)
        ops = curvature_operator_coord_batch(M, pos, vel)
        gs = M.g(pos)
        Einv = np.einsum("tij,tjk->tik", np.swapaxes(self.frames, -1, -2), gs)
        A = np.einsum("tij,tjk,tkl->til", Einv, ops, self.frames)
        A = 0.5 * (A + np.swapaxes(A, -1, -2))
        self._spline = CubicSpline(self.grid, A, axis=0)
        self._frame_spline = CubicSpline(self.grid, self.frames, axis=0)

    def op(self, t):
        return self._spline(t)

    def frame(self, t):
        return self._frame_spline(t)

    def frame_components(self, t, v):
        """Components of a coordinate vector v in the frame at time t."""
        g = self.path.metric.g(self.path.position(t))
        return self.frame(t).T @ g @ np.asarray(v, dtype=float)

    def from_frame(self, t, comps):
        return self.frame(t) @ np.asarray(comps, dtype=float)

    # ------------------------------------------------------------ propagators
    def propagate(self, t0, t1, U, steps_per_unit=512, min_steps=16):
        """RK4 flow of u' = [[0, I], [-A, 0]] u from t0 to t1; U: (2m, ...)."""
        nsteps = max(int(abs(t1 - t0) * steps_per_unit), min_steps)
        h = (t1 - t0) / nsteps
        m = self.m
        t = t0
        U = U.astype(float).copy()

        def rhs(tt, W):
            a, ad = W[:m], W[m:]
            A = self.op(tt)
            return np.concatenate([ad, -A @ a], axis=0)

        for _ in range(nsteps):
            k1 = rhs(t, U)
            k2 = rhs(t + 0.5 * h, U + 0.5 * h * k1)
            k3 = rhs(t + 0.5 * h, U + 0.5 * h * k2)
            k4 = rhs(t + h, U + h * k3)
            U = U + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            t += h
        return U

    def fundamental(self, t0, t1, **kw):
        return self.propagate(t0, t1, np.eye(2 * self.m), **kw)


@dataclass
class JacobiField:
    """Jacobi field values and covariant derivatives on a time grid."""

    path: GeodesicPath
    ts: np.ndarray
    J: np.ndarray      # coordinates, (n, m)
    DJ: np.ndarray     # covariant derivative in coordinates, (n, m)
    a: np.ndarray      # frame components, (n, m)
    adot: np.ndarray
    system: JacobiSystem = field(repr=False, default=None)

    def value(self, idx):
        return self.J[idx]

    def residual(self):
        """Max norm of a'' + A a from 4th-order re-differentiation of a."""
        ts, a = self.ts, self.a
        if len(ts) < 7:
            return 0.0
        h = ts[1] - ts[0]
        # 4th-order central second derivative on the interior
        a2 = (-a[:-4] + 16 * a[1:-3] - 30 * a[2:-2] + 16 * a[3:-1] - a[4:]) \
            / (12 * h ** 2)
        interior = ts[2:-2]
        A = self.system.op(interior)
        res = a2 + np.einsum("tij,tj->ti", A, a[2:-2])
        scale = max(float(np.max(np.abs(a))), 1e-300)
        return float(np.max(np.abs(res))) / scale


def _field_from_frame_solution(path, system, ts, a, adot):
    frames = system.frame(ts)
    J = np.einsum("tij,tj->ti", frames, a)
    DJ = np.einsum("tij,tj->ti", frames, adot)
    return JacobiField(path=path, ts=ts, J=J, DJ=DJ, a=a, adot=adot,
                       system=system)


def jacobi_ivp(path, J0, J0dot, n=None, system=None):
    """Solve the Jacobi equation with initial value and covariant derivative."""
    system = system or JacobiSystem(path)
    ts = np.linspace(system.t_lo, system.t_hi,
                     n + 1 if n else max(len(path.ts), 129))
    a0 = system.frame_components(ts[0], J0)
    ad0 = system.frame_components(ts[0], J0dot)
    m = system.m
    U = np.concatenate([a0, ad0])
    rows = [U.copy()]
    for i in range(len(ts) - 1):
        U = system.propagate(ts[i], ts[i + 1], U)
        rows.append(U.copy())
    rows = np.array(rows)
    return _field_from_frame_solution(path, system, ts, rows[:, :m], rows[:, m:])


def jacobi_bvp(path, a, b, v, w, n=None, system=None, tau_conj=TAU_CONJ):
    """Unique Jacobi field with J(a) = v and J(b) = w.

    Solved from two fundamental solution matrices and one linear solve; the
    reciprocal condition number of the endpoint matrix below `tau_conj`, or a
    near-singular interior endpoint matrix, raises ConjugatePointError.
    """
    system = system or JacobiSystem(path, t_lo=a, t_hi=b)
    m = system.m
    ts = np.linspace(a, b, n + 1 if n else max(len(path.ts), 129))
    va = system.frame_components(a, v)
    wb = system.frame_components(b, w)
    # accumulate fundamental matrices on the grid to watch for conjugate pts
    Phi = np.eye(2 * m)
    phis = [Phi.copy()]
    for i in range(len(ts) - 1):
        Phi = system.propagate(ts[i], ts[i + 1], Phi)
        phis.append(Phi.copy())
    B_end = Phi[:m, m:]
    svals = np.linalg.svd(B_end, compute_uv=False)
    if svals[0] == 0 or svals[-1] / svals[0] < tau_conj:
        raise ConjugatePointError("conjugate points")
    for i in range(2, len(phis)):  # skip the first step, B ~ (t-a) I there
        Bt = phis[i][:m, m:]
        sv = np.linalg.svd(Bt, compute_uv=False)
        if sv[0] > 0 and sv[-1] / sv[0] < tau_conj:
            raise ConjugatePointError("conjugate points")
    App = Phi[:m, :m]
    d = np.linalg.solve(B_end, wb - App @ va)
    U0 = np.concatenate([va, d])
    rows = np.array([ph @ U0 for ph in phis])
    return _field_from_frame_solution(path, system, ts, rows[:, :m], rows[:, m:])


# --------------------------------------------------------------------------
# boundary-value geodesics (shooting)
# --------------------------------------------------------------------------

def _direction_grid(m, count, seed=1234):
    if m == 2:
        angles = np.linspace(0, 2 * math.pi, count, endpoint=False)
        return np.stack([np.cos(angles), np.sin(angles)], axis=-1)
    rng = np.random.default_rng(seed)  # fixed seed: deterministic grid
    dirs = rng.standard_normal((count, m))
    return dirs / np.linalg.norm(dirs, axis=-1, keepdims=True)


@dataclass
class MinimizingGeodesics:
    paths: list
    lengths: list
    ambiguous: bool


def minimizing_geodesic(M, p, q, grid=None, steps=64, tol=1e-10,
                        tau_tie=TAU_TIE, newton_iters=25):
    """All locally minimizing geodesics from p to q, shortest first.

    Multiple shooting: a grid of 8^(m-1) initial directions plus the direct
    chord guess, batched damped Newton on the time-1 endpoint map, followed
    by a conjugate-point filter and a polish with the adaptive integrator.
    Near-ties within `tau_tie` of the best length set the `ambiguous` flag.
    """
    m = M.m
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    for pt in (p, q):
        if not M.domain.contains(pt):
            raise DomainError("endpoint outside the chart domain")
    count = grid if grid is not None else 8 ** (m - 1)
    chord = q - p
    cl = np.linalg.norm(chord)
    inits = [chord]
    if cl > 0 and count:
        dirs = _direction_grid(m, count)
        inits.extend(list(dirs * cl))
    V = np.array(inits)
    scale = max(cl, M.domain.scale * 0.1)

    B = len(V)
    delta = 1e-7 * scale
    for _ in range(newton_iters):
        ends, _ = exp_map_batch(M, p, V, steps=steps)
        F = ends - q
        err = np.linalg.norm(F, axis=-1)
        if np.all(err < tol * max(scale, 1.0)):
            break
        # batched forward-difference Jacobian
        probes = np.concatenate(
            [V[:, None, :] + delta * np.eye(m)[None, :, :]], axis=1)
        pe, _ = exp_map_batch(M, p, probes.reshape(-1, m), steps=steps)
        pe = pe.reshape(B, m, m)
        Jac = (pe - ends[:, None, :]) / delta  # dF/dv_j on axis 1
        Jac = np.swapaxes(Jac, 1, 2)
        upd = np.zeros_like(V)
        for i in range(B):
            try:
                upd[i] = np.linalg.solve(Jac[i], F[i])
            except np.linalg.LinAlgError:
                upd[i] = 0.0
        # damped step: halve while the residual grows
        stepfac = np.ones(B)
        for _ in range(5):
            cand = V - stepfac[:, None] * upd
            ce, _ = exp_map_batch(M, p, cand, steps=steps)
            cerr = np.linalg.norm(ce - q, axis=-1)
            worse = cerr > err
            if not np.any(worse):
                break
            stepfac[worse] *= 0.5
        V = V - stepfac[:, None] * upd

    ends, _ = exp_map_batch(M, p, V, steps=steps)
    err = np.linalg.norm(ends - q, axis=-1)
    near = V[err < 1e-4 * max(scale, 1.0)]
    if len(near) == 0:
        raise NoMinimizerError("shooting failed to connect the endpoints")

    polished = []
    for v in near:
        v = _polish_velocity(M, p, q, v.copy(), scale, iters=6)
        if np.all(np.isfinite(v)):
            polished.append(v)
    uniq = []
    for v in polished:
        if not any(np.linalg.norm(v - u) < 1e-5 * max(np.linalg.norm(u), 1.0)
                   for u in uniq):
            uniq.append(v)

    results = []
    for v in uniq:
        path = shoot_geodesic(M, p, v, 1.0, n=max(64, steps))
        if path.truncated:
            continue
        endgap = np.linalg.norm(path.position(1.0) - q)
        if endgap > 1e-7 * max(scale, 1.0):
            continue
        if _has_interior_conjugate_point(path):
            continue
        g0 = M.g(p)
        length = math.sqrt(float(v @ g0 @ v))
        results.append((length, path))
    if not results:
        raise NoMinimizerError("no locally minimizing geodesic found")
    results.sort(key=lambda lp: lp[0])
    lengths = [lp[0] for lp in results]
    ambiguous = len(results) > 1 and (lengths[1] - lengths[0]) <= tau_tie * max(
        lengths[0], 1e-300)
    return MinimizingGeodesics(paths=[lp[1] for lp in results],
                               lengths=lengths, ambiguous=ambiguous)


def _polish_velocity(M, p, q, v, scale, iters=3):
    """Refine a shooting velocity against the adaptive endpoint map."""
    m = M.m
    delta = 1e-7 * max(scale, 1e-6)
    for _ in range(iters):
        path = shoot_geodesic(M, p, v, 1.0, n=32)
        F = path.position(1.0) - q
        if np.linalg.norm(F) < 1e-12 * max(scale, 1.0):
            break
        Jac = np.empty((m, m))
        for j in range(m):
            vp = v.copy()
            vp[j] += delta
            Jac[:, j] = (shoot_geodesic(M, p, vp, 1.0, n=32).position(1.0)
                         - path.position(1.0)) / delta
        try:
            v = v - np.linalg.solve(Jac, F)
        except np.linalg.LinAlgError:
            break
    return v


def _has_interior_conjugate_point(path, rel=1e-6):
    """Conjugate point strictly inside the span (the endpoint is allowed)."""
    system = JacobiSystem(path, grid_per_unit=64)
    m = system.m
    ts = np.linspace(path.t0, path.t1, 17)
    Phi = np.eye(2 * m)
    for i in range(len(ts) - 2):
        Phi = system.propagate(ts[i], ts[i + 1], Phi, steps_per_unit=128)
        if i >= 1:
            Bt = Phi[:m, m:]
            sv = np.linalg.svd(Bt, compute_uv=False)
            if sv[0] > 0 and sv[-1] / sv[0] < rel:
                return True
    return False
