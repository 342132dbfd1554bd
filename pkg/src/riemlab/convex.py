"""Convex bodies on chart manifolds: membership, tangent cones, hulls, audits.

Bodies are membership oracles: a smooth sublevel set {f <= 0} with a gradient
callable, or a finite point cloud closed under a few rounds of the geodesic
hull iteration.  Tangent cones are sampled with an exponential-probe ladder
t, t/2, t/4 (labels must be stable across the ladder); the maximal linear
part is found by refining antipodal direction pairs until both sides of the
probe stay in the body, then thresholding singular values of the surviving
pair directions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import cKDTree

from .exceptional import direction_grid, householder_basis
from .geodesics import (
    JacobiSystem,
    NoMinimizerError,
    exp_map_batch,
    exp_map_points_batch,
    minimizing_geodesic,
)
from .metrics import DomainError


class BodyError(ValueError):
    pass


class BoundaryGeodesicError(RuntimeError):
    """Raised when an audit needs a geodesic running in the body and none does."""


@dataclass
class ConvexBody:
    metric: object
    kind: str                      # "sublevel" | "cloud"
    name: str = "body"
    f: object = None               # batched callable, sublevel mode
    grad: object = None
    delta_mem: float = 1e-6
    cloud: np.ndarray = None
    closure: np.ndarray = None     # cloud closed under hull iteration
    closure_level: int = 3
    net_h: float = None

    def values(self, P):
        """Signed membership values; <= 0 means inside up to the band."""
        P = np.asarray(P, dtype=float)
        if self.kind == "sublevel":
            return np.asarray(self.f(P), dtype=float)
        tree = cKDTree(self.closure)
        d, _ = tree.query(P.reshape(-1, self.metric.m))
        band = 1.5 * self.net_h
        return (d - band).reshape(P.shape[:-1])

    def interior_anchor(self):
        if self.kind == "cloud":
            return np.mean(self.closure, axis=0)
        pts = self.metric.domain.sample_points(n_grid=6, n_random=256, seed=3)
        vals = self.values(pts)
        return pts[int(np.argmin(vals))]


def contains(B, p):
    """Membership trit: 'inside', 'boundary-band', or 'outside'."""
    p = np.asarray(p, dtype=float)
    if not B.metric.domain.contains(p):
        raise DomainError("point outside the chart domain")
    v = float(B.values(p))
    if v < -B.delta_mem:
        return "inside"
    if v <= B.delta_mem:
        return "boundary-band"
    return "outside"


def _member_mask(B, P, slack=0.0):
    return B.values(P) <= B.delta_mem + slack


def sublevel_body(M, f, grad=None, name="sublevel", delta_mem=1e-6,
                  check_convexity=True, seed=0, pairs=16):
    body = ConvexBody(metric=M, kind="sublevel", name=name, f=f, grad=grad,
                      delta_mem=delta_mem)
    if check_convexity:
        _convexity_spot_check(body, seed=seed, pairs=pairs)
    return body


def cloud_body(M, points, closure_level=3, net_h=None, name="cloud",
               delta_mem=None, seed=0):
    points = np.asarray(points, dtype=float)
    if net_h is None:
        net_h = M.domain.scale / 200.0
    if closure_level > 0 and len(points) > 1:
        result = hull_iterate(M, points, rounds=closure_level, density=250,
                              net_h=net_h, seed=seed)
        closure = result.clouds[-1]
    else:
        closure = points
    body = ConvexBody(metric=M, kind="cloud", name=name, cloud=points,
                      closure=closure, closure_level=closure_level,
                      net_h=net_h,
                      delta_mem=delta_mem if delta_mem is not None else 0.0)
    return body


def _convexity_spot_check(body, seed=0, pairs=16, samples_per=7, slack=None):
    """Random member pairs; sampled minimizing geodesics must stay members."""
    M = body.metric
    rng = np.random.default_rng(seed)
    pts = M.domain.lo + (M.domain.hi - M.domain.lo) * rng.random((4096, M.m))
    members = pts[body.values(pts) < -body.delta_mem]
    if len(members) < 2:
        raise BodyError("body %r has no sampled interior" % body.name)
    count = 0
    tries = 0
    while count < pairs and tries < pairs * 4:
        tries += 1
        i, j = rng.integers(0, len(members), 2)
        if i == j:
            continue
        p, q = members[i], members[j]
        try:
            res = minimizing_geodesic(M, p, q, grid=0)
        except NoMinimizerError:
            continue
        path = res.paths[0]
        ts = np.linspace(0, 1, samples_per + 2)[1:-1]
        vals = body.values(path.position(ts))
        tol = slack if slack is not None else max(10 * body.delta_mem, 1e-8)
        if np.any(vals > tol):
            raise BodyError("body %r failed the convexity spot-check "
                            "(violation %.3e)" % (body.name, float(np.max(vals))))
        count += 1
    return True


# --------------------------------------------------------------------------
# tangent cones
# --------------------------------------------------------------------------

@dataclass
class ConeSample:
    point: np.ndarray
    t0: float
    directions: np.ndarray          # g-unit probe directions (chart coords)
    generator_mask: np.ndarray
    generators: np.ndarray
    pair_vectors: np.ndarray        # refined +/- generator directions
    linear_basis: np.ndarray        # estimated maximal linear subspace
    rank: int
    resolution: float               # angular resolution delta_mem / (t0/4)


def _g_normalize(M, p, dirs):
    g = M.g(p)
    norms = np.sqrt(np.einsum("bi,ij,bj->b", dirs, g, dirs))
    return dirs / norms[:, None]


def _ladder_violation(B, p, dirs, t0, steps=8):
    """Max membership violation over the ladder t0, t0/2, t0/4 per direction."""
    pts = exp_map_points_batch(B.metric, p, dirs * t0, T=1.0, steps=steps,
                               n_save=4)
    # saved fractions 0, 1/4, 1/2, 3/4, 1 of t0
    probes = pts[:, (1, 2, 4), :]
    vals = B.values(probes.reshape(-1, B.metric.m)).reshape(len(dirs), 3)
    return np.max(vals, axis=1)


def _project_to_face(B, p, v):
    """Project a direction onto the gradient null space (better refinement
    seeds for sublevel bodies); returns v unchanged without a gradient."""
    if B.kind != "sublevel" or B.grad is None:
        return v
    gvec = np.asarray(B.grad(p), dtype=float)
    ng = np.linalg.norm(gvec)
    if ng < 1e-12:
        return v
    w = v - (v @ gvec) / ng ** 2 * gvec
    nw = np.linalg.norm(w)
    return v if nw < 1e-8 else w / nw


def tangent_cone_sample(B, p, directions=64, t0=None, refine=True,
                        rank_rel=1e-2):
    """Sample the tangent cone at a boundary point by exponential probes.

    Generators are directions whose whole ladder stays in the body (within
    the membership band).  The maximal linear part collects refined
    directions whose opposite also stays in; its rank comes from singular-
    value thresholding of the surviving pair vectors.
    """
    if directions < 64:
        raise ValueError("need at least 64 probe directions")
    M = B.metric
    m = M.m
    p = np.asarray(p, dtype=float)
    if t0 is None:
        t0 = 0.04 * M.domain.scale
    status = contains(B, p)
    if status == "outside":
        raise BodyError("cone sampling needs a body point")
    if status == "inside" and float(B.values(p)) < -10 * B.delta_mem:
        # interior: the cone is the whole tangent space
        eye = np.eye(m)
        return ConeSample(point=p, t0=t0, directions=eye,
                          generator_mask=np.ones(m, bool), generators=eye,
                          pair_vectors=eye, linear_basis=np.eye(m), rank=m,
                          resolution=0.0)

    dirs = direction_grid(m, directions)
    dirs = np.vstack([dirs, -dirs])
    dirs = _g_normalize(M, p, dirs)
    viol = _ladder_violation(B, p, dirs, t0)
    gen_mask = viol <= B.delta_mem
    generators = dirs[gen_mask]

    pair_vectors = []
    if refine:
        n = len(dirs) // 2
        pair_viol = np.maximum(viol[:n], viol[n:])
        order = np.argsort(pair_viol)
        budget = max(4 * m, 16)
        candidates = list(order[:budget])
        for i in candidates:
            v0 = _project_to_face(B, p, dirs[i])
            v0 = _g_normalize(M, p, v0[None, :])[0]
            basis = householder_basis(v0)

            def score(theta):
                v = v0 + basis @ theta
                v = _g_normalize(M, p, v[None, :])[0]
                both = np.vstack([v, -v])
                return float(np.max(_ladder_violation(B, p, both, t0)))

            if score(np.zeros(m - 1)) > B.delta_mem:
                res = minimize(score, np.zeros(m - 1), method="Nelder-Mead",
                               options={"maxiter": 40, "xatol": 1e-6,
                                        "fatol": 1e-14})
                if res.fun > B.delta_mem:
                    continue
                v0 = _g_normalize(M, p, (v0 + basis @ res.x)[None, :])[0]
            # independent re-check at half the probe scale
            both = np.vstack([v0, -v0])
            if np.max(_ladder_violation(B, p, both, t0 / 2)) <= B.delta_mem:
                pair_vectors.append(v0)

    if pair_vectors:
        V = np.array(pair_vectors)
        _, svals, Vt = np.linalg.svd(V)
        rank = int(np.sum(svals > rank_rel * svals[0]))
        basis = Vt[:rank].T
    else:
        V = np.zeros((0, m))
        rank = 0
        basis = np.zeros((m, 0))
    res_angle = B.delta_mem / (t0 / 4)
    return ConeSample(point=p, t0=t0, directions=dirs,
                      generator_mask=gen_mask, generators=generators,
                      pair_vectors=V, linear_basis=basis, rank=rank,
                      resolution=res_angle)


@dataclass
class ExtremeVerdict:
    extreme: bool
    witness: np.ndarray = None
    probe_scale: float = 0.0
    violation: float = 0.0


def classify_extreme(B, p, directions=64, t0=None):
    """Non-extreme iff a refined direction keeps both exp(+tv) and exp(-tv)
    in the body along the whole ladder; the witness direction is returned."""
    M = B.metric
    m = M.m
    p = np.asarray(p, dtype=float)
    if t0 is None:
        t0 = 0.04 * M.domain.scale
    if contains(B, p) == "outside":
        raise BodyError("classification needs a body point")
    dirs = direction_grid(m, max(directions, 64))
    dirs = _g_normalize(M, p, dirs)
    both = np.vstack([dirs, -dirs])
    viol = _ladder_violation(B, p, both, t0)
    n = len(dirs)
    pair_viol = np.maximum(viol[:n], viol[n:])
    best = float(np.min(pair_viol))
    if best <= B.delta_mem:
        v = dirs[int(np.argmin(pair_viol))]
        return ExtremeVerdict(extreme=False, witness=v, probe_scale=t0,
                              violation=best)
    order = np.argsort(pair_viol)[:max(m + 1, 4)]
    for i in order:
        v0 = _project_to_face(B, p, dirs[i])
        v0 = _g_normalize(M, p, v0[None, :])[0]
        basis = householder_basis(v0)

        def score(theta):
            v = v0 + basis @ theta
            v = _g_normalize(M, p, v[None, :])[0]
            probes = np.vstack([v, -v])
            return float(np.max(_ladder_violation(B, p, probes, t0)))

        if score(np.zeros(m - 1)) <= B.delta_mem:
            return ExtremeVerdict(extreme=False, witness=v0, probe_scale=t0,
                                  violation=0.0)
        res = minimize(score, np.zeros(m - 1), method="Nelder-Mead",
                       options={"maxiter": 30, "xatol": 1e-6, "fatol": 1e-14})
        if res.fun <= B.delta_mem:
            v = _g_normalize(M, p, (v0 + basis @ res.x)[None, :])[0]
            return ExtremeVerdict(extreme=False, witness=v, probe_scale=t0,
                                  violation=float(res.fun))
    return ExtremeVerdict(extreme=True, witness=None, probe_scale=t0,
                          violation=best)


# --------------------------------------------------------------------------
# hull iteration
# --------------------------------------------------------------------------

@dataclass
class HullResult:
    clouds: list
    gaps: list                     # directed Hausdorff gap per round
    ambiguous_pairs: int = 0


def _net_decimate(points, cell):
    """Deterministic thinning: keep the first point per grid cell."""
    keys = np.floor(points / cell).astype(np.int64)
    seen = {}
    keep = []
    for i, key in enumerate(map(tuple, keys)):
        if key not in seen:
            seen[key] = True
            keep.append(i)
    return points[keep]


def _connect_pairs_batch(M, P0, P1, steps=48, iters=10):
    """Batched Newton shooting for the chords P0 -> P1; returns velocities
    and a converged mask."""
    B, m = P0.shape
    V = P1 - P0
    scale = max(float(np.max(np.linalg.norm(V, axis=1))), 1e-9)
    delta = 1e-7 * scale
    for _ in range(iters):
        ends, _ = exp_map_batch(M, P0, V, steps=steps)
        F = ends - P1
        err = np.linalg.norm(F, axis=1)
        if np.all(err < 1e-10 * max(scale, 1.0)):
            break
        probes = (V[:, None, :] + delta * np.eye(m)[None, :, :]).reshape(-1, m)
        base = np.repeat(P0, m, axis=0)
        pe, _ = exp_map_batch(M, base, probes, steps=steps)
        pe = pe.reshape(B, m, m)
        Jac = np.swapaxes((pe - ends[:, None, :]) / delta, 1, 2)
        for i in range(B):
            try:
                V[i] = V[i] - np.linalg.solve(Jac[i], F[i])
            except np.linalg.LinAlgError:
                pass
    ends, _ = exp_map_batch(M, P0, V, steps=steps)
    err = np.linalg.norm(ends - P1, axis=1)
    return V, err < 1e-6 * max(scale, 1.0)


def hull_iterate(M, points, rounds=3, density=200, net_h=None, seed=0,
                 samples_per_pair=24):
    """Rounds of 'add all minimizing geodesics between pairs', sampled.

    Each round subsamples at most `density` pairs, connects them with batched
    shooting, adds sampled geodesic points, and decimates to a covering net.
    Pairs where the fast path fails fall back to the full multiple-shooting
    solver; if that returns several branches all of them are added and the
    round is flagged ambiguous.
    """
    points = np.asarray(points, dtype=float)
    if net_h is None:
        net_h = M.domain.scale / 200.0
    rng = np.random.default_rng(seed)
    clouds = [_net_decimate(points, net_h / 2.0)]
    gaps = []
    ambiguous = 0
    for _ in range(rounds):
        Q = clouds[-1]
        nq = len(Q)
        all_pairs = [(i, j) for i in range(nq) for j in range(i + 1, nq)]
        if len(all_pairs) > density:
            idx = rng.choice(len(all_pairs), size=density, replace=False)
            pairs = [all_pairs[i] for i in sorted(idx)]
        else:
            pairs = all_pairs
        new_pts = [Q]
        if pairs:
            P0 = np.array([Q[i] for i, _ in pairs])
            P1 = np.array([Q[j] for _, j in pairs])
            V, ok = _connect_pairs_batch(M, P0, P1)
            if np.any(ok):
                pts = exp_map_points_batch(M, P0[ok], V[ok], steps=48,
                                           n_save=samples_per_pair)
                new_pts.append(pts.reshape(-1, M.m))
            for pi in np.nonzero(~ok)[0]:
                try:
                    res = minimizing_geodesic(M, P0[pi], P1[pi])
                except NoMinimizerError:
                    continue
                if res.ambiguous or len(res.paths) > 1:
                    ambiguous += 1
                for path in res.paths:
                    ts = np.linspace(0, 1, samples_per_pair + 1)
                    new_pts.append(path.position(ts))
        merged = np.vstack(new_pts)
        inside = M.domain.contains_batch(merged)
        merged = merged[inside]
        nxt = _net_decimate(merged, net_h / 2.0)
        tree = cKDTree(clouds[-1])
        d, _ = tree.query(nxt)
        gaps.append(float(np.max(d)) if len(d) else 0.0)
        clouds.append(nxt)
    return HullResult(clouds=clouds, gaps=gaps, ambiguous_pairs=ambiguous)


# --------------------------------------------------------------------------
# audits
# --------------------------------------------------------------------------

@dataclass
class KeyLemmaAudit:
    sample_times: np.ndarray
    cone_rank: int
    parallelism_deviation: float     # symmetric set distance on transported grids
    parallelism_violation: float     # worst membership violation of transported generators
    condition_b_residual: float
    condition_a_residual: float
    linear_basis_frame: np.ndarray


def _set_distance(genA, genB):
    """Symmetric angular set distance between unit direction sets."""
    if len(genA) == 0 and len(genB) == 0:
        return 0.0
    if len(genA) == 0 or len(genB) == 0:
        return math.pi
    dots = np.clip(genA @ genB.T, -1.0, 1.0)
    a_to_b = np.max(np.arccos(np.max(dots, axis=1)))
    b_to_a = np.max(np.arccos(np.max(dots, axis=0)))
    return float(max(a_to_b, b_to_a))


def key_lemma_audit(B, path, samples=5, directions=64, t0=None):
    """Check cone parallelism and the two operator conditions along a
    geodesic running in the body.

    Raises BoundaryGeodesicError if the geodesic does not stay in the body.
    """
    M = B.metric
    m = M.m
    ts_check = np.linspace(path.t0, path.t1, 31)
    vals = B.values(path.position(ts_check))
    if np.any(vals > 10 * max(B.delta_mem, 1e-8)):
        raise BoundaryGeodesicError(
            "no boundary geodesic: the curve leaves the body "
            "(violation %.3e)" % float(np.max(vals)))
    speed = path.speeds()[0]
    if speed < 1e-12:
        raise BoundaryGeodesicError("geodesic is constant")

    system = JacobiSystem(path)
    inset = 0.05 * (system.t_hi - system.t_lo)
    ts = np.linspace(system.t_lo + inset, system.t_hi - inset, samples)
    if t0 is None:
        t0 = 0.04 * M.domain.scale

    cone0 = tangent_cone_sample(B, path.position(ts[0]), directions=directions,
                                t0=t0)
    E0 = system.frame(ts[0])
    g0 = M.g(path.position(ts[0]))
    to_frame0 = E0.T @ g0

    # probe grid in frame components (transported to every sample)
    grid_frame = (to_frame0 @ cone0.directions.T).T
    gen0_frame = (to_frame0 @ cone0.generators.T).T if len(cone0.generators) \
        else np.zeros((0, m))
    gen0_unit = gen0_frame / np.maximum(
        np.linalg.norm(gen0_frame, axis=1, keepdims=True), 1e-300)

    L_frame = to_frame0 @ cone0.linear_basis if cone0.rank else np.zeros((m, 0))
    if cone0.rank:
        Lq, _ = np.linalg.qr(L_frame)
        P_L = Lq @ Lq.T
    else:
        Lq = np.zeros((m, 0))
        P_L = np.zeros((m, m))

    max_set_dev = 0.0
    max_violation = 0.0
    max_b = 0.0
    max_a = 0.0
    for t in ts:
        E = system.frame(t)
        p_t = path.position(t)
        dirs_t = (E @ grid_frame.T).T
        dirs_t = _g_normalize(M, p_t, dirs_t)
        viol = _ladder_violation(B, p_t, dirs_t, t0)
        gen_mask_t = viol <= B.delta_mem
        # transported generators must stay generators
        if len(cone0.generators):
            gens_t = (E @ gen0_frame.T).T
            gens_t = _g_normalize(M, p_t, gens_t)
            gviol = _ladder_violation(B, p_t, gens_t, t0)
            max_violation = max(max_violation, float(np.max(gviol)))
        # symmetric set distance on the shared transported grid
        genA = grid_frame[cone0.generator_mask]
        genB = grid_frame[gen_mask_t]
        genA = genA / np.maximum(np.linalg.norm(genA, axis=1, keepdims=True),
                                 1e-300)
        genB = genB / np.maximum(np.linalg.norm(genB, axis=1, keepdims=True),
                                 1e-300)
        max_set_dev = max(max_set_dev, _set_distance(genA, genB))

        A = system.op(t)
        scaleA = max(np.linalg.norm(A), 1.0)
        if cone0.rank:
            max_b = max(max_b, float(np.linalg.norm(
                (np.eye(m) - P_L) @ A @ P_L)) / scaleA)
            for j in range(Lq.shape[1]):
                w = A @ Lq[:, j]
                nw = np.linalg.norm(w)
                if nw <= 1e-8 * scaleA:
                    continue
                what = w / nw
                if len(gen0_unit):
                    ang = float(np.min(np.arccos(np.clip(
                        gen0_unit @ what, -1, 1))))
                else:
                    ang = math.pi
                max_a = max(max_a, ang)
    return KeyLemmaAudit(sample_times=ts, cone_rank=cone0.rank,
                         parallelism_deviation=max_set_dev,
                         parallelism_violation=max_violation,
                         condition_b_residual=max_b,
                         condition_a_residual=max_a,
                         linear_basis_frame=Lq)


@dataclass
class StrictConvexityReport:
    boundary_points: np.ndarray
    non_extreme: list               # (point, witness, rank)
    flagged: list                   # non-extreme points of rank not in {1}
    extreme_count: int


def boundary_points(B, count, seed=0, anchor=None, bisect_iters=60):
    """Boundary points along chart rays from an interior anchor."""
    M = B.metric
    m = M.m
    anchor = B.interior_anchor() if anchor is None else np.asarray(anchor,
                                                                   float)
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        d = rng.standard_normal(m)
        d /= np.linalg.norm(d)
        lo, hi = 0.0, None
        # find an outside radius inside the chart
        for s in np.linspace(0.05, 1.0, 20) * (M.domain.scale / 2):
            p = anchor + s * d
            if not M.domain.contains(p):
                break
            if float(B.values(p)) > B.delta_mem:
                hi = s
                break
        if hi is None:
            continue
        for _ in range(bisect_iters):
            mid = 0.5 * (lo + hi)
            if float(B.values(anchor + mid * d)) > 0:
                hi = mid
            else:
                lo = mid
        out.append(anchor + 0.5 * (lo + hi) * d)
    return np.array(out)


def strict_convexity_audit(B, samples=60, seed=0, directions=64, t0=None):
    """Classify sampled boundary points; flag non-extreme points whose rank
    is not 1 (a non-generic signature)."""
    pts = boundary_points(B, samples, seed=seed)
    non_extreme = []
    flagged = []
    extreme = 0
    for p in pts:
        verdict = classify_extreme(B, p, directions=directions, t0=t0)
        if verdict.extreme:
            extreme += 1
            continue
        cone = tangent_cone_sample(B, p, directions=max(directions, 64), t0=t0)
        non_extreme.append((p, verdict.witness, cone.rank))
        if cone.rank != 1:
            flagged.append((p, cone.rank))
    return StrictConvexityReport(boundary_points=pts, non_extreme=non_extreme,
                                 flagged=flagged, extreme_count=extreme)


# --------------------------------------------------------------------------
# body catalog
# --------------------------------------------------------------------------

def catalog_body(M, name, params=None):
    params = dict(params or {})
    if name == "ball":
        c = np.asarray(params.get("center", np.zeros(M.m)), dtype=float)
        r = float(params.get("radius", 0.5 * M.domain.scale / 2))

        def f(P):
            P = np.asarray(P, dtype=float)
            return np.sum((P - c) ** 2, axis=-1) - r * r

        def grad(P):
            return 2.0 * (np.asarray(P, dtype=float) - c)

        return sublevel_body(M, f, grad, name="ball",
                             delta_mem=params.get("delta_mem", 1e-6),
                             check_convexity=params.get("check", True))
    if name == "slab":
        a = float(params.get("z_lo", 0.0))
        b = float(params.get("z_hi", 1.0))
        axis = int(params.get("axis", M.m - 1))
        scale = (b - a) / 2

        def f(P):
            z = np.asarray(P, dtype=float)[..., axis]
            return (z - a) * (z - b) / scale ** 2

        def grad(P):
            P = np.asarray(P, dtype=float)
            out = np.zeros_like(P)
            out[..., axis] = (2 * P[..., axis] - a - b) / scale ** 2
            return out

        return sublevel_body(M, f, grad, name="slab",
                             delta_mem=params.get("delta_mem", 1e-6),
                             check_convexity=params.get("check", True))
    if name == "hemisphere-line":
        # {|u| <= 1} x R on the product metric's stereographic sphere chart

        def f(P):
            P = np.asarray(P, dtype=float)
            return P[..., 0] ** 2 + P[..., 1] ** 2 - 1.0

        def grad(P):
            P = np.asarray(P, dtype=float)
            out = np.zeros_like(P)
            out[..., 0] = 2 * P[..., 0]
            out[..., 1] = 2 * P[..., 1]
            return out

        return sublevel_body(M, f, grad, name="hemisphere-line",
                             delta_mem=params.get("delta_mem", 1e-6),
                             check_convexity=params.get("check", True))
    if name == "geodesic-ball":
        radius = float(params.get("radius", 0.5))
        if M.name == "hyperbolic-ball":
            chart_r = math.tanh(radius / 2.0)
        else:
            chart_r = radius
        c = np.asarray(params.get("center", np.zeros(M.m)), dtype=float)

        def f(P):
            P = np.asarray(P, dtype=float)
            return np.sum((P - c) ** 2, axis=-1) - chart_r ** 2

        def grad(P):
            return 2.0 * (np.asarray(P, dtype=float) - c)

        return sublevel_body(M, f, grad, name="geodesic-ball",
                             delta_mem=params.get("delta_mem", 1e-6),
                             check_convexity=params.get("check", True))
    raise BodyError("unknown body %r" % name)
