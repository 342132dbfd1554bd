"""Common exceptional invariant subspaces of Jacobi-operator families.

An operator family lives at a point-direction pair: symmetric matrices
A_2..A_k annihilating the direction x.  Because every A_i maps into x-perp
and preserves it, the family restricts to x-perp; a common invariant
subspace V containing x with 1 < dim V < m exists iff the restricted family
has a nonzero common invariant subspace of dimension at most m - 2, iff the
symmetric commutant of the restriction has dimension at least 2 (the
orthogonal projector onto such a subspace is a non-scalar symmetric
commutant element, and conversely eigenspaces of one are invariant).  The
commutant reduction is validated against a brute-force common-eigenvector
search in the tests.

Numerics: operators whose norm sits below an absolute floor (relative to the
family scale) are treated as zero before the commutant solve; this is what
lets exactly-degenerate families (flat or constant-curvature metrics) be
recognized through derivative-estimation noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .metrics import jacobi_operator_stack

TAU_MARGIN = 1e-7    # relative margin below which a family counts as reducible
TAU_INV = 1e-6       # invariance residual for witness verification
TAU_RANK = 1e-8      # singular-value threshold for the commutant null space
TAU_OP = 1e-6        # operator-norm floor (relative to family scale)
BAND_FACTOR = 10.0   # margins within [tau, band*tau] are inconclusive


def householder_basis(x):
    """Deterministic orthonormal basis of x-perp (columns), via Householder."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    xhat = x / np.linalg.norm(x)
    e = np.zeros(n)
    e[0] = 1.0
    w = xhat + np.sign(xhat[0] if xhat[0] != 0 else 1.0) * e
    if np.linalg.norm(w) < 1e-14:
        H = np.eye(n)
    else:
        w = w / np.linalg.norm(w)
        H = np.eye(n) - 2.0 * np.outer(w, w)
    return H[:, 1:]


def restrict_to_orthogonal(operators, x, tau_annihilate=1e-3):
    """Restrictions B_i = Q^T A_i Q to x-perp; Q is the Householder basis.

    The annihilation check is a misuse guard relative to the family scale;
    derivative-estimation noise on near-zero operators must pass through.
    """
    x = np.asarray(x, dtype=float)
    if np.allclose(x, 0):
        raise ValueError("x must be nonzero")
    Q = householder_basis(x)
    scale = max([np.linalg.norm(np.asarray(A, float)) for A in operators]
                + [1.0])
    Bs = []
    for A in operators:
        A = np.asarray(A, dtype=float)
        if np.linalg.norm(A @ x) > tau_annihilate * scale * np.linalg.norm(x):
            raise ValueError("operator does not annihilate x within tolerance")
        Bs.append(Q.T @ A @ Q)
    return Bs, Q


def _sym_basis(n):
    """Frobenius-orthonormal basis of symmetric n x n matrices."""
    basis = []
    for r in range(n):
        E = np.zeros((n, n))
        E[r, r] = 1.0
        basis.append(E)
    s = 1.0 / math.sqrt(2.0)
    for r in range(n):
        for c in range(r + 1, n):
            E = np.zeros((n, n))
            E[r, c] = s
            E[c, r] = s
            basis.append(E)
    return basis


def _commutator_matrix(Bs, n):
    """Stacked matrix of C -> ([C, B_i])_i in isometric coordinates."""
    basis = _sym_basis(n)
    cols = []
    for F in basis:
        col = []
        for B in Bs:
            K = F @ B - B @ F  # antisymmetric
            for r in range(n):
                for c in range(r + 1, n):
                    col.append(math.sqrt(2.0) * K[r, c])
        cols.append(col)
    if not cols or not cols[0]:
        return np.zeros((1, len(basis))), basis
    return np.array(cols).T, basis


def symmetric_commutant_dim(Bs, tau_rank=TAU_RANK):
    """Dimension and orthonormal basis of {C symmetric : C B_i = B_i C}."""
    Bs = [np.asarray(B, dtype=float) for B in Bs]
    if not Bs:
        raise ValueError("empty family")
    n = Bs[0].shape[0]
    T, basis = _commutator_matrix(Bs, n)
    U, svals, Vt = np.linalg.svd(T)
    nb = len(basis)
    smax = svals[0] if len(svals) else 0.0
    null_coords = []
    for j in range(nb):
        s = svals[j] if j < len(svals) else 0.0
        if smax == 0.0 or s <= tau_rank * smax:
            null_coords.append(Vt[j])
    mats = []
    for coords in null_coords:
        C = sum(c * F for c, F in zip(coords, basis))
        mats.append(C)
    return len(mats), mats


def irreducibility_margin(Bs):
    """(sigma_min of the commutator map restricted to trace-orthogonal
    symmetric matrices, sigma_max of the full map).

    The first entry vanishes exactly when the symmetric commutant has
    dimension at least 2, i.e. when a common invariant subspace exists.
    """
    Bs = [np.asarray(B, dtype=float) for B in Bs]
    n = Bs[0].shape[0]
    T, basis = _commutator_matrix(Bs, n)
    nb = len(basis)
    id_coords = np.zeros(nb)
    for j in range(n):
        id_coords[j] = 1.0
    id_coords /= np.linalg.norm(id_coords)
    W = householder_basis(id_coords)  # (nb, nb-1) orthonormal, perp to identity
    if W.shape[1] == 0:
        return float("inf"), 0.0
    TW = T @ W
    svals = np.linalg.svd(TW, compute_uv=False)
    # the singular values of the restricted map include zeros whenever the
    # codomain is smaller than the domain
    smin = float(svals[-1]) if len(svals) >= TW.shape[1] else 0.0
    smax_full = float(np.linalg.svd(T, compute_uv=False)[0])
    return smin, smax_full


@dataclass
class OperatorFamily:
    """Symmetric operators A_2..A_k annihilating x, plus their restrictions."""

    m: int
    x: np.ndarray
    operators: list
    restricted: list
    basis: np.ndarray  # columns span x-perp
    orders: list

    @classmethod
    def from_operators(cls, x, operators, orders=None):
        x = np.asarray(x, dtype=float)
        Bs, Q = restrict_to_orthogonal(operators, x)
        orders = orders or list(range(2, 2 + len(operators)))
        return cls(m=len(x), x=x, operators=[np.asarray(A, float)
                                             for A in operators],
                   restricted=Bs, basis=Q, orders=orders)

    @classmethod
    def from_stack(cls, stack):
        return cls.from_operators(stack.x_frame, stack.as_list(),
                                  orders=list(range(2, stack.k + 1)))

    def scale(self):
        return max([np.linalg.norm(A) for A in self.operators] + [0.0])

    def effective_restrictions(self, tau_op=TAU_OP):
        """Restrictions above the noise floor (others are treated as zero)."""
        floor = tau_op * max(1.0, self.scale())
        return [B for B in self.restricted if np.linalg.norm(B) > floor]


@dataclass
class ExceptionalityReport:
    verdict: str                 # "exceptional" | "not-exceptional" | "inconclusive"
    margin: float                # relative margin of the restricted family
    commutant_dim: int
    witness: np.ndarray = None   # (m, dim V) orthonormal, frame coordinates
    witness_dim: int = 0
    point: np.ndarray = None
    direction: np.ndarray = None
    direction_frame: np.ndarray = None
    detail: str = ""

    @property
    def exceptional(self):
        return self.verdict == "exceptional"


def _relative_margin(family, tau_op=TAU_OP):
    Bs = family.effective_restrictions(tau_op)
    n = family.m - 1
    if n < 2:
        return float("inf"), 0
    if not Bs:
        return 0.0, (n * (n + 1)) // 2
    smin, smax = irreducibility_margin(Bs)
    floor = tau_op * max(1.0, family.scale())
    if smax <= floor:
        # every survivor is essentially scalar: commutant is everything
        return 0.0, (n * (n + 1)) // 2
    dim, _ = symmetric_commutant_dim(Bs)
    return smin / smax, dim


def _eig_clusters(vals, rel=1e-6, floor=1e-9):
    order = np.argsort(vals)
    vals_sorted = vals[order]
    spread = max(vals_sorted[-1] - vals_sorted[0], floor)
    clusters = [[order[0]]]
    for idx in order[1:]:
        if vals[idx] - vals[clusters[-1][-1]] <= max(rel * spread, floor):
            clusters[-1].append(idx)
        else:
            clusters.append([idx])
    return clusters


def _subset_candidates(clusters, max_dim):
    """All unions of eigenvalue clusters with total dimension in [1, max_dim]."""
    out = []
    ncl = len(clusters)
    for mask in range(1, 2 ** ncl - 1):
        members = [i for i in range(ncl) if mask & (1 << i)]
        dim = sum(len(clusters[i]) for i in members)
        if 1 <= dim <= max_dim:
            out.append(sorted(idx for i in members for idx in clusters[i]))
    out.sort(key=len)
    return out


def _witness_from_commutant(family, commutant, tau_inv=TAU_INV):
    """Extract and verify a subspace V = span{x} + U from a commutant element."""
    n = family.m - 1
    Bs = family.restricted
    best = None
    for C in commutant:
        Cc = C - (np.trace(C) / n) * np.eye(n)
        norm = np.linalg.norm(Cc)
        if best is None or norm > best[0]:
            best = (norm, Cc)
    if best is None or best[0] < 1e-12:
        # commutant is scalars + noise; fall back to any coordinate plane
        U = np.zeros((n, 1))
        U[0, 0] = 1.0
        cands = [U]
    else:
        C = best[1]
        vals, vecs = np.linalg.eigh(C)
        clusters = _eig_clusters(vals)
        cands = [vecs[:, idxs] for idxs in _subset_candidates(clusters, n - 1)]
    xhat = family.x / np.linalg.norm(family.x)
    scale = max(1.0, family.scale())
    for U in cands:
        V = np.column_stack([xhat] + [family.basis @ U[:, j]
                                      for j in range(U.shape[1])])
        Vq, _ = np.linalg.qr(V)
        P = Vq @ Vq.T
        resid = max(np.linalg.norm((np.eye(family.m) - P) @ A @ P)
                    for A in family.operators)
        if resid <= tau_inv * scale:
            return Vq, resid
    return None, None


def exceptional_at(M, p, x, k, mode="auto", tau_margin=TAU_MARGIN,
                   tau_inv=TAU_INV, tau_op=TAU_OP, stack=None):
    """Decide whether the operators of orders 2..k at (p, x) admit a common
    exceptional invariant subspace; returns an ExceptionalityReport.

    The verdict is invariant under rescaling x, so the stack is computed at
    the unit-g-length direction (this keeps operator orders on a common
    scale for the noise floor).
    """
    if stack is None:
        x = np.asarray(x, dtype=float)
        g0 = M.g(np.asarray(p, dtype=float))
        x = x / math.sqrt(float(x @ g0 @ x))
        stack = jacobi_operator_stack(M, p, x, k, mode=mode)
    ops = [np.asarray(A, dtype=float) for A in stack.as_list()]
    family = OperatorFamily.from_operators(stack.x_frame, ops)
    if family.m < 3:
        return ExceptionalityReport(
            verdict="not-exceptional", margin=float("inf"), commutant_dim=1,
            point=np.asarray(p, float), direction=np.asarray(x, float),
            direction_frame=np.asarray(stack.x_frame, float),
            detail="no proper subspace of dimension strictly between 1 and m")
    margin, dim = _relative_margin(family, tau_op)
    report = ExceptionalityReport(
        verdict="inconclusive", margin=margin, commutant_dim=dim,
        point=np.asarray(p, float), direction=np.asarray(x, float),
        direction_frame=np.asarray(stack.x_frame, float))
    if dim >= 2:
        com = _commutant_for_witness(family, tau_op)
        witness, resid = _witness_from_commutant(family, com, tau_inv)
        if witness is not None:
            report.verdict = "exceptional"
            report.witness = witness
            report.witness_dim = witness.shape[1]
            report.detail = "invariance residual %.3e" % resid
            return report
        report.detail = "commutant is nontrivial but no witness verified"
        return report
    if margin > BAND_FACTOR * tau_margin:
        report.verdict = "not-exceptional"
    elif margin <= tau_margin:
        report.detail = "margin below threshold but commutant rank is 1"
    return report


def _commutant_for_witness(family, tau_op):
    Bs = family.effective_restrictions(tau_op)
    n = family.m - 1
    if not Bs:
        return _sym_basis(n)
    _, mats = symmetric_commutant_dim(Bs)
    return mats


# --------------------------------------------------------------------------
# direction grids and scans
# --------------------------------------------------------------------------

def _icosphere(min_count):
    phi = (1.0 + math.sqrt(5.0)) / 2.0
    verts = []
    for s1 in (-1.0, 1.0):
        for s2 in (-1.0, 1.0):
            verts.append([0.0, s1, s2 * phi])
            verts.append([s1, s2 * phi, 0.0])
            verts.append([s2 * phi, 0.0, s1])
    verts = np.unique(np.round(np.array(verts), 12), axis=0)
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = []
    nv = len(verts)
    # faces from proximity: each vertex has 5 nearest neighbours at equal distance
    d2 = np.sum((verts[:, None, :] - verts[None, :, :]) ** 2, axis=-1)
    thresh = np.sort(d2[0])[1] * 1.01
    for i in range(nv):
        for j in range(i + 1, nv):
            if d2[i, j] > thresh:
                continue
            for k in range(j + 1, nv):
                if d2[i, k] <= thresh and d2[j, k] <= thresh:
                    faces.append((i, j, k))
    verts = [tuple(v) for v in verts]
    while len(verts) < min_count:
        new_faces = []
        cache = {}
        vert_list = list(verts)

        def midpoint(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                va = np.array(vert_list[a])
                vb = np.array(vert_list[b])
                vm = va + vb
                vm /= np.linalg.norm(vm)
                vert_list.append(tuple(vm))
                cache[key] = len(vert_list) - 1
            return cache[key]

        for (a, b, c) in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
        verts = vert_list
    return np.array(verts)


def direction_grid(m, count):
    """Quasi-uniform unit directions: circle (m=2), icosahedral refinement
    (m=3), hyperspherical product grid (m=4)."""
    if m == 2:
        ang = np.linspace(0.0, 2 * math.pi, count, endpoint=False)
        return np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    if m == 3:
        return _icosphere(count)
    if m == 4:
        n = max(int(math.ceil(count ** (1.0 / 3.0))), 3)
        t1 = np.linspace(0.15, math.pi - 0.15, n)
        t2 = np.linspace(0.15, math.pi - 0.15, n)
        t3 = np.linspace(0.0, 2 * math.pi, n + 1)[:-1]
        out = []
        for a in t1:
            for b in t2:
                for c in t3:
                    out.append([math.cos(a),
                                math.sin(a) * math.cos(b),
                                math.sin(a) * math.sin(b) * math.cos(c),
                                math.sin(a) * math.sin(b) * math.sin(c)])
        return np.array(out)
    raise ValueError("direction grids support m in {2, 3, 4}")


@dataclass
class DirectionScan:
    min_margin: float
    argmin: np.ndarray
    exceptional_directions: list
    rows: list = field(default_factory=list)


def _family_margin_from_ops(xf, ops, tau_op=TAU_OP):
    family = OperatorFamily.from_operators(xf, ops)
    margin, dim = _relative_margin(family, tau_op)
    return margin, dim


def scan_directions(M, p, k, grid=64, refine=True, tau_margin=TAU_MARGIN,
                    tau_op=TAU_OP, mode="auto"):
    """Margin of the operator family over a direction grid, with local
    refinement of the best cells; reports every direction below tau_margin."""
    if grid < 32:
        raise ValueError("direction grid needs at least 32 points")
    m = M.m
    dirs = direction_grid(m, grid)
    at_center = bool(np.allclose(np.asarray(p, dtype=float), 0.0))
    fast = M.jet is not None and at_center and mode in ("auto", "exact")

    if fast:
        evaluate = M.curvature_jet().operator_evaluator()

        def margin_of(v):
            ops = evaluate(v)[..., :k - 1, :, :]
            return _family_margin_from_ops(v, list(ops))[0]
    else:
        g0 = M.g(np.asarray(p, dtype=float))

        def margin_of(v):
            v = v / math.sqrt(float(v @ g0 @ v))
            stack = jacobi_operator_stack(M, p, v, k, mode="numerical")
            return _family_margin_from_ops(stack.x_frame, stack.as_list())[0]

    rows = []
    margins = np.empty(len(dirs))
    for i, v in enumerate(dirs):
        margins[i] = margin_of(v)
        rows.append({"direction": v, "margin": float(margins[i])})

    best_idx = np.argsort(margins)[:5]
    best = [(float(margins[i]), dirs[i]) for i in best_idx]
    if refine:
        from scipy.optimize import minimize
        for mi, v0 in list(best):
            basis = householder_basis(v0)

            def chart(theta):
                v = v0 + basis @ theta
                return v / np.linalg.norm(v)

            res = minimize(lambda th: margin_of(chart(th)),
                           np.zeros(m - 1), method="Nelder-Mead",
                           options={"maxiter": 60, "xatol": 1e-5,
                                    "fatol": 1e-12})
            cand = chart(res.x)
            val = float(res.fun)
            if val < best[0][0]:
                best.insert(0, (val, cand))
    best.sort(key=lambda t: t[0])
    min_margin, argmin = best[0]
    exc = [dirs[i] for i in range(len(dirs)) if margins[i] <= tau_margin]
    if min_margin <= tau_margin and not any(
            np.allclose(argmin, e) for e in exc):
        exc.insert(0, argmin)
    return DirectionScan(min_margin=float(min_margin), argmin=argmin,
                         exceptional_directions=exc, rows=rows)


# --------------------------------------------------------------------------
# geodesic scans
# --------------------------------------------------------------------------

@dataclass
class GeodesicScan:
    verdict: str               # "exceptional" | "not-exceptional" | "inconclusive"
    witnesses: list            # surviving parallel subspaces (frame coordinates)
    sample_times: np.ndarray
    margins: list              # per-sample stack margins (order k)
    max_invariance_residual: float
    detail: str = ""

    @property
    def exceptional(self):
        return self.verdict == "exceptional"


def scan_geodesic(M, path, k, samples=5, tau_inv=TAU_INV,
                  tau_margin=TAU_MARGIN, tau_op=TAU_OP):
    """Search for a parallel family of exceptional invariant subspaces of the
    order-2 operators along the geodesic.

    Candidates are generated at the first sample from eigenspace-cluster sums
    of the restricted operator, then carried along by parallel transport
    (constant components in the parallel frame) and re-checked for invariance
    at every sample.  Per-sample margins of the order-k stacks are reported.
    """
    if samples < 3:
        raise ValueError("need at least 3 samples")
    from .geodesics import JacobiSystem

    m = M.m
    system = JacobiSystem(path)
    inset = 0.06 * (system.t_hi - system.t_lo)
    ts = np.linspace(system.t_lo + inset, system.t_hi - inset, samples)

    # velocity components in the parallel frame are constant
    v0 = path.velocity(ts[0])
    xf = system.frame_components(ts[0], v0)
    xf_all = [system.frame_components(t, path.velocity(t)) for t in ts]
    drift = max(np.linalg.norm(a - xf) for a in xf_all)

    A_ops = [system.op(t) for t in ts]  # order-2 operators in the frame
    scale = max(max(np.linalg.norm(A) for A in A_ops), 1.0)
    floor = tau_op * scale

    Q = householder_basis(xf)
    B_ops = [Q.T @ A @ Q for A in A_ops]

    def nonscalar_part(B):
        n = B.shape[0]
        return B - (np.trace(B) / n) * np.eye(n)

    candidates = []
    detail = ""
    all_scalar = all(np.linalg.norm(nonscalar_part(B)) <= floor for B in B_ops)
    if all_scalar:
        # every restriction is scalar (flat or constant-curvature): any
        # parallel plane through the velocity is invariant everywhere
        U = Q[:, :1]
        candidates = [np.column_stack([xf / np.linalg.norm(xf), U])]
        detail = "all restricted operators are scalar"
    else:
        src = next(B for B in B_ops
                   if np.linalg.norm(nonscalar_part(B)) > floor)
        vals, vecs = np.linalg.eigh(src)
        clusters = _eig_clusters(vals)
        for idxs in _subset_candidates(clusters, m - 2):
            U = vecs[:, idxs]
            V = np.column_stack([xf / np.linalg.norm(xf), Q @ U])
            Vq, _ = np.linalg.qr(V)
            candidates.append(Vq)

    margins = []
    for t in ts:
        pos = path.position(t)
        vel = path.velocity(t)
        g_t = M.g(pos)
        vel = vel / math.sqrt(float(vel @ g_t @ vel))
        stack = jacobi_operator_stack(M, pos, vel, k, mode="numerical")
        margin, _ = _family_margin_from_ops(stack.x_frame, stack.as_list(),
                                            tau_op)
        margins.append(float(margin))

    survivors = []
    worst = 0.0
    for V in candidates:
        P = V @ V.T
        resid = max(np.linalg.norm((np.eye(m) - P) @ A @ P) for A in A_ops)
        worst = max(worst, resid)
        if resid <= tau_inv * scale:
            survivors.append(V)
    if survivors:
        verdict = "exceptional"
    elif not candidates and min(margins) <= tau_margin:
        verdict = "inconclusive"
        detail = "no candidates but margin below threshold"
    else:
        verdict = "not-exceptional"
    return GeodesicScan(verdict=verdict, witnesses=survivors,
                        sample_times=ts, margins=margins,
                        max_invariance_residual=float(worst),
                        detail=detail or ("frame drift %.2e" % drift))


# --------------------------------------------------------------------------
# randomized survey
# --------------------------------------------------------------------------

def random_curvature_jet(m, k, rng, span=6, denominator=4):
    """Random rational curvature jet drawn coordinate-wise on the slice bases."""
    from .polynomials import QQ, TensorPoly
    from .jets import CurvatureJet, component_basis
    comps = []
    for i in range(2, k + 1):
        comp = TensorPoly.zero(m, (m, m))
        for E in component_basis(m, i):
            num = int(rng.integers(-span, span + 1))
            den = int(rng.integers(1, denominator))
            if num:
                comp = comp + E.scale(QQ(num, den))
        comps.append(comp)
    return CurvatureJet(m, k, tuple(comps))


@dataclass
class SurveyRow:
    sample: int
    k: int
    min_margin: float
    n_exceptional_directions: int
    min_margin_k2: float


@dataclass
class SurveyResult:
    rows: list
    fraction_above_threshold: float
    tau_margin: float
    quantiles: dict


def random_jet_survey(m, k, samples, seed, grid=64, tau_margin=TAU_MARGIN):
    """Sample random curvature jets, rebuild metrics through the exact inverse
    map, and scan directions at the origin for low-margin (reducible) families.

    Every sample's metric is round-trip verified exactly before scanning.
    """
    if m not in (3, 4):
        raise ValueError("survey supports m in {3, 4}")
    if k > 6:
        raise ValueError("survey supports k <= 6")
    from .jets import curvature_jet, normal_jet_from_curvature
    from .metrics import metric_from_jet

    rng = np.random.default_rng(seed)
    rows = []
    for s in range(samples):
        R = random_curvature_jet(m, k, rng)
        jet = normal_jet_from_curvature(R)
        back = curvature_jet(jet)
        for i in range(2, k + 1):
            if not (back.component(i) == R.component(i)):
                raise AssertionError("inverse map round trip failed")
        M = metric_from_jet(jet, name="survey-jet-%d" % s)
        scan = scan_directions(M, np.zeros(m), k, grid=grid,
                               tau_margin=tau_margin)
        scan2 = scan_directions(M, np.zeros(m), 2, grid=grid, refine=False,
                                tau_margin=tau_margin)
        rows.append(SurveyRow(sample=s, k=k, min_margin=scan.min_margin,
                              n_exceptional_directions=len(
                                  scan.exceptional_directions),
                              min_margin_k2=scan2.min_margin))
    margins = np.array([r.min_margin for r in rows])
    frac = float(np.mean(margins > tau_margin))
    qs = {q: float(np.quantile(margins, q)) for q in (0.0, 0.1, 0.5, 0.9, 1.0)}
    return SurveyResult(rows=rows, fraction_above_threshold=frac,
                        tau_margin=tau_margin, quantiles=qs)


# --------------------------------------------------------------------------
# brute-force oracle (independent of the commutant solve)
# --------------------------------------------------------------------------

def brute_force_common_invariant(Bs, tol=1e-9):
    """Decide whether symmetric B's on an n <= 3 space share a nontrivial
    proper invariant subspace, via common-eigenvector search.

    For symmetric families the orthogonal complement of an invariant subspace
    is invariant, so at n <= 3 a common invariant subspace exists iff a
    common eigenvector does.
    """
    Bs = [np.asarray(B, dtype=float) for B in Bs]
    n = Bs[0].shape[0]
    if n > 3:
        raise ValueError("brute force supports n <= 3")
    scale = max(max(np.linalg.norm(B) for B in Bs), 1e-30)
    nonscalar = []
    for B in Bs:
        C = B - (np.trace(B) / n) * np.eye(n)
        if np.linalg.norm(C) > tol * scale * 10:
            nonscalar.append(B)
    if not nonscalar:
        return True

    def is_common_eigvec(v):
        v = v / np.linalg.norm(v)
        for B in Bs:
            w = B @ v
            res = w - (v @ w) * v
            if np.linalg.norm(res) > math.sqrt(tol) * scale:
                return False
        return True

    B0 = nonscalar[0]
    vals, vecs = np.linalg.eigh(B0)
    clusters = _eig_clusters(vals, rel=math.sqrt(tol))
    for idxs in clusters:
        E = vecs[:, idxs]
        dim = E.shape[1]
        if dim == 1:
            if is_common_eigvec(E[:, 0]):
                return True
        elif dim == 2 and n == 3:
            # v in E with (I - P_E) B v = 0 for all B, then eigencheck
            perp = vecs[:, [i for i in range(n) if i not in idxs]]
            rowsys = []
            for B in Bs:
                rowsys.append(perp.T @ B @ E)
            Msys = np.vstack(rowsys)
            _, sv, Vt = np.linalg.svd(Msys)
            null = [Vt[j] for j in range(2)
                    if (j >= len(sv) or sv[j] <= math.sqrt(tol) * scale)]
            if len(null) == 2:
                # off-blocks vanish on E: recurse on the compressed family
                comp = [E.T @ B @ E for B in Bs]
                if brute_force_common_invariant(comp, tol):
                    return True
            elif len(null) == 1:
                if is_common_eigvec(E @ null[0]):
                    return True
    return False
