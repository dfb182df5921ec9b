"""H-representation polytope calculus.

LP-backed containment/emptiness/inclusion queries, Minkowski shrink by an
infinity-norm ball, Fourier-Motzkin projection with LP redundancy pruning,
the one-step controllable predecessor for linear dynamics, maximal control
invariant sets, and N-step backward reachable sets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull

__all__ = [
    "GeometryError",
    "NonConvergenceError",
    "Polytope",
    "LinearDynamics",
    "lp_feasible",
    "contains",
    "subset",
    "chebyshev_center",
    "minkowski_shrink",
    "fm_project",
    "intersect",
    "pre_set",
    "max_control_invariant",
    "backward_reachable",
    "vertices_2d",
    "convex_union_2d",
]

TOL_LP = 1e-9


class GeometryError(ValueError):
    """Ill-posed polytope computation."""


class NonConvergenceError(GeometryError):
    """Fixpoint iteration exceeded its cap."""


@dataclass(frozen=True)
class Polytope:
    """Convex polytope {x | A x <= b}; m may be zero (the whole space)."""

    A: np.ndarray
    b: np.ndarray

    def __init__(self, A, b):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.asarray(b, dtype=float).ravel()
        if A.size == 0:
            A = A.reshape(0, A.shape[1] if A.ndim == 2 and A.shape[1] else 1)
        if A.shape[0] != b.shape[0]:
            raise GeometryError(f"row mismatch: A has {A.shape[0]} rows, b has {b.shape[0]}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise GeometryError("non-finite polytope data")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @classmethod
    def whole_space(cls, dim: int) -> "Polytope":
        return cls(np.zeros((0, dim)), np.zeros(0))

    @classmethod
    def box(cls, lo, hi) -> "Polytope":
        lo = np.asarray(lo, dtype=float).ravel()
        hi = np.asarray(hi, dtype=float).ravel()
        n = lo.size
        return cls(np.vstack([np.eye(n), -np.eye(n)]), np.concatenate([hi, -lo]))

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @property
    def nrows(self) -> int:
        return self.A.shape[0]

    def contains(self, x, tol: float = TOL_LP) -> bool:
        x = np.asarray(x, dtype=float).ravel()
        if x.size != self.dim:
            raise GeometryError(f"point dim {x.size} vs polytope dim {self.dim}")
        if self.nrows == 0:
            return True
        return bool(np.all(self.A @ x <= self.b + tol))

    def is_empty(self, tol: float = TOL_LP) -> bool:
        return not lp_feasible(self, tol=tol)

    def to_dict(self) -> dict:
        return {"A": self.A.tolist(), "b": self.b.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Polytope":
        return cls(np.asarray(d["A"], dtype=float), np.asarray(d["b"], dtype=float))


@dataclass(frozen=True)
class LinearDynamics:
    """Discrete-time linear dynamics x+ = A x + B u."""

    A: np.ndarray
    B: np.ndarray

    def __init__(self, A, B):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.atleast_2d(np.asarray(B, dtype=float))
        if A.shape[0] != A.shape[1] or B.shape[0] != A.shape[0]:
            raise GeometryError(f"incompatible dynamics shapes {A.shape}, {B.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @classmethod
    def double_integrator(cls, T: float) -> "LinearDynamics":
        """Exact discretization of the planar single integrator with step T:
        state (px, py, vx, vy), input (dvx, dvy)."""
        eye = np.eye(2)
        A = np.block([[eye, T * eye], [np.zeros((2, 2)), eye]])
        B = np.vstack([np.zeros((2, 2)), eye])
        return cls(A, B)


def _solve_lp(c, P: Polytope):
    """min c.x over P; returns scipy result. Bounds are free in every variable."""
    if P.nrows == 0:
        # No constraints: feasible, and unbounded unless c == 0.
        class _Free:
            status = 3 if np.any(np.asarray(c) != 0) else 0
            x = np.zeros(P.dim)
            fun = 0.0
            success = not np.any(np.asarray(c) != 0)

        return _Free()
    return linprog(c, A_ub=P.A, b_ub=P.b, bounds=[(None, None)] * P.dim, method="highs")


def lp_feasible(P: Polytope, tol: float = TOL_LP) -> bool:
    """LP feasibility of {A x <= b}."""
    if P.nrows == 0:
        return True
    res = _solve_lp(np.zeros(P.dim), P)
    return bool(res.status == 0 or res.status == 3)


def contains(P: Polytope, x, tol: float = TOL_LP) -> bool:
    return P.contains(x, tol=tol)


def subset(P: Polytope, Q: Polytope, tol: float = TOL_LP, diagnostics: list | None = None) -> bool:
    """P subset of Q via facet-wise support LPs: max q.x over P <= d per row of Q.

    An unbounded support LP is reported as not-subset (with a diagnostic when
    a list is supplied).  An empty P is a subset of everything.
    """
    if P.dim != Q.dim:
        raise GeometryError(f"dimension mismatch {P.dim} vs {Q.dim}")
    if Q.nrows == 0:
        return True
    if P.is_empty(tol=tol):
        return True
    for i in range(Q.nrows):
        res = _solve_lp(-Q.A[i], P)
        if res.status == 3:
            if diagnostics is not None:
                diagnostics.append(f"support LP unbounded along facet {i}")
            return False
        if res.status != 0:
            if diagnostics is not None:
                diagnostics.append(f"support LP failed on facet {i} (status {res.status})")
            return False
        if -res.fun > Q.b[i] + tol:
            if diagnostics is not None:
                diagnostics.append(f"facet {i}: support {-res.fun} exceeds {Q.b[i]}")
            return False
    return True


def set_equal(P: Polytope, Q: Polytope, tol: float = TOL_LP) -> bool:
    return subset(P, Q, tol=tol) and subset(Q, P, tol=tol)


def chebyshev_center(P: Polytope) -> tuple[np.ndarray, float]:
    """Center and radius of the largest inscribed Euclidean ball."""
    if P.nrows == 0:
        raise GeometryError("Chebyshev center of the whole space is undefined")
    norms = np.linalg.norm(P.A, axis=1)
    c = np.zeros(P.dim + 1)
    c[-1] = -1.0
    A = np.hstack([P.A, norms[:, None]])
    res = linprog(c, A_ub=A, b_ub=P.b, bounds=[(None, None)] * P.dim + [(0, None)], method="highs")
    if res.status != 0:
        raise GeometryError(f"Chebyshev LP failed (status {res.status})")
    return res.x[:-1], res.x[-1]


def minkowski_shrink(P: Polytope, delta: float) -> Polytope:
    """Minkowski difference with the infinity-norm ball of radius delta.

    Per-facet offset by the dual-norm support: b_i - delta * ||a_i||_1.
    """
    if delta < 0:
        raise GeometryError(f"delta must be nonnegative, got {delta}")
    if P.nrows == 0:
        return P
    return Polytope(P.A.copy(), P.b - delta * np.abs(P.A).sum(axis=1))


def _drop_trivial_rows(A: np.ndarray, b: np.ndarray, tol: float):
    """Remove near-zero rows; a zero row with negative rhs marks emptiness."""
    norms = np.abs(A).max(axis=1) if A.shape[0] else np.zeros(0)
    zero = norms <= tol
    if np.any(b[zero] < -tol):
        return None
    return A[~zero], b[~zero]


def _prune_redundant(A: np.ndarray, b: np.ndarray, tol: float = TOL_LP):
    """Remove rows implied by the others (support LP per row).

    Rows that cannot be tight anywhere inside the set's bounding box are
    dropped without an LP.
    """
    m, n = A.shape
    if m <= 1:
        return A, b
    # Bounding box of the full system (2n LPs).
    lo = np.full(n, -np.inf)
    hi = np.full(n, np.inf)
    P_all = Polytope(A, b)
    for j in range(n):
        c = np.zeros(n)
        c[j] = 1.0
        res = _solve_lp(c, P_all)
        if res.status == 0:
            lo[j] = res.fun
        res = _solve_lp(-c, P_all)
        if res.status == 0:
            hi[j] = -res.fun
    finite = np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))
    kept = list(range(m))
    if finite:
        support = np.where(A > 0, A * hi, A * lo).sum(axis=1)
        loose = support <= b - 1e-7
        kept = [i for i in kept if not loose[i]]
    i = 0
    while i < len(kept):
        rows = kept[:i] + kept[i + 1:]
        r = kept[i]
        if not rows:
            i += 1
            continue
        sub = Polytope(A[rows], b[rows])
        res = _solve_lp(-A[r], sub)
        if res.status == 0 and -res.fun <= b[r] + tol:
            kept.pop(i)
        else:
            i += 1
    return A[kept], b[kept]


def _normalize_rows(A: np.ndarray, b: np.ndarray):
    norms = np.linalg.norm(A, axis=1)
    norms[norms == 0] = 1.0
    return A / norms[:, None], b / norms


def _dedup_rows(A: np.ndarray, b: np.ndarray):
    """Collapse rows with identical (normalized) directions to the tightest."""
    if A.shape[0] <= 1:
        return A, b
    A, b = _normalize_rows(A, b)
    best: dict = {}
    for i in range(A.shape[0]):
        key = tuple(np.round(A[i], 9))
        if key not in best or b[i] < b[best[key]]:
            best[key] = i
    idx = sorted(best.values())
    return A[idx], b[idx]


def fm_project(P: Polytope, keep, lp_prune: bool = True) -> Polytope:
    """Exact Fourier-Motzkin projection onto the kept coordinates.

    Eliminates the dropped variables one at a time, collapsing duplicate
    directions after each elimination and pruning redundant rows by LP (on
    the final system always; in between only when lp_prune is set).  An
    infeasible input projects to an explicitly empty polytope.
    """
    keep = sorted(keep)
    if any(k < 0 or k >= P.dim for k in keep):
        raise GeometryError(f"keep indices {keep} out of range for dim {P.dim}")
    drop = [j for j in range(P.dim) if j not in keep]
    A, b = P.A.copy(), P.b.copy()
    cols = list(range(P.dim))
    while drop:
        # Eliminate the variable generating the fewest combination rows.
        def _cost(var):
            c = A[:, cols.index(var)]
            return int((c > TOL_LP).sum()) * int((c < -TOL_LP).sum())

        drop.sort(key=_cost)
        var = drop.pop(0)
        j = cols.index(var)
        out = _drop_trivial_rows(A, b, TOL_LP)
        if out is None:
            return _empty_in(len(keep))
        A, b = out
        coeff = A[:, j]
        pos = np.where(coeff > TOL_LP)[0]
        neg = np.where(coeff < -TOL_LP)[0]
        zer = np.where(np.abs(coeff) <= TOL_LP)[0]
        rows = [np.delete(A[zer], j, axis=1)]
        rhs = [b[zer]]
        for ip in pos:
            for ineg in neg:
                # a_p/c_p + a_n/(-c_n) eliminates x_j.
                lam_p, lam_n = 1.0 / coeff[ip], -1.0 / coeff[ineg]
                row = lam_p * A[ip] + lam_n * A[ineg]
                rows.append(np.delete(row, j)[None, :])
                rhs.append(np.atleast_1d(lam_p * b[ip] + lam_n * b[ineg]))
        A = np.vstack(rows) if rows else np.zeros((0, len(cols) - 1))
        b = np.concatenate(rhs) if rhs else np.zeros(0)
        cols.pop(j)
        out = _drop_trivial_rows(A, b, TOL_LP)
        if out is None:
            return _empty_in(len(keep))
        A, b = _dedup_rows(*out)
        if lp_prune:
            A, b = _prune_redundant(A, b)
    # Reorder columns to the requested keep order (already sorted ascending).
    order = [cols.index(k) for k in keep]
    return Polytope(A[:, order], b)


def _empty_in(dim: int) -> Polytope:
    """A canonical explicitly-empty polytope (0 <= -1)."""
    return Polytope(np.zeros((1, dim)), np.array([-1.0]))


def intersect(*polys: Polytope) -> Polytope:
    dims = {p.dim for p in polys}
    if len(dims) != 1:
        raise GeometryError(f"cannot intersect polytopes of dims {dims}")
    return Polytope(np.vstack([p.A for p in polys]), np.concatenate([p.b for p in polys]))


def pre_set(C: Polytope, dyn: LinearDynamics, U: Polytope, lp_prune: bool = True) -> Polytope:
    """States x admitting some u in U with A x + B u in C.

    Built as the projection onto x of {(x,u) | A_C (A x + B u) <= b_C, u in U}.
    """
    n, m = dyn.A.shape[1], dyn.B.shape[1]
    if C.dim != n or U.dim != m:
        raise GeometryError("pre_set dimensions do not match the dynamics")
    rows_x = C.A @ dyn.A
    rows_u = C.A @ dyn.B
    A = np.vstack([
        np.hstack([rows_x, rows_u]),
        np.hstack([np.zeros((U.nrows, n)), U.A]),
    ])
    b = np.concatenate([C.b, U.b])
    return fm_project(Polytope(A, b), keep=range(n), lp_prune=lp_prune)


def max_control_invariant(
    X: Polytope,
    dyn: LinearDynamics,
    U: Polytope,
    tol: float = TOL_LP,
    max_iter: int = 100,
) -> Polytope:
    """Maximal control invariant set contained in X.

    Fixpoint of C_{k+1} = pre(C_k) ∩ C_k starting from C_0 = X; terminates
    when mutual inclusion holds within tol.
    """
    C = X
    for _ in range(max_iter):
        nxt = intersect(pre_set(C, dyn, U, lp_prune=False), C)
        A, b = _dedup_rows(nxt.A, nxt.b)
        A, b = _prune_redundant(A, b, tol)
        nxt = Polytope(A, b)
        if subset(C, nxt, tol=tol):
            # nxt subset of C holds by construction.
            return nxt
        C = nxt
    gap = _max_support_gap(X, C)
    raise NonConvergenceError(
        f"invariant-set iteration did not converge in {max_iter} steps (facet gap {gap:.3e})"
    )


def _max_support_gap(P: Polytope, Q: Polytope) -> float:
    """Max over Q's facets of how far P's support exceeds Q's offset."""
    gap = 0.0
    for i in range(Q.nrows):
        res = _solve_lp(-Q.A[i], P)
        if res.status == 0:
            gap = max(gap, -res.fun - Q.b[i])
    return gap


def backward_reachable(
    target: Polytope,
    N: int,
    constraint: Polytope,
    dyn: LinearDynamics,
    U: Polytope,
) -> Polytope:
    """N-step backward reachable set of ``target`` inside ``constraint``.

    R_0 = target; R_{k+1} = pre(R_k) ∩ constraint.  An empty intermediate set
    is returned as-is (the transition is infeasible).
    """
    if N < 0:
        raise GeometryError(f"N must be nonnegative, got {N}")
    R = target
    for _ in range(N):
        nxt = intersect(pre_set(R, dyn, U, lp_prune=False), constraint)
        out = _drop_trivial_rows(nxt.A, nxt.b, TOL_LP)
        if out is None or not lp_feasible(Polytope(*out) if out[0].size else Polytope.whole_space(nxt.dim)):
            return _empty_in(nxt.dim)
        A, b = _dedup_rows(*out)
        A, b = _prune_redundant(A, b)
        nxt = Polytope(A, b)
        # The recursion has saturated once the set stops changing.
        if set_equal(nxt, R):
            return nxt
        R = nxt
    return R


def vertices_2d(P: Polytope, tol: float = 1e-9) -> np.ndarray:
    """Vertices of a bounded 2D polytope, counterclockwise."""
    if P.dim != 2:
        raise GeometryError("vertex enumeration implemented for 2D only")
    pts = []
    m = P.nrows
    for i in range(m):
        for j in range(i + 1, m):
            M = np.vstack([P.A[i], P.A[j]])
            if abs(np.linalg.det(M)) < 1e-12:
                continue
            v = np.linalg.solve(M, np.array([P.b[i], P.b[j]]))
            if P.contains(v, tol=1e-7):
                pts.append(v)
    if not pts:
        return np.zeros((0, 2))
    pts = np.unique(np.round(np.asarray(pts), 9), axis=0)
    if pts.shape[0] < 3:
        return pts
    hull = ConvexHull(pts)
    return pts[hull.vertices]


def _polygon_area(pts: np.ndarray) -> float:
    if pts.shape[0] < 3:
        return 0.0
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def convex_union_2d(P: Polytope, Q: Polytope, tol: float = 1e-7) -> Polytope:
    """H-representation of P ∪ Q when that union is convex.

    Raises GeometryError when the union is not convex (hull area exceeds
    area(P) + area(Q) - area(P ∩ Q) by more than tol).
    """
    vp, vq = vertices_2d(P), vertices_2d(Q)
    pts = np.vstack([vp, vq])
    hull = ConvexHull(pts)
    hull_area = hull.volume
    inter = intersect(P, Q)
    inter_area = _polygon_area(vertices_2d(inter)) if lp_feasible(inter) else 0.0
    union_area = _polygon_area(vp) + _polygon_area(vq) - inter_area
    if hull_area > union_area + tol:
        raise GeometryError(
            f"union is not convex: hull area {hull_area:.6g} vs union area {union_area:.6g}"
        )
    # hull.equations rows are [a, b, c] with a x + b y + c <= 0.
    A = hull.equations[:, :2]
    b = -hull.equations[:, 2]
    A, b = _normalize_rows(A, b)
    A, b = _prune_redundant(A, b)
    return Polytope(A, b)
