"""Constructive solid geometry in n dimensions.

Domains are finite unions and differences of open balls and capsules,
optionally translated and rescaled.  The module provides exact membership
tests, conservative interior-depth bounds, enclosing radii, boundary
projections with inner normals, approximate diameter realizers, and smooth
volume-preservation-free perturbations ``y = x + theta(x)`` with certified
small C^2 norm.

All queries are deterministic.  Batched variants operate on ``(m, n)`` arrays
of row points and are the workhorses of the quadrature layer; scalar wrappers
accept a single point.

Conventions
-----------
* Membership is open: a point exactly on a surface is outside.  Set
  differences remove the closed subtrahend, so the boundary shell of a hole
  is excluded from the domain.
* ``depth_bound`` is positive inside, negative outside, and conservative:
  the open ball of that radius around an interior point is certified to stay
  inside the domain.
* Inner normals point from the boundary into the domain.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, PreconditionError

__all__ = [
    "Ball",
    "Capsule",
    "Union",
    "Difference",
    "Translate",
    "Scale",
    "Domain",
    "PerturbedDomain",
    "BoundaryPoint",
    "PerturbationField",
    "contains",
    "contains_many",
    "bounding_radius",
    "depth_bound",
    "boundary_nearest",
    "diameter_pair",
    "perturb",
    "deep_point",
    "positive_leaf_components",
    "domain_from_dict",
    "domain_to_dict",
    "load_domain",
]

_EPS_FLIP = 1e-9  # relative probe offset for boundary membership flips


def _as_point(x, n: int) -> np.ndarray:
    p = np.asarray(x, dtype=float).reshape(-1)
    if p.shape != (n,):
        raise PreconditionError(f"expected a point of dimension {n}, got shape {p.shape}")
    return p


# ---------------------------------------------------------------------------
# CSG nodes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Ball:
    """Open ball ``{x : |x - center| < radius}``."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(-1))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0.0:
            raise PreconditionError("ball radius must be positive")


@dataclass(frozen=True)
class Capsule:
    """Open capsule: points within ``radius`` of the segment from ``a`` to ``b``."""

    a: np.ndarray
    b: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float).reshape(-1))
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float).reshape(-1))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0.0:
            raise PreconditionError("capsule radius must be positive")
        if self.a.shape != self.b.shape:
            raise PreconditionError("capsule endpoints must share a dimension")


@dataclass(frozen=True)
class Union:
    left: object
    right: object


@dataclass(frozen=True)
class Difference:
    """Left set minus the *closure* of the right set."""

    left: object
    right: object


@dataclass(frozen=True)
class Translate:
    offset: np.ndarray
    inner: object

    def __post_init__(self):
        object.__setattr__(self, "offset", np.asarray(self.offset, dtype=float).reshape(-1))


@dataclass(frozen=True)
class Scale:
    factor: float
    inner: object

    def __post_init__(self):
        object.__setattr__(self, "factor", float(self.factor))
        if not self.factor > 0.0:
            raise PreconditionError("scale factor must be positive")


def _normalize(node, offset: np.ndarray, factor: float):
    """Push accumulated translation/scaling into the leaves.

    Returns an equivalent tree containing only Ball/Capsule/Union/Difference.
    The map applied to a leaf point p is ``factor * p + offset``.
    """
    if isinstance(node, Ball):
        return Ball(factor * node.center + offset, factor * node.radius)
    if isinstance(node, Capsule):
        return Capsule(factor * node.a + offset, factor * node.b + offset, factor * node.radius)
    if isinstance(node, Union):
        return Union(_normalize(node.left, offset, factor), _normalize(node.right, offset, factor))
    if isinstance(node, Difference):
        return Difference(_normalize(node.left, offset, factor), _normalize(node.right, offset, factor))
    if isinstance(node, Translate):
        return _normalize(node.inner, offset + factor * node.offset, factor)
    if isinstance(node, Scale):
        return _normalize(node.inner, offset, factor * node.factor)
    raise PreconditionError(f"unknown CSG node {type(node).__name__}")


def _leaves(node, sign: int = 1) -> list[tuple[object, int]]:
    """All leaves of a normalized tree with their inclusion parity."""
    if isinstance(node, (Ball, Capsule)):
        return [(node, sign)]
    if isinstance(node, Union):
        return _leaves(node.left, sign) + _leaves(node.right, sign)
    if isinstance(node, Difference):
        return _leaves(node.left, sign) + _leaves(node.right, -sign)
    raise PreconditionError(f"non-normalized node {type(node).__name__}")


def _segment_dist2(X: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Squared distance from each row of X to the segment [a, b]."""
    u = b - a
    uu = float(u @ u)
    if uu == 0.0:
        d = X - a
        return np.einsum("ij,ij->i", d, d)
    t = np.clip((X - a) @ u / uu, 0.0, 1.0)
    d = X - a - t[:, None] * u
    return np.einsum("ij,ij->i", d, d)


def _member(node, X: np.ndarray, closed: bool) -> np.ndarray:
    if isinstance(node, Ball):
        d = X - node.center
        d2 = np.einsum("ij,ij->i", d, d)
        r2 = node.radius * node.radius
        return d2 <= r2 if closed else d2 < r2
    if isinstance(node, Capsule):
        d2 = _segment_dist2(X, node.a, node.b)
        r2 = node.radius * node.radius
        return d2 <= r2 if closed else d2 < r2
    if isinstance(node, Union):
        return _member(node.left, X, closed) | _member(node.right, X, closed)
    if isinstance(node, Difference):
        return _member(node.left, X, closed) & ~_member(node.right, X, not closed)
    raise PreconditionError(f"non-normalized node {type(node).__name__}")


def _depth(node, X: np.ndarray) -> np.ndarray:
    """Conservative signed interior depth (positive inside) for each row."""
    if isinstance(node, Ball):
        d = X - node.center
        return node.radius - np.sqrt(np.einsum("ij,ij->i", d, d))
    if isinstance(node, Capsule):
        return node.radius - np.sqrt(_segment_dist2(X, node.a, node.b))
    if isinstance(node, Union):
        return np.maximum(_depth(node.left, X), _depth(node.right, X))
    if isinstance(node, Difference):
        return np.minimum(_depth(node.left, X), -_depth(node.right, X))
    raise PreconditionError(f"non-normalized node {type(node).__name__}")


def _enclosing_radius(node, center: np.ndarray) -> float:
    if isinstance(node, Ball):
        return float(np.linalg.norm(node.center - center)) + node.radius
    if isinstance(node, Capsule):
        return (
            max(
                float(np.linalg.norm(node.a - center)),
                float(np.linalg.norm(node.b - center)),
            )
            + node.radius
        )
    if isinstance(node, Union):
        return max(_enclosing_radius(node.left, center), _enclosing_radius(node.right, center))
    if isinstance(node, Difference):
        return _enclosing_radius(node.left, center)
    raise PreconditionError(f"non-normalized node {type(node).__name__}")


# ---------------------------------------------------------------------------
# Ray / surface intersection candidates
# ---------------------------------------------------------------------------


def _sphere_roots(o: np.ndarray, D: np.ndarray, c: np.ndarray, r: float) -> np.ndarray:
    """Parameters t of |o + t D - c| = r for unit rows D; (m, 2), NaN when missed."""
    w = o - c
    b = 2.0 * (D @ w)
    c0 = float(w @ w) - r * r
    disc = b * b - 4.0 * c0
    out = np.full((D.shape[0], 2), np.nan)
    hit = disc > 0.0
    if np.any(hit):
        s = np.sqrt(disc[hit])
        out[hit, 0] = (-b[hit] - s) / 2.0
        out[hit, 1] = (-b[hit] + s) / 2.0
    return out


def _capsule_roots(o: np.ndarray, D: np.ndarray, cap: Capsule) -> np.ndarray:
    """Candidate surface parameters for a capsule: cylinder wall + both caps; (m, 6)."""
    m = D.shape[0]
    out = np.full((m, 6), np.nan)
    out[:, 0:2] = _sphere_roots(o, D, cap.a, cap.radius)
    out[:, 2:4] = _sphere_roots(o, D, cap.b, cap.radius)
    u = cap.b - cap.a
    L2 = float(u @ u)
    if L2 > 0.0:
        uhat = u / np.sqrt(L2)
        w = o - cap.a
        Dp = D - np.outer(D @ uhat, uhat)
        wp = w - (w @ uhat) * uhat
        A = np.einsum("ij,ij->i", Dp, Dp)
        B = 2.0 * (Dp @ wp)
        C = float(wp @ wp) - cap.radius * cap.radius
        disc = B * B - 4.0 * A * C
        ok = (A > 1e-14) & (disc > 0.0)
        if np.any(ok):
            s = np.sqrt(disc[ok])
            out[ok, 4] = (-B[ok] - s) / (2.0 * A[ok])
            out[ok, 5] = (-B[ok] + s) / (2.0 * A[ok])
    return out


def _analytic_candidates(root, o: np.ndarray, D: np.ndarray, t_hi: float) -> np.ndarray:
    """Sorted candidate crossing parameters in (0, t_hi) for all leaf surfaces.

    Spurious candidates (surface pieces carved away by the CSG) are harmless:
    callers classify the open intervals between consecutive candidates by a
    membership test at the midpoint.
    """
    blocks = []
    for leaf, _sign in _leaves(root):
        if isinstance(leaf, Ball):
            blocks.append(_sphere_roots(o, D, leaf.center, leaf.radius))
        else:
            blocks.append(_capsule_roots(o, D, leaf))
    ts = np.concatenate(blocks, axis=1)
    lo = 1e-14 * max(t_hi, 1.0)
    ts = np.where((ts > lo) & (ts < t_hi), ts, np.nan)
    ts.sort(axis=1)
    return ts


# ---------------------------------------------------------------------------
# Domain
# ---------------------------------------------------------------------------


@dataclass
class Domain:
    """A CSG solid in ``dimension`` dimensions."""

    dimension: int
    root: object
    _norm: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.dimension = int(self.dimension)
        if self.dimension < 1:
            raise PreconditionError("dimension must be >= 1")
        self._norm = _normalize(self.root, np.zeros(self.dimension), 1.0)
        for leaf, _ in _leaves(self._norm):
            pt = leaf.center if isinstance(leaf, Ball) else leaf.a
            if pt.shape != (self.dimension,):
                raise PreconditionError(
                    f"leaf of dimension {pt.shape[0]} in a domain of dimension {self.dimension}"
                )

    # -- queries ------------------------------------------------------------

    def contains_many(self, X: np.ndarray, closed: bool = False) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return _member(self._norm, X, closed)

    def depth_bound_many(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return _depth(self._norm, X)

    def bounding_radius(self, center) -> float:
        return _enclosing_radius(self._norm, _as_point(center, self.dimension))

    def surface_crossing_candidates(self, origin, D: np.ndarray, t_hi: float) -> np.ndarray:
        o = _as_point(origin, self.dimension)
        return _analytic_candidates(self._norm, o, np.asarray(D, dtype=float), t_hi)

    def leaves(self) -> list[tuple[object, int]]:
        return _leaves(self._norm)

    # -- serialization --------------------------------------------------------

    def to_dict(self) -> dict:
        return {"dimension": self.dimension, "root": _node_to_dict(self.root)}

    @staticmethod
    def from_dict(data: dict) -> "Domain":
        return domain_from_dict(data)


def _node_to_dict(node) -> dict:
    if isinstance(node, Ball):
        return {"type": "ball", "center": list(map(float, node.center)), "radius": node.radius}
    if isinstance(node, Capsule):
        return {
            "type": "capsule",
            "a": list(map(float, node.a)),
            "b": list(map(float, node.b)),
            "radius": node.radius,
        }
    if isinstance(node, Union):
        return {"type": "union", "left": _node_to_dict(node.left), "right": _node_to_dict(node.right)}
    if isinstance(node, Difference):
        return {
            "type": "difference",
            "left": _node_to_dict(node.left),
            "right": _node_to_dict(node.right),
        }
    if isinstance(node, Translate):
        return {
            "type": "translate",
            "offset": list(map(float, node.offset)),
            "inner": _node_to_dict(node.inner),
        }
    if isinstance(node, Scale):
        return {"type": "scale", "factor": node.factor, "inner": _node_to_dict(node.inner)}
    raise PreconditionError(f"unknown CSG node {type(node).__name__}")


def _node_from_dict(data: dict):
    try:
        kind = data["type"]
    except (TypeError, KeyError) as exc:
        raise PreconditionError("CSG node must be an object with a 'type' field") from exc
    try:
        if kind == "ball":
            return Ball(data["center"], data["radius"])
        if kind == "capsule":
            return Capsule(data["a"], data["b"], data["radius"])
        if kind == "union":
            return Union(_node_from_dict(data["left"]), _node_from_dict(data["right"]))
        if kind == "difference":
            return Difference(_node_from_dict(data["left"]), _node_from_dict(data["right"]))
        if kind == "translate":
            return Translate(data["offset"], _node_from_dict(data["inner"]))
        if kind == "scale":
            return Scale(data["factor"], _node_from_dict(data["inner"]))
    except KeyError as exc:
        raise PreconditionError(f"missing field {exc} in '{kind}' node") from exc
    raise PreconditionError(f"unknown CSG node type {kind!r}")


def domain_from_dict(data: dict) -> Domain:
    if not isinstance(data, dict) or "dimension" not in data or "root" not in data:
        raise PreconditionError("domain description needs 'dimension' and 'root' fields")
    return Domain(int(data["dimension"]), _node_from_dict(data["root"]))


def domain_to_dict(domain: Domain) -> dict:
    return domain.to_dict()


def load_domain(path: str) -> Domain:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise PreconditionError(f"cannot read domain file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise PreconditionError(f"domain file {path} is not valid JSON: {exc}") from exc
    return domain_from_dict(data)


# ---------------------------------------------------------------------------
# Perturbations
# ---------------------------------------------------------------------------


@dataclass
class PerturbationField:
    """Superposition of vector Gaussian bumps.

    ``theta(x) = sum_k disp[k] * exp(-|x - centers[k]|^2 / widths[k]^2)``.

    ``c2_bound`` is a certified upper bound for the C^2 norm
    ``max(sup|theta|, sup|D theta|, sup|D^2 theta|)`` obtained by summing the
    per-bump extrema of a Gaussian and its first two derivatives.
    """

    centers: np.ndarray
    widths: np.ndarray
    displacements: np.ndarray

    def __post_init__(self):
        self.centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        self.widths = np.asarray(self.widths, dtype=float).reshape(-1)
        self.displacements = np.atleast_2d(np.asarray(self.displacements, dtype=float))
        if not np.all(self.widths > 0.0):
            raise PreconditionError("bump widths must be positive")
        if self.centers.shape != self.displacements.shape:
            raise PreconditionError("need one displacement vector per bump center")
        if self.centers.shape[0] != self.widths.shape[0]:
            raise PreconditionError("need one width per bump center")

    @property
    def dimension(self) -> int:
        return self.centers.shape[1]

    def __call__(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        diff = X[:, None, :] - self.centers[None, :, :]
        r2 = np.einsum("mkj,mkj->mk", diff, diff)
        g = np.exp(-r2 / self.widths[None, :] ** 2)
        return g @ self.displacements

    def jacobian(self, X: np.ndarray) -> np.ndarray:
        """D theta at each row of X, shape (m, n, n) with J[m, i, j] = d theta_i / d x_j."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        diff = X[:, None, :] - self.centers[None, :, :]
        r2 = np.einsum("mkj,mkj->mk", diff, diff)
        w2 = self.widths[None, :] ** 2
        g = np.exp(-r2 / w2)
        scale = -2.0 * g / w2
        return np.einsum("mk,ki,mkj->mij", scale, self.displacements, diff)

    def amplitude_bound(self) -> float:
        return float(np.sum(np.linalg.norm(self.displacements, axis=1)))

    def lipschitz_bound(self) -> float:
        mags = np.linalg.norm(self.displacements, axis=1)
        return float(np.sum(mags * np.sqrt(2.0 / np.e) / self.widths))

    def c2_bound(self) -> float:
        mags = np.linalg.norm(self.displacements, axis=1)
        per_bump = mags * np.maximum.reduce(
            [
                np.ones_like(self.widths),
                np.sqrt(2.0 / np.e) / self.widths,
                4.0 * np.exp(-0.5) / self.widths**2,
            ]
        )
        return float(np.sum(per_bump))

    def with_c2_norm(self, target: float) -> "PerturbationField":
        """Rescale displacement amplitudes so that ``c2_bound() == target``."""
        cur = self.c2_bound()
        if cur == 0.0:
            raise PreconditionError("cannot rescale a zero field")
        return PerturbationField(self.centers, self.widths, self.displacements * (target / cur))

    @staticmethod
    def random(
        dimension: int,
        bumps: int,
        seed: int,
        support_center=None,
        support_radius: float = 1.0,
    ) -> "PerturbationField":
        """Seeded random field with unit-scale displacements (rescale before use)."""
        rng = np.random.default_rng(np.random.SeedSequence((int(seed), 0x7E27)))
        c0 = (
            np.zeros(dimension)
            if support_center is None
            else _as_point(support_center, dimension)
        )
        centers = c0 + support_radius * rng.uniform(-1.0, 1.0, size=(bumps, dimension))
        widths = support_radius * rng.uniform(0.25, 0.6, size=bumps)
        disp = rng.normal(size=(bumps, dimension))
        disp /= np.linalg.norm(disp, axis=1, keepdims=True)
        disp *= rng.uniform(0.5, 1.0, size=(bumps, 1))
        return PerturbationField(centers, widths, disp)


class PerturbedDomain:
    """Image ``(I + theta)(Omega)`` of a base domain under a C^2-small field.

    Membership inverts the map by the contraction iteration
    ``x <- y - theta(x)`` to absolute tolerance 1e-12 (times the domain
    scale); the C^2 bound below one half certifies the contraction.
    """

    def __init__(self, base, theta: PerturbationField):
        if theta.c2_bound() >= 0.5:
            raise PreconditionError(
                f"perturbation C^2 bound {theta.c2_bound():.6g} must be below one half"
            )
        if theta.dimension != base.dimension:
            raise PreconditionError("perturbation dimension does not match the domain")
        self.base = base
        self.theta = theta
        self._scale = base.bounding_radius(np.zeros(base.dimension))

    @property
    def dimension(self) -> int:
        return self.base.dimension

    # -- inverse map ----------------------------------------------------------

    def pull_back(self, Y: np.ndarray) -> np.ndarray:
        """Solve ``x + theta(x) = y`` for each row, to 1e-12 * scale."""
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        X = Y.copy()
        tol = 1e-12 * max(self._scale, 1.0)
        for _ in range(200):
            X_new = Y - self.theta(X)
            step = np.max(np.abs(X_new - X)) if X.size else 0.0
            X = X_new
            if step < tol:
                return X
        raise ConvergenceError("perturbation inverse iteration stalled")

    def push_forward(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return X + self.theta(X)

    # -- queries --------------------------------------------------------------

    def contains_many(self, Y: np.ndarray, closed: bool = False) -> np.ndarray:
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        return self.base.contains_many(self.pull_back(Y), closed)

    def depth_bound_many(self, Y: np.ndarray) -> np.ndarray:
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        margin = 1.0 - min(self.theta.lipschitz_bound(), 0.999)
        return margin * self.base.depth_bound_many(self.pull_back(Y))

    def bounding_radius(self, center) -> float:
        return self.base.bounding_radius(center) + self.theta.amplitude_bound()

    def surface_crossing_candidates(
        self,
        origin,
        D: np.ndarray,
        t_hi: float,
        strata_per_octave: int = 16,
        octaves: int = 14,
        refine_iters: int = 46,
    ) -> np.ndarray:
        """Membership-scan crossing parameters along each ray.

        A geometric probe grid (``strata_per_octave`` per octave over
        ``octaves`` octaves below ``t_hi``) locates membership flips, which
        are then refined by bisection.  Features thinner than the local probe
        spacing can be missed; the grid is sized for the smooth, C^2-small
        perturbations this class produces.
        """
        o = _as_point(origin, self.dimension)
        D = np.asarray(D, dtype=float)
        m = D.shape[0]
        exps = np.arange(octaves * strata_per_octave, -1, -1, dtype=float)
        ts = t_hi * np.power(2.0, -exps / strata_per_octave)
        P = ts.shape[0]
        pts = o[None, None, :] + ts[None, :, None] * D[:, None, :]
        inside = self.contains_many(pts.reshape(m * P, -1)).reshape(m, P)
        at0 = self.contains_many(o[None, :])[0]
        inside = np.concatenate([np.full((m, 1), at0), inside], axis=1)
        grid = np.concatenate([[0.0], ts])
        flips = inside[:, 1:] != inside[:, :-1]
        ray_idx, col = np.nonzero(flips)
        lo = grid[col].copy()
        hi = grid[col + 1].copy()
        for _ in range(refine_iters):
            mid = 0.5 * (lo + hi)
            pts = o[None, :] + mid[:, None] * D[ray_idx]
            mid_in = self.contains_many(pts)
            upper = mid_in != inside[ray_idx, col + 1]
            lo = np.where(upper, mid, lo)
            hi = np.where(upper, hi, mid)
        roots = 0.5 * (lo + hi)
        counts = np.bincount(ray_idx, minlength=m)
        K = max(int(counts.max()), 1) if counts.size else 1
        out = np.full((m, K), np.nan)
        slot = np.zeros(m, dtype=int)
        for r, t in zip(ray_idx, roots):
            out[r, slot[r]] = t
            slot[r] += 1
        out.sort(axis=1)
        return out

    def deep_point_hint(self):
        x, d = deep_point(self.base)
        y = self.push_forward(x[None, :])[0]
        margin = 1.0 - min(self.theta.lipschitz_bound(), 0.999)
        return y, margin * d


# ---------------------------------------------------------------------------
# Module-level operations
# ---------------------------------------------------------------------------


def contains(domain, x) -> bool:
    """Open membership of a single point."""
    x = _as_point(x, domain.dimension)
    return bool(domain.contains_many(x[None, :])[0])


def contains_many(domain, X, closed: bool = False) -> np.ndarray:
    return domain.contains_many(np.atleast_2d(np.asarray(X, dtype=float)), closed)


def bounding_radius(domain, center) -> float:
    """Radius R with the domain contained in the closed ball B(center, R)."""
    return float(domain.bounding_radius(center))


def depth_bound(domain, x) -> float:
    """Conservative signed interior depth at one point (positive inside)."""
    x = _as_point(x, domain.dimension)
    return float(domain.depth_bound_many(x[None, :])[0])


def perturb(domain, theta: PerturbationField) -> PerturbedDomain:
    """The image domain ``(I + theta)(Omega)``; requires C^2 bound < 1/2."""
    return PerturbedDomain(domain, theta)


@dataclass(frozen=True)
class BoundaryPoint:
    """A boundary location together with the unit normal pointing inward."""

    point: np.ndarray
    inner_normal: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "point", np.asarray(self.point, dtype=float).reshape(-1))
        object.__setattr__(
            self, "inner_normal", np.asarray(self.inner_normal, dtype=float).reshape(-1)
        )


def _lex_key(p: np.ndarray) -> tuple:
    return tuple(-np.asarray(p, dtype=float))


def _probe_normal(domain, p: np.ndarray, direction: np.ndarray, scale: float):
    """Classify a candidate boundary point by membership on both probe sides.

    Returns the inner unit normal if exactly one side of ``p`` along
    ``direction`` lies inside the domain, else None.
    """
    nrm = np.linalg.norm(direction)
    if nrm == 0.0:
        return None
    d = direction / nrm
    eps = _EPS_FLIP * max(scale, 1.0)
    probes = np.stack([p + eps * d, p - eps * d])
    ins = domain.contains_many(probes)
    if bool(ins[0]) == bool(ins[1]):
        return None
    return d if ins[0] else -d


def _leaf_nearest(leaf, x: np.ndarray):
    """Nearest point on the leaf surface and the outward leaf normal there."""
    if isinstance(leaf, Ball):
        v = x - leaf.center
        nv = np.linalg.norm(v)
        if nv < 1e-300:
            v = np.zeros_like(x)
            v[0] = 1.0
            nv = 1.0
        nhat = v / nv
        return leaf.center + leaf.radius * nhat, nhat
    u = leaf.b - leaf.a
    uu = float(u @ u)
    t = 0.0 if uu == 0.0 else float(np.clip((x - leaf.a) @ u / uu, 0.0, 1.0))
    q = leaf.a + t * u
    v = x - q
    nv = np.linalg.norm(v)
    if nv < 1e-300:
        v = np.zeros_like(x)
        v[0] = 1.0
        nv = 1.0
    nhat = v / nv
    return q + leaf.radius * nhat, nhat


def boundary_nearest(domain, x) -> BoundaryPoint:
    """Project a point to the nearest boundary location, with inner normal.

    Exact per-leaf projections are validated by a two-sided membership probe;
    if every leaf projection lands on a carved-away surface patch (the
    nearest boundary point sits on a CSG crease), a seeded direction fan with
    bisection refinement supplies the answer.  Distance ties are broken
    toward the lexicographically largest point.
    """
    if isinstance(domain, PerturbedDomain):
        inner = boundary_nearest(domain.base, domain.pull_back(np.atleast_2d(x))[0])
        p = domain.push_forward(inner.point[None, :])[0]
        J = domain.theta.jacobian(inner.point[None, :])[0]
        A = np.eye(domain.dimension) + J
        nu = np.linalg.solve(A.T, inner.inner_normal)
        return BoundaryPoint(p, nu / np.linalg.norm(nu))

    x = _as_point(x, domain.dimension)
    scale = domain.bounding_radius(x)
    best = None
    for leaf, _sign in domain.leaves():
        p, nhat = _leaf_nearest(leaf, x)
        nu = _probe_normal(domain, p, nhat, scale)
        if nu is None:
            continue
        d = float(np.linalg.norm(p - x))
        key = (d, _lex_key(p))
        if best is None or key < best[0]:
            best = (key, p, nu)
    if best is not None:
        return BoundaryPoint(best[1], best[2])

    # Crease fallback: scan a deterministic direction fan for membership flips.
    from scipy.stats import qmc

    n = domain.dimension
    eng = qmc.Sobol(d=n, scramble=False)
    raw = eng.random(512)
    from scipy.special import ndtri

    D = ndtri(np.clip(raw, 1e-12, 1.0 - 1e-12))
    norms = np.linalg.norm(D, axis=1)
    D[norms < 1e-12] = 1.0
    norms[norms < 1e-12] = np.sqrt(n)
    D /= norms[:, None]
    inside0 = bool(domain.contains_many(x[None, :])[0])
    t_hi = scale if inside0 else 2.0 * scale
    cand = domain.surface_crossing_candidates(x, D, t_hi)
    first = cand[:, 0]
    ok = np.isfinite(first)
    if not np.any(ok):
        raise ConvergenceError("no boundary found within the enclosing ball")
    # Keep, per ray, the first candidate across which membership truly flips;
    # among rays take the closest crossing (lexicographic tie-break).
    tbest = np.inf
    pbest = None
    eps = _EPS_FLIP * max(scale, 1.0)
    for i in np.nonzero(ok)[0]:
        for t in cand[i]:
            if not np.isfinite(t):
                break
            lo_in = bool(domain.contains_many((x + (t - eps) * D[i])[None, :])[0])
            hi_in = bool(domain.contains_many((x + (t + eps) * D[i])[None, :])[0])
            if lo_in == hi_in:
                continue
            p = x + t * D[i]
            if t < tbest - eps or (abs(t - tbest) <= eps and (pbest is None or _lex_key(p) < _lex_key(pbest))):
                tbest = t
                pbest = p
            break
    if pbest is None:
        raise ConvergenceError("boundary projection failed along every probe ray")
    nu = _probe_normal(domain, pbest, pbest - x, scale)
    if nu is None:
        nu = (pbest - x) / np.linalg.norm(pbest - x)
        if inside0:
            nu = -nu
    return BoundaryPoint(pbest, nu)


def _farthest_leaf_candidate(domain, q: np.ndarray):
    """Farthest valid boundary point from q among exact per-leaf extremizers."""
    scale = domain.bounding_radius(q)
    best = None
    for leaf, sign in domain.leaves():
        if sign < 0:
            continue
        anchors = [leaf.center] if isinstance(leaf, Ball) else [leaf.a, leaf.b]
        for c in anchors:
            v = c - q
            nv = np.linalg.norm(v)
            vhat = v / nv if nv > 1e-300 else np.eye(domain.dimension)[0]
            p = c + leaf.radius * vhat
            nu = _probe_normal(domain, p, vhat, scale)
            if nu is None:
                continue
            d = float(np.linalg.norm(p - q))
            key = (-d, _lex_key(p))
            if best is None or key < best[0]:
                best = (key, p, nu)
    return None if best is None else (best[1], best[2])


def _sample_boundary(domain, count: int, seed: int = 0) -> np.ndarray:
    """Seeded quasi-random boundary samples (valid surface patches only)."""
    from scipy.stats import qmc
    from scipy.special import ndtri

    n = domain.dimension
    pos = [leaf for leaf, sign in domain.leaves() if sign > 0]
    per = max(8, count // max(len(pos), 1))
    pts = []
    scale = domain.bounding_radius(np.zeros(n))
    for idx, leaf in enumerate(pos):
        eng = qmc.Sobol(
            d=n, scramble=True, seed=np.random.default_rng(np.random.SeedSequence((seed, 0xB0, idx)))
        )
        raw = eng.random(int(2 ** np.ceil(np.log2(per))))
        D = ndtri(np.clip(raw, 1e-12, 1.0 - 1e-12))
        norms = np.linalg.norm(D, axis=1)
        D[norms < 1e-12] = 1.0
        norms[norms < 1e-12] = np.sqrt(n)
        D /= norms[:, None]
        if isinstance(leaf, Ball):
            cand = leaf.center + leaf.radius * D
        else:
            ts = qmc.Sobol(
                d=1,
                scramble=True,
                seed=np.random.default_rng(np.random.SeedSequence((seed, 0xB1, idx))),
            ).random(D.shape[0])[:, 0]
            axis = leaf.a + ts[:, None] * (leaf.b - leaf.a)
            cand = axis + leaf.radius * D
            u = leaf.b - leaf.a
            uu = float(u @ u)
            if uu > 0:
                # project the offset off the axis so the point lies on the wall
                t = np.clip((cand - leaf.a) @ u / uu, 0.0, 1.0)
                foot = leaf.a + t[:, None] * u
                v = cand - foot
                nv = np.linalg.norm(v, axis=1, keepdims=True)
                nv[nv == 0] = 1.0
                cand = foot + leaf.radius * v / nv
        pts.append(cand)
    P = np.concatenate(pts, axis=0)
    eps = _EPS_FLIP * max(scale, 1.0)
    # validity: membership must flip across the local leaf normal
    keep = []
    for p in P:
        b = boundary_validity(domain, p, eps)
        if b is not None:
            keep.append(p)
    return np.array(keep) if keep else P[:0]


def boundary_validity(domain, p: np.ndarray, eps: float):
    """Inner normal at p if p lies on the domain boundary, else None.

    Uses the nearest positive-leaf normal direction as the probe axis.
    """
    best = None
    for leaf, _sign in domain.leaves():
        q, nhat = _leaf_nearest(leaf, p)
        d = float(np.linalg.norm(q - p))
        if best is None or d < best[0]:
            best = (d, nhat)
    if best is None or best[0] > 10.0 * eps:
        return None
    return _probe_normal(domain, p, best[1], eps / _EPS_FLIP)


def diameter_pair(domain, samples: int = 1024):
    """Approximate diameter-realizing boundary pair, with inner normals.

    Seeds with quasi-random boundary samples, then alternates exact
    farthest-point steps until fixed.  The pair is returned with the
    lexicographically larger point first.
    """
    P = _sample_boundary(domain, int(samples))
    if P.shape[0] < 2:
        raise ConvergenceError("not enough valid boundary samples for a diameter search")
    # farthest pair among samples (chunked to bound memory)
    best_d = -1.0
    best_pair = (P[0], P[1])
    chunk = 1024
    for i0 in range(0, P.shape[0], chunk):
        A = P[i0 : i0 + chunk]
        d2 = ((A[:, None, :] - P[None, :, :]) ** 2).sum(axis=2)
        i, j = np.unravel_index(np.argmax(d2), d2.shape)
        if d2[i, j] > best_d:
            best_d = d2[i, j]
            best_pair = (A[i], P[j])
    p, q = best_pair
    for _ in range(64):
        cand = _farthest_leaf_candidate(domain, q)
        p_new = cand[0] if cand is not None else p
        cand = _farthest_leaf_candidate(domain, p_new)
        q_new = cand[0] if cand is not None else q
        if np.allclose(p_new, p, atol=1e-14) and np.allclose(q_new, q, atol=1e-14):
            p, q = p_new, q_new
            break
        p, q = p_new, q_new
    if _lex_key(q) < _lex_key(p):
        p, q = q, p
    scale = domain.bounding_radius(p)
    eps = _EPS_FLIP * max(scale, 1.0)
    nu_p = boundary_validity(domain, p, eps)
    nu_q = boundary_validity(domain, q, eps)
    if nu_p is None or nu_q is None:
        raise ConvergenceError("diameter endpoints failed boundary validation")
    return BoundaryPoint(p, nu_p), BoundaryPoint(q, nu_q)


def deep_point(domain, seed: int = 0):
    """An interior point of (approximately) maximal conservative depth.

    Checks exact leaf candidates first (ball centers, capsule axis points);
    falls back to a seeded uniform scan of the enclosing ball.  Ties go to
    the lexicographically largest point.
    """
    if isinstance(domain, PerturbedDomain):
        return domain.deep_point_hint()
    n = domain.dimension
    cands = []
    for leaf, sign in domain.leaves():
        if sign < 0:
            continue
        if isinstance(leaf, Ball):
            cands.append(leaf.center)
        else:
            cands.append(0.5 * (leaf.a + leaf.b))
            cands.append(leaf.a)
            cands.append(leaf.b)
    if cands:
        C = np.array(cands)
        depths = domain.depth_bound_many(C)
        order = sorted(range(len(cands)), key=lambda i: (-depths[i], _lex_key(C[i])))
        i = order[0]
        if depths[i] > 0.0:
            return C[i].copy(), float(depths[i])
    center = np.zeros(n) if not cands else np.mean(np.array(cands), axis=0)
    R = domain.bounding_radius(center)
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), 0xDEE9)))
    X = center + R * rng.uniform(-1.0, 1.0, size=(8192, n))
    depths = domain.depth_bound_many(X)
    i = int(np.argmax(depths))
    if depths[i] <= 0.0:
        raise ConvergenceError("no certified interior point found")
    return X[i].copy(), float(depths[i])


def _leaf_overlap(a, b) -> bool:
    ra = a.radius
    rb = b.radius
    if isinstance(a, Ball) and isinstance(b, Ball):
        return float(np.linalg.norm(a.center - b.center)) < ra + rb
    sa = (a.center, a.center) if isinstance(a, Ball) else (a.a, a.b)
    sb = (b.center, b.center) if isinstance(b, Ball) else (b.a, b.b)
    return _segment_segment_distance(sa[0], sa[1], sb[0], sb[1]) < ra + rb


def _segment_segment_distance(p1, p2, q1, q2) -> float:
    """Euclidean distance between two segments (standard clamped solve)."""
    d1 = p2 - p1
    d2 = q2 - q1
    r = p1 - q1
    a = float(d1 @ d1)
    e = float(d2 @ d2)
    f = float(d2 @ r)
    if a <= 1e-300 and e <= 1e-300:
        return float(np.linalg.norm(r))
    if a <= 1e-300:
        t = np.clip(f / e, 0.0, 1.0)
        return float(np.linalg.norm(p1 - (q1 + t * d2)))
    c = float(d1 @ r)
    if e <= 1e-300:
        s = np.clip(-c / a, 0.0, 1.0)
        return float(np.linalg.norm(p1 + s * d1 - q1))
    b = float(d1 @ d2)
    denom = a * e - b * b
    s = np.clip((b * f - c * e) / denom, 0.0, 1.0) if denom > 1e-300 else 0.0
    t = (b * s + f) / e
    if t < 0.0:
        t = 0.0
        s = np.clip(-c / a, 0.0, 1.0)
    elif t > 1.0:
        t = 1.0
        s = np.clip((b - c) / a, 0.0, 1.0)
    return float(np.linalg.norm(p1 + s * d1 - q1 - t * d2))


def positive_leaf_components(domain) -> list[list[object]]:
    """Connected groups of positive leaves under pairwise overlap.

    The number of groups is a lower bound for the number of connected
    components of the domain (carving can only disconnect further, and any
    connection within the domain passes through overlapping positive leaves).
    Leaves entirely carved away are dropped via an interior probe.
    """
    base = domain.base if isinstance(domain, PerturbedDomain) else domain
    pos = [leaf for leaf, sign in base.leaves() if sign > 0]
    kept = []
    for leaf in pos:
        if isinstance(leaf, Ball):
            probes = [leaf.center]
            ref = leaf.center
        else:
            probes = [0.5 * (leaf.a + leaf.b), leaf.a, leaf.b]
            ref = 0.5 * (leaf.a + leaf.b)
        rng = np.random.default_rng(np.random.SeedSequence((0xC0, len(kept))))
        extra = ref + leaf.radius * rng.uniform(-0.7, 0.7, size=(64, base.dimension))
        P = np.vstack([np.array(probes), extra])
        if bool(np.any(base.contains_many(P))):
            kept.append(leaf)
    parent = list(range(len(kept)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(kept)):
        for j in range(i + 1, len(kept)):
            if _leaf_overlap(kept[i], kept[j]):
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[ri] = rj
    groups: dict[int, list] = {}
    for i, leaf in enumerate(kept):
        groups.setdefault(find(i), []).append(leaf)
    return list(groups.values())
