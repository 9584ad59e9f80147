"""Critical points of the concentration landscape.

Locates minima by damped Newton descent from a deterministic multistart,
connects minima through a string (elastic-band) method whose highest node is
polished into a saddle by a full Newton iteration, assembles both into a
census, and audits the census for stability under random C^2-small domain
perturbations.

All derivative information comes from :func:`bubblescape.quadrature.
psi_integrals`, whose direction-orbit construction cancels odd noise at
mirror-symmetric points; Newton therefore converges essentially to machine
precision at symmetric critical points, and elsewhere down to the measured
noise floor.  ``newton_tol`` is the acceptance bound on the final gradient
norm (inflated by three standard errors of the measured gradient noise), not
an early-stopping threshold.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, PreconditionError
from .geometry import (
    Ball,
    Capsule,
    Domain,
    PerturbationField,
    deep_point,
    perturb,
    positive_leaf_components,
)
from .quadrature import QuadratureConfig, psi_integrals

__all__ = [
    "CritConfig",
    "CriticalPoint",
    "CensusReport",
    "MorseAudit",
    "find_minima",
    "mountain_pass",
    "census",
    "morse_audit",
]


@dataclass(frozen=True)
class CritConfig:
    """Knobs for critical-point search.

    ``newton_tol`` bounds the accepted final gradient norm; ``dedupe_radius``
    merges converged points; ``string_nodes`` counts the nodes of the
    mountain-pass string including both endpoints; ``morse_tol`` is the
    relative eigenvalue floor below which a Hessian counts as degenerate.
    """

    multistart: int = 12
    newton_tol: float = 1e-3
    max_iters: int = 80
    dedupe_radius: float = 0.05
    string_nodes: int = 11
    string_rounds: int = 30
    morse_tol: float = 1e-6

    def __post_init__(self):
        if self.multistart < 1:
            raise PreconditionError("multistart must be at least 1")
        if not self.newton_tol > 0.0:
            raise PreconditionError("newton_tol must be positive")
        if self.max_iters < 1:
            raise PreconditionError("max_iters must be at least 1")
        if not self.dedupe_radius > 0.0:
            raise PreconditionError("dedupe_radius must be positive")
        if self.string_nodes < 8:
            raise PreconditionError("the string needs at least 8 nodes")
        if self.string_rounds < 1:
            raise PreconditionError("string_rounds must be at least 1")
        if not 0.0 < self.morse_tol < 1.0:
            raise PreconditionError("morse_tol must lie in (0, 1)")


@dataclass
class CriticalPoint:
    """A located critical point with its local classification."""

    location: np.ndarray
    psi_value: float
    grad_norm: float
    grad_std: float
    hess_eigs: np.ndarray  # ascending
    morse_index: int
    nondegenerate: bool

    def margin(self) -> float:
        """Scale-free nondegeneracy margin ``|det H| / ||H||_op^n``."""
        eigs = np.abs(self.hess_eigs)
        top = float(eigs.max())
        if top == 0.0:
            return 0.0
        return float(np.prod(eigs / top))

    def to_dict(self) -> dict:
        return {
            "location": [float(v) for v in self.location],
            "psi_value": float(self.psi_value),
            "grad_norm": float(self.grad_norm),
            "grad_std": float(self.grad_std),
            "hess_eigs": [float(v) for v in self.hess_eigs],
            "morse_index": int(self.morse_index),
            "nondegenerate": bool(self.nondegenerate),
            "margin": self.margin(),
        }


@dataclass
class CensusReport:
    """Minima and connecting saddles, with a topological richness check."""

    points: list
    cat_lower_bound: int
    satisfied: bool

    @property
    def minima(self):
        return [p for p in self.points if p.morse_index == 0]

    @property
    def saddles(self):
        return [p for p in self.points if p.morse_index > 0]

    def to_dict(self) -> dict:
        return {
            "points": [p.to_dict() for p in self.points],
            "cat_lower_bound": int(self.cat_lower_bound),
            "satisfied": bool(self.satisfied),
        }


@dataclass
class MorseAudit:
    """Stability of the census under random C^2-small boundary deformations."""

    trials: int
    rho: float
    stable: bool
    base: CensusReport
    min_margin: float
    max_displacement: float
    failures: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "trials": int(self.trials),
            "rho": float(self.rho),
            "stable": bool(self.stable),
            "base": self.base.to_dict(),
            "min_margin": float(self.min_margin),
            "max_displacement": float(self.max_displacement),
            "failures": [str(f) for f in self.failures],
        }


# ---------------------------------------------------------------------------
# Newton iteration with noise-aware acceptance
# ---------------------------------------------------------------------------


def _lex_key(x: np.ndarray):
    return tuple(float(v) for v in x)


def _inside(domain, x: np.ndarray) -> bool:
    return bool(domain.contains_many(x[None, :])[0])


def _newton(domain, x0, quad_cfg: QuadratureConfig, cfg: CritConfig, pd_floor: bool, scale: float):
    """Newton iteration on ``grad psi = 0``.

    ``pd_floor=True`` floors Hessian eigenvalues from below (descent toward
    minima); ``pd_floor=False`` floors their magnitudes preserving signs, so
    the iteration converges to the nearest critical point of any index.
    Iterates until the measured gradient noise floor, then verifies the
    ``newton_tol`` contract.
    """
    x = np.asarray(x0, dtype=float).copy()
    if not _inside(domain, x):
        raise PreconditionError("Newton start must lie inside the region")
    ev = psi_integrals(domain, x, quad_cfg)
    for _ in range(cfg.max_iters):
        g = ev.gradient
        gn = float(np.linalg.norm(g))
        sig = float(np.linalg.norm(ev.gradient_std))
        floor = 1e-13 * max(1.0, abs(ev.value))
        if gn <= max(floor, 3.0 * sig):
            break
        w, V = np.linalg.eigh(ev.hessian)
        amax = max(float(np.max(np.abs(w))), 1e-300)
        if pd_floor:
            w2 = np.maximum(w, 1e-4 * amax)
        else:
            signs = np.where(w >= 0.0, 1.0, -1.0)
            w2 = signs * np.maximum(np.abs(w), 1e-4 * amax)
        step = -V @ ((V.T @ g) / w2)
        slen = float(np.linalg.norm(step))
        if slen < 1e-14 * scale:
            break
        if slen > 0.5 * scale:
            step *= 0.5 * scale / slen
        lam = 1.0
        accepted = False
        for _ in range(12):
            xn = x + lam * step
            if _inside(domain, xn):
                evn = psi_integrals(domain, xn, quad_cfg)
                gnn = float(np.linalg.norm(evn.gradient))
                sn = float(np.linalg.norm(evn.gradient_std))
                if gnn <= (1.0 - 0.25 * lam) * gn + 3.0 * (sig + sn):
                    x, ev = xn, evn
                    accepted = True
                    break
            lam *= 0.5
        if not accepted:
            break
    gn = float(np.linalg.norm(ev.gradient))
    sig = float(np.linalg.norm(ev.gradient_std))
    if gn > cfg.newton_tol + 3.0 * sig:
        raise ConvergenceError(
            f"Newton stalled at gradient norm {gn:.3e} (noise {sig:.3e}, tol {cfg.newton_tol:.3e})"
        )
    return x, ev


def _classify(x, ev, cfg: CritConfig) -> CriticalPoint:
    eigs = np.sort(np.linalg.eigvalsh(ev.hessian))
    amax = max(float(np.max(np.abs(eigs))), 1e-300)
    nondeg = bool(np.min(np.abs(eigs)) > cfg.morse_tol * amax)
    return CriticalPoint(
        location=x,
        psi_value=float(ev.value),
        grad_norm=float(np.linalg.norm(ev.gradient)),
        grad_std=float(np.linalg.norm(ev.gradient_std)),
        hess_eigs=eigs,
        morse_index=int(np.sum(eigs < 0.0)),
        nondegenerate=nondeg,
    )


def _dedupe(points: list, radius: float) -> list:
    """Merge points within ``radius``; keep the lowest landscape value."""
    points = sorted(points, key=lambda p: (p.psi_value, _lex_key(p.location)))
    kept: list = []
    for p in points:
        if all(np.linalg.norm(p.location - q.location) > radius for q in kept):
            kept.append(p)
    return kept


def _point_in_leaf(leaf, x: np.ndarray) -> bool:
    if isinstance(leaf, Ball):
        return float(np.linalg.norm(x - leaf.center)) < leaf.radius
    if isinstance(leaf, Capsule):
        ab = leaf.b - leaf.a
        t = float(np.clip((x - leaf.a) @ ab / max(ab @ ab, 1e-300), 0.0, 1.0))
        return float(np.linalg.norm(x - (leaf.a + t * ab))) < leaf.radius
    return False


def _component_seeds(domain) -> tuple[list, list]:
    """One interior anchor per positive-leaf component, plus the components."""
    comps = positive_leaf_components(domain)
    seeds = []
    for comp in comps:
        cands = []
        for leaf in comp:
            if isinstance(leaf, Ball):
                cands.append(leaf.center)
            else:
                cands.extend([0.5 * (leaf.a + leaf.b), leaf.a, leaf.b])
        cands = [c for c in cands if _inside(domain, np.asarray(c, dtype=float))]
        if cands:
            depths = domain.depth_bound_many(np.array(cands, dtype=float))
            seeds.append(np.asarray(cands[int(np.argmax(depths))], dtype=float))
    return seeds, comps


def find_minima(domain, quad_cfg: QuadratureConfig, crit_cfg: CritConfig | None = None, seed: int = 0) -> list:
    """Local landscape minima from deterministic multistart Newton descent."""
    cfg = crit_cfg or CritConfig()
    anchor = deep_point(domain)[0]
    scale = float(domain.bounding_radius(anchor))
    starts, _ = _component_seeds(domain)
    if not starts:
        starts = [anchor]

    from scipy.stats import qmc

    eng = qmc.Sobol(d=domain.dimension, scramble=True, seed=np.random.default_rng(np.random.SeedSequence((int(seed), 0xC417))))
    # Draw a power-of-two block (Sobol balance) and slice; the prefix is the
    # same point sequence either way.
    count = 8 * cfg.multistart
    raw = eng.random_base2(max(0, int(np.ceil(np.log2(count)))))[:count]
    pts = anchor[None, :] + (2.0 * raw - 1.0) * scale
    inside = domain.contains_many(pts)
    extra = [pts[i] for i in np.nonzero(inside)[0][: cfg.multistart]]

    found = []
    for x0 in list(starts) + extra:
        try:
            x, ev = _newton(domain, x0, quad_cfg, cfg, pd_floor=True, scale=scale)
        except ConvergenceError:
            continue
        p = _classify(x, ev, cfg)
        if p.morse_index == 0:
            found.append(p)
    if not found:
        raise ConvergenceError("no landscape minimum could be located")
    return _dedupe(found, cfg.dedupe_radius)


def _light_config(quad_cfg: QuadratureConfig) -> QuadratureConfig:
    return dataclasses.replace(
        quad_cfg,
        near_budget=max(1024, quad_cfg.near_budget // 8),
        replicates=max(2, quad_cfg.replicates // 4),
    )


def mountain_pass(domain, x1, x2, quad_cfg: QuadratureConfig, crit_cfg: CritConfig | None = None):
    """Separating saddle between two minima via a string method.

    A piecewise-linear string between the endpoints is relaxed by moving
    interior nodes along the transverse gradient component and
    re-equidistributing; the highest node then seeds a full Newton polish.
    Raises if the polished point is not a genuine barrier (positive index).
    """
    cfg = crit_cfg or CritConfig()
    x1 = np.asarray(x1, dtype=float).reshape(-1)
    x2 = np.asarray(x2, dtype=float).reshape(-1)
    if not (_inside(domain, x1) and _inside(domain, x2)):
        raise PreconditionError("both endpoints must lie inside the region")
    if float(np.linalg.norm(x1 - x2)) <= 2.0 * cfg.dedupe_radius:
        raise PreconditionError("endpoints are too close to separate")
    anchor = deep_point(domain)[0]
    scale = float(domain.bounding_radius(anchor))
    light = _light_config(quad_cfg)

    K = cfg.string_nodes
    nodes = np.linspace(0.0, 1.0, K)[:, None] * (x2 - x1)[None, :] + x1[None, :]
    values = np.zeros(K)
    for _ in range(cfg.string_rounds):
        grads = np.zeros_like(nodes)
        for i in range(1, K - 1):
            ev = psi_integrals(domain, nodes[i], light)
            values[i] = ev.value
            grads[i] = ev.gradient
        # transverse component w.r.t. the local tangent
        for i in range(1, K - 1):
            t = nodes[i + 1] - nodes[i - 1]
            tn = float(np.linalg.norm(t))
            if tn > 0.0:
                t /= tn
                grads[i] = grads[i] - (grads[i] @ t) * t
        gmax = float(np.max(np.linalg.norm(grads, axis=1)))
        spacing = float(np.linalg.norm(np.diff(nodes, axis=0), axis=1).mean())
        eta = 0.15 * spacing / max(gmax, 1e-300)
        for i in range(1, K - 1):
            prop = nodes[i] - eta * grads[i]
            for _ in range(8):
                if _inside(domain, prop):
                    nodes[i] = prop
                    break
                prop = 0.5 * (prop + nodes[i])
        # re-equidistribute by arclength
        seg = np.linalg.norm(np.diff(nodes, axis=0), axis=1)
        s = np.concatenate([[0.0], np.cumsum(seg)])
        if s[-1] > 0.0:
            target = np.linspace(0.0, s[-1], K)
            nodes = np.stack([np.interp(target, s, nodes[:, d]) for d in range(nodes.shape[1])], axis=1)

    interior = range(1, K - 1)
    peak = max(interior, key=lambda i: values[i])
    x, ev = _newton(domain, nodes[peak], quad_cfg, cfg, pd_floor=False, scale=scale)
    if min(float(np.linalg.norm(x - x1)), float(np.linalg.norm(x - x2))) <= cfg.dedupe_radius:
        raise ConvergenceError("the string collapsed onto an endpoint")
    p = _classify(x, ev, cfg)
    if p.morse_index == 0:
        raise ConvergenceError("no barrier separates the endpoints (polish found a minimum)")
    return p


def census(domain, quad_cfg: QuadratureConfig, crit_cfg: CritConfig | None = None, seed: int = 0, warm_starts=None) -> CensusReport:
    """Minima plus the saddles connecting same-component minima pairs.

    With ``warm_starts`` (an iterable of critical points or locations) the
    census is re-established by polishing each start on this domain instead
    of searching from scratch — the mode used by the perturbation audit.
    """
    cfg = crit_cfg or CritConfig()
    anchor = deep_point(domain)[0]
    scale = float(domain.bounding_radius(anchor))

    if warm_starts is not None:
        pts = []
        for w in warm_starts:
            loc = w.location if isinstance(w, CriticalPoint) else np.asarray(w, dtype=float)
            x, ev = _newton(domain, loc, quad_cfg, cfg, pd_floor=False, scale=scale)
            pts.append(_classify(x, ev, cfg))
        minima = _dedupe([p for p in pts if p.morse_index == 0], cfg.dedupe_radius)
        saddles = _dedupe([p for p in pts if p.morse_index > 0], cfg.dedupe_radius)
    else:
        minima = find_minima(domain, quad_cfg, cfg, seed=seed)
        _, comps = _component_seeds(domain)

        def comp_of(x: np.ndarray) -> int:
            for ci, comp in enumerate(comps):
                if any(_point_in_leaf(leaf, x) for leaf in comp):
                    return ci
            return -1

        saddles = []
        for i in range(len(minima)):
            for j in range(i + 1, len(minima)):
                ci, cj = comp_of(minima[i].location), comp_of(minima[j].location)
                if ci != cj or ci < 0:
                    continue
                saddles.append(mountain_pass(domain, minima[i].location, minima[j].location, quad_cfg, cfg))
        saddles = _dedupe(saddles, cfg.dedupe_radius)

    cat = len(positive_leaf_components(domain))
    points = sorted(minima, key=lambda p: (p.psi_value, _lex_key(p.location))) + sorted(
        saddles, key=lambda p: (p.psi_value, _lex_key(p.location))
    )
    return CensusReport(points=points, cat_lower_bound=cat, satisfied=len(minima) >= cat)


def morse_audit(
    domain,
    rho: float,
    trials: int,
    quad_cfg: QuadratureConfig,
    crit_cfg: CritConfig | None = None,
    seed: int = 0,
    audit_cfg: QuadratureConfig | None = None,
) -> MorseAudit:
    """Census stability under random boundary deformations of C^2 size rho.

    Each trial perturbs the domain by a random bump field rescaled to C^2
    norm ``rho``, re-polishes the unperturbed census points on the deformed
    domain, and verifies that every point survives with the same Morse index,
    nondegenerate Hessian, and a displacement comparable to ``rho``.
    """
    if not 0.0 < rho < 0.5:
        raise PreconditionError("the perturbation size must lie in (0, 0.5)")
    if trials < 1:
        raise PreconditionError("need at least one trial")
    cfg = crit_cfg or CritConfig()
    base = census(domain, quad_cfg, cfg, seed=seed)
    anchor = deep_point(domain)[0]
    scale = float(domain.bounding_radius(anchor))
    light = audit_cfg or _light_config(quad_cfg)

    failures: list = []
    min_margin = min((p.margin() for p in base.points), default=0.0)
    max_disp = 0.0
    for t in range(trials):
        sub_seed = int(np.random.SeedSequence((int(seed), 0xA0D1, t)).generate_state(1)[0])
        fld = PerturbationField.random(
            domain.dimension, bumps=3, seed=sub_seed, support_center=anchor, support_radius=1.2 * scale
        ).with_c2_norm(rho)
        pdom = perturb(domain, fld)
        try:
            rep = census(pdom, light, cfg, warm_starts=base.points)
        except (ConvergenceError, PreconditionError) as exc:
            failures.append(f"trial {t}: census failed: {exc}")
            continue
        if len(rep.points) != len(base.points):
            failures.append(
                f"trial {t}: point count changed from {len(base.points)} to {len(rep.points)}"
            )
            continue
        used = set()
        for bp in base.points:
            dists = [
                (float(np.linalg.norm(bp.location - rp.location)), k)
                for k, rp in enumerate(rep.points)
                if k not in used
            ]
            dist, k = min(dists)
            used.add(k)
            rp = rep.points[k]
            max_disp = max(max_disp, dist)
            if dist > 0.25 * scale:
                failures.append(f"trial {t}: a critical point moved by {dist:.3f}")
            if rp.morse_index != bp.morse_index:
                failures.append(
                    f"trial {t}: Morse index flipped {bp.morse_index} -> {rp.morse_index}"
                )
            if not rp.nondegenerate:
                failures.append(f"trial {t}: a Hessian became degenerate")
            min_margin = min(min_margin, rp.margin())
    return MorseAudit(
        trials=trials,
        rho=rho,
        stable=not failures,
        base=base,
        min_margin=min_margin,
        max_displacement=max_disp,
        failures=failures,
    )
