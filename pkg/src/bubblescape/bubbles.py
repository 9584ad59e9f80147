"""Standard bubbles, their kernel modes, rescalings, and ansatz energies.

The building block is the radial profile

    U[delta, xi](x) = alpha_n * delta^((n-2)/2) / (delta^2 + |x-xi|^2)^((n-2)/2)

which solves ``-Delta U = U^p`` with ``p = (n+2)/(n-2)``.  This module
provides

* pointwise evaluation of U and of the ``n + 1`` kernel modes of the
  linearized operator (one dilation mode, ``n`` translation modes),
* a finite-difference residual check for the linearized equation,
* the scaling map ``u -> delta^(-(n-2)/2) u((x - xi)/delta)`` together with a
  numerical isometry/scaling audit,
* the free energy ``J = 1/2 |grad u|^2 - (1/m) W[u]`` of one- and two-bubble
  ansatz functions on a bounded region, where the weighted mass
  ``W = whole-space mass - 2 * exterior mass`` encodes a weight that is +1
  inside the region and -1 outside, and
* energy-expansion residual tables for the slightly subcritical regime and
  the critical shrinking-hole regime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import PreconditionError
from .geometry import Ball, Difference, Domain, Union, deep_point
from .landscape import Constants, hole_critical_point, optimal_d, reduced_energy_sub
from .quadrature import (
    QuadratureConfig,
    QuadratureResult,
    ball_lp_mass,
    bubble_alpha,
    bubble_moment,
    exterior_lp_mass,
    psi_integrals,
    sphere_area,
)

__all__ = [
    "Bubble",
    "EnergyReport",
    "ResidualRow",
    "ResidualTable",
    "bubble_value",
    "z_value",
    "linearization_residual",
    "rescale",
    "rescaling_isometry_check",
    "ansatz_value",
    "energy",
    "interaction",
    "expansion_residual_sub",
    "expansion_residual_hole",
]


@dataclass(frozen=True)
class Bubble:
    """One signed bubble: orientation, scale, and concentration point."""

    sign: int
    delta: float
    center: np.ndarray

    def __post_init__(self):
        if self.sign not in (-1, 1):
            raise PreconditionError("bubble sign must be +1 or -1")
        if not self.delta > 0.0:
            raise PreconditionError("bubble scale must be positive")
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(-1))


def _as_points(X, n: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != n:
        raise PreconditionError(f"expected points of dimension {n}")
    return X


def bubble_value(n: int, delta: float, center, X) -> np.ndarray:
    """Evaluate U[delta, center] at an (m, n) array of points."""
    if not delta > 0.0:
        raise PreconditionError("bubble scale must be positive")
    center = np.asarray(center, dtype=float).reshape(-1)
    X = _as_points(X, n)
    q = 0.5 * (n - 2.0)
    r2 = ((X - center[None, :]) ** 2).sum(axis=1)
    return bubble_alpha(n) * delta**q / (delta**2 + r2) ** q


def z_value(n: int, mode: int, delta: float, center, X) -> np.ndarray:
    """Kernel modes of the linearization at U[delta, center].

    ``mode = 0`` is the dilation mode ``delta * dU/ddelta``; ``mode = i`` for
    ``1 <= i <= n`` is the normalized translation mode ``delta * dU/dxi_i``.
    All of them solve ``-Delta z = p U^(p-1) z``.
    """
    if not delta > 0.0:
        raise PreconditionError("bubble scale must be positive")
    if not 0 <= mode <= n:
        raise PreconditionError(f"mode must lie in 0..{n}")
    center = np.asarray(center, dtype=float).reshape(-1)
    X = _as_points(X, n)
    diff = X - center[None, :]
    r2 = (diff**2).sum(axis=1)
    alpha = bubble_alpha(n)
    q = 0.5 * (n - 2.0)
    if mode == 0:
        return alpha * q * delta**q * (r2 - delta**2) / (delta**2 + r2) ** (n / 2.0)
    return alpha * (n - 2.0) * delta ** (n / 2.0) * diff[:, mode - 1] / (delta**2 + r2) ** (n / 2.0)


def linearization_residual(n: int, mode: int, delta: float, center, X) -> np.ndarray:
    """Normalized FD residual of ``-Delta z = p U^(p-1) z`` at each sample.

    The Laplacian is a central second difference with the locally scaled
    step ``h = 1e-4 * sqrt(delta^2 + |x - center|^2)``; the residual is
    normalized by ``p (n-2) U^p``, which bounds the natural size of either
    side.  Samples closer than 1e-3 to the concentration point are rejected
    so the relative step stays meaningful at tiny scales.
    """
    center = np.asarray(center, dtype=float).reshape(-1)
    X = _as_points(X, n)
    dist2 = ((X - center[None, :]) ** 2).sum(axis=1)
    if np.any(dist2 < 1e-6):
        raise PreconditionError("samples must stay at least 1e-3 away from the concentration point")
    p = (n + 2.0) / (n - 2.0)
    h = 1e-4 * np.sqrt(delta**2 + dist2)
    lap = np.zeros(X.shape[0])
    z0 = z_value(n, mode, delta, center, X)
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        zp = z_value(n, mode, delta, center, X + h[:, None] * e[None, :])
        zm = z_value(n, mode, delta, center, X - h[:, None] * e[None, :])
        lap += (zp - 2.0 * z0 + zm) / h**2
    u = bubble_value(n, delta, center, X)
    scale = p * (n - 2.0) * u**p
    return np.abs(lap + p * u ** (p - 1.0) * z0) / scale


def rescale(n: int, delta: float, center, u):
    """Concentration-scaling map: ``(Pu)(x) = delta^(-(n-2)/2) u((x-center)/delta)``."""
    if not delta > 0.0:
        raise PreconditionError("scale must be positive")
    center = np.asarray(center, dtype=float).reshape(-1)
    q = 0.5 * (n - 2.0)

    def v(X):
        X = _as_points(X, n)
        return delta**-q * np.asarray(u((X - center[None, :]) / delta), dtype=float)

    return v


def _radial_quad(g, delta: float) -> float:
    """Integrate g(r) over (0, inf) with breakpoints tied to the scale."""
    cut = 10.0 * delta + 10.0
    inner, _ = integrate.quad(g, 0.0, cut, epsabs=0.0, epsrel=1e-12, limit=400, points=[delta, 1.0])

    def g_tail(s):
        r = cut / s
        return g(r) * cut / s**2

    outer, _ = integrate.quad(g_tail, 0.0, 1.0, epsabs=0.0, epsrel=1e-12, limit=400)
    return inner + outer


def rescaling_isometry_check(n: int, s: float, deltas=(0.25, 0.5, 1.0, 2.0, 4.0)) -> dict:
    """Measure norm behavior of the bubble family under the scaling map.

    Returns the maximal relative deviation of the Dirichlet energy across
    scales (an isometry would give 0) and the measured log-log slope of the
    L^s norm against the expected exponent ``n/s - (n-2)/2``.  All integrals
    are radial quadratures carried out in the unscaled variable, so the
    scaling behavior is measured rather than assumed.
    """
    if not s * (n - 2.0) > n:
        raise PreconditionError("the L^s mass of a bubble diverges for this exponent")
    alpha = bubble_alpha(n)
    q = 0.5 * (n - 2.0)
    omega = sphere_area(n)
    deltas = [float(d) for d in deltas]
    if len(deltas) < 2 or any(d <= 0 for d in deltas):
        raise PreconditionError("need at least two positive scales")

    dirichlet = []
    ls_norm = []
    for d in deltas:

        def grad2(r, d=d):
            return (alpha * d**q * (n - 2.0) * r) ** 2 / (d**2 + r * r) ** n * r ** (n - 1.0)

        def us(r, d=d):
            return (alpha * d**q) ** s / (d**2 + r * r) ** (s * q) * r ** (n - 1.0)

        dirichlet.append(omega * _radial_quad(grad2, d))
        ls_norm.append((omega * _radial_quad(us, d)) ** (1.0 / s))
    dirichlet = np.array(dirichlet)
    ls_norm = np.array(ls_norm)
    dev = float(np.max(np.abs(dirichlet / dirichlet[0] - 1.0)))
    slope = float(np.polyfit(np.log(deltas), np.log(ls_norm), 1)[0])
    return {
        "dirichlet_max_deviation": dev,
        "dirichlet_values": dirichlet,
        "ls_slope": slope,
        "ls_slope_expected": n / s - q,
        "deltas": np.array(deltas),
    }


# ---------------------------------------------------------------------------
# Ansatz energies
# ---------------------------------------------------------------------------


def ansatz_value(n: int, bubbles, X) -> np.ndarray:
    """Evaluate the signed bubble superposition at an (m, n) array."""
    X = _as_points(X, n)
    out = np.zeros(X.shape[0])
    for b in bubbles:
        out += b.sign * bubble_value(n, b.delta, b.center, X)
    return out


@dataclass
class EnergyReport:
    """Free energy of an ansatz and the pieces it was assembled from."""

    j_eps: float
    j_std: float
    gradient_part: float
    weighted_part: float
    whole_mass: float
    exterior_mass: float
    exponent: float
    stds: dict = field(default_factory=dict)
    n_evals: int = 0
    converged: bool = True


def _two_peak_whole_mass(n, g, c1, c2, config) -> QuadratureResult:
    """Whole-space integral of g >= 0 with peaks at two points.

    Splits space into two tangent balls around the peaks plus the exterior of
    their union; the pieces overlap only in measure zero.
    """
    sep = float(np.linalg.norm(c1 - c2))
    r = 0.5 * sep
    virtual = Domain(n, Union(Ball(c1, r), Ball(c2, r)))
    mid = 0.5 * (c1 + c2)
    parts = [
        ball_lp_mass(g, 1.0, c1, r, n, config),
        ball_lp_mass(g, 1.0, c2, r, n, config),
        exterior_lp_mass(virtual, g, 1.0, config, center=mid),
    ]
    value = sum(p.value for p in parts)
    std = math.sqrt(sum(p.std_error**2 for p in parts))
    return QuadratureResult(
        value=value,
        std_error=std,
        n_evals=sum(p.n_evals for p in parts),
        converged=all(p.converged for p in parts),
        decay_ok=all(p.decay_ok for p in parts),
    )


def interaction(n: int, b1: Bubble, b2: Bubble, config: QuadratureConfig) -> QuadratureResult:
    """Whole-space interaction integral ``int U_1^p U_2``.

    Decays like ``(separation)^-(n-2)`` with the leading coefficient
    ``c1_nodal (delta_1 delta_2)^((n-2)/2)``.
    """
    if np.allclose(b1.center, b2.center):
        raise PreconditionError("interaction needs distinct concentration points")
    p = (n + 2.0) / (n - 2.0)

    def g(X):
        return bubble_value(n, b1.delta, b1.center, X) ** p * bubble_value(n, b2.delta, b2.center, X)

    return _two_peak_whole_mass(n, g, b1.center, b2.center, config)


def energy(domain: Domain, bubbles, eps: float, consts: Constants, config: QuadratureConfig) -> EnergyReport:
    """Free energy ``J = 1/2 int |grad u|^2 - (1/m) W`` of a bubble ansatz.

    ``m = p + 1 - eps`` (``eps = 0`` is the critical case) and
    ``W = int_whole |u|^m - 2 int_exterior |u|^m`` realizes a weight +1 on
    the region and -1 outside.  The gradient part is assembled exactly from
    single-bubble masses plus pairwise interaction integrals; whole-space
    masses of a single bubble reduce to 1D radial quadrature, two-bubble
    masses use a two-ball/exterior decomposition.  Centers may lie outside
    the open region (hole-regime ansatz functions peak inside the carved
    hole) but must stay within its bounding ball.
    """
    n = consts.n
    if domain.dimension != n:
        raise PreconditionError("domain dimension does not match the constants")
    if not 0.0 <= eps < 0.2:
        raise PreconditionError("the subcriticality parameter must lie in [0, 0.2)")
    bubbles = tuple(bubbles)
    if not 1 <= len(bubbles) <= 2:
        raise PreconditionError("only one- and two-bubble ansatz functions are supported")
    centers = np.array([b.center for b in bubbles])
    if centers.shape[1] != n:
        raise PreconditionError("bubble centers do not match the domain dimension")
    # centers may sit outside the open region (a hole-regime bubble peaks
    # inside the carved hole), but must stay within the region's bounding ball
    anchor = deep_point(domain)[0]
    bound = domain.bounding_radius(anchor)
    if np.any(np.linalg.norm(centers - anchor[None, :], axis=1) > bound):
        raise PreconditionError("bubble centers must lie within the region's bounding ball")
    p = consts.p
    m = p + 1.0 - eps

    stds: dict[str, float] = {}
    n_evals = 0
    decay_all = True

    # gradient part: int |grad u|^2 = sum_i int U_i^(p+1) + 2 sum_{i<j} s_i s_j int U_i^p U_j
    M = bubble_moment(n, p + 1.0)
    grad2 = len(bubbles) * M
    if len(bubbles) == 2:
        b1, b2 = bubbles
        if np.allclose(b1.center, b2.center):
            raise PreconditionError("bubble centers must be distinct")
        cross = interaction(n, b1, b2, config)
        n_evals += cross.n_evals
        decay_all &= cross.decay_ok
        grad2 += 2.0 * b1.sign * b2.sign * cross.value
        stds["gradient"] = 2.0 * cross.std_error
    else:
        stds["gradient"] = 0.0
    gradient_part = 0.5 * grad2

    def u_abs(X):
        return np.abs(ansatz_value(n, bubbles, X))

    if len(bubbles) == 1:
        b = bubbles[0]
        whole_val = b.delta ** (eps * (n - 2.0) / 2.0) * bubble_moment(n, m)
        whole_std = 0.0
    else:
        whole = _two_peak_whole_mass(n, lambda X: u_abs(X) ** m, bubbles[0].center, bubbles[1].center, config)
        whole_val, whole_std = whole.value, whole.std_error
        n_evals += whole.n_evals
        decay_all &= whole.decay_ok
    stds["whole_mass"] = whole_std

    fan_center = bubbles[0].center if len(bubbles) == 1 else None
    ext = exterior_lp_mass(domain, u_abs, m, config, center=fan_center)
    n_evals += ext.n_evals
    decay_all &= ext.decay_ok
    stds["exterior_mass"] = ext.std_error

    W = whole_val - 2.0 * ext.value
    weighted_part = W / m
    j = gradient_part - weighted_part
    j_std = math.sqrt(
        (0.5 * stds["gradient"]) ** 2 + (whole_std / m) ** 2 + (2.0 * ext.std_error / m) ** 2
    )
    # convergence is judged on the assembled energy: pieces that are a tiny
    # fraction of J may individually carry larger relative noise
    converged = decay_all and j_std <= config.target_rel_err * max(abs(j), 1e-300)
    return EnergyReport(
        j_eps=j,
        j_std=j_std,
        gradient_part=gradient_part,
        weighted_part=weighted_part,
        whole_mass=whole_val,
        exterior_mass=ext.value,
        exponent=m,
        stds=stds,
        n_evals=n_evals,
        converged=bool(converged),
    )


# ---------------------------------------------------------------------------
# Expansion residual tables
# ---------------------------------------------------------------------------


@dataclass
class ResidualRow:
    small_parameter: float
    j_value: float
    j_std: float
    residual: float
    residual_std: float


@dataclass
class ResidualTable:
    regime: str
    rows: list
    parameters: dict


def _check_decreasing(values, name: str):
    values = [float(v) for v in values]
    if len(values) < 2:
        raise PreconditionError(f"need at least two {name} values")
    if any(b >= a for a, b in zip(values, values[1:])):
        raise PreconditionError(f"{name} values must be strictly decreasing")
    return values


def expansion_residual_sub(domain, xi, eps_list, consts: Constants, config: QuadratureConfig, d: float | None = None) -> ResidualTable:
    """Residuals of ``J = a + eps (b + Psi) + c eps ln eps`` on a shrinking grid.

    For each eps the single-bubble ansatz ``delta = d eps^(1/n)`` at ``xi``
    is assembled, its energy measured, and the first-order expansion removed;
    the leftover is divided by eps.  Residuals shrinking roughly like
    sqrt(eps) certify the expansion.
    """
    eps_list = _check_decreasing(eps_list, "eps")
    if eps_list[0] >= 0.2 or eps_list[-1] <= 0.0:
        raise PreconditionError("eps values must lie in (0, 0.2)")
    n = consts.n
    xi = np.asarray(xi, dtype=float).reshape(-1)
    ev = psi_integrals(domain, xi, config)
    if d is None:
        d = optimal_d(consts, ev.value)
    psi_level = reduced_energy_sub(consts, ev.value, d)
    rows = []
    for eps in eps_list:
        delta = d * eps ** (1.0 / n)
        rep = energy(domain, [Bubble(1, delta, xi)], eps, consts, config)
        predicted = consts.a + consts.c * eps * math.log(eps) + eps * (consts.b + psi_level)
        residual = (rep.j_eps - predicted) / eps
        # the psi uncertainty enters the prediction linearly in eps
        res_std = math.sqrt((rep.j_std / eps) ** 2 + (consts.c1 * d**n * ev.value_std) ** 2)
        rows.append(ResidualRow(eps, rep.j_eps, rep.j_std, residual, res_std))
    return ResidualTable(
        regime="subcritical",
        rows=rows,
        parameters={"d": d, "psi_value": ev.value, "psi_std": ev.value_std, "reduced_energy": psi_level},
    )


def expansion_residual_hole(domain, rho_list, consts: Constants, config: QuadratureConfig, d: float | None = None, hole_center=None) -> ResidualTable:
    """Residuals of ``J = a + rho^(n/2) Phi(d, 0)`` for a shrinking hole.

    The hole of radius rho is carved out of the region at ``hole_center``
    (default: origin), the critical single-bubble ansatz
    ``delta = d sqrt(rho)`` is centered there, and the reduced-energy
    prediction is removed.
    """
    rho_list = _check_decreasing(rho_list, "rho")
    if rho_list[-1] <= 0.0:
        raise PreconditionError("rho values must be positive")
    n = consts.n
    center = np.zeros(n) if hole_center is None else np.asarray(hole_center, dtype=float).reshape(-1)
    depth = float(domain.depth_bound_many(center[None, :])[0])
    if depth <= 2.0 * rho_list[0]:
        raise PreconditionError("the hole center must be interior with clearance twice the largest rho")
    ev = psi_integrals(domain, center, config)
    b1 = consts.c1 * ev.value
    if d is None:
        d = hole_critical_point(consts, b1)[0]
    phi = b1 * d**n + consts.b2_hole * d**-n
    rows = []
    for rho in rho_list:
        holed = Domain(n, Difference(domain.root, Ball(center, rho)))
        delta = d * math.sqrt(rho)
        rep = energy(holed, [Bubble(1, delta, center)], 0.0, consts, config)
        predicted = consts.a + rho ** (n / 2.0) * phi
        residual = (rep.j_eps - predicted) / rho ** (n / 2.0)
        res_std = math.sqrt(
            (rep.j_std / rho ** (n / 2.0)) ** 2 + (consts.c1 * d**n * ev.value_std) ** 2
        )
        rows.append(ResidualRow(rho, rep.j_eps, rep.j_std, residual, res_std))
    return ResidualTable(
        regime="hole",
        rows=rows,
        parameters={"d": d, "b1": b1, "psi_value": ev.value, "psi_std": ev.value_std, "phi": phi},
    )
