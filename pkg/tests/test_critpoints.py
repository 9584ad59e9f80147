"""Tests for landscape critical-point search, classification, and audit.

Oracles: exact symmetry (ball center, dumbbell mirror plane), the exact
central Hessian ``2 omega I`` of a ball, isolated-ball landscape values for
well-separated components, and exact equivariance under similarity maps.
"""

import math

import numpy as np
import pytest

from bubblescape.critpoints import (
    CensusReport,
    CritConfig,
    census,
    find_minima,
    morse_audit,
    mountain_pass,
)
from bubblescape.errors import ConvergenceError, PreconditionError
from bubblescape.geometry import Ball, Capsule, Domain, Scale, Translate, Union
from bubblescape.quadrature import QuadratureConfig, sphere_area

CFG = QuadratureConfig(seed=0, near_budget=2**15, far_shells=24, replicates=4, target_rel_err=1e-3)
CRIT = CritConfig(multistart=8, newton_tol=1e-3, dedupe_radius=0.05)


def ball3() -> Domain:
    return Domain(3, Ball(np.zeros(3), 1.0))


def dumbbell_root():
    c = 1.75
    return Union(
        Ball(np.array([-c, 0.0, 0.0]), 1.0),
        Union(Ball(np.array([c, 0.0, 0.0]), 1.0), Capsule(np.array([-c, 0.0, 0.0]), np.array([c, 0.0, 0.0]), 0.35)),
    )


def dumbbell() -> Domain:
    return Domain(3, dumbbell_root())


@pytest.fixture(scope="module")
def dumbbell_census() -> CensusReport:
    return census(dumbbell(), CFG, CRIT, seed=0)


def test_crit_config_validation():
    with pytest.raises(PreconditionError):
        CritConfig(multistart=0)
    with pytest.raises(PreconditionError):
        CritConfig(newton_tol=0.0)
    with pytest.raises(PreconditionError):
        CritConfig(string_nodes=7)
    with pytest.raises(PreconditionError):
        CritConfig(morse_tol=1.5)
    with pytest.raises(PreconditionError):
        CritConfig(dedupe_radius=-1.0)


def test_ball_minimum_found_to_high_precision():
    """Symmetry cancellation drives Newton far below the nominal tolerance."""
    pts = find_minima(ball3(), CFG, CRIT, seed=0)
    assert len(pts) == 1
    p = pts[0]
    assert np.linalg.norm(p.location) <= 1e-6
    assert p.grad_norm <= 1e-10
    assert p.morse_index == 0
    assert p.nondegenerate
    # exact landscape data at the center: value omega/3, Hessian 2 omega I
    omega = sphere_area(3)
    assert p.psi_value == pytest.approx(omega / 3.0, rel=1e-12)
    np.testing.assert_allclose(p.hess_eigs, 2.0 * omega, rtol=1e-10)
    assert p.margin() == pytest.approx(1.0, rel=1e-9)


def test_dumbbell_census_structure(dumbbell_census):
    rep = dumbbell_census
    minima = rep.minima
    saddles = rep.saddles
    assert len(minima) == 2
    assert len(saddles) == 1
    assert rep.cat_lower_bound == 1
    assert rep.satisfied

    # mirror symmetry: the two minima sit at +/- (x1*, 0, 0).  Along the
    # axis the gradient noise does not cancel (the x1-mirror swaps the two
    # minima rather than fixing them), so the match is noise-floor limited.
    locs = sorted((m.location for m in minima), key=lambda x: x[0])
    assert locs[0][0] == pytest.approx(-locs[1][0], abs=2e-3)
    np.testing.assert_allclose(locs[0][1:], 0.0, atol=1e-3)
    np.testing.assert_allclose(locs[1][1:], 0.0, atol=1e-3)
    assert 1.0 < abs(locs[0][0]) < 2.75  # inside the left lobe

    # the saddle sits at the fully symmetric point, where the estimator noise
    # cancels exactly: located to far better than the nominal tolerance
    s = saddles[0]
    assert abs(s.location[0]) <= 1e-3  # the neck midplane
    assert s.grad_norm <= 1e-8
    np.testing.assert_allclose(s.location[1:], 0.0, atol=1e-6)
    assert s.morse_index == 1
    assert s.nondegenerate
    # exactly one descending direction, along the axis
    assert s.hess_eigs[0] < 0 < s.hess_eigs[1]
    assert s.psi_value > max(m.psi_value for m in minima)

    # census contract: gradient within tolerance + noise, separated points
    for p in rep.points:
        assert p.grad_norm <= CRIT.newton_tol + 3.0 * p.grad_std
        amax = float(np.max(np.abs(p.hess_eigs)))
        assert float(np.min(np.abs(p.hess_eigs))) > 1e-8 * amax
    for i, p in enumerate(rep.points):
        for q in rep.points[i + 1 :]:
            assert np.linalg.norm(p.location - q.location) > CRIT.dedupe_radius


def test_mirror_symmetric_minima_values_match(dumbbell_census):
    # the two lobe values agree up to the value-noise of two independent
    # estimates at two noise-floor-converged locations
    m1, m2 = dumbbell_census.minima
    assert m1.psi_value == pytest.approx(m2.psi_value, rel=1e-4)


def test_two_disjoint_balls_census_and_ordering():
    dom = Domain(3, Union(Ball(np.zeros(3), 1.0), Ball(np.array([4.0, 0.0, 0.0]), 0.6)))
    rep = census(dom, CFG, CRIT, seed=0)
    assert len(rep.minima) == 2
    assert len(rep.saddles) == 0  # no same-component pair
    assert rep.cat_lower_bound == 2
    assert rep.satisfied
    omega = sphere_area(3)
    iso_big = omega / 3.0
    iso_small = omega / 3.0 / 0.6**3
    first, second = rep.points[0], rep.points[1]
    # sorted by landscape value: the large ball hosts the lower minimum
    assert first.psi_value < second.psi_value
    assert np.linalg.norm(first.location) < 0.2
    assert np.linalg.norm(second.location - np.array([4.0, 0.0, 0.0])) < 0.2
    # the other component only removes exterior mass: psi below the isolated value
    assert first.psi_value <= iso_big * (1.0 + 1e-9)
    assert second.psi_value <= iso_small * (1.0 + 1e-9)
    assert first.psi_value >= 0.9 * iso_big
    assert second.psi_value >= 0.9 * iso_small


def test_find_minima_equivariance_under_similarity():
    lam, v = 0.5, np.array([0.3, -0.2, 0.1])
    base = find_minima(dumbbell(), CFG, CRIT, seed=0)
    mapped_dom = Domain(3, Translate(v, Scale(lam, dumbbell_root())))
    crit_scaled = CritConfig(multistart=8, newton_tol=1e-3, dedupe_radius=0.05 * lam)
    mapped = find_minima(mapped_dom, CFG, crit_scaled, seed=0)
    assert len(base) == len(mapped) == 2
    want = sorted((lam * p.location + v for p in base), key=lambda x: x[0])
    got = sorted((p.location for p in mapped), key=lambda x: x[0])
    for w, g in zip(want, got):
        assert np.linalg.norm(w - g) <= 10.0 * CRIT.newton_tol
    # landscape scaling: psi(lam x + v; lam Omega + v) = lam^-n psi(x; Omega)
    base_vals = sorted(p.psi_value for p in base)
    mapped_vals = sorted(p.psi_value for p in mapped)
    for b, m in zip(base_vals, mapped_vals):
        assert m == pytest.approx(b / lam**3, rel=1e-6)


def test_mountain_pass_requires_a_barrier():
    with pytest.raises(ConvergenceError):
        mountain_pass(ball3(), np.array([0.3, 0.0, 0.0]), np.array([-0.3, 0.0, 0.0]), CFG, CRIT)
    with pytest.raises(PreconditionError):
        mountain_pass(ball3(), np.array([0.02, 0.0, 0.0]), np.array([-0.02, 0.0, 0.0]), CFG, CRIT)
    with pytest.raises(PreconditionError):
        mountain_pass(ball3(), np.array([3.0, 0.0, 0.0]), np.array([-0.3, 0.0, 0.0]), CFG, CRIT)


def test_census_warm_start_reproduces(dumbbell_census):
    rep = census(dumbbell(), CFG, CRIT, warm_starts=dumbbell_census.points)
    assert len(rep.points) == len(dumbbell_census.points)
    assert [p.morse_index for p in rep.points] == [p.morse_index for p in dumbbell_census.points]
    for a, b in zip(rep.points, dumbbell_census.points):
        assert np.linalg.norm(a.location - b.location) <= 1e-6


def test_morse_audit_ball_stable():
    rep = morse_audit(ball3(), rho=0.05, trials=2, quad_cfg=CFG, crit_cfg=CRIT, seed=0)
    assert rep.stable, rep.failures
    assert rep.trials == 2
    assert rep.failures == []
    assert rep.min_margin > 1e-4
    assert rep.max_displacement < 0.25
    assert len(rep.base.points) == 1


def test_morse_audit_preconditions():
    with pytest.raises(PreconditionError):
        morse_audit(ball3(), rho=0.7, trials=1, quad_cfg=CFG, crit_cfg=CRIT)
    with pytest.raises(PreconditionError):
        morse_audit(ball3(), rho=0.05, trials=0, quad_cfg=CFG, crit_cfg=CRIT)
