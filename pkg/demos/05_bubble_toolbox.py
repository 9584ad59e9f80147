#!/usr/bin/env python3
"""Exercise the bubble toolbox: profiles, kernel modes, isometry, interaction.

Four small experiments, each with a sharp pass/fail criterion:

  1. the bubble profile solves its own equation (finite-difference Laplacian
     against the closed-form right-hand side);
  2. the n+1 kernel modes solve the linearized equation the same way;
  3. the scaling map that should act as an isometry on the gradient norm and
     as a fixed power on Lebesgue norms does exactly that, measured on random
     profiles;
  4. two well-separated bubbles interact like (scale product / distance)^(n-2)
     with the predicted constant.

Run:  python3 demos/05_bubble_toolbox.py
(deterministic: fixed seeds throughout)
"""

import numpy as np

from bubblescape.bubbles import (
    Bubble,
    bubble_value,
    interaction,
    linearization_residual,
    rescaling_isometry_check,
)
from bubblescape.landscape import constants
from bubblescape.quadrature import QuadratureConfig

CFG = QuadratureConfig(seed=0, near_budget=2**15, far_shells=24, replicates=4)


def profile_residual(n: int, delta: float, center, X) -> np.ndarray:
    """Relative FD residual of the profile equation -Delta U = U^((n+2)/(n-2)).

    Central second differences with a locally scaled step, normalized by the
    right-hand side.
    """
    p = (n + 2.0) / (n - 2.0)
    r2 = ((X - center[None, :]) ** 2).sum(axis=1)
    h = 1e-4 * np.sqrt(delta**2 + r2)
    u0 = bubble_value(n, delta, center, X)
    lap = np.zeros(X.shape[0])
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        up = bubble_value(n, delta, center, X + h[:, None] * e[None, :])
        um = bubble_value(n, delta, center, X - h[:, None] * e[None, :])
        lap += (up - 2.0 * u0 + um) / h**2
    rhs = u0**p
    return np.abs(lap + rhs) / rhs


def sample_cloud(rng, center, delta: float, count: int) -> np.ndarray:
    """Gaussian cloud around the concentration point, center excluded."""
    n = center.shape[0]
    X = center + rng.normal(size=(count, n)) * delta
    keep = ((X - center[None, :]) ** 2).sum(axis=1) > (0.05 * delta) ** 2
    return X[keep]


def main() -> None:
    rng = np.random.default_rng(20260819)

    print("=" * 72)
    print("1. profile equation residual")
    print("=" * 72)
    for n in (3, 4, 5):
        delta = float(rng.uniform(0.3, 2.0))
        center = rng.normal(size=n)
        X = sample_cloud(rng, center, delta, 50)
        worst = float(np.max(profile_residual(n, delta, center, X)))
        print(f"  n={n}  delta={delta:.3f}  worst relative residual {worst:.3e}")
        assert worst < 1e-4

    print()
    print("=" * 72)
    print("2. kernel-mode residuals (scaling mode + n translation modes)")
    print("=" * 72)
    for n in (3, 4):
        delta = float(rng.uniform(0.3, 2.0))
        center = rng.normal(size=n)
        X = sample_cloud(rng, center, delta, 50)
        worsts = [
            float(np.max(linearization_residual(n, mode, delta, center, X)))
            for mode in range(n + 1)
        ]
        print(f"  n={n}  per-mode worst residuals: "
              + "  ".join(f"{w:.2e}" for w in worsts))
        assert max(worsts) < 1e-4

    print()
    print("=" * 72)
    print("3. rescaling isometry")
    print("=" * 72)
    print("  the map u -> s^((n-2)/2) u(s x) preserves the Dirichlet norm and")
    print("  scales the Lebesgue-exponent norms by a fixed power of s:")
    for n, s in ((3, 4.0), (4, 3.0)):
        rep = rescaling_isometry_check(n, s)
        print(f"  n={n} s={s}: max Dirichlet deviation "
              f"{rep['dirichlet_max_deviation']:.2e}, Lebesgue log-slope "
              f"{rep['ls_slope']:.6f} (expected {rep['ls_slope_expected']:.6f})")
        assert rep["dirichlet_max_deviation"] <= 1e-6
        assert abs(rep["ls_slope"] - rep["ls_slope_expected"]) <= 1e-3

    print()
    print("=" * 72)
    print("4. two-bubble interaction law")
    print("=" * 72)
    n = 3
    c1 = constants(n).c1_nodal
    delta = 1e-2
    print(f"  model: c1 * (delta1 delta2)^((n-2)/2) / sep^(n-2),"
          f"  c1 = {c1:.6f}")
    print(f"  {'separation':>10}   {'measured':>12}   {'model':>12}   {'ratio':>7}")
    seps = [1.0, 1.4, 2.0, 2.8, 4.0]
    vals = []
    for sep in seps:
        b1 = Bubble(+1, delta, np.zeros(n))
        b2 = Bubble(-1, delta, np.array([sep, 0.0, 0.0]))
        meas = interaction(n, b1, b2, CFG).value
        model = c1 * delta / sep
        vals.append(meas)
        print(f"  {sep:10.2f}   {meas:12.6e}   {model:12.6e}"
              f"   {meas / model:7.4f}")
        assert abs(meas / model - 1.0) < 0.05
    slope = np.polyfit(np.log(seps), np.log(vals), 1)[0]
    print(f"  measured log-log slope in separation: {slope:.4f} (expected -1)")
    assert abs(slope + 1.0) < 0.05

    print("\nall four experiments passed their criteria.")


if __name__ == "__main__":
    main()
