#!/usr/bin/env python3
"""Validate two reduced-energy expansions against the measured functional.

For each regime we assemble the actual energy of the predicted bubble
configuration by quadrature and subtract the closed-form expansion through
the order we claim to control.  What remains is the residual after dividing
by the small parameter; if the expansion is right, that residual must shrink
as the parameter does.  The script prints the residual tables for

  * the subcritical single bubble on the unit 4-ball (eps = 0.1 .. 0.025),
  * the shrinking-hole bubble on the unit 3-ball   (rho = 1e-2 .. 2.5e-3),

and checks that both sequences decrease in magnitude.

Run:  python3 demos/04_energy_expansion_check.py
(deterministic: seeded quadrature, fixed sweeps)
"""

import numpy as np

from bubblescape.bubbles import expansion_residual_hole, expansion_residual_sub
from bubblescape.geometry import Ball, Domain
from bubblescape.landscape import constants
from bubblescape.quadrature import QuadratureConfig

CFG = QuadratureConfig(seed=0, near_budget=2**16, far_shells=24, replicates=4)


def show(table, param_name: str) -> list:
    print(f"\n  {param_name:>9}   {'J':>16}   {'residual':>12}   {'std':>9}")
    mags = []
    for row in table.rows:
        print(f"  {row.small_parameter:9.4e}   {row.j_value:16.10f}"
              f"   {row.residual:12.6f}   {row.residual_std:9.2e}")
        mags.append(abs(row.residual))
    return mags


def main() -> None:
    print("=" * 72)
    print("Reduced-energy expansion residuals")
    print("=" * 72)

    print("\nsubcritical single bubble, unit ball in R^4, bubble at the center")
    print("(the expansion removes the constant, the eps*ln(eps) term, and the")
    print(" full order-eps coefficient including the landscape value)")
    table = expansion_residual_sub(
        Domain(4, Ball(np.zeros(4), 1.0)),
        np.zeros(4),
        [0.1, 0.05, 0.025],
        constants(4),
        CFG,
    )
    mags = show(table, "eps")
    print(f"  optimal scale coefficient used: d = {table.parameters['d']:.9f}")
    assert all(a > b for a, b in zip(mags, mags[1:])), "residuals must decay"
    print(f"  |residual| decreased {mags[0]:.4f} -> {mags[-1]:.4f}: the order-eps")
    print("  coefficient is confirmed; what is left is the higher-order tail.")

    print("\nshrinking hole, unit ball in R^3, hole carved at the center")
    table = expansion_residual_hole(
        Domain(3, Ball(np.zeros(3), 1.0)),
        [1e-2, 5e-3, 2.5e-3],
        constants(3),
        CFG,
    )
    mags = show(table, "rho")
    print(f"  balanced scale coefficient used: d = {table.parameters['d']:.9f}")
    assert all(a > b for a, b in zip(mags, mags[1:])), "residuals must decay"
    print(f"  |residual| decreased {mags[0]:.4f} -> {mags[-1]:.4f}: the hole")
    print("  expansion captures the competition between the volume term and")
    print("  the reflected term at the correct order.")

    print("\nreading: a wrong constant anywhere in either expansion would leave a")
    print("residual that stalls at a fixed size instead of decaying with the")
    print("small parameter.")


if __name__ == "__main__":
    main()
