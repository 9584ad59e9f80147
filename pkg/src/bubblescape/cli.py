"""Reproducible command-line workflows over the landscape toolkit.

Every subcommand resolves its flags into a :class:`RunManifest`, writes the
resolved manifest next to its outputs, and emits only deterministic bytes
(floats via ``repr``, JSON with sorted keys, LF newlines, no timestamps), so
rerunning the same invocation reproduces every output file byte for byte.

Exit codes: 0 for success / a PASS verdict, 1 for a completed run whose
verdict is FAIL (census not satisfied, residuals not shrinking, audit
unstable), 2 for violated preconditions, 3 for numerical non-convergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bubbles import expansion_residual_hole, expansion_residual_sub
from .critpoints import CritConfig, census, find_minima, morse_audit
from .errors import ConvergenceError, PreconditionError
from .geometry import deep_point, load_domain
from .landscape import constants, predict_hole, predict_nodal, predict_subcritical
from .quadrature import QuadratureConfig, psi_integrals

__all__ = [
    "RunManifest",
    "GridOutput",
    "cmd_psi_grid",
    "cmd_crit",
    "cmd_predict",
    "cmd_energy_check",
    "cmd_morse_audit",
    "cmd_constants",
    "main",
]

_REGIMES = ("sub", "nodal", "hole")


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunManifest:
    """Fully resolved description of one command-line run."""

    command: str
    domain_file: str | None
    dimension: int
    seed: int
    output_dir: str
    regime: str | None
    quadrature: QuadratureConfig
    critical: CritConfig
    options: dict

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "domain_file": self.domain_file,
            "dimension": int(self.dimension),
            "seed": int(self.seed),
            "output_dir": self.output_dir,
            "regime": self.regime,
            "quadrature": dataclasses.asdict(self.quadrature),
            "critical": dataclasses.asdict(self.critical),
            "options": self.options,
        }


@dataclass
class GridOutput:
    """A 2D slice of the landscape: two sampled axes and a value matrix."""

    axis_indices: tuple
    first_axis: np.ndarray
    second_axis: np.ndarray
    fixed_values: np.ndarray
    values: np.ndarray  # (len(first_axis), len(second_axis)); -1.0 sentinel

    def __post_init__(self):
        if self.values.shape != (self.first_axis.size, self.second_axis.size):
            raise PreconditionError("grid matrix shape must match the axis step counts")


# ---------------------------------------------------------------------------
# Deterministic writers
# ---------------------------------------------------------------------------


def _fmt(x) -> str:
    """Full-precision, round-trippable text for one scalar."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_text(path: str, lines) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _write_manifest(manifest: RunManifest) -> None:
    _write_json(os.path.join(manifest.output_dir, "manifest.json"), manifest.to_dict())


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_psi_grid(manifest: RunManifest, domain) -> int:
    """Sample the landscape over a 2D slice and write a long-format CSV grid.

    Cells outside the region (or with certified depth below ``min_depth``)
    carry the sentinel value -1.0, which is unambiguous because the landscape
    is strictly positive at interior points.
    """
    opt = manifest.options
    n = domain.dimension
    a0, a1 = opt["axes"]
    xs = np.linspace(opt["lo"][0], opt["hi"][0], opt["steps"][0])
    ys = np.linspace(opt["lo"][1], opt["hi"][1], opt["steps"][1])
    fixed = np.asarray(opt["fixed"], dtype=float)
    min_depth = float(opt["min_depth"])

    points = np.empty((xs.size * ys.size, n))
    points[:, :] = _embed_fixed(n, (a0, a1), fixed)
    grid_x, grid_y = np.meshgrid(xs, ys, indexing="ij")
    points[:, a0] = grid_x.ravel()
    points[:, a1] = grid_y.ravel()

    keep = domain.contains_many(points)
    if min_depth > 0.0:
        keep &= domain.depth_bound_many(points) >= min_depth
    if not bool(keep.any()):
        raise PreconditionError("the requested slice does not meet the region interior")

    values = np.full(points.shape[0], -1.0)
    idx = np.flatnonzero(keep)
    with ThreadPoolExecutor(max_workers=min(8, os.cpu_count() or 1)) as pool:
        evals = list(
            pool.map(lambda k: psi_integrals(domain, points[k], manifest.quadrature).value, idx)
        )
    values[idx] = evals
    if np.any(values[idx] <= 0.0):
        raise ConvergenceError("quadrature produced a non-positive landscape value")

    grid = GridOutput(
        axis_indices=(a0, a1),
        first_axis=xs,
        second_axis=ys,
        fixed_values=fixed,
        values=values.reshape(xs.size, ys.size),
    )
    summary = _grid_summary(grid)
    lines = [
        "# concentration landscape over a 2D slice; sentinel -1.0 marks cells outside"
        " the region or below the depth guard (interior values are strictly positive)",
        f"# axes=({a0},{a1}); fixed={[float(v) for v in fixed]!r}; min_depth={_fmt(min_depth)}",
        summary,
        f"i,j,x{a0},x{a1},psi",
    ]
    for i in range(xs.size):
        for j in range(ys.size):
            lines.append(
                f"{i},{j},{_fmt(xs[i])},{_fmt(ys[j])},{_fmt(grid.values[i, j])}"
            )
    _write_text(os.path.join(manifest.output_dir, "psi_grid.csv"), lines)
    _write_manifest(manifest)
    print(f"psi-grid: {idx.size} interior cells of {points.shape[0]}; {summary[2:]}")
    return 0


def _grid_summary(grid: GridOutput) -> str:
    inner = grid.values >= 0.0
    vals = np.where(inner, grid.values, np.inf)
    imin, jmin = np.unravel_index(int(np.argmin(vals)), vals.shape)
    vals = np.where(inner, grid.values, -np.inf)
    imax, jmax = np.unravel_index(int(np.argmax(vals)), vals.shape)
    return "# summary: min={} at ({},{}); max={} at ({},{})".format(
        _fmt(grid.values[imin, jmin]),
        _fmt(grid.first_axis[imin]),
        _fmt(grid.second_axis[jmin]),
        _fmt(grid.values[imax, jmax]),
        _fmt(grid.first_axis[imax]),
        _fmt(grid.second_axis[jmax]),
    )


def cmd_crit(manifest: RunManifest, domain) -> int:
    """Run the critical-point census and write it as stable-key JSON."""
    rep = census(domain, manifest.quadrature, manifest.critical, seed=manifest.seed)
    _write_json(os.path.join(manifest.output_dir, "census.json"), rep.to_dict())
    _write_manifest(manifest)
    verdict = "PASS" if rep.satisfied else "FAIL"
    print(
        f"crit: {len(rep.minima)} minima, {len(rep.saddles)} saddles;"
        f" category lower bound {rep.cat_lower_bound}; {verdict}"
    )
    return 0 if rep.satisfied else 1


def _predict(manifest: RunManifest, domain):
    opt = manifest.options
    consts = constants(domain.dimension)
    rep_small = float(opt["sweep"][-1])
    if manifest.regime == "sub":
        xi = opt.get("xi")
        if xi is None:
            pts = find_minima(domain, manifest.quadrature, manifest.critical, seed=manifest.seed)
            xi = min(pts, key=lambda p: p.psi_value).location
        return predict_subcritical(domain, rep_small, np.asarray(xi, dtype=float), consts, manifest.quadrature)
    if manifest.regime == "nodal":
        return predict_nodal(
            domain, rep_small, consts, manifest.quadrature, eps_power_scale=opt.get("eps_power_scale")
        )
    return predict_hole(domain, rep_small, consts, manifest.quadrature)


def cmd_predict(manifest: RunManifest, domain) -> int:
    """Tabulate predicted concentration scales/points over a log sweep."""
    pred = _predict(manifest, domain)
    sweep = manifest.options["sweep"]
    small_name = "rho" if manifest.regime == "hole" else "epsilon"
    k, n = pred.anchors.shape

    head = [small_name]
    head += [f"delta_{b + 1}" for b in range(k)]
    if pred.regime == "nodal":
        head += [f"tau_{b + 1}" for b in range(k)]
    for b in range(k):
        head += [f"xi_{b + 1}_{c}" for c in range(n)]

    limits = "; ".join(f"{key}={_fmt(val)}" for key, val in sorted(pred.parameters.items()))
    lines = [
        f"# predicted blow-up rates; regime={pred.regime}; signs={tuple(pred.signs)!r}",
        f"# exponents: delta~{small_name}^{_fmt(pred.delta_exponent)},"
        f" tau~{small_name}^{_fmt(pred.tau_exponent)}",
        f"# limiting constants: {limits}",
        ",".join(head),
    ]
    for s in sweep:
        row = [_fmt(s)]
        row += [_fmt(v) for v in pred.delta(s)]
        if pred.regime == "nodal":
            row += [_fmt(v) for v in pred.tau(s)]
        row += [_fmt(v) for v in pred.centers(s).ravel()]
        lines.append(",".join(row))
    out = os.path.join(manifest.output_dir, f"predict_{manifest.regime}.csv")
    _write_text(out, lines)
    _write_manifest(manifest)
    print(f"predict: regime={pred.regime}; {len(sweep)} sweep rows; {limits}")
    return 0


def cmd_energy_check(manifest: RunManifest, domain) -> int:
    """Tabulate expansion residuals and report whether they shrink."""
    opt = manifest.options
    consts = constants(domain.dimension)
    values = [float(v) for v in opt["values"]]
    if manifest.regime == "sub":
        xi = opt.get("xi")
        if xi is None:
            pts = find_minima(domain, manifest.quadrature, manifest.critical, seed=manifest.seed)
            xi = min(pts, key=lambda p: p.psi_value).location
        table = expansion_residual_sub(
            domain, np.asarray(xi, dtype=float), values, consts, manifest.quadrature, d=opt.get("d")
        )
        small_name = "epsilon"
    else:
        table = expansion_residual_hole(
            domain,
            values,
            consts,
            manifest.quadrature,
            d=opt.get("d"),
            hole_center=opt.get("hole_center"),
        )
        small_name = "rho"

    mags = [abs(row.residual) for row in table.rows]
    passed = all(b < a for a, b in zip(mags, mags[1:]))
    verdict = "PASS" if passed else "FAIL"
    params = "; ".join(f"{key}={_fmt(val)}" for key, val in sorted(table.parameters.items()))
    lines = [
        f"# energy expansion residuals; regime={table.regime}; {params}",
        f"# verdict: {verdict} (PASS iff |residual| strictly decreases down the table)",
        f"{small_name},j_eps,residual,std_error",
    ]
    for row in table.rows:
        lines.append(
            ",".join(
                [_fmt(row.small_parameter), _fmt(row.j_value), _fmt(row.residual), _fmt(row.residual_std)]
            )
        )
    out = os.path.join(manifest.output_dir, f"energy_check_{manifest.regime}.csv")
    _write_text(out, lines)
    _write_manifest(manifest)
    print(f"energy-check: regime={table.regime}; residuals {[f'{m:.6g}' for m in mags]}; {verdict}")
    return 0 if passed else 1


def cmd_morse_audit(manifest: RunManifest, domain) -> int:
    """Audit census stability under random boundary perturbations."""
    opt = manifest.options
    audit = morse_audit(
        domain,
        rho=float(opt["rho"]),
        trials=int(opt["trials"]),
        quad_cfg=manifest.quadrature,
        crit_cfg=manifest.critical,
        seed=manifest.seed,
    )
    _write_json(os.path.join(manifest.output_dir, "morse_audit.json"), audit.to_dict())
    _write_manifest(manifest)
    verdict = "PASS" if audit.stable else "FAIL"
    print(
        f"morse-audit: {audit.trials} trials at rho={_fmt(audit.rho)};"
        f" min margin {_fmt(audit.min_margin)}; {verdict}"
    )
    return 0 if audit.stable else 1


_PROVENANCE = {
    "n": "input dimension",
    "p": "closed form",
    "critical_mass": "radial quadrature of the bubble profile",
    "log_mass": "radial quadrature of the bubble profile",
    "a": "radial quadrature (leading energy level)",
    "b": "radial quadrature (first-order coefficient)",
    "c": "radial quadrature (log-term coefficient)",
    "c1": "radial quadrature (landscape coupling)",
    "c2": "radial quadrature (log-derivative coupling)",
    "c1_nodal": "radial quadrature (pair interaction)",
    "c2_nodal": "injected default: identified with c2, overridable per call",
    "c3_nodal": "radial quadrature (pair interaction)",
    "c4_nodal": "one-dimensional quadrature (half-space wall kernel)",
    "b2_hole": "radial quadrature (hole coupling)",
}


def cmd_constants(manifest: RunManifest, domain=None) -> int:
    """Dump the dimensional model constants with provenance notes."""
    consts = constants(manifest.dimension)
    values = dataclasses.asdict(consts)
    payload = {
        "dimension": int(manifest.dimension),
        "values": {key: (int(v) if key == "n" else float(v)) for key, v in values.items()},
        "provenance": {key: _PROVENANCE[key] for key in values},
    }
    _write_json(os.path.join(manifest.output_dir, "constants.json"), payload)
    _write_manifest(manifest)
    print(f"constants: n={manifest.dimension}; wrote {len(values)} values")
    return 0


# ---------------------------------------------------------------------------
# Argument parsing and manifest resolution
# ---------------------------------------------------------------------------


def _embed_fixed(n: int, axes: tuple, fixed: np.ndarray) -> np.ndarray:
    out = np.zeros(n)
    rest = [c for c in range(n) if c not in axes]
    out[rest] = fixed
    return out


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--domain", metavar="FILE", help="JSON domain description")
    common.add_argument("--dim", type=int, help="space dimension (checked against the domain file)")
    common.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    common.add_argument("--out", metavar="DIR", default=".", help="output directory (default .)")
    common.add_argument("--near-budget", type=int, default=2**20, help="quadrature ray budget")
    common.add_argument("--far-shells", type=int, default=64, help="dyadic far-field octaves")
    common.add_argument("--replicates", type=int, default=8, help="independent scramblings")
    common.add_argument("--target-rel-err", type=float, default=1e-3, help="relative error target")
    common.add_argument("--multistart", type=int, default=12, help="extra Newton starts")
    common.add_argument("--newton-tol", type=float, default=1e-3, help="accepted gradient norm")
    common.add_argument("--dedupe-radius", type=float, default=0.05, help="merge radius for points")
    common.add_argument("--morse-tol", type=float, default=1e-6, help="relative degeneracy floor")

    top = argparse.ArgumentParser(
        prog="bubblescape",
        description="Concentration landscapes, critical points, and blow-up rate prediction.",
    )
    sub = top.add_subparsers(dest="command", required=True)

    grid = sub.add_parser("psi-grid", parents=[common], help="sample the landscape on a 2D slice")
    grid.add_argument("--axes", type=int, nargs=2, default=(0, 1), metavar=("I", "J"))
    grid.add_argument("--lo", type=float, nargs=2, metavar=("A", "B"), help="lower slice corner")
    grid.add_argument("--hi", type=float, nargs=2, metavar=("A", "B"), help="upper slice corner")
    grid.add_argument("--steps", type=int, nargs=2, default=(33, 33), metavar=("NI", "NJ"))
    grid.add_argument("--fixed", type=float, nargs="*", help="values of the remaining coordinates")
    grid.add_argument("--min-depth", type=float, default=0.0, help="interior depth guard")

    sub.add_parser("crit", parents=[common], help="critical-point census")

    pred = sub.add_parser("predict", parents=[common], help="blow-up rate tables")
    pred.add_argument("--regime", choices=_REGIMES, required=True)
    pred.add_argument("--sweep-min", type=float, default=1e-3)
    pred.add_argument("--sweep-max", type=float, default=1e-1)
    pred.add_argument("--sweep-count", type=int, default=13)
    pred.add_argument("--xi", type=float, nargs="+", help="concentration point (sub; default: argmin)")
    pred.add_argument("--eps-power-scale", type=float, help="override the rate power scale (nodal)")

    en = sub.add_parser("energy-check", parents=[common], help="expansion residual verdict")
    en.add_argument("--regime", choices=("sub", "hole"), required=True)
    en.add_argument("--values", type=float, nargs="+", help="strictly decreasing small parameters")
    en.add_argument("--xi", type=float, nargs="+", help="concentration point (sub; default: argmin)")
    en.add_argument("--hole-center", type=float, nargs="+", help="hole center (hole; default: origin)")
    en.add_argument("--d", type=float, help="override the concentration scale coefficient")

    audit = sub.add_parser("morse-audit", parents=[common], help="census stability audit")
    audit.add_argument("--rho", type=float, default=0.05, help="C^2 size of the perturbations")
    audit.add_argument("--trials", type=int, default=5, help="number of random trials")

    sub.add_parser("constants", parents=[common], help="dimensional model constants")
    return top


def _resolve(args) -> tuple:
    """Validate flags into a RunManifest plus the loaded domain (if any)."""
    quad = QuadratureConfig(
        seed=args.seed,
        near_budget=args.near_budget,
        far_shells=args.far_shells,
        replicates=args.replicates,
        target_rel_err=args.target_rel_err,
    )
    crit = CritConfig(
        multistart=args.multistart,
        newton_tol=args.newton_tol,
        dedupe_radius=args.dedupe_radius,
        morse_tol=args.morse_tol,
    )

    domain = None
    if args.command == "constants":
        if args.dim is None:
            raise PreconditionError("constants requires --dim")
        dimension = args.dim
    else:
        if not args.domain:
            raise PreconditionError(f"{args.command} requires --domain FILE")
        if not os.path.exists(args.domain):
            raise PreconditionError(f"domain file {args.domain!r} does not exist")
        domain = load_domain(args.domain)
        dimension = domain.dimension
        if args.dim is not None and args.dim != dimension:
            raise PreconditionError(
                f"--dim {args.dim} contradicts the domain file dimension {dimension}"
            )

    regime = getattr(args, "regime", None)
    options: dict = {}
    if args.command == "psi-grid":
        options = _resolve_grid_options(args, domain)
    elif args.command == "predict":
        options = _resolve_predict_options(args, dimension)
    elif args.command == "energy-check":
        options = _resolve_energy_options(args, dimension, regime)
    elif args.command == "morse-audit":
        if args.trials < 1:
            raise PreconditionError("--trials must be at least 1")
        options = {"rho": float(args.rho), "trials": int(args.trials)}

    os.makedirs(args.out, exist_ok=True)
    manifest = RunManifest(
        command=args.command,
        domain_file=args.domain,
        dimension=dimension,
        seed=args.seed,
        output_dir=args.out,
        regime=regime,
        quadrature=quad,
        critical=crit,
        options=options,
    )
    return manifest, domain


def _resolve_grid_options(args, domain) -> dict:
    n = domain.dimension
    a0, a1 = args.axes
    if not (0 <= a0 < n and 0 <= a1 < n) or a0 == a1:
        raise PreconditionError("--axes needs two distinct indices below the dimension")
    axes = (a0, a1)
    if args.steps[0] < 2 or args.steps[1] < 2:
        raise PreconditionError("--steps must be at least 2 in each direction")
    fixed = [0.0] * (n - 2) if args.fixed is None else [float(v) for v in args.fixed]
    if len(fixed) != n - 2:
        raise PreconditionError(f"--fixed needs exactly {n - 2} values")
    if args.lo is None or args.hi is None:
        anchor, _ = deep_point(domain)
        radius = domain.bounding_radius(anchor)
        lo = [float(anchor[a0] - radius), float(anchor[a1] - radius)]
        hi = [float(anchor[a0] + radius), float(anchor[a1] + radius)]
        lo = lo if args.lo is None else [float(v) for v in args.lo]
        hi = hi if args.hi is None else [float(v) for v in args.hi]
    else:
        lo = [float(v) for v in args.lo]
        hi = [float(v) for v in args.hi]
    if not (lo[0] < hi[0] and lo[1] < hi[1]):
        raise PreconditionError("--lo must be strictly below --hi on both axes")
    if args.min_depth < 0.0:
        raise PreconditionError("--min-depth must be nonnegative")
    return {
        "axes": list(axes),
        "lo": lo,
        "hi": hi,
        "steps": [int(args.steps[0]), int(args.steps[1])],
        "fixed": fixed,
        "min_depth": float(args.min_depth),
    }


def _resolve_predict_options(args, dimension: int) -> dict:
    if not 0.0 < args.sweep_min <= args.sweep_max:
        raise PreconditionError("need 0 < --sweep-min <= --sweep-max")
    if args.sweep_count < 1:
        raise PreconditionError("--sweep-count must be at least 1")
    sweep = [float(v) for v in np.geomspace(args.sweep_min, args.sweep_max, args.sweep_count)]
    options = {"sweep": sweep}
    if args.xi is not None:
        if args.regime != "sub":
            raise PreconditionError("--xi applies only to the sub regime")
        if len(args.xi) != dimension:
            raise PreconditionError(f"--xi needs exactly {dimension} coordinates")
        options["xi"] = [float(v) for v in args.xi]
    if args.eps_power_scale is not None:
        if args.regime != "nodal":
            raise PreconditionError("--eps-power-scale applies only to the nodal regime")
        options["eps_power_scale"] = float(args.eps_power_scale)
    return options


def _resolve_energy_options(args, dimension: int, regime: str) -> dict:
    defaults = {"sub": [0.1, 0.05, 0.025], "hole": [1e-2, 5e-3, 2.5e-3]}
    values = defaults[regime] if args.values is None else [float(v) for v in args.values]
    options: dict = {"values": values}
    if args.xi is not None:
        if regime != "sub":
            raise PreconditionError("--xi applies only to the sub regime")
        if len(args.xi) != dimension:
            raise PreconditionError(f"--xi needs exactly {dimension} coordinates")
        options["xi"] = [float(v) for v in args.xi]
    if args.hole_center is not None:
        if regime != "hole":
            raise PreconditionError("--hole-center applies only to the hole regime")
        if len(args.hole_center) != dimension:
            raise PreconditionError(f"--hole-center needs exactly {dimension} coordinates")
        options["hole_center"] = [float(v) for v in args.hole_center]
    if args.d is not None:
        if not args.d > 0.0:
            raise PreconditionError("--d must be positive")
        options["d"] = float(args.d)
    return options


_DISPATCH = {
    "psi-grid": cmd_psi_grid,
    "crit": cmd_crit,
    "predict": cmd_predict,
    "energy-check": cmd_energy_check,
    "morse-audit": cmd_morse_audit,
    "constants": cmd_constants,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        manifest, domain = _resolve(args)
        return _DISPATCH[manifest.command](manifest, domain)
    except PreconditionError as exc:
        print(f"precondition violated: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"failed to converge: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
