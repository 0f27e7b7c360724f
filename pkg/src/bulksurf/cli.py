"""Command-line entry point: ``bulksurf {run,check,invariants,convergence} <config>``.

Exit codes: 0 success, 1 invariant violation, 2 solver failure, 3 configuration
or output error.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io as bio
from .config import ConfigError, RunConfig, load_config
from .coupled import State, Variant, initial_conditions, number_of_steps, prepare_initial, run
from .diagnostics import DiagnosticsRecord
from .errors import StepFailure
from .geometry import build_grid
from .model import BoundaryCase

EXIT_OK, EXIT_VIOLATION, EXIT_SOLVER, EXIT_CONFIG = 0, 1, 2, 3

log = logging.getLogger("bulksurf")


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

def run_simulation(cfg: RunConfig, out_dir: Path) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    state = prepare_initial(initial_conditions(cfg.ic, cfg.grid, cfg.params), cfg.variant)
    files = bio.write_snapshot(out_dir, 0, state)
    csv_path = out_dir / "diagnostics.csv"
    files.append(csv_path.name)
    with bio.TimeseriesWriter(csv_path) as ts:
        def observer(k: int, s: State, rec: DiagnosticsRecord) -> None:
            ts.write(k, rec)
            if cfg.snapshot_every and k % cfg.snapshot_every == 0:
                files.extend(bio.write_snapshot(out_dir, k, s))

        from .diagnostics import compute_record
        flow0 = None if cfg.variant.variant is Variant.NONCONVECTIVE_CH else state.flow
        ts.write(0, compute_record(cfg.grid, state.time, state.ch, flow0, cfg.params,
                                   cfg.variant.pots))
        summary = run(cfg.grid, cfg.variant, state, cfg.t_end, observer, cfg.diag_every)
    if summary.steps and (not cfg.snapshot_every or summary.steps % cfg.snapshot_every):
        files.extend(bio.write_snapshot(out_dir, summary.steps, summary.final))
    bio.write_manifest(out_dir, files, cfg.config_hash())
    print(f"run: {summary.steps} steps to t={summary.final.time:.6g}, "
          f"E={summary.last.E_total:.10g}, output in {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# invariants
# ---------------------------------------------------------------------------

@dataclass
class Check:
    name: str
    value: float
    limit: float
    applies: bool = True

    @property
    def passed(self) -> bool:
        return (not self.applies) or (math.isfinite(self.value) and self.value <= self.limit)


def invariant_checks(cfg: RunConfig, max_steps: int = 200) -> list[Check]:
    """Short run of the configured scenario, audited against the conservation laws."""
    grid, vc = cfg.grid, cfg.variant
    p = vc.params
    t_end = min(cfg.t_end, max_steps * vc.dt)
    if t_end <= 0:
        t_end = min(10, max_steps) * vc.dt
    recs: list[DiagnosticsRecord] = []
    summary = run(grid, vc, initial_conditions(cfg.ic, grid, p), t_end,
                  lambda k, s, r: recs.append(r), 1)
    allr = [summary.initial] + recs
    E = np.array([r.E_total for r in allr])
    scale = abs(E[0]) if E[0] != 0 else 1.0
    coupled = vc.variant is not Variant.NONCONVECTIVE_CH
    slack = 1e-8 if coupled else 1e-10
    Mc = np.array([r.M_combined for r in allr])
    Mb = np.array([r.M_bulk for r in allr])
    Ms = np.array([r.M_surf for r in allr])
    size = grid.area + grid.wall_length
    neumann_L = p.coupling.L_case is BoundaryCase.NEUMANN
    frozen = vc.variant is Variant.NEUMANN_AGG
    dmin = min(min(r.D_visc, r.D_slip, r.D_bulk_mob, r.D_surf_mob, r.D_robin) for r in allr)
    return [
        Check("finite fields", 0.0 if summary.final.is_finite() else math.inf, 0.0),
        Check("energy non-increasing (rel.)", float(np.max(np.diff(E), initial=0.0)) / scale,
              slack),
        Check("dissipation terms nonnegative", max(0.0, -dmin), 1e-12),
        Check("combined mass drift (rel.)", float(np.abs(Mc - Mc[0]).max()) / size, 1e-11),
        Check("bulk mass drift (rel.)", float(np.abs(Mb - Mb[0]).max()) / grid.area, 1e-11,
              neumann_L),
        Check("surface mass drift (rel.)", float(np.abs(Ms - Ms[0]).max()) / grid.wall_length,
              1e-11, neumann_L and not frozen),
        Check("max |div u|", max(r.R_div for r in allr), 10 * vc.ns.projection_tol, coupled),
    ]


def print_checks(checks: list[Check], out=None) -> bool:
    out = out or sys.stdout
    ok = True
    w = max(len(c.name) for c in checks)
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        if not c.applies:
            status = "n/a "
        ok &= c.passed
        print(f"{status}  {c.name:<{w}}  value={c.value:.3e}  limit={c.limit:.1e}", file=out)
    return ok


# ---------------------------------------------------------------------------
# convergence
# ---------------------------------------------------------------------------

def _restrict(a: np.ndarray) -> np.ndarray:
    return 0.25 * (a[0::2, 0::2] + a[1::2, 0::2] + a[0::2, 1::2] + a[1::2, 1::2])


def _l2(a: np.ndarray, vol: float) -> float:
    return float(np.sqrt(np.sum(a**2) * vol))


def spatial_orders(cfg: RunConfig, levels: int = 3) -> list[float]:
    """Self-convergence of phi at t_end on grids n, 2n, 4n (2x2 cell averaging)."""
    g0 = cfg.grid
    sols = []
    for k in range(levels):
        g = build_grid(g0.nx * 2**k, g0.ny * 2**k, g0.Lx, g0.Ly)
        s = run(g, cfg.variant, initial_conditions(cfg.ic, g, cfg.params), cfg.t_end)
        sols.append((g, s.final.ch.phi))
    errs = [_l2(_restrict(sols[k + 1][1]) - sols[k][1], sols[k][0].cell_volume)
            for k in range(levels - 1)]
    return [math.log2(errs[k] / errs[k + 1]) for k in range(len(errs) - 1)]


def temporal_orders(cfg: RunConfig, levels: int = 3) -> list[float]:
    """Self-convergence of phi at t_end for dt, dt/2, dt/4 on the configured grid."""
    g = cfg.grid
    sols = []
    for k in range(levels):
        vc = dataclasses.replace(cfg.variant, dt=cfg.variant.dt / 2**k)
        sols.append(run(g, vc, initial_conditions(cfg.ic, g, cfg.params), cfg.t_end).final.ch.phi)
    errs = [_l2(sols[k + 1] - sols[k], g.cell_volume) for k in range(levels - 1)]
    return [math.log2(errs[k] / errs[k + 1]) for k in range(len(errs) - 1)]


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bulksurf", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="integrate and write diagnostics and snapshots")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (overrides [output] dir)")
    sub.add_parser("check", help="validate a config file").add_argument("config")
    i = sub.add_parser("invariants", help="audit conservation laws on a short run")
    i.add_argument("config")
    i.add_argument("--max-steps", type=int, default=200)
    c = sub.add_parser("convergence", help="spatial and temporal refinement studies")
    c.add_argument("config")
    c.add_argument("--levels", type=int, default=3)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
    except OSError as exc:
        print(f"error: cannot read {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"error: invalid config {args.config}:", file=sys.stderr)
        for e in exc.errors:
            print(f"  {e}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "check":
            g = cfg.grid
            print(f"ok: {cfg.variant.variant.value} on {g.nx}x{g.ny} grid, dt={cfg.variant.dt:g}, "
                  f"{number_of_steps(cfg.t_end, cfg.variant.dt)} steps, "
                  f"K={cfg.params.K:g}, L={cfg.params.L:g}")
            return EXIT_OK
        if args.command == "run":
            out = Path(args.out) if args.out else Path(cfg.out_dir)
            try:
                return run_simulation(cfg, out)
            except OSError as exc:
                print(f"error: cannot write output: {exc}", file=sys.stderr)
                return EXIT_CONFIG
        if args.command == "invariants":
            ok = print_checks(invariant_checks(cfg, args.max_steps))
            return EXIT_OK if ok else EXIT_VIOLATION
        if args.command == "convergence":
            sp = spatial_orders(cfg, args.levels)
            tm = temporal_orders(cfg, args.levels)
            print("spatial orders (phi, L2): " + " ".join(f"{o:.3f}" for o in sp))
            print("temporal orders (phi, L2): " + " ".join(f"{o:.3f}" for o in tm))
            return EXIT_OK
    except StepFailure as exc:
        print(f"error: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
