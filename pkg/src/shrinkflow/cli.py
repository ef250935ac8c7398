"""Command-line front end: ``shrinkflow <command> [options]``.

Scenario files are TOML with optional ``[body]``, ``[outer]``, ``[dynamics]``
and ``[sweep]`` tables.  Command-line flags override file values.  Output
files go to ``--out``, else ``$SHRINKFLOW_OUTPUT_DIR``, else the scenario's
``output_dir``, else the working directory.

Exit codes: 0 success, 2 input error, 3 numerical failure, 4 verification
or slope-window failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import asymptotics as asy
from .dynamics import (
    TIME_REACHED,
    BodyState,
    MassRegime,
    SimParams,
    integrate,
    integrate_massive_vortex,
    integrate_point_vortex,
)
from .errors import InputError, ShrinkflowError, VerificationError
from .fluid_quantities import evaluate, exterior_constants
from .geometry import Placement, parse_shape
from .identities import CATALOG, VerifyConfig, run_all
from .layer_potential import BoundaryModel

OUTPUT_ENV = "SHRINKFLOW_OUTPUT_DIR"
SWEEPS = ("capacity", "added-mass", "force", "case-i", "case-ii")
REGIMES = ("fixed", "case-i", "case-ii")


@dataclass
class Scenario:
    body: str = "circle:1"
    outer: str = "circle:1"
    n_body: int = 64
    n_outer: int = 128
    q0: tuple = (0.0, 0.0, 0.0)
    p0: tuple = (0.0, 0.0, 0.0)
    eps: float = 0.3
    gamma: float = 1.0
    regime: str = "fixed"
    m: float = 1.0
    J: float = 1.0
    alpha: float = 2.0
    scheme: str = "rk4"
    dt: float = 1e-3
    rtol: float = 1e-10
    t_final: float = 10.0
    delta_stop: float | None = None
    record_every: int = 1
    grid: tuple = asy.DEFAULT_GRID
    q_sweep: tuple = (0.3, 0.2, 0.1)
    output_dir: str | None = None
    seed: int = 12345

    # -- construction -------------------------------------------------------

    @classmethod
    def from_toml(cls, path) -> "Scenario":
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except OSError as exc:
            raise InputError(f"cannot read scenario {path}: {exc}") from None
        except tomllib.TOMLDecodeError as exc:
            raise InputError(f"scenario {path}: {exc}") from None
        return cls().merge(data)

    def merge(self, data: dict) -> "Scenario":
        updates = {}
        body = data.get("body", {})
        outer = data.get("outer", {})
        dyn = data.get("dynamics", {})
        sweep = data.get("sweep", {})
        known = {"body", "outer", "dynamics", "sweep", "output_dir", "seed"}
        unknown = set(data) - known
        if unknown:
            raise InputError(f"unknown scenario section(s): {sorted(unknown)}")
        if "shape" in body:
            updates["body"] = body["shape"]
        if "n" in body:
            updates["n_body"] = body["n"]
        if "shape" in outer:
            updates["outer"] = outer["shape"]
        if "n" in outer:
            updates["n_outer"] = outer["n"]
        for key in ("q0", "p0", "eps", "gamma", "regime", "m", "J", "alpha", "scheme", "dt",
                    "rtol", "t_final", "delta_stop", "record_every"):
            if key in dyn:
                updates[key] = dyn[key]
        if "grid" in sweep:
            updates["grid"] = tuple(sweep["grid"])
        if "q" in sweep:
            updates["q_sweep"] = tuple(sweep["q"])
        for key in ("output_dir", "seed"):
            if key in data:
                updates[key] = data[key]
        return replace(self, **updates)

    def override(self, args: argparse.Namespace) -> "Scenario":
        updates = {k: v for k, v in vars(args).items()
                   if k in self.__dataclass_fields__ and v is not None}
        return replace(self, **updates)

    # -- validation ---------------------------------------------------------

    def shapes(self):
        out = []
        for label, text in (("body", self.body), ("outer", self.outer)):
            try:
                out.append(parse_shape(text))
            except InputError as exc:
                raise InputError(f"{label}: {exc}") from None
        return tuple(out)

    def vector(self, name: str, length: int = 3) -> np.ndarray:
        v = np.asarray(getattr(self, name), dtype=float)
        if v.shape != (length,):
            raise InputError(f"{name} must have {length} components, got {v.size}")
        return v

    def mass_regime(self) -> MassRegime:
        if self.regime not in REGIMES:
            raise InputError(f"regime must be one of {REGIMES}, got {self.regime!r}")
        return MassRegime(self.regime, float(self.m), float(self.J), float(self.alpha))

    def sim_params(self) -> SimParams:
        try:
            return SimParams(self.scheme, float(self.dt), float(self.rtol), float(self.t_final),
                             self.delta_stop, float(self.gamma), self.mass_regime(),
                             int(self.record_every))
        except ValueError as exc:
            raise InputError(f"dynamics: {exc}") from None

    def out_dir(self, flag: str | None) -> Path:
        path = Path(flag or os.environ.get(OUTPUT_ENV) or self.output_dir or ".")
        path.mkdir(parents=True, exist_ok=True)
        return path


# ---------------------------------------------------------------------------
# commands


def _fmt(a) -> str:
    return np.array2string(np.asarray(a), precision=10, suppress_small=True,
                           max_line_width=120)


def cmd_exterior(args) -> int:
    text = args.shape or args.scenario.body
    try:
        shape = parse_shape(text)
    except InputError as exc:
        raise InputError(f"shape: {exc}") from None
    ext = exterior_constants(shape, args.n)
    lines = [
        f"shape            {shape.describe()}",
        f"nodes            {args.n}",
        f"Cap              {ext.capacity:.12g}",
        f"C_ext            {ext.C_ext:.12g}",
        f"zeta             {_fmt(ext.zeta)}",
        f"zeta (contour)   {_fmt(ext.zeta_contour)}   discrepancy {ext.zeta_discrepancy:.2e}",
        "M_a (plane)", _fmt(ext.M_a),
        "M_dagger", _fmt(ext.M_dagger),
        "M_bar", _fmt(ext.M_bar),
        "sigma", _fmt(ext.sigma),
    ]
    print("\n".join(lines))
    return 0


def cmd_operators(args) -> int:
    sc = args.scenario
    body, outer = sc.shapes()
    model = BoundaryModel(body, outer, sc.n_body, sc.n_outer)
    q = Placement.from_q(sc.vector("q0"), sc.eps)
    p = sc.vector("p0")
    m, J = sc.mass_regime().masses(sc.eps)
    fs = evaluate(model, q, p, sc.gamma, m, J)
    lines = [
        f"q = {_fmt(q.q)}  eps = {sc.eps}  separation = {fs.separation:.6g}",
        f"C              {fs.C:.12g}",
        "M_a", _fmt(fs.inertia.M_a),
        "M (genuine + added)", _fmt(fs.M),
        f"E              {_fmt(fs.E)}",
        f"B              {_fmt(fs.B)}",
        f"<Gamma_S,p,p>  {_fmt(fs.gamma_S)}",
        f"<Gamma_bd,p,p> {_fmt(fs.gamma_boundary)}",
        f"F              {_fmt(fs.F)}",
        f"energy         {fs.energy:.12g}",
    ]
    print("\n".join(lines))
    return 0


def _write_limit(path: Path, t, h, l, energy, label: str):
    with open(path, "w") as fh:
        fh.write(f"# {label}: t [time]; h1,h2 [length] vortex position; l1,l2 [length/time] "
                 f"velocity; energy = conserved limit energy\n")
        fh.write("t,h1,h2,l1,l2,energy\n")
        for row in zip(t, h[:, 0], h[:, 1], l[:, 0], l[:, 1], energy):
            fh.write(",".join(f"{v:.16e}" for v in row) + "\n")


def cmd_simulate(args) -> int:
    sc = args.scenario
    out = sc.out_dir(args.out)
    _, outer = sc.shapes()
    q0, p0 = sc.vector("q0"), sc.vector("p0")
    if args.limit:
        routh = asy.routh_for(outer, BoundaryModel(parse_shape(sc.body), outer,
                                                   sc.n_body, sc.n_outer))
        if args.limit == "point-vortex":
            lim = integrate_point_vortex(q0[1:], sc.gamma, routh, sc.t_final, sc.dt)
        else:
            lim = integrate_massive_vortex(q0[1:], p0[1:], sc.m, sc.gamma, routh, sc.t_final,
                                           sc.dt)
        path = out / f"{args.limit}.csv"
        _write_limit(path, lim.t, lim.h, lim.l, lim.energy, args.limit)
        print(f"limit            {args.limit}")
        print(f"samples          {len(lim.t)}  final t = {lim.t[-1]:.6g}")
        print(f"termination      {lim.reason}")
        print(f"energy drift     {lim.energy_drift():.3e}")
        print(f"csv              {path}")
        return 0
    body, outer = sc.shapes()
    model = BoundaryModel(body, outer, sc.n_body, sc.n_outer)
    params = sc.sim_params()
    traj = integrate(model, BodyState(0.0, q0, p0, sc.eps), params)
    path = out / "trajectory.csv"
    traj.write_csv(path)
    sep = np.asarray(traj.separation)
    print(f"samples          {len(traj.t)}  final t = {traj.t[-1] if traj.t else 0.0:.6g}")
    print(f"termination      {traj.reason}" + (f" ({traj.message})" if traj.message else ""))
    print(f"max energy drift {traj.energy_drift():.3e}")
    print(f"min separation   {np.min(sep) if sep.size else float('nan'):.6g}")
    print(f"csv              {path}")
    if traj.reason not in (TIME_REACHED, "collision-guard"):
        raise ShrinkflowError(f"simulation failed: {traj.message}")
    return 0


def cmd_sweep(args) -> int:
    sc = args.scenario
    out = sc.out_dir(args.out)
    body, outer = sc.shapes()
    grid = tuple(sorted((float(e) for e in sc.grid), reverse=True))
    q = sc.vector("q_sweep")
    results = []
    if args.which == "capacity":
        results.append(asy.capacity_sweep(body, outer, q, grid))
    elif args.which == "added-mass":
        results.append(asy.added_mass_sweep(body, outer, q, grid))
    elif args.which == "force":
        results.extend(asy.force_sweep(body, outer, q, grid))
    elif args.which == "case-i":
        results.append(asy.convergence_case_i(body, outer, sc.vector("q0"), sc.vector("p0"),
                                              sc.gamma, sc.m, sc.J, grid, sc.t_final, sc.dt,
                                              sc.n_body, sc.n_outer))
    else:
        results.append(asy.convergence_case_ii(body, outer, sc.vector("q0"), sc.vector("p0"),
                                               sc.gamma, sc.m, sc.J, sc.alpha, grid,
                                               sc.t_final, sc.dt, sc.n_body, sc.n_outer))
    ok = True
    for res in results:
        path = out / f"sweep-{res.name}.csv"
        res.write_csv(path)
        print(res.summary())
        print(f"  csv: {path}")
        ok &= res.passed
        if res.name.startswith("case-") and not res.extra["strictly_decreasing"]:
            ok = False
    if not ok:
        raise VerificationError(f"sweep {args.which}: window or monotonicity check failed")
    return 0


def cmd_verify(args) -> int:
    if args.list:
        for ident in CATALOG:
            print(f"{ident.name:<20} [{ident.group}] {ident.description}")
        return 0
    sc = args.scenario
    body, outer = sc.shapes() if args.scenario_given else (None, None)
    cfg = VerifyConfig.default() if body is None else VerifyConfig(body, outer)
    cfg = replace(cfg, seed=sc.seed, tol_scale=args.tol_scale, samples=args.samples)
    names = {i.name for i in CATALOG}
    if args.only:
        bad = set(args.only) - names
        if bad:
            raise InputError(f"unknown identity name(s): {sorted(bad)}")
    results = run_all(cfg, (lambda n: n in args.only) if args.only else None)
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    if failed:
        raise VerificationError("failed identities: " + ", ".join(failed))
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _floats(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="TOML scenario file")
    p.add_argument("--body", help="body shape, e.g. ellipse:2,1")
    p.add_argument("--outer", help="outer boundary shape, e.g. circle:1")
    p.add_argument("--n-body", dest="n_body", type=int)
    p.add_argument("--n-outer", dest="n_outer", type=int)
    p.add_argument("--q0", type=_floats, help="theta,h1,h2")
    p.add_argument("--p0", type=_floats, help="omega,l1,l2")
    p.add_argument("--eps", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--regime", choices=REGIMES)
    p.add_argument("--m", type=float, help="mass, or m1 in case-ii")
    p.add_argument("--J", type=float, help="inertia, or J1 in the shrinking regimes")
    p.add_argument("--alpha", type=float)
    p.add_argument("--scheme", choices=("rk4", "rk45"))
    p.add_argument("--dt", type=float)
    p.add_argument("--rtol", type=float)
    p.add_argument("--t-final", dest="t_final", type=float)
    p.add_argument("--delta-stop", dest="delta_stop", type=float)
    p.add_argument("--record-every", dest="record_every", type=int)
    p.add_argument("--grid", type=_floats, help="comma-separated eps values")
    p.add_argument("--q-sweep", dest="q_sweep", type=_floats)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help=f"output directory (overrides ${OUTPUT_ENV})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shrinkflow",
                                     description="Rigid body with circulation in a bounded "
                                                 "planar ideal fluid.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exterior", help="plane constants of a body shape")
    _common(p)
    p.add_argument("--shape")
    p.add_argument("--n", type=int, default=512)
    p.set_defaults(func=cmd_exterior)

    p = sub.add_parser("operators", help="mass, forces and Christoffel terms at one state")
    _common(p)
    p.set_defaults(func=cmd_operators)

    p = sub.add_parser("simulate", help="integrate the body ODE or a limit system")
    _common(p)
    p.add_argument("--limit", choices=("point-vortex", "massive-vortex"))
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="eps-sweeps of expansions and convergence")
    p.add_argument("which", choices=SWEEPS)
    _common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="run the identity suite")
    _common(p)
    p.add_argument("--list", action="store_true", help="print the identity catalogue")
    p.add_argument("--tol-scale", dest="tol_scale", type=float, default=1.0,
                   help="multiply every tolerance by this factor")
    p.add_argument("--samples", type=int, default=10)
    p.add_argument("--only", nargs="+", metavar="NAME")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        try:
            sc = Scenario.from_toml(args.config) if args.config else Scenario()
            args.scenario_given = bool(args.config or args.body or args.outer)
            args.scenario = sc.override(args)
        except (ValueError, TypeError) as exc:
            raise InputError(f"scenario: {exc}") from None
        return args.func(args)
    except ShrinkflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code

if __name__ == "__main__":
    sys.exit(main())
