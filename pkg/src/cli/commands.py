"""Command tree of the toolkit.

Every command renders its result as JSON (or CSV with --format csv) on
stdout and, with --out, also into a file under that directory. Exit codes:
0 success, 1 suite assertion failure, 2 usage or configuration error.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from pydantic import ValidationError

from .calibrate import calibrate
from .config import SUITE_NAMES, GeneratorSpec, load_config
from .generators import gen_paraboloid_cluster, gen_random_sets, random_ball
from .reports import emit
from .suites import run_suite
from ..config.settings import RUNTIME_SETTINGS
from ..core.balls import BallParams, make_ball, shrunk_slice_measure, verify_quasiextremal
from ..core.convexify import convexify, verify_exclusion
from ..core.covering import cover, coverage_fraction
from ..core.errors import RadonToolkitError
from ..core.extraction import extract_ball
from ..core.grid import GridSet, load_grid_set
from ..core.symmetries import SymmetryElement, apply_ball, transform_set
from ..core.tower import build_tower, phi_image_measure, tower_summary
from ..core.transform import QuadratureSpec, bilinear_mc, score
from ..utils.logger import Logger
from ..utils.rng import stream

logger = Logger(__name__)

# Handlers return (payload, exit code); a None payload prints nothing
Result = Tuple[Optional[Any], int]


def _quadrature(args) -> QuadratureSpec:
    return QuadratureSpec() if args.t_res is None else QuadratureSpec(t_resolution=args.t_res)


def _load_ball(path: str) -> BallParams:
    return BallParams.from_json(Path(path).read_text())


def _write_set(S: GridSet, directory: Path, name: str) -> str:
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{name}.json"
    path.write_text(S.to_json(), encoding="utf-8")
    return str(path)


def cmd_eval(args) -> Result:
    E, Estar = load_grid_set(args.E), load_grid_set(args.Estar)
    payload: Dict[str, Any] = {"score": score(E, Estar, _quadrature(args), localized=args.localized)}
    if args.mc:
        estimate, stderr = bilinear_mc(E, Estar, args.seed, args.mc)
        payload["monte_carlo"] = {"estimate": estimate, "stderr": stderr, "samples": args.mc, "seed": args.seed}
    return payload, 0


def cmd_ball_make(args) -> Result:
    if args.seed is not None:
        b = random_ball(args.dim, stream(args.seed))
    else:
        if args.center_x is None or args.center_xstar is None or args.r is None or args.r_star is None:
            raise ValueError("ball make needs --seed or all of --center-x, --center-xstar, --r, --r-star")
        m = len(args.center_x) - 1
        basis = args.basis if args.basis is not None else [float(i == j) for i in range(m) for j in range(m)]
        b = make_ball((args.center_x, args.center_xstar), basis, args.r, args.r_star)
    return b.to_dict(), 0


def cmd_ball_score(args) -> Result:
    b = _load_ball(args.ball)
    q = None if args.t_res is None else _quadrature(args)
    return {"rho": b.rho, "score": verify_quasiextremal(b, q, args.voxels)}, 0


def cmd_ball_cover(args) -> Result:
    b = _load_ball(args.ball)
    c = cover(b, args.delta)
    payload = {"delta": args.delta, "count": len(c), "eta": c.eta}
    if args.samples:
        payload["coverage"] = coverage_fraction(c, args.seed, args.samples)
    return payload, 0


def cmd_ball_slice(args) -> Result:
    b = _load_ball(args.ball)
    measure = shrunk_slice_measure(b, args.eps, args.x)
    return {"eps": args.eps, "x": args.x, "measure": measure}, 0


def cmd_symmetry_apply(args) -> Result:
    text = Path(args.word).read_text()
    if args.ball:
        b = _load_ball(args.ball)
        return apply_ball(SymmetryElement.from_json(text, b.dim), b).to_dict(), 0
    if args.set:
        S = load_grid_set(args.set)
        return transform_set(S, SymmetryElement.from_json(text, S.dim), args.factor).to_dict(), 0
    raise ValueError("symmetry apply needs --ball or --set")


def cmd_tower_build(args) -> Result:
    E, Estar = load_grid_set(args.E), load_grid_set(args.Estar)
    tower = build_tower(E, Estar, _quadrature(args))
    payload = {
        "summary": tower_summary(tower),
        "phi": phi_image_measure(tower, e_measure=E.measure()),
    }
    if args.full:
        payload["tower"] = tower.to_dict()
    return payload, 0


def cmd_convexify(args) -> Result:
    S = load_grid_set(args.S)
    approx = convexify(S, args.eta, balanced=not args.unbalanced)
    payload: Dict[str, Any] = {"approx": approx, "measure_set": S.measure()}
    if S.dim == 1:
        ok, worst = verify_exclusion(S, approx)
        payload["exclusion_verified"] = ok
        payload["worst_excluded"] = worst
    return payload, 0


def cmd_extract(args) -> Result:
    E, Estar = load_grid_set(args.E), load_grid_set(args.Estar)
    ball, report = extract_ball(E, Estar, _quadrature(args), eta=args.eta)
    return {"ball": ball.to_dict(), "report": report}, 0


def cmd_generate_cluster(args) -> Result:
    E, Estar = gen_paraboloid_cluster(args.N, args.delta, args.seed, args.dim)
    return _generated(args, E, Estar, "paraboloid_cluster"), 0


def cmd_generate_random(args) -> Result:
    spec = GeneratorSpec(family=args.family)
    E, Estar = gen_random_sets(spec, args.seed, args.dim, args.voxels)
    return _generated(args, E, Estar, args.family), 0


def _generated(args, E: GridSet, Estar: GridSet, family: str) -> Dict[str, Any]:
    directory = Path(args.out or RUNTIME_SETTINGS["output_dir"])
    return {
        "family": family,
        "seed": args.seed,
        "measure_first": E.measure(),
        "measure_second": Estar.measure(),
        "E": _write_set(E, directory, f"{family}_{args.seed}_E"),
        "Estar": _write_set(Estar, directory, f"{family}_{args.seed}_Estar"),
    }


def cmd_suite_run(args) -> Result:
    config = load_config(args.config, args.dim)
    return None, run_suite(args.name, config, args.out)


def cmd_calibrate(args) -> Result:
    config = load_config(args.config, args.dim)
    constants = calibrate(config, args.suites, args.constants)
    return {"dimension": config.dimension, "constants": constants}, 0


def _add_quadrature(parser: argparse.ArgumentParser):
    parser.add_argument("--t-res", dest="t_res", type=float, default=None, help="t-grid resolution")


def _add_pair(parser: argparse.ArgumentParser):
    parser.add_argument("--E", required=True, help="GridSet JSON of the first set")
    parser.add_argument("--Estar", required=True, help="GridSet JSON of the second set")
    _add_quadrature(parser)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="radon-toolkit", description="Incidence geometry toolkit for the parabolic Radon-like transform")
    parser.add_argument("--dim", type=int, choices=(2, 3), default=None, help="ambient dimension d")
    parser.add_argument("--out", default=None, help="directory for output files")
    parser.add_argument("--format", choices=("json", "csv"), default="json")
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("eval", help="incidence score of a pair of sets")
    _add_pair(p)
    p.add_argument("--mc", type=int, default=0, help="Monte Carlo samples for an independent estimate")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--localized", action="store_true", help="restrict to |t| <= 1")
    p.set_defaults(handler=cmd_eval, name="eval")

    ball = commands.add_parser("ball", help="ball parameters and their envelopes").add_subparsers(dest="action", required=True)
    p = ball.add_parser("make")
    p.add_argument("--seed", type=int, default=None, help="draw a random ball instead")
    p.add_argument("--center-x", dest="center_x", type=float, nargs="+")
    p.add_argument("--center-xstar", dest="center_xstar", type=float, nargs="+")
    p.add_argument("--basis", type=float, nargs="+", help="row-major frame, identity by default")
    p.add_argument("--r", type=float, nargs="+")
    p.add_argument("--r-star", dest="r_star", type=float, nargs="+")
    p.set_defaults(handler=cmd_ball_make, name="ball")
    p = ball.add_parser("score")
    p.add_argument("--ball", required=True)
    p.add_argument("--voxels", type=int, default=None)
    _add_quadrature(p)
    p.set_defaults(handler=cmd_ball_score, name="ball_score")
    p = ball.add_parser("cover")
    p.add_argument("--ball", required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--samples", type=int, default=0, help="sampled coverage check")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=cmd_ball_cover, name="ball_cover")
    p = ball.add_parser("slice")
    p.add_argument("--ball", required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--x", type=float, nargs="+", required=True)
    p.set_defaults(handler=cmd_ball_slice, name="ball_slice")

    symmetry = commands.add_parser("symmetry", help="symmetry words").add_subparsers(dest="action", required=True)
    p = symmetry.add_parser("apply")
    p.add_argument("--word", required=True, help="JSON list of generator records")
    p.add_argument("--ball", default=None)
    p.add_argument("--set", default=None)
    p.add_argument("--factor", choices=("first", "second"), default="first")
    p.set_defaults(handler=cmd_symmetry_apply, name="symmetry")

    tower = commands.add_parser("tower", help="two-step incidence towers").add_subparsers(dest="action", required=True)
    p = tower.add_parser("build")
    _add_pair(p)
    p.add_argument("--full", action="store_true", help="include Ω₁ and every fiber")
    p.set_defaults(handler=cmd_tower_build, name="tower")

    p = commands.add_parser("convexify", help="balanced convex approximation of a set in R^n, n <= 2")
    p.add_argument("--S", required=True)
    p.add_argument("--eta", type=float, default=0.5)
    p.add_argument("--unbalanced", action="store_true", help="center at the median instead of the origin")
    p.set_defaults(handler=cmd_convexify, name="convexify")

    p = commands.add_parser("extract", help="recover a ball from a quasiextremal pair")
    _add_pair(p)
    p.add_argument("--eta", type=float, default=0.5)
    p.set_defaults(handler=cmd_extract, name="extract")

    generate = commands.add_parser("generate", help="test set generators").add_subparsers(dest="action", required=True)
    p = generate.add_parser("paraboloid-cluster")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=cmd_generate_cluster, name="generate")
    p = generate.add_parser("random")
    p.add_argument("--family", choices=("voxel_union", "boxes", "ball_envelope", "transformed_envelope"), required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--voxels", type=int, default=None)
    p.set_defaults(handler=cmd_generate_random, name="generate")

    suite = commands.add_parser("suite", help="acceptance suites").add_subparsers(dest="action", required=True)
    p = suite.add_parser("run")
    p.add_argument("name", help=f"one of {', '.join(SUITE_NAMES)}")
    p.add_argument("--config", default=None)
    p.set_defaults(handler=cmd_suite_run, name="suite")

    p = commands.add_parser("calibrate", help="derive and freeze empirical constants")
    p.add_argument("--config", default=None)
    p.add_argument("--suites", nargs="+", default=None)
    p.add_argument("--constants", default=None, help="frozen constants file to update")
    p.set_defaults(handler=cmd_calibrate, name="calibrate")
    return parser


def _dimension_default(args):
    # generators default to d=2; suites and calibrate take the config's dimension
    if args.dim is None and args.handler not in (cmd_suite_run, cmd_calibrate):
        args.dim = 2


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 2
    _dimension_default(args)

    try:
        payload, code = args.handler(args)
    except RadonToolkitError as e:
        print(str(e), file=sys.stderr)
        return 2
    except ValidationError as e:
        print(f"ConfigInvalid: {e}", file=sys.stderr)
        return 2
    except (ValueError, FileNotFoundError, json.JSONDecodeError) as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"UsageError: {e}", file=sys.stderr)
        return 2

    if payload is not None:
        print(emit(payload, args.format, args.out, args.name), end="")
    return code
