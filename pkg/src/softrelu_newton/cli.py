"""Command-line front end: ``gen``, ``ref``, ``solve`` and ``verify``.

Exit codes: 0 success, 1 failed bound checks, 2 usage/config errors,
3 numerical failures (a Hessian that is not positive definite).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .bounds import sample_ball, verify_bounds, verify_derivatives
from .errors import ConvergenceFailure, DimensionError, GenerationFailed, InvalidRange, NotPD, RankDeficient
from .forward import loss_reg
from .instance import (
    choose_weights,
    dumps_instance,
    generate_instance,
    load_instance,
    plant_optimum,
    validate_assumptions,
)
from .sketch import SketchConfig
from .solver import Mode, SolverConfig, reference_optimum, solve

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
# probe scales along the reference ray; ReLU regions are cones, so these share its pattern
PROBE_SCALES = (0.25, 0.5, 0.75, 1.0)


class ConfigError(Exception):
    pass


def _emit(text: str, path: str | None) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _dump_json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def cmd_gen(args) -> int:
    inst = generate_instance(args.n, args.m, args.d, args.radius, args.seed, args.theta)
    if args.plant:
        inst = plant_optimum(inst, args.l, margin=args.margin, seed=args.seed, target_theta=args.theta)
    else:
        inst = choose_weights(inst, args.l, margin=args.margin)
    probes = [s * inst.x_ref for s in PROBE_SCALES if s * np.linalg.norm(inst.x_ref) <= inst.radius]
    report = validate_assumptions(inst, probes, args.l)
    doc = report.to_dict()
    doc["weights_ok"] = report.weights_ok(inst.w)
    _emit(dumps_instance(inst), args.output)
    sys.stderr.write(_dump_json(doc))
    return EXIT_OK


def _parse_x0(text: str, inst) -> np.ndarray:
    if text == "zero":
        return np.zeros(inst.d)
    kind, _, rest = text.partition(":")
    if kind == "random" and rest:
        try:
            seed = int(rest)
        except ValueError as exc:
            raise ConfigError(f"bad seed in --x0 {text!r}") from exc
        return sample_ball(np.random.default_rng(seed), inst.d, inst.radius, 1)[0]
    if kind == "file" and rest:
        return _read_vector(rest, inst.d)
    raise ConfigError(f"--x0 must be zero, random:<seed> or file:<path>, got {text!r}")


def _read_vector(path: str, d: int) -> np.ndarray:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read vector from {path}: {exc}") from exc
    if isinstance(doc, dict):
        doc = doc.get("x")
    x = np.asarray(doc, dtype=np.float64)
    if x.shape != (d,):
        raise ConfigError(f"vector in {path} must have length {d}")
    return x


def _load(path: str):
    try:
        return load_instance(path)
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ConfigError(f"cannot load instance {path}: {exc}") from exc


def cmd_ref(args) -> int:
    inst = _load(args.instance)
    ref = reference_optimum(inst, restarts=args.restarts, seed=args.seed)
    doc = {"x": ref.x.tolist(), "loss_reg": ref.loss_reg, "grad_norm": ref.grad_norm}
    _emit(json.dumps(doc) + "\n", args.output)
    return EXIT_OK


def cmd_solve(args) -> int:
    inst = _load(args.instance)
    x0 = _parse_x0(args.x0, inst)
    sketch = None
    if args.sketch_eps0 is not None:
        sketch = SketchConfig(epsilon0=args.sketch_eps0, delta=args.sketch_delta, seed=args.seed)
    cfg = SolverConfig(
        mode=Mode(args.mode),
        eta=args.eta,
        max_iters=args.max_iters,
        grad_tol=args.grad_tol,
        eps=args.eps,
        sketch=sketch,
        seed=args.seed,
        pd_l=args.l,
    )
    x_star = l_min = None
    if args.ref_optimum:
        x_star = _read_vector(args.ref_optimum, inst.d)
        l_min = loss_reg(inst, x_star)
    trace = solve(inst, x0, cfg, x_star=x_star, l_min=l_min)
    _emit(trace.to_csv(), args.output)
    summary = {
        "converged": trace.converged,
        "iterations_used": trace.iterations_used,
        "ball_exit": trace.ball_exit,
        "eta": trace.eta,
    }
    sys.stderr.write(_dump_json(summary))
    return EXIT_OK


def cmd_verify(args) -> int:
    inst = _load(args.instance)
    report = verify_bounds(inst, samples=args.samples, seed=args.seed, l=args.l)
    if args.derivatives:
        report.checks.update(verify_derivatives(inst, samples=args.samples, seed=args.seed))
    doc = report.to_dict()
    doc["instance_violations"] = inst.norm_violations()
    _emit(_dump_json(doc), args.output)
    return EXIT_OK if report.ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="softrelu", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate, weight and validate an instance")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--d", type=int, required=True)
    g.add_argument("--radius", type=float, default=1.0)
    g.add_argument("--l", type=float, default=1.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--theta", type=float, default=0.6, help="target fraction of active ReLU units")
    g.add_argument("--margin", type=float, default=0.0, help="added to the minimum w_i^2")
    g.add_argument("--plant", action=argparse.BooleanOptionalAction, default=True,
                   help="move a strict local minimizer into a ReLU region interior (default on)")
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("ref", help="reference optimum by exact Newton with restarts")
    r.add_argument("instance")
    r.add_argument("--restarts", type=int, default=8)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("-o", "--output")
    r.set_defaults(func=cmd_ref)

    s = sub.add_parser("solve", help="run a solver and write the trace as CSV")
    s.add_argument("instance")
    s.add_argument("--mode", choices=[m.value for m in Mode], default="approx")
    s.add_argument("--eta", type=float)
    s.add_argument("--sketch-eps0", type=float)
    s.add_argument("--sketch-delta", type=float, default=0.05)
    s.add_argument("--max-iters", type=int, default=100)
    s.add_argument("--grad-tol", type=float, default=1e-12)
    s.add_argument("--eps", type=float, default=1e-10)
    s.add_argument("--l", type=float, default=1.0, help="PD level used for the default loss-mode step 1/N")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--x0", default="zero", help="zero | random:<seed> | file:<path>")
    s.add_argument("--ref-optimum", help="JSON vector (or {'x': [...]}) used for dist/gap columns")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", help="check every proven bound on sampled points")
    v.add_argument("instance")
    v.add_argument("--samples", type=int, default=100)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--l", type=float, default=1.0)
    v.add_argument("--derivatives", action=argparse.BooleanOptionalAction, default=True,
                   help="also cross-check gradient and Hessian paths")
    v.add_argument("-o", "--output")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NotPD as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, DimensionError, InvalidRange, GenerationFailed, RankDeficient,
            ConvergenceFailure, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
