"""Command-line client.

Thin layer over the service handlers: parses arguments, loads files,
dispatches the same request models the HTTP endpoints accept (in-process
by default, or against a running server via --server), and writes outputs
atomically.

Exit codes: 0 success, 1 input error, 2 solver budget exhausted.
"""

import argparse
import json
import os
import sys

from . import schemas
from .errors import ContactDynError, FileFormatError
from .runio import (atomic_write_text, dump_document, load_document,
                    parse_document)
from .service import handlers


class _HttpClient:
    """Forward requests to a running service."""

    def __init__(self, base_url):
        import httpx

        self.base_url = base_url.rstrip("/")
        self.http = httpx.Client(timeout=3600.0)

    def call(self, endpoint, request, response_cls):
        r = self.http.post(f"{self.base_url}/{endpoint}",
                           json=request.model_dump(mode="json"))
        if r.status_code != 200:
            raise ContactDynError(f"server error {r.status_code}: {r.text}")
        return response_cls.model_validate(r.json())


class _LocalClient:
    def __init__(self, base_dir="."):
        self.base_dir = base_dir

    def call(self, endpoint, request, response_cls):
        fn = {
            "simulate": handlers.simulate_preset,
            "solve": handlers.solve_run,
            "residual": handlers.residual_run,
            "metrics": handlers.metrics_run,
            "gradcheck": handlers.gradcheck_run,
        }[endpoint]
        if endpoint == "simulate":
            return fn(request)
        return fn(request, base_dir=self.base_dir)


def _client(args, base_dir="."):
    if getattr(args, "server", None):
        return _HttpClient(args.server)
    return _LocalClient(base_dir)


def _load_run(path):
    doc = load_document(schemas.RunDocument, path)
    return doc, os.path.dirname(os.path.abspath(path))


def _apply_config(doc, config_json):
    if not config_json:
        return
    block = parse_document(schemas.ConfigBlock, config_json, source="--config")
    for name in type(block).model_fields:
        value = getattr(block, name)
        if value is not None:
            setattr(doc.config, name, value)


def _swap_ext(path, ext):
    base, _ = os.path.splitext(path)
    return base + ext


def cmd_solve(args):
    doc, base_dir = _load_run(args.run)
    _apply_config(doc, args.config)
    if args.seed is not None:
        doc.seed = args.seed
    req = schemas.SolveRequest(run=doc, options=schemas.SolveOptions(
        max_iters=args.max_iters, threads=args.threads, seed=args.seed,
        start_frame=args.start_frame, end_frame=args.end_frame))
    resp = _client(args, base_dir).call("solve", req, schemas.SolveResponse)
    atomic_write_text(args.output, dump_document(resp.run))
    history = "\n".join(repr(float(v)) for v in resp.objective_history)
    atomic_write_text(_swap_ext(args.output, ".history.txt"), history + "\n")
    print(f"converged: {resp.converged}")
    print(f"objective: {resp.objective_history[-1]!r}")
    print(f"residual aggregate: {resp.residual.aggregate!r}")
    print(f"wrote {args.output}")
    return 0 if resp.converged else 2


def cmd_simulate(args):
    if os.path.exists(args.preset):
        spec = load_document(schemas.SimulateRequest, args.preset)
        preset, overrides = spec.preset, spec.overrides
    else:
        preset, overrides = args.preset, schemas.SimulateOverrides()
    for name in ("dt", "duration", "drop", "theta_deg", "mu", "rho", "kappa",
                 "delta", "box_mass", "angle"):
        value = getattr(args, name)
        if value is not None:
            setattr(overrides, name, value)
    req = schemas.SimulateRequest(preset=preset, overrides=overrides)
    resp = _client(args).call("simulate", req, schemas.SimulateResponse)
    atomic_write_text(args.output, dump_document(resp.run))
    print(f"frames: {len(resp.run.trajectory.human)}")
    print(f"friction dissipation: {resp.friction_dissipation!r} J")
    print(f"energy audit flagged steps: {len(resp.audit_flagged_steps)}")
    print(f"wrote {args.output}")
    return 0


def cmd_residual(args):
    doc, base_dir = _load_run(args.run)
    _apply_config(doc, args.config)
    req = schemas.ResidualRequest(run=doc, per_point=args.per_point)
    resp = _client(args, base_dir).call("residual", req, schemas.ResidualResponse)
    atomic_write_text(args.output, resp.csv)
    print(f"aggregate: {resp.aggregate!r}")
    print(f"wrote {args.output}")
    return 0


def cmd_metrics(args):
    pred, base_dir = _load_run(args.pred)
    gt, _ = _load_run(args.gt)
    req = schemas.MetricsRequest(pred=pred, gt=gt, options=schemas.MetricsOptions(
        collision_threshold=args.collision_threshold,
        contact_threshold=args.contact_threshold,
        ground_height=args.ground_height,
        foot_height=args.foot_height,
    ))
    resp = _client(args, base_dir).call("metrics", req, schemas.MetricsResponse)
    atomic_write_text(args.output, resp.text)
    atomic_write_text(_swap_ext(args.output, ".csv"), resp.csv)
    sys.stdout.write(resp.text)
    print(f"wrote {args.output}")
    return 0


def cmd_gradcheck(args):
    doc, base_dir = _load_run(args.run)
    _apply_config(doc, args.config)
    req = schemas.GradcheckRequest(run=doc, samples=args.samples, seed=args.seed)
    resp = _client(args, base_dir).call("gradcheck", req, schemas.GradcheckResponse)
    atomic_write_text(args.output, json.dumps(resp.model_dump(), indent=1) + "\n")
    print(f"max relative gradient error: {resp.max_relative_error!r}")
    print(f"wrote {args.output}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="contactdyn",
        description="Contact-dynamics toolkit: simulate, solve, evaluate.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--output", "-o", required=True, help="output file path")
        p.add_argument("--server", help="base URL of a running service")
        p.add_argument("--config", help="JSON contact-model overrides")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("solve", help="recover torques and contact coefficients")
    p.add_argument("run", help="run file (JSON)")
    common(p)
    p.add_argument("--max-iters", type=int, default=400)
    p.add_argument("--start-frame", type=int, default=0)
    p.add_argument("--end-frame", type=int, default=None)
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("simulate", help="run a built-in scene preset")
    p.add_argument("preset", help="preset name or a simulate-request JSON file")
    common(p)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--duration", type=float, default=None)
    p.add_argument("--drop", type=float, default=None)
    p.add_argument("--theta", dest="theta_deg", type=float, default=None)
    p.add_argument("--mu", type=float, default=None)
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--kappa", type=float, default=None)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--box-mass", dest="box_mass", type=float, default=None)
    p.add_argument("--angle", type=float, default=None)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("residual", help="evaluate residuals of a solved run")
    p.add_argument("run")
    common(p)
    p.add_argument("--per-point", action="store_true",
                   help="add per-contact force magnitude columns")
    p.set_defaults(fn=cmd_residual)

    p = sub.add_parser("metrics", help="plausibility metrics pred vs gt")
    p.add_argument("pred")
    p.add_argument("gt")
    common(p)
    p.add_argument("--collision-threshold", type=float, default=0.04)
    p.add_argument("--contact-threshold", type=float, default=0.05)
    p.add_argument("--ground-height", type=float, default=0.0)
    p.add_argument("--foot-height", type=float, default=0.05)
    p.set_defaults(fn=cmd_metrics)

    p = sub.add_parser("gradcheck", help="finite-difference gradient audit")
    p.add_argument("run")
    common(p)
    p.add_argument("--samples", type=int, default=10)
    p.set_defaults(fn=cmd_gradcheck)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except FileFormatError as e:
        print(f"input error: {e}", file=sys.stderr)
        return 1
    except ContactDynError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"input error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
