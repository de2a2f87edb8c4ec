"""Command-line harness: multi-seed runs, run logs, aggregates and front files.

Example::

    svhpsl --problem zdt1 --seeds 5 --out runs/
    svhpsl --problem zdt1 --kernel global --alpha 1.0 --emit-front 200
"""

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .exceptions import ProblemFormatError, UnknownProblemError
from .optimizer import RunConfig, run
from .problems import builtin_names, get_problem, load_problem
from .runlog import emit_front, write_aggregate, write_runlog

OUT_ENV = "SVHPSL_OUT"
DEFAULT_OUT = "runs"

logger = logging.getLogger("svhpsl")


def _positive(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _non_negative_int(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return value


def _non_negative_float(text):
    value = float(text)
    if not value >= 0.0:
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {text}")
    return value


def build_parser():
    p = argparse.ArgumentParser(
        prog="svhpsl",
        description="Batch multi-objective Bayesian optimization with a Stein-variational "
                    "Pareto set model. Writes one run log per seed plus a seed aggregate.",
    )
    src = p.add_mutually_exclusive_group()
    src.add_argument("--problem", help=f"built-in problem ({', '.join(builtin_names())}); default zdt1")
    src.add_argument("--problem-spec", metavar="FILE", help="problem-spec file describing a custom problem")
    p.add_argument("--seed", type=int, default=0, help="first seed (default: 0)")
    p.add_argument("--seeds", type=_positive, default=5,
                   help="number of seeds, run as seed, seed+1, ... (default: 5)")
    p.add_argument("--n-var", type=_positive, help="decision dimension for built-in problems")
    p.add_argument("--n-init", type=int, default=20, help="initial design size (default: 20)")
    p.add_argument("--iters", type=_non_negative_int, default=20, help="outer iterations (default: 20)")
    p.add_argument("--batch", type=_positive, default=5, help="evaluations per iteration (default: 5)")
    p.add_argument("--particles", type=_positive, default=10, help="particles per update (default: 10)")
    p.add_argument("--candidates", type=_positive, default=1000,
                   help="candidates decoded per iteration (default: 1000)")
    p.add_argument("--inner-steps", type=_positive, default=250,
                   help="model updates per iteration (default: 250)")
    p.add_argument("--alpha", type=_non_negative_float, default=0.1,
                   help="repulsion weight (default: 0.1)")
    p.add_argument("--lambda", dest="lcb_lambda", type=_non_negative_float, default=2.0,
                   help="LCB confidence multiplier (default: 2.0)")
    p.add_argument("--kernel", choices=("local", "global"), default="local",
                   help="particle kernel (default: local)")
    p.add_argument("--lr", type=float, default=1e-3, help="Adam learning rate (default: 1e-3)")
    p.add_argument("--hidden", type=_positive, nargs="+", default=[256, 256], metavar="WIDTH",
                   help="hidden layer widths of the Pareto set model (default: 256 256)")
    p.add_argument("--ref-point", type=float, nargs="+", metavar="V",
                   help="metric reference point (default: reference-front nadir + 10%%)")
    p.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or ./{DEFAULT_OUT})")
    p.add_argument("--checkpoint", action="store_true",
                   help="also save the model parameters after every iteration")
    p.add_argument("--emit-front", type=_positive, nargs="?", const=100, metavar="RESOLUTION",
                   help="write a front file per seed decoded from RESOLUTION preferences (default 100)")
    p.add_argument("--jobs", type=_positive, default=1, help="seeds run in parallel (default: 1)")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def _resolve(parser, args):
    """Validate flag combinations and load the problem; usage errors exit 2."""
    if args.problem_spec and args.n_var is not None:
        parser.error("--n-var applies to built-in problems only; set n_var in the problem spec")
    if args.n_init < 2:
        parser.error("--n-init must be at least 2")
    if args.batch > args.candidates:
        parser.error("--batch cannot exceed --candidates")
    try:
        if args.problem_spec:
            problem = load_problem(args.problem_spec)
        else:
            problem = get_problem(args.problem or "zdt1", args.n_var)
    except UnknownProblemError as exc:
        parser.error(str(exc.args[0] if exc.args else exc))
    except (ProblemFormatError, OSError, ValueError) as exc:
        parser.error(f"cannot load problem: {exc}")
    if args.ref_point is not None and len(args.ref_point) != problem.n_obj:
        parser.error(f"--ref-point needs {problem.n_obj} values, got {len(args.ref_point)}")
    return problem


def _configs(args, problem):
    spec = str(Path(args.problem_spec).resolve()) if args.problem_spec else None
    return [
        RunConfig(
            problem=problem.name, seed=args.seed + k, n_var=None if spec else problem.n_var,
            n_init=args.n_init, n_iter=args.iters, inner_steps=args.inner_steps,
            n_particles=args.particles, n_candidates=args.candidates, batch_size=args.batch,
            alpha=args.alpha, lcb_lambda=args.lcb_lambda, kernel=args.kernel,
            learning_rate=args.lr, hidden=tuple(args.hidden), ref_point=args.ref_point,
            problem_spec=spec,
        )
        for k in range(args.seeds)
    ]


def _run_one(config, out_dir, checkpoint, resolution):
    """Run one seed and persist it; returns (summary path, log, error message)."""
    ckpt_dir = None
    if checkpoint:
        ckpt_dir = Path(out_dir) / "checkpoints"
        ckpt_dir.mkdir(parents=True, exist_ok=True)
    try:
        log = run(config, checkpoint_dir=ckpt_dir)
    except Exception as exc:
        partial = getattr(exc, "partial_log", None)
        path = write_runlog(partial, out_dir) if partial is not None else None
        return path, partial, f"{type(exc).__name__}: {exc}"
    path = write_runlog(log, out_dir)
    if resolution:
        emit_front(log, resolution, Path(out_dir) / f"{log.stem}.front.txt")
    return path, log, None


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    problem = _resolve(parser, args)
    out_dir = Path(args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)
    out_dir.mkdir(parents=True, exist_ok=True)
    configs = _configs(args, problem)

    jobs = [(c, out_dir, args.checkpoint, args.emit_front) for c in configs]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_one, *zip(*jobs)))
    else:
        results = [_run_one(*job) for job in jobs]

    failed = 0
    logs = []
    for config, (path, log, error) in zip(configs, results):
        if error is not None:
            failed += 1
            print(f"seed {config.seed}: FAILED ({error})"
                  + (f"; partial log {path}" if path else ""), file=sys.stderr)
            continue
        logs.append(log)
        final = log.lhd_trace[-1] if log.lhd_trace else None
        shown = "n/a" if final is None else f"{final:.4f}"
        print(f"seed {config.seed}: {len(log.archive_y)} evaluations, final LHD {shown} -> {path}")
    if logs:
        agg = write_aggregate(logs, out_dir)
        print(f"aggregate over {len(logs)} seed(s) -> {agg}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
