"""Run logs, the log-hypervolume-difference metric and seed aggregation.

On disk a run is three files sharing a stem:

``<stem>.jsonl``
    one JSON record per line: the initial design (``iteration = -1``) and
    then one record per outer iteration.
``<stem>.summary.json``
    config, archive, LHD trace, reference point, timings, metadata.
``<stem>.ckpt``
    final model parameters (see :meth:`ParetoSetModel.save_checkpoint`).
"""

import json
import math
import platform
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .exceptions import CheckpointError
from .hypervolume import hv, non_dominated
from .model import ParetoSetModel
from .problems import get_problem, load_problem
from .scalarize import ideal_point, simplex_grid


def lhd(archive_front, reference_front, rho):
    """Natural log of ``hv(reference) - hv(archive)``; None once the gap is <= 0."""
    gap = hv(reference_front, rho) - hv(archive_front, rho)
    if gap <= 0.0:
        return None
    return math.log(gap)


def resolve_problem(config):
    if config.problem_spec:
        return load_problem(config.problem_spec)
    return get_problem(config.problem, config.n_var)


def metric_ref_point(config, problem):
    if config.ref_point is not None:
        return np.asarray(config.ref_point, float)
    if problem.true_front is None or problem.n_obj > 3:
        return None
    return problem.default_ref_point()


def lhd_trace(ys, sizes, reference_front, rho):
    """LHD of every archive prefix listed in ``sizes``."""
    if reference_front is None or rho is None:
        return [None] * len(sizes)
    ref_hv = hv(reference_front, rho)
    out = []
    for n in sizes:
        gap = ref_hv - hv(non_dominated(ys[:n]), rho)
        out.append(math.log(gap) if gap > 0.0 else None)
    return out


@dataclass
class RunLog:
    config: dict
    records: list
    archive_x: np.ndarray
    archive_y: np.ndarray
    provenance: list
    lhd_trace: list
    ref_point: Optional[list]
    ref_hv: Optional[float]
    timings: dict
    meta: dict
    checkpoint: Optional[str] = None
    model: Optional[ParetoSetModel] = field(default=None, repr=False, compare=False)

    @property
    def stem(self):
        c = self.config
        return f"run_{c['problem']}_{c['kernel']}_a{c['alpha']}_seed{c['seed']}"

    def summary(self):
        return {
            "config": self.config,
            "archive": {
                "x": self.archive_x.tolist(),
                "y": self.archive_y.tolist(),
                "provenance": self.provenance,
            },
            "lhd_trace": self.lhd_trace,
            "ref_point": self.ref_point,
            "ref_hv": self.ref_hv,
            "timings": self.timings,
            "meta": self.meta,
            "checkpoint": self.checkpoint,
        }


def build_runlog(config, problem, state, seconds):
    n_init = config.n_init
    sizes = [n_init + t * config.batch_size for t in range(state.iteration + 1)]
    rho = metric_ref_point(config, problem)
    front = problem.true_front if problem.n_obj <= 3 else None
    trace = lhd_trace(state.archive.ys, sizes, front, rho)
    initial = {
        "iteration": -1,
        "archive_size": n_init,
        "x": state.archive.xs[:n_init].tolist(),
        "f": state.archive.ys[:n_init].tolist(),
        "z_star": ideal_point(state.archive.ys[:n_init]).tolist(),
    }
    records = [initial] + [dict(r) for r in state.records]
    for rec, value in zip(records, trace):
        rec["lhd"] = value
    return RunLog(
        config=config.to_dict(),
        records=records,
        archive_x=state.archive.xs.copy(),
        archive_y=state.archive.ys.copy(),
        provenance=list(state.archive.provenance),
        lhd_trace=trace,
        ref_point=None if rho is None else rho.tolist(),
        ref_hv=None if rho is None or front is None else hv(front, rho),
        timings={"total_seconds": seconds,
                 "iteration_seconds": [r.get("wall_clock") for r in state.records]},
        meta={"version": __version__, "seed": config.seed, "python": platform.python_version(),
              "numpy": np.__version__, "skipped_steps": state.skipped_steps,
              "adam_skipped": state.adam.skipped},
        model=state.model,
    )


def write_runlog(log, out_dir):
    """Write the record stream, summary and final checkpoint; returns the summary path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if log.model is not None:
        ckpt = out / f"{log.stem}.ckpt"
        log.model.save_checkpoint(ckpt, seed=log.config["seed"],
                                  iteration=len(log.records) - 1)
        log.checkpoint = ckpt.name
    with open(out / f"{log.stem}.jsonl", "w") as fh:
        for rec in log.records:
            fh.write(json.dumps(rec) + "\n")
    summary_path = out / f"{log.stem}.summary.json"
    with open(summary_path, "w") as fh:
        json.dump(log.summary(), fh, indent=1)
    return summary_path


def read_runlog(summary_path):
    summary_path = Path(summary_path)
    with open(summary_path) as fh:
        s = json.load(fh)
    stem = summary_path.name[: -len(".summary.json")]
    with open(summary_path.parent / f"{stem}.jsonl") as fh:
        records = [json.loads(line) for line in fh if line.strip()]
    ckpt = s.get("checkpoint")
    model = None
    if ckpt and (summary_path.parent / ckpt).exists():
        model, _ = ParetoSetModel.load_checkpoint(summary_path.parent / ckpt)
    n_obj = len(s["archive"]["y"][0]) if s["archive"]["y"] else 0
    n_var = len(s["archive"]["x"][0]) if s["archive"]["x"] else 0
    return RunLog(
        config=s["config"],
        records=records,
        archive_x=np.array(s["archive"]["x"], dtype=float).reshape(-1, n_var),
        archive_y=np.array(s["archive"]["y"], dtype=float).reshape(-1, n_obj),
        provenance=s["archive"]["provenance"],
        lhd_trace=s["lhd_trace"],
        ref_point=s["ref_point"],
        ref_hv=s["ref_hv"],
        timings=s["timings"],
        meta=s["meta"],
        checkpoint=None if ckpt is None else str(summary_path.parent / ckpt),
        model=model,
    )


def aggregate(logs):
    """Per-iteration mean and population std of LHD across runs.

    Null (gap closed) entries are left out of that iteration's statistics;
    an iteration with no finite values reports nulls.
    """
    length = max(len(log.lhd_trace) for log in logs)
    rows = []
    for t in range(length):
        vals = [log.lhd_trace[t] for log in logs
                if t < len(log.lhd_trace) and log.lhd_trace[t] is not None]
        if vals:
            a = np.array(vals)
            rows.append({"iteration": t, "n": len(vals),
                         "mean": float(a.mean()), "std": float(a.std())})
        else:
            rows.append({"iteration": t, "n": 0, "mean": None, "std": None})
    return rows


def aggregate_tag(config):
    return f"{config['problem']}_{config['kernel']}_a{config['alpha']}"


def write_aggregate(logs, out_dir):
    cfg = logs[0].config
    path = Path(out_dir) / f"aggregate_{aggregate_tag(cfg)}.json"
    doc = {
        "tag": aggregate_tag(cfg),
        "seeds": [log.config["seed"] for log in logs],
        "evaluations": [cfg["n_init"] + t * cfg["batch_size"]
                        for t in range(max(len(log.lhd_trace) for log in logs))],
        "lhd": aggregate(logs),
        "config": {k: v for k, v in cfg.items() if k != "seed"},
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
    return path


def emit_front(log, resolution, path, problem=None):
    """Decode evenly spread preferences through the final model and write the
    true objective values plus the archive's non-dominated set.

    These evaluations are diagnostics made after the run; they are outside
    the optimization budget. Returns the number of data rows written.
    """
    model = log.model
    if model is None and log.checkpoint:
        model, _ = ParetoSetModel.load_checkpoint(log.checkpoint)
    if model is None:
        raise CheckpointError("run log has no model checkpoint to decode")
    if problem is None:
        from .optimizer import RunConfig

        problem = resolve_problem(RunConfig(**log.config))
    R = simplex_grid(resolution, problem.n_obj)
    model_f = problem.evaluate(model.forward(R))
    arch = non_dominated(log.archive_y)
    with open(path, "w") as fh:
        fh.write(f"# {problem.name}: model front, {len(R)} preferences "
                 "(post-hoc evaluations, outside the run budget)\n")
        for f in model_f:
            fh.write(" ".join(repr(float(v)) for v in f) + "\n")
        fh.write(f"# archive non-dominated set, {len(arch)} points\n")
        for f in arch:
            fh.write(" ".join(repr(float(v)) for v in f) + "\n")
    return len(R) + len(arch)


__all__ = [
    "RunLog", "aggregate", "build_runlog", "emit_front", "lhd", "lhd_trace",
    "read_runlog", "write_aggregate", "write_runlog",
]
