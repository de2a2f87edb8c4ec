import json
import math

import numpy as np
import pytest

from svhpsl import cli
from svhpsl.exceptions import CheckpointError, NumericalFailureError
from svhpsl.hypervolume import hv, non_dominated
from svhpsl.optimizer import RunConfig, run
from svhpsl.runlog import aggregate, emit_front, lhd, read_runlog, write_aggregate, write_runlog

FAST = dict(n_var=4, inner_steps=5, n_particles=4, n_candidates=40, hidden=(8, 8))
FAST_ARGS = ["--n-var", "4", "--inner-steps", "5", "--particles", "4",
             "--candidates", "40", "--hidden", "8", "8"]


@pytest.fixture(scope="module")
def small_log():
    return run(RunConfig(problem="zdt1", n_iter=2, seed=1, **FAST))


def test_lhd_examples():
    ref = [1.0, 1.0]
    reference = np.array([[0.0, 0.5], [0.5, 0.0]])
    archive = np.array([[0.1, 0.5], [0.5, 0.1]])
    assert hv(reference, ref) == pytest.approx(0.75) and hv(archive, ref) == pytest.approx(0.65)
    assert lhd(archive, reference, ref) == pytest.approx(math.log(0.10))
    assert lhd(reference, reference, ref) is None
    assert lhd(np.empty((0, 2)), reference, ref) == pytest.approx(math.log(0.75))


def test_trace_shape_and_monotone(small_log):
    trace = small_log.lhd_trace
    assert len(trace) == 3
    finite = [v for v in trace if v is not None]
    assert all(b <= a for a, b in zip(finite, finite[1:]))
    # nulls may only form a tail
    first_null = next((i for i, v in enumerate(trace) if v is None), len(trace))
    assert all(v is None for v in trace[first_null:])
    assert [r["lhd"] for r in small_log.records] == trace


def test_round_trip_is_bitwise(small_log, tmp_path):
    path = write_runlog(small_log, tmp_path)
    back = read_runlog(path)
    np.testing.assert_array_equal(back.archive_x, small_log.archive_x)
    np.testing.assert_array_equal(back.archive_y, small_log.archive_y)
    assert back.lhd_trace == small_log.lhd_trace
    assert back.records == json.loads(json.dumps(small_log.records))
    assert back.config == small_log.config
    np.testing.assert_array_equal(back.model.theta_, small_log.model.theta_)
    assert (tmp_path / f"{small_log.stem}.jsonl").read_text().count("\n") == 3


def test_aggregate_matches_one_pass_oracle(tmp_path):
    logs = [run(RunConfig(problem="zdt1", n_iter=1, seed=s, **FAST)) for s in range(3)]
    paths = [write_runlog(log, tmp_path) for log in logs]
    agg_path = write_aggregate(logs, tmp_path)
    doc = json.loads(agg_path.read_text())
    reread = [json.loads(p.read_text())["lhd_trace"] for p in paths]
    for t, row in enumerate(doc["lhd"]):
        n, mean, m2 = 0, 0.0, 0.0
        for trace in reread:  # Welford, independent of numpy's reductions
            if trace[t] is None:
                continue
            n += 1
            delta = trace[t] - mean
            mean += delta / n
            m2 += delta * (trace[t] - mean)
        assert row["n"] == n
        assert row["mean"] == pytest.approx(mean, abs=1e-12)
        assert row["std"] == pytest.approx(math.sqrt(m2 / n), abs=1e-12)
    assert doc["evaluations"] == [20, 25]


def test_aggregate_skips_nulls():
    class Fake:
        def __init__(self, trace):
            self.lhd_trace = trace

    rows = aggregate([Fake([-1.0, None]), Fake([-3.0, None])])
    assert rows[0]["mean"] == -2.0 and rows[0]["std"] == 1.0
    assert rows[1] == {"iteration": 1, "n": 0, "mean": None, "std": None}


def test_emit_front(small_log, tmp_path):
    out = tmp_path / "front.txt"
    n = emit_front(small_log, 100, out)
    rows = [ln for ln in out.read_text().splitlines() if ln and not ln.startswith("#")]
    arch = non_dominated(small_log.archive_y)
    assert n == len(rows) == 100 + len(arch)
    assert emit_front(small_log, 1, out) == 1 + len(arch)


def test_emit_front_needs_checkpoint(small_log, tmp_path):
    path = write_runlog(small_log, tmp_path)
    back = read_runlog(path)
    back.model, back.checkpoint = None, None
    with pytest.raises(CheckpointError):
        emit_front(back, 10, tmp_path / "f.txt")


def test_emit_front_from_checkpoint_file(small_log, tmp_path):
    back = read_runlog(write_runlog(small_log, tmp_path))
    back.model = None
    a = emit_front(back, 5, tmp_path / "a.txt")
    b = emit_front(small_log, 5, tmp_path / "b.txt")
    assert a == b
    assert (tmp_path / "a.txt").read_text() == (tmp_path / "b.txt").read_text()


def test_cli_seeds_and_aggregate(tmp_path, capsys):
    code = cli.main(["--problem", "zdt1", "--seeds", "2", "--iters", "1", "--out", str(tmp_path),
                     *FAST_ARGS])
    assert code == 0
    assert len(list(tmp_path.glob("run_zdt1_local_a0.1_seed*.summary.json"))) == 2
    agg = json.loads((tmp_path / "aggregate_zdt1_local_a0.1.json").read_text())
    assert agg["seeds"] == [0, 1] and len(agg["lhd"]) == 2
    assert "aggregate over 2 seed(s)" in capsys.readouterr().out


def test_cli_zero_iterations(tmp_path):
    assert cli.main(["--seeds", "1", "--iters", "0", "--out", str(tmp_path), *FAST_ARGS]) == 0
    log = read_runlog(next(tmp_path.glob("*.summary.json")))
    assert len(log.records) == 1 and len(log.lhd_trace) == 1


def test_cli_kernel_ablation_files(tmp_path):
    for kernel in ("local", "global"):
        cli.main(["--seeds", "1", "--iters", "1", "--kernel", kernel, "--out", str(tmp_path),
                  *FAST_ARGS])
    names = sorted(p.name for p in tmp_path.glob("aggregate_*.json"))
    assert names == ["aggregate_zdt1_global_a0.1.json", "aggregate_zdt1_local_a0.1.json"]


def test_cli_front_and_checkpoints(tmp_path):
    cli.main(["--seeds", "1", "--iters", "1", "--emit-front", "7", "--checkpoint",
              "--out", str(tmp_path), *FAST_ARGS])
    front = next(tmp_path.glob("*.front.txt")).read_text()
    assert "post-hoc" in front
    assert sorted(p.name for p in (tmp_path / "checkpoints").iterdir()) == [
        "theta_seed0_iter0.ckpt", "theta_seed0_iter1.ckpt"]


def test_cli_problem_spec(tmp_path):
    spec = tmp_path / "toy.txt"
    spec.write_text("name = toy\nn_var = 3\nn_obj = 2\nlower = 0\nupper = 1\n"
                    "objectives = x[0]; 1 - sqrt(x[0]) + x[1] + x[2]\n")
    code = cli.main(["--problem-spec", str(spec), "--seeds", "1", "--iters", "1",
                     "--inner-steps", "3", "--candidates", "20", "--hidden", "4",
                     "--out", str(tmp_path)])
    assert code == 0
    log = read_runlog(tmp_path / "run_toy_local_a0.1_seed0.summary.json")
    assert log.lhd_trace == [None, None]  # no reference front supplied


def test_cli_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    assert cli.main(["--seeds", "1", "--iters", "0", *FAST_ARGS]) == 0
    assert (tmp_path / "env" / "aggregate_zdt1_local_a0.1.json").exists()


@pytest.mark.parametrize("argv", [
    ["--bogus"],
    ["--kernel", "cosine"],
    ["--batch", "50", "--candidates", "10"],
    ["--alpha", "-1"],
    ["--seeds", "0"],
    ["--n-init", "1"],
    ["--problem", "nope"],
    ["--problem", "zdt1", "--problem-spec", "x.txt"],
    ["--ref-point", "1.0"],
])
def test_cli_usage_errors_exit_2(argv, tmp_path):
    with pytest.raises(SystemExit) as info:
        cli.main([*argv, "--out", str(tmp_path)])
    assert info.value.code == 2


def test_cli_n_var_with_spec_is_usage_error(tmp_path):
    spec = tmp_path / "p.txt"
    spec.write_text("builtin = zdt1\n")
    with pytest.raises(SystemExit) as info:
        cli.main(["--problem-spec", str(spec), "--n-var", "3", "--out", str(tmp_path)])
    assert info.value.code == 2


def test_cli_failed_run_exits_nonzero(tmp_path, monkeypatch, capsys):
    def boom(config, checkpoint_dir=None):
        raise NumericalFailureError("factorization failed")

    monkeypatch.setattr(cli, "run", boom)
    assert cli.main(["--seeds", "1", "--iters", "1", "--out", str(tmp_path), *FAST_ARGS]) == 1
    assert "FAILED" in capsys.readouterr().err
