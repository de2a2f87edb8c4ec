"""The outer Bayesian-optimization loop.

Each iteration refits one GP per objective on the archive, trains the Pareto
set model for ``inner_steps`` Stein-variational steps on the LCB surrogate,
decodes ``n_candidates`` preferences, picks ``batch_size`` of them by greedy
hypervolume improvement and spends the true evaluations on those.
"""

import logging
import time
import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import qmc
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import NumericalFailureError
from .gp import SurrogateBundle
from .hypervolume import non_dominated, select_indices
from .model import Adam, ParetoSetModel, apply_update
from .problems import Problem, expand_nadir
from .scalarize import chebyshev_batch, ideal_point, sample_preferences, update_ideal
from .svgd import build_particles, particle_kernel, svh_gradient

logger = logging.getLogger(__name__)

LOSS_TRACE_EVERY = 25
DUPLICATE_TOL = 1e-9


@dataclass
class Archive:
    """Append-only record of every true evaluation."""

    xs: np.ndarray
    ys: np.ndarray
    provenance: list = field(default_factory=list)

    def __len__(self):
        return len(self.xs)

    def append(self, X, Y, tag):
        X = np.atleast_2d(X)
        Y = np.atleast_2d(Y)
        self.xs = np.vstack([self.xs, X])
        self.ys = np.vstack([self.ys, Y])
        self.provenance.extend([tag] * len(X))

    def front(self):
        return non_dominated(self.ys)


def initial_design(problem, n_init, rng):
    """Scrambled Sobol' points in the box, evaluated on the true objectives."""
    if n_init < 2:
        raise ValueError("n_init must be >= 2")
    sampler = qmc.Sobol(problem.n_var, scramble=True, seed=np.random.default_rng(rng))
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="The balance properties of Sobol")
        U = sampler.random(n_init)
    X = qmc.scale(U, problem.lower_bounds, problem.upper_bounds)
    X = np.clip(X, problem.lower_bounds, problem.upper_bounds)
    Y = problem.evaluate(X)
    return Archive(X, Y, ["initial"] * n_init)


@dataclass
class LoopState:
    problem: Problem
    params: dict
    archive: Archive
    model: ParetoSetModel
    adam: Adam
    z: np.ndarray
    seeds: list
    iteration: int = 0
    skipped_steps: int = 0
    records: list = field(default_factory=list)


def child_seeds(seq, n):
    """The first ``n`` children of ``seq``, without advancing its spawn counter.

    ``SeedSequence.spawn`` is stateful; deriving children from the spawn key
    keeps a retried iteration on exactly the same random streams.
    """
    return [
        np.random.SeedSequence(seq.entropy, spawn_key=seq.spawn_key + (k,), pool_size=seq.pool_size)
        for k in range(n)
    ]


def _ref_for_selection(Y):
    return expand_nadir(np.max(Y, axis=0))


def run_iteration(state):
    """Advance ``state`` by one outer iteration (mutated in place and returned).

    A GP failure leaves the archive and model untouched, appends an error
    record and re-raises, so the caller can retry from the same state.
    """
    p = state.params
    problem = state.problem
    it = state.iteration
    t0 = time.perf_counter()
    gp_seed, train_seed, cand_seed = child_seeds(state.seeds[it], 3)
    archive = state.archive
    z = update_ideal(state.z, archive.ys)
    rho = _ref_for_selection(archive.ys)

    bundle = SurrogateBundle(problem.lower_bounds, problem.upper_bounds, p["lcb_lambda"])
    try:
        bundle.fit(archive.xs, archive.ys, random_state=gp_seed)
    except NumericalFailureError as exc:
        state.records.append({"iteration": it, "error": str(exc)})
        raise

    model = state.model
    loss_trace = []
    skipped = 0
    for t, step_seed in enumerate(child_seeds(train_seed, p["inner_steps"])):
        R = sample_preferences(p["n_particles"], problem.n_obj, np.random.default_rng(step_seed))
        particles = build_particles(model, R, bundle, z)
        if t % LOSS_TRACE_EVERY == 0:
            loss_trace.append([t, float(np.mean(particles.g_values))])
        try:
            kernel = particle_kernel(particles, p["kernel"])
            grad = svh_gradient(particles, kernel, p["alpha"])
        except NumericalFailureError as exc:
            skipped += 1
            logger.warning("iteration %d step %d skipped: %s", it, t, exc)
            continue
        apply_update(model, grad, state.adam)

    cand_rng = np.random.default_rng(cand_seed)
    R = sample_preferences(p["n_candidates"], problem.n_obj, cand_rng)
    Xc = model.forward(R)
    Fc = bundle.lcb_values(Xc)
    keep = _not_archived(Xc, archive.xs, problem)
    pool = np.flatnonzero(keep)
    b = p["batch_size"]
    if len(pool) < b:
        logger.warning("only %d fresh candidates; topping up with uniform samples", len(pool))
        extra = cand_rng.uniform(problem.lower_bounds, problem.upper_bounds,
                                 (b - len(pool), problem.n_var))
        Xc = np.vstack([Xc, extra])
        Fc = np.vstack([Fc, bundle.lcb_values(extra)])
        R = np.vstack([R, np.full((len(extra), problem.n_obj), 1.0 / problem.n_obj)])
        pool = np.concatenate([pool, np.arange(len(Xc) - len(extra), len(Xc))])
    if problem.n_obj <= 3:
        picked = pool[select_indices(Fc[pool], archive.front(), rho, b)]
    else:
        # no exact hypervolume beyond 3 objectives: lowest scalarized value wins
        g, _ = chebyshev_batch(Fc[pool], R[pool], z)
        picked = pool[np.argsort(g, kind="stable")[:b]]

    X_new = Xc[picked]
    Y_new = problem.evaluate(X_new)
    archive.append(X_new, Y_new, it)
    state.z = update_ideal(z, Y_new)
    state.skipped_steps += skipped
    state.records.append({
        "iteration": it,
        "gp": bundle.hyperparameters(),
        "loss_trace": loss_trace,
        "selected_x": X_new.tolist(),
        "selected_f_hat": Fc[picked].tolist(),
        "selected_f": Y_new.tolist(),
        "rho": rho.tolist(),
        "z_star": z.tolist(),
        "skipped_steps": skipped,
        "adam_skipped": state.adam.skipped,
        "std_floor_hits": bundle.std_floor_hits(),
        "archive_size": len(archive),
        "wall_clock": time.perf_counter() - t0,
    })
    state.iteration += 1
    return state


def _not_archived(Xc, Xa, problem):
    """Mask of candidates farther than DUPLICATE_TOL (box-normalized) from every archived x."""
    span = problem.upper_bounds - problem.lower_bounds
    U = (Xc - problem.lower_bounds) / span
    V = (Xa - problem.lower_bounds) / span
    dist, _ = cKDTree(V).query(U, k=1)
    return dist > DUPLICATE_TOL


class SVHPSL(BaseEstimator):
    """Pareto set learning for expensive multi-objective problems.

    ``fit(problem)`` spends exactly ``n_init + n_iter * batch_size`` true
    evaluations and leaves the evaluated data in ``archive_`` and the trained
    preference-to-solution map in ``model_``; ``predict(R)`` decodes
    preference rows through it.

    Parameters
    ----------
    n_init : int
        Size of the initial Sobol' design.
    n_iter : int
        Outer iterations.
    inner_steps : int
        Model updates per outer iteration.
    n_particles : int
        Preferences (particles) per update.
    n_candidates : int
        Preferences decoded per iteration to choose the batch from.
    batch_size : int
        True evaluations per iteration.
    alpha : float
        Weight of the kernel repulsion; 0 gives plain Chebyshev PSL.
    lcb_lambda : float
        Confidence multiplier in ``mean - lcb_lambda * std``.
    kernel : {"local", "global"}
        Particle kernel.
    learning_rate : float
        Adam step size.
    hidden : tuple of int
        Hidden layer widths of the Pareto set model.
    random_state : int
        Root seed; every random stream is derived from it.
    """

    def __init__(
        self,
        n_init=20,
        n_iter=20,
        inner_steps=250,
        n_particles=10,
        n_candidates=1000,
        batch_size=5,
        alpha=0.1,
        lcb_lambda=2.0,
        kernel="local",
        learning_rate=1e-3,
        hidden=(256, 256),
        random_state=0,
    ):
        self.n_init = n_init
        self.n_iter = n_iter
        self.inner_steps = inner_steps
        self.n_particles = n_particles
        self.n_candidates = n_candidates
        self.batch_size = batch_size
        self.alpha = alpha
        self.lcb_lambda = lcb_lambda
        self.kernel = kernel
        self.learning_rate = learning_rate
        self.hidden = hidden
        self.random_state = random_state

    def _validate_params(self):
        counts = ("n_init", "inner_steps", "n_particles", "n_candidates", "batch_size")
        for name in counts:
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be positive")
        if self.n_iter < 0:
            raise ValueError("n_iter must be non-negative")
        if self.n_init < 2:
            raise ValueError("n_init must be >= 2")
        if self.batch_size > self.n_candidates:
            raise ValueError("batch_size cannot exceed n_candidates")
        if self.alpha < 0 or self.lcb_lambda < 0:
            raise ValueError("alpha and lcb_lambda must be non-negative")
        if self.kernel not in ("local", "global"):
            raise ValueError(f"kernel must be 'local' or 'global', got {self.kernel!r}")

    def start(self, problem):
        """Run the initial design and return the loop state without iterating."""
        self._validate_params()
        root = np.random.SeedSequence(self.random_state)
        init_seed, model_seed, loop_seed = child_seeds(root, 3)
        archive = initial_design(problem, self.n_init, np.random.default_rng(init_seed))
        model = ParetoSetModel(
            problem.n_var, problem.n_obj, problem.lower_bounds, problem.upper_bounds,
            tuple(self.hidden), random_state=np.random.default_rng(model_seed),
        ).fit()
        return LoopState(
            problem=problem,
            params=self.get_params(),
            archive=archive,
            model=model,
            adam=Adam(lr=self.learning_rate),
            z=ideal_point(archive.ys),
            seeds=child_seeds(loop_seed, max(self.n_iter, 1)),
        )

    def fit(self, problem, callback=None):
        state = self.start(problem)
        # kept even if an iteration raises, so a partial log can be flushed
        self.state_ = state
        self.archive_ = state.archive
        self.model_ = state.model
        self.records_ = state.records
        if callback is not None:
            callback(state)
        while state.iteration < self.n_iter:
            run_iteration(state)
            if callback is not None:
                callback(state)
        return self

    def predict(self, R):
        """Decision vectors for preference rows ``R``."""
        check_is_fitted(self, "model_")
        return self.model_.transform(R)


@dataclass
class RunConfig:
    """Everything needed to reproduce one run."""

    problem: str = "zdt1"
    seed: int = 0
    n_var: Optional[int] = None
    n_init: int = 20
    n_iter: int = 20
    inner_steps: int = 250
    n_particles: int = 10
    n_candidates: int = 1000
    batch_size: int = 5
    alpha: float = 0.1
    lcb_lambda: float = 2.0
    kernel: str = "local"
    learning_rate: float = 1e-3
    hidden: tuple = (256, 256)
    ref_point: Optional[list] = None
    problem_spec: Optional[str] = None

    def __post_init__(self):
        self.hidden = tuple(self.hidden)

    def estimator(self):
        return SVHPSL(
            n_init=self.n_init, n_iter=self.n_iter, inner_steps=self.inner_steps,
            n_particles=self.n_particles, n_candidates=self.n_candidates,
            batch_size=self.batch_size, alpha=self.alpha, lcb_lambda=self.lcb_lambda,
            kernel=self.kernel, learning_rate=self.learning_rate, hidden=self.hidden,
            random_state=self.seed,
        )

    def to_dict(self):
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


def run(config, problem=None, checkpoint_dir=None, on_iteration=None):
    """Execute one configured run and return its :class:`~svhpsl.runlog.RunLog`."""
    from .runlog import build_runlog, resolve_problem

    problem = problem or resolve_problem(config)
    est = config.estimator()
    t0 = time.perf_counter()

    def callback(state):
        if checkpoint_dir is not None:
            state.model.save_checkpoint(
                f"{checkpoint_dir}/theta_seed{config.seed}_iter{state.iteration}.ckpt",
                seed=config.seed, iteration=state.iteration,
            )
        if on_iteration is not None:
            on_iteration(state)

    try:
        est.fit(problem, callback=callback)
    except Exception as exc:
        state = getattr(est, "state_", None)
        if state is not None:
            partial = build_runlog(config, problem, state, time.perf_counter() - t0)
            partial.meta["error"] = f"{type(exc).__name__}: {exc}"
            exc.partial_log = partial
        raise
    return build_runlog(config, problem, est.state_, time.perf_counter() - t0)
