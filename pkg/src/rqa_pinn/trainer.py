"""Adaptive-weight PINN training loop.

One iteration:

1. draw interior / boundary / initial batches from the iteration's substreams;
2. evaluate role-wise residuals at the current parameters;
3. turn each residual vector into weights with the configured strategy
   (the same strategy and ``p`` for every role);
4. differentiate the weighted mean-square loss with those weights held fixed;
5. take an optimizer step with the segmented log-linear step-size schedule;
6. on the evaluation cadence, record loss and test-set errors.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields
from functools import partial
from typing import Callable, NamedTuple

import jax
import jax.numpy as jnp
import numpy as np

from rqa_pinn import network, problems
from rqa_pinn.derivatives import EvaluationError
from rqa_pinn.geometry import PointBatch, sample_boundary, sample_initial, sample_interior, substream
from rqa_pinn.metrics import TestSet, make_test_set, relative_l2_error, relative_max_error
from rqa_pinn.weighting import STRATEGIES, WeightVector, compute_weights

log = logging.getLogger(__name__)

OPTIMIZERS = ("adam", "sgd")
N_SEGMENTS = 1000


class TrainingDivergence(EvaluationError):
    def __init__(self, message: str, iteration: int, role: str):
        super().__init__(f"iteration {iteration}, {role}: {message}")
        self.iteration = iteration
        self.role = role


@dataclass
class TrainConfig:
    problem: str = "elliptic"
    d: int = 2
    strategy: str = "rqa"
    p: float = 4.0
    q_cut: float = 0.9
    q_target: float = 0.5
    eta: float = 0.8
    ratio: float = 4.0
    iterations: int = 2000
    n_interior: int = 1000
    n_boundary: int = 1000
    n_initial: int = 50
    lambda_b: float = 1.0
    lambda_i: float = 1.0
    width: int = 100
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    eval_every: int = 10
    n_test: int = 10000
    record_wall_time: bool = True

    def validate(self) -> "TrainConfig":
        """Raise ``ValueError`` naming the first offending field."""
        checks = [
            ("problem", self.problem in problems.PROBLEMS, f"one of {', '.join(problems.PROBLEMS)}"),
            ("strategy", self.strategy in STRATEGIES, f"one of {', '.join(STRATEGIES)}"),
            ("optimizer", self.optimizer in OPTIMIZERS, f"one of {', '.join(OPTIMIZERS)}"),
            ("d", self.d >= 1, ">= 1"),
            ("p", self.p >= 2, ">= 2"),
            ("q_cut", 0 < self.q_cut < 1, "in (0, 1)"),
            ("q_target", 0 < self.q_target <= self.q_cut, "in (0, q_cut]"),
            ("eta", 0 < self.eta < 1, "in (0, 1)"),
            ("ratio", self.ratio >= 1, ">= 1"),
            ("iterations", self.iterations >= 1, ">= 1"),
            ("n_interior", self.n_interior >= 1, ">= 1"),
            ("n_boundary", self.n_boundary >= 1, ">= 1"),
            ("n_initial", self.n_initial >= 1, ">= 1"),
            ("lambda_b", self.lambda_b >= 0, ">= 0"),
            ("lambda_i", self.lambda_i >= 0, ">= 0"),
            ("width", self.width >= 1, ">= 1"),
            ("eval_every", self.eval_every >= 1, ">= 1"),
            ("n_test", self.n_test >= 1, ">= 1"),
        ]
        for key, ok, want in checks:
            if not ok:
                raise ValueError(f"{key}={getattr(self, key)!r}: must be {want}")
        return self

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


def step_size(k: int, n: int) -> float:
    """10**(-2 - 3j/1000) on the j-th of 1000 equal segments of n iterations (k is 1-based)."""
    if not 1 <= k <= n:
        raise ValueError(f"iteration {k} outside 1..{n}")
    j = (k - 1) * N_SEGMENTS // n
    return 10.0 ** (-2.0 - 3.0 * j / N_SEGMENTS)


ROLE_ORDER = ("interior", "boundary", "initial")


def assemble_loss(interior, boundary, initial=None, lambda_b=1.0, lambda_i=1.0):
    """Weighted penalized loss from ``(residuals, weights)`` pairs.

    Weights are anything accepted by :func:`_multipliers` (a
    :class:`WeightVector` or a normalized weight array). Residuals may be JAX
    tracers; weights are treated as constants.
    """
    total = _term(*interior)
    total = total + lambda_b * _term(*boundary)
    if initial is not None:
        total = total + lambda_i * _term(*initial)
    return total


def _multipliers(weights) -> np.ndarray:
    if isinstance(weights, WeightVector):
        return weights.multipliers
    w = np.asarray(weights, dtype=np.float64)
    return w * w.shape[0]


def _term(residuals, weights):
    m = _multipliers(weights)
    if np.shape(residuals)[0] != m.shape[0]:
        raise ValueError(f"{np.shape(residuals)[0]} residuals but {m.shape[0]} weights")
    return jnp.mean(jnp.asarray(m) * jnp.asarray(residuals) ** 2)


class Batches(NamedTuple):
    xi: jax.Array
    ti: jax.Array
    xb: jax.Array
    tb: jax.Array
    x0: jax.Array | None


class AdamState(NamedTuple):
    mean: object
    var: object
    count: jax.Array


def draw_batches(config: TrainConfig, problem: problems.PdeProblem, k: int) -> dict[str, PointBatch]:
    """The iteration-``k`` training batches, shared by every strategy with the same seed."""
    seed, d, horizon = config.seed, config.d, problem.horizon
    out = {
        "interior": sample_interior(config.n_interior, d, horizon, substream(seed, "interior", k)),
        "boundary": sample_boundary(config.n_boundary, d, horizon, substream(seed, "boundary", k)),
    }
    if problem.time_dependent:
        out["initial"] = sample_initial(config.n_initial, d, substream(seed, "initial", k))
    return out


def to_arrays(batches: dict[str, PointBatch]) -> Batches:
    i, b = batches["interior"], batches["boundary"]
    x0 = batches.get("initial")
    return Batches(
        jnp.asarray(i.x), jnp.asarray(i.times()), jnp.asarray(b.x), jnp.asarray(b.times()),
        None if x0 is None else jnp.asarray(x0.x),
    )


def signed_residuals(problem: problems.PdeProblem, params: network.MlpParams, arrays: Batches):
    u = network.field(params)
    out = [
        problems.signed_interior(problem, u, arrays.xi, arrays.ti),
        problems.signed_boundary(problem, u, arrays.xb, arrays.tb),
    ]
    if arrays.x0 is not None:
        out.append(problems.signed_initial(problem, u, arrays.x0))
    return tuple(out)


def weighted_loss(problem, params, arrays, mults, lambda_b, lambda_i):
    """Loss and its per-role terms; ``mults`` are mean-one multipliers per role."""
    res = signed_residuals(problem, params, arrays)
    terms = tuple(jnp.mean(m * r**2) for m, r in zip(mults, res))
    total = terms[0] + lambda_b * terms[1]
    if len(terms) > 2:
        total = total + lambda_i * terms[2]
    return total, terms


def adam_init(params) -> AdamState:
    zeros = jax.tree_util.tree_map(jnp.zeros_like, params)
    return AdamState(zeros, zeros, jnp.zeros((), dtype=jnp.int64))


def adam_update(grads, state: AdamState, params, lr, beta1, beta2, eps):
    count = state.count + 1
    mean = jax.tree_util.tree_map(lambda m, g: beta1 * m + (1 - beta1) * g, state.mean, grads)
    var = jax.tree_util.tree_map(lambda v, g: beta2 * v + (1 - beta2) * g * g, state.var, grads)
    c1 = 1 - beta1**count
    c2 = 1 - beta2**count
    new = jax.tree_util.tree_map(
        lambda p, m, v: p - lr * (m / c1) / (jnp.sqrt(v / c2) + eps), params, mean, var
    )
    return new, AdamState(mean, var, count)


def sgd_update(grads, state, params, lr, *_):
    return jax.tree_util.tree_map(lambda p, g: p - lr * g, params, grads), state


def _all_finite(tree) -> jax.Array:
    leaves = jax.tree_util.tree_leaves(tree)
    return jnp.all(jnp.stack([jnp.all(jnp.isfinite(x)) for x in leaves]))


@partial(jax.jit, static_argnums=(0, 1))
def _train_step(problem, optimizer, params, opt_state, arrays, mults, lr, lambda_b, lambda_i, hyper):
    (loss, terms), grads = jax.value_and_grad(weighted_loss, argnums=1, has_aux=True)(
        problem, params, arrays, mults, lambda_b, lambda_i
    )
    update = adam_update if optimizer == "adam" else sgd_update
    new_params, new_state = update(grads, opt_state, params, lr, *hyper)
    return new_params, new_state, loss, terms, _all_finite(grads)


_residuals_jit = jax.jit(signed_residuals, static_argnums=0)


@jax.jit
def _predict(params, xs, ts):
    return network.predict(params, xs, ts)


@dataclass
class IterationInfo:
    """What the loop saw at one iteration (handed to ``on_iteration`` callbacks)."""

    iteration: int
    params: network.MlpParams  # parameters the residuals and loss were evaluated at
    batches: dict[str, PointBatch]
    residuals: dict[str, np.ndarray]
    raw_weights: dict[str, WeightVector]
    weights: dict[str, WeightVector]
    loss: float


@dataclass
class RunRecord:
    config: TrainConfig
    rows: list[tuple[int, float, float, float, float]] = field(default_factory=list)

    COLUMNS = ("iter", "loss", "l2_error", "max_error", "wall_ms")

    @property
    def final_l2(self) -> float:
        return self.rows[-1][2]

    @property
    def final_max(self) -> float:
        return self.rows[-1][3]

    def summary(self) -> dict:
        c = self.config
        return {
            "strategy": c.strategy, "p": c.p, "q_cut": c.q_cut, "q_target": c.q_target,
            "seed": c.seed, "final_l2": self.final_l2, "final_max": self.final_max,
        }


@dataclass
class TrainState:
    params: network.MlpParams
    opt_state: object
    k: int = 0
    record: RunRecord | None = None


WeightFn = Callable[[str, np.ndarray, TrainConfig], tuple[WeightVector, WeightVector]]


def strategy_weights(role: str, residuals: np.ndarray, config: TrainConfig):
    return compute_weights(
        config.strategy, residuals, p=config.p, q_cut=config.q_cut,
        q_target=config.q_target, eta=config.eta, ratio=config.ratio,
    )


def evaluate(params: network.MlpParams, test: TestSet) -> tuple[float, float]:
    pred = np.asarray(_predict(params, jnp.asarray(test.x), jnp.asarray(test.times())))
    return relative_l2_error(pred, test.exact), relative_max_error(pred, test.exact)


def train(
    config: TrainConfig,
    *,
    weight_fn: WeightFn | None = None,
    on_iteration: Callable[[IterationInfo], None] | None = None,
    params: network.MlpParams | None = None,
) -> tuple[network.MlpParams, RunRecord]:
    """Run ``config.iterations`` adaptive-weight iterations; deterministic given ``config.seed``.

    ``weight_fn(role, residuals, config) -> (raw, adjusted)`` overrides the
    configured strategy (used to inject spies in tests). Raises
    :class:`TrainingDivergence` on a non-finite residual, loss or gradient.
    """
    config.validate()
    problem = problems.get_problem(config.problem, config.d)
    weight_fn = weight_fn or strategy_weights
    if params is None:
        params = network.init(config.seed, config.d, problem.time_dependent, config.width)
    opt_state = adam_init(params) if config.optimizer == "adam" else ()
    hyper = (config.beta1, config.beta2, config.adam_eps)
    state = TrainState(params, opt_state, 0, RunRecord(config))
    test = make_test_set(problem, config.n_test, config.seed)
    n = config.iterations
    clock = time.perf_counter()

    for k in range(1, n + 1):
        batches = draw_batches(config, problem, k)
        arrays = to_arrays(batches)
        signed = _residuals_jit(problem, state.params, arrays)
        residuals, raw, adjusted = {}, {}, {}
        for role, r in zip(ROLE_ORDER, signed):
            r = np.abs(np.asarray(r))
            if not np.isfinite(r).all():
                raise TrainingDivergence("non-finite residual", k, role)
            residuals[role] = r
            raw[role], adjusted[role] = weight_fn(role, r, config)
        mults = tuple(jnp.asarray(adjusted[role].multipliers) for role in residuals)

        new_params, new_opt, loss, terms, grads_ok = _train_step(
            problem, config.optimizer, state.params, state.opt_state, arrays, mults,
            step_size(k, n), config.lambda_b, config.lambda_i, hyper,
        )
        for role, term in zip(ROLE_ORDER, terms):
            if not np.isfinite(float(term)):
                raise TrainingDivergence("non-finite loss term", k, role)
        if not bool(grads_ok):
            raise TrainingDivergence("non-finite parameter gradient", k, "all")
        loss = float(loss)
        if on_iteration is not None:
            on_iteration(IterationInfo(k, state.params, batches, residuals, raw, adjusted, loss))
        state.params, state.opt_state, state.k = new_params, new_opt, k

        if k % config.eval_every == 0 or k == n:
            l2, mx = evaluate(state.params, test)
            now = time.perf_counter()
            wall = (now - clock) * 1e3 if config.record_wall_time else 0.0
            clock = now
            state.record.rows.append((k, loss, l2, mx, wall))
            log.debug("iter %d loss %.4e l2 %.4e max %.4e", k, loss, l2, mx)
            if not (math.isfinite(l2) and math.isfinite(mx)):
                raise TrainingDivergence("non-finite test error", k, "test")

    return state.params, state.record


def config_dict(config: TrainConfig) -> dict:
    return asdict(config)
