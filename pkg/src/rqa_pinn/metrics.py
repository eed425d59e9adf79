"""Relative error metrics on a fixed test set."""

from __future__ import annotations

from dataclasses import dataclass

import jax
import jax.numpy as jnp
import numpy as np

from rqa_pinn.geometry import sample_interior, substream
from rqa_pinn.problems import PdeProblem


@dataclass(frozen=True)
class TestSet:
    __test__ = False  # not a pytest class

    x: np.ndarray
    t: np.ndarray | None
    exact: np.ndarray

    def __len__(self) -> int:
        return self.x.shape[0]

    def times(self) -> np.ndarray:
        return np.zeros(len(self)) if self.t is None else self.t


def make_test_set(problem: PdeProblem, n: int, seed: int) -> TestSet:
    """Uniform test points over the problem domain, drawn from the seed's test substream."""
    batch = sample_interior(n, problem.d, problem.horizon, substream(seed, "test"))
    exact = np.asarray(jax.vmap(problem.exact)(jnp.asarray(batch.x), jnp.asarray(batch.times())))
    return TestSet(batch.x, batch.t, exact)


def _pair(predicted, exact):
    predicted = np.asarray(predicted, dtype=np.float64).ravel()
    exact = np.asarray(exact, dtype=np.float64).ravel()
    if predicted.shape != exact.shape:
        raise ValueError(f"length mismatch: {predicted.size} predictions vs {exact.size} exact values")
    if not np.any(exact):
        raise ValueError("exact values are identically zero; relative error undefined")
    return predicted, exact


def relative_l2_error(predicted, exact) -> float:
    """sqrt(sum (pred - exact)^2 / sum exact^2)."""
    predicted, exact = _pair(predicted, exact)
    return float(np.sqrt(np.sum((predicted - exact) ** 2) / np.sum(exact**2)))


def relative_max_error(predicted, exact) -> float:
    """max |pred - exact| / max |exact|."""
    predicted, exact = _pair(predicted, exact)
    return float(np.max(np.abs(predicted - exact)) / np.max(np.abs(exact)))
