"""Per-point weighting strategies for the collocation loss.

Every strategy returns a :class:`WeightVector`. Its ``weights`` are
nonnegative and sum to one. Internally the vector stores ``multipliers``,
the same weights rescaled to mean one, because that is what the loss
consumes: ``sum(w * r**2) == mean(m * r**2)``. The uniform strategy therefore
has multipliers exactly 1.0 and reproduces the plain mean-square loss bit for
bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

STRATEGIES = ("uniform", "lp", "binary", "rqa")

# guards ceil(level * n) against representation error, e.g. 0.7 * 10 = 7.000000000000001
_CEIL_SLACK = 1e-9


@dataclass(frozen=True)
class WeightVector:
    multipliers: np.ndarray
    strategy: str
    params: dict = field(default_factory=dict)

    @classmethod
    def from_weights(cls, weights, strategy: str = "given", params: dict | None = None) -> "WeightVector":
        w = np.asarray(weights, dtype=np.float64).ravel()
        if w.size == 0 or (w < 0).any() or not np.isfinite(w).all() or w.sum() <= 0:
            raise ValueError("weights must be a nonempty, finite, nonnegative vector with positive sum")
        return cls(_mean_one(w), strategy, dict(params or {}))

    @property
    def weights(self) -> np.ndarray:
        return self.multipliers / self.multipliers.shape[0]

    def __len__(self) -> int:
        return self.multipliers.shape[0]


def _mean_one(values: np.ndarray) -> np.ndarray:
    return values * (values.shape[0] / values.sum())


def _rank(level: float, n: int) -> int:
    """1-based rank ceil(level * n), clamped to [1, n]."""
    return min(n, max(1, math.ceil(level * n - _CEIL_SLACK)))


def empirical_quantile(values, level: float) -> float:
    """The ceil(level*N)-th smallest entry, i.e. inf{v : F_N(v) >= level}."""
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise ValueError("empirical quantile of an empty vector")
    if not 0.0 < level < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {level}")
    if not np.isfinite(values).all():
        raise ValueError("empirical quantile needs finite values")
    k = _rank(level, values.size)
    return float(np.partition(values, k - 1)[k - 1])


def _residual_array(residuals) -> np.ndarray:
    r = np.asarray(residuals, dtype=np.float64).ravel()
    if r.size == 0:
        raise ValueError("empty residual vector")
    if np.isnan(r).any():
        raise ValueError("residual vector contains NaN")
    if (r < 0).any():
        raise ValueError("residuals must be nonnegative")
    return r


def uniform_weights(n: int) -> WeightVector:
    if n < 1:
        raise ValueError(f"need at least one point, got {n}")
    return WeightVector(np.ones(n), "uniform")


def lp_weights(residuals, p: float) -> WeightVector:
    """Weights proportional to r**(p-2), normalized.

    Residuals are divided by their maximum first, which keeps large ``p``
    from overflowing and makes rescaling by a power of two bit-exact.
    An all-zero vector gives uniform weights.
    """
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p}")
    r = _residual_array(residuals)
    if np.isinf(r).any():
        raise ValueError("residual vector contains inf")
    top = r.max()
    if top == 0.0:
        return WeightVector(np.ones(r.size), "lp", {"p": p})
    raw = (r / top) ** (p - 2.0)
    return WeightVector(_mean_one(raw), "lp", {"p": p})


@dataclass(frozen=True)
class Adjustment:
    """Diagnostics of one quantile adjustment (in multiplier units)."""

    threshold: float
    replacement: float
    n_replaced: int
    unnormalized: np.ndarray


def rqa_adjust_detail(weights: WeightVector, q_cut: float, q_target: float) -> tuple[WeightVector, Adjustment]:
    if not (0.0 < q_target <= q_cut < 1.0):
        raise ValueError(f"need 0 < q_target <= q_cut < 1, got q_target={q_target}, q_cut={q_cut}")
    m = weights.multipliers
    threshold = empirical_quantile(m, q_cut)
    replacement = empirical_quantile(m, q_target)
    tail = m > threshold
    adjusted = np.where(tail, replacement, m)
    if not adjusted.any():
        # all mass sat above a zero threshold and was replaced by zero
        adjusted = np.ones_like(m)
    params = dict(weights.params, q_cut=q_cut, q_target=q_target)
    out = WeightVector(_mean_one(adjusted), "rqa", params)
    return out, Adjustment(threshold, replacement, int(tail.sum()), adjusted)


def rqa_adjust(weights: WeightVector, q_cut: float = 0.9, q_target: float = 0.5) -> WeightVector:
    """Replace every weight above the ``q_cut`` quantile by the ``q_target`` quantile, then renormalize.

    Both quantiles are taken on the input weights.
    """
    return rqa_adjust_detail(weights, q_cut, q_target)[0]


def binary_levels(eta: float, ratio: float) -> tuple[float, float]:
    """(w_L, w_S) with w_L / w_S = ratio and eta * w_L + (1 - eta) * w_S = 1."""
    w_s = 1.0 / (ratio * eta + (1.0 - eta))
    return ratio * w_s, w_s


def binary_weights(residuals, eta: float = 0.8, ratio: float = 4.0) -> WeightVector:
    """Two-level weights: the ceil(eta*N) largest residuals get w_L, the rest w_S.

    Ties at the cut go to the lower input index. When eta*N is not an integer
    the levels no longer average to one, so the result is renormalized.
    """
    if not 0.0 < eta < 1.0:
        raise ValueError(f"eta must lie in (0, 1), got {eta}")
    if ratio < 1.0:
        raise ValueError(f"ratio must be >= 1, got {ratio}")
    r = _residual_array(residuals)
    w_l, w_s = binary_levels(eta, ratio)
    k = _rank(eta, r.size)
    order = np.argsort(-r, kind="stable")
    m = np.full(r.size, w_s)
    m[order[:k]] = w_l
    return WeightVector(_mean_one(m), "binary", {"eta": eta, "ratio": ratio, "w_L": w_l, "w_S": w_s})


def compute_weights(strategy: str, residuals, *, p=4.0, q_cut=0.9, q_target=0.5, eta=0.8, ratio=4.0):
    """Apply a named strategy. Returns ``(raw, adjusted)``.

    ``raw`` is the L_p weight vector before quantile adjustment for ``rqa`` and
    equals ``adjusted`` for every other strategy.
    """
    if strategy == "uniform":
        w = uniform_weights(np.asarray(residuals).size)
        return w, w
    if strategy == "lp":
        w = lp_weights(residuals, p)
        return w, w
    if strategy == "binary":
        w = binary_weights(residuals, eta, ratio)
        return w, w
    if strategy == "rqa":
        raw = lp_weights(residuals, p)
        return raw, rqa_adjust(raw, q_cut, q_target)
    raise ValueError(f"unknown strategy {strategy!r}; expected one of {', '.join(STRATEGIES)}")
