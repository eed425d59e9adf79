"""Seeded uniform samplers on the unit ball, its boundary sphere and the t=0 slice.

All randomness flows through :func:`substream`, which keys a Philox
counter-based generator by ``(master_seed, role, iteration)``. Two runs that
share a master seed therefore draw identical batches at every iteration, no
matter which weighting strategy consumes them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ROLES = ("interior", "boundary", "initial", "test", "network")
_ROLE_IDS = {name: i for i, name in enumerate(ROLES)}
MIN_RADIUS = 1e-12


def substream(master_seed: int, role: str, iteration: int = 0) -> np.random.Generator:
    """Independent Philox generator for one (role, iteration) pair of a master seed."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(_ROLE_IDS[role], iteration))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class PointBatch:
    x: np.ndarray  # (n, d)
    t: np.ndarray | None  # (n,), None for stationary problems
    role: str

    def __len__(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def times(self) -> np.ndarray:
        """Time column, zeros for stationary batches (fields ignore it)."""
        return np.zeros(len(self)) if self.t is None else self.t


def _check(n: int, d: int) -> None:
    if n < 1:
        raise ValueError(f"sample count must be >= 1, got {n}")
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")


def _directions(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((n, d))
    norms = np.linalg.norm(g, axis=1)
    bad = norms == 0.0
    while bad.any():
        g[bad] = rng.standard_normal((int(bad.sum()), d))
        norms = np.linalg.norm(g, axis=1)
        bad = norms == 0.0
    return g / norms[:, None]


def _ball(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    x = _directions(n, d, rng) * (rng.random(n) ** (1.0 / d))[:, None]
    r = np.linalg.norm(x, axis=1)
    # radius U**(1/d) can round to 1.0; the origin is excluded because radial
    # exact solutions are not differentiable there
    bad = (r >= 1.0) | (r < MIN_RADIUS)
    while bad.any():
        x[bad] = _directions(int(bad.sum()), d, rng) * (rng.random(int(bad.sum())) ** (1.0 / d))[:, None]
        r = np.linalg.norm(x, axis=1)
        bad = (r >= 1.0) | (r < MIN_RADIUS)
    return x


def _open_times(n: int, horizon: float, rng: np.random.Generator) -> np.ndarray:
    t = rng.uniform(0.0, horizon, n)
    bad = (t <= 0.0) | (t >= horizon)
    while bad.any():
        t[bad] = rng.uniform(0.0, horizon, int(bad.sum()))
        bad = (t <= 0.0) | (t >= horizon)
    return t


def sample_interior(n: int, d: int, horizon: float | None, rng: np.random.Generator) -> PointBatch:
    """Uniform points in the open ball; ``horizon=None`` gives a stationary batch."""
    _check(n, d)
    x = _ball(n, d, rng)
    t = None if horizon is None else _open_times(n, horizon, rng)
    return PointBatch(x, t, "interior")


def sample_boundary(n: int, d: int, horizon: float | None, rng: np.random.Generator) -> PointBatch:
    _check(n, d)
    x = _directions(n, d, rng)
    t = None if horizon is None else _open_times(n, horizon, rng)
    return PointBatch(x, t, "boundary")


def sample_initial(n: int, d: int, rng: np.random.Generator) -> PointBatch:
    _check(n, d)
    return PointBatch(_ball(n, d, rng), np.zeros(n), "initial")
