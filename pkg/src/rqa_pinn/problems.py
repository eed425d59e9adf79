"""Benchmark PDEs on the unit ball: linear parabolic, Allen-Cahn and a nonlinear elliptic problem.

Source terms are manufactured: ``f = N[u_exact]`` is computed by applying the
operator to the exact solution through the derivative engine, so each problem
has its stated exact solution by construction. Hand-written closed-form
sources are kept in :func:`reference_source` for cross-checking only (see
:func:`source_crosscheck`); two of them disagree with the manufactured source.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import jax
import jax.numpy as jnp
import numpy as np

from rqa_pinn.derivatives import DerivativeBundle, batch_bundle, check_finite
from rqa_pinn.geometry import PointBatch

PROBLEMS = ("parabolic", "allen_cahn", "elliptic")


def _norm(x):
    return jnp.sqrt(jnp.sum(x * x))


def _coeff(x):
    return 1.0 + 0.5 * jnp.sum(x * x)


def _coeff_grad(x):
    return x


def _hump(x):
    """sin(pi/2 * |1 - |x||**2.5): vanishes on the unit sphere."""
    return jnp.sin(0.5 * jnp.pi * jnp.abs(1.0 - _norm(x)) ** 2.5)


def _parabolic_exact(x, t):
    return jnp.exp(_norm(x) * jnp.sqrt(1.0 - t))


def _allen_cahn_exact(x, t):
    return jnp.exp(-t) * _hump(x)


def _elliptic_exact(x, t):
    return _hump(x)


def _div_a_grad(b: DerivativeBundle, x):
    return _coeff(x) * b.laplacian + jnp.dot(_coeff_grad(x), b.spatial_gradient)


def _parabolic_op(b: DerivativeBundle, x, t):
    return b.time_derivative - _div_a_grad(b, x)


def _allen_cahn_op(b: DerivativeBundle, x, t):
    u = b.value
    return b.time_derivative - b.laplacian - u + u**3


def _elliptic_op(b: DerivativeBundle, x, t):
    return -_div_a_grad(b, x) + jnp.dot(b.spatial_gradient, b.spatial_gradient)


@dataclass(frozen=True)
class PdeProblem:
    name: str
    d: int
    time_dependent: bool
    exact: Callable  # field u(x, t)
    operator: Callable  # (bundle, x, t) -> N[u](x, t)
    boundary_value: Callable  # g(x, t)
    initial_value: Callable | None  # h(x)
    horizon: float | None = 1.0
    coeff: Callable | None = None
    coeff_grad: Callable | None = None


@lru_cache(maxsize=None)
def get_problem(name: str, d: int) -> PdeProblem:
    """Look up a benchmark problem by name: ``parabolic``, ``allen_cahn`` or ``elliptic``."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if name == "parabolic":
        return PdeProblem(
            name, d, True, _parabolic_exact, _parabolic_op,
            boundary_value=lambda x, t: jnp.exp(jnp.sqrt(1.0 - t)),
            initial_value=lambda x: jnp.exp(_norm(x)),
            coeff=_coeff, coeff_grad=_coeff_grad,
        )
    if name == "allen_cahn":
        return PdeProblem(
            name, d, True, _allen_cahn_exact, _allen_cahn_op,
            boundary_value=lambda x, t: jnp.zeros_like(t),
            initial_value=_hump,
        )
    if name == "elliptic":
        return PdeProblem(
            name, d, False, _elliptic_exact, _elliptic_op,
            boundary_value=lambda x, t: jnp.zeros_like(t),
            initial_value=None, horizon=None,
            coeff=_coeff, coeff_grad=_coeff_grad,
        )
    raise ValueError(f"unknown problem {name!r}; expected one of {', '.join(PROBLEMS)}")


# -- traceable building blocks (used inside jit by the trainer) ---------------


def operator_values(problem: PdeProblem, field, xs, ts):
    b = batch_bundle(field, xs, ts)
    return jax.vmap(problem.operator)(b, xs, ts)


def manufactured_source(problem: PdeProblem, xs, ts):
    return operator_values(problem, problem.exact, xs, ts)


def signed_interior(problem: PdeProblem, field, xs, ts):
    return operator_values(problem, field, xs, ts) - manufactured_source(problem, xs, ts)


def signed_boundary(problem: PdeProblem, field, xs, ts):
    u = jax.vmap(field)(xs, ts)
    return u - jax.vmap(problem.boundary_value)(xs, ts)


def signed_initial(problem: PdeProblem, field, xs):
    ts = jnp.zeros(xs.shape[0])
    return jax.vmap(field)(xs, ts) - jax.vmap(problem.initial_value)(xs)


# -- public, checked operations ----------------------------------------------


def _arrays(batch: PointBatch):
    return jnp.asarray(batch.x), jnp.asarray(batch.times())


def _require(batch: PointBatch, role: str):
    if batch.role != role:
        raise ValueError(f"expected a {role} batch, got {batch.role}")


def interior_residual(problem: PdeProblem, field, batch: PointBatch) -> np.ndarray:
    """|N[u] - f| at each interior point."""
    _require(batch, "interior")
    xs, ts = _arrays(batch)
    r = np.abs(np.asarray(jax.jit(signed_interior, static_argnums=(0, 1))(problem, field, xs, ts)))
    check_finite(r, batch.x, batch.t, what="interior residual")
    return r


def boundary_residual(problem: PdeProblem, field, batch: PointBatch) -> np.ndarray:
    """|u - g| at each boundary point (Dirichlet data)."""
    _require(batch, "boundary")
    xs, ts = _arrays(batch)
    r = np.abs(np.asarray(signed_boundary(problem, field, xs, ts)))
    check_finite(r, batch.x, batch.t, what="boundary residual")
    return r


def initial_residual(problem: PdeProblem, field, batch: PointBatch) -> np.ndarray:
    """|u(x, 0) - h(x)| at each initial point."""
    _require(batch, "initial")
    if not problem.time_dependent:
        raise ValueError(f"problem {problem.name} has no initial condition")
    r = np.abs(np.asarray(signed_initial(problem, field, jnp.asarray(batch.x))))
    check_finite(r, batch.x, batch.t, what="initial residual")
    return r


def exact_at(problem: PdeProblem, x, t=0.0) -> float:
    return float(problem.exact(jnp.asarray(x, dtype=jnp.float64), jnp.float64(t)))


def source_at(problem: PdeProblem, x, t=0.0) -> float:
    """Manufactured source N[u_exact] at one point."""
    x = jnp.atleast_2d(jnp.asarray(x, dtype=jnp.float64))
    ts = jnp.full((1,), t, dtype=jnp.float64)
    f = np.asarray(manufactured_source(problem, x, ts))
    check_finite(f, np.asarray(x), np.asarray(ts), what="source")
    return float(f[0])


def source_values(problem: PdeProblem, xs, ts) -> np.ndarray:
    f = np.asarray(jax.jit(manufactured_source, static_argnums=0)(problem, jnp.asarray(xs), jnp.asarray(ts)))
    check_finite(f, xs, ts, what="source")
    return f


# -- reference closed forms (cross-check only) ---------------------------------


def reference_source(problem: PdeProblem, x, t=0.0) -> float:
    """Reference closed-form source, for cross-checking the manufactured one.

    The parabolic form matches only at t = 0 and the Allen-Cahn form carries
    ``(d - 1)|x|`` where the radial Laplacian has ``(d - 1)/|x|``; both are kept
    as written so :func:`source_crosscheck` can report the disagreement.
    """
    x = np.asarray(x, dtype=np.float64)
    d = problem.d
    r = float(np.linalg.norm(x))
    if problem.name == "parabolic":
        u = np.exp(r * np.sqrt(1.0 - t))
        lu = np.log(u)
        return float(
            -0.5 * u * lu - u * lu
            - (1.0 + 0.5 * lu**2) * u * ((1.0 - t) + np.sqrt(1.0 - t) * (d - 1) / r)
        )
    s = abs(1.0 - r)
    inner = 0.5 * np.pi * s**2.5
    if problem.name == "allen_cahn":
        h = np.sin(inner)
        l = np.cos(inner)
        k = (
            -1.25 * np.pi * (d - 1) * r * l * s**1.5
            - 25.0 / 16.0 * np.pi**2 * h * (1.0 - r) ** 3
            + 15.0 / 8.0 * np.pi * l * s**0.5
        )
        u = np.exp(-t) * h
        return float(-np.exp(-t) * (h + k) - u + u**3)
    # elliptic
    lap = (
        -5.0 * np.pi * (d - 1) * np.cos(inner) * s**1.5 / (4.0 * r)
        - 25.0 * np.pi**2 / 16.0 * np.sin(inner) * s**3
        + 15.0 * np.pi / 8.0 * np.cos(inner) * s**0.5
    )
    return float(
        5.0 * np.pi * r / 4.0 * np.cos(inner) * s**1.5
        - (1.0 + 0.5 * r**2) * lap
        + 25.0 / 16.0 * np.pi**2 * np.cos(inner) ** 2 * s**3
    )


@dataclass(frozen=True)
class CrosscheckReport:
    problem: str
    d: int
    n_points: int
    max_abs_diff: float
    max_rel_diff: float
    agrees: bool

    def __str__(self) -> str:
        verdict = "agrees" if self.agrees else "DISAGREES"
        return (
            f"{self.problem} d={self.d}: reference source {verdict} with manufactured source "
            f"(max abs diff {self.max_abs_diff:.3e}, max rel diff {self.max_rel_diff:.3e}, {self.n_points} points)"
        )


def source_crosscheck(problem: PdeProblem, batch: PointBatch, tol: float = 1e-6) -> CrosscheckReport:
    f = source_values(problem, batch.x, batch.times())
    ref = np.array([reference_source(problem, x, t) for x, t in zip(batch.x, batch.times())])
    diff = np.abs(f - ref)
    rel = diff / np.maximum(np.abs(f), 1.0)
    return CrosscheckReport(
        problem.name, problem.d, len(batch), float(diff.max()), float(rel.max()), bool(rel.max() < tol)
    )
