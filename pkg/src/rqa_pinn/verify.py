"""Finite-difference oracles and the manufactured-solution self-test.

These only ever *evaluate* fields, never differentiate them, so they stay
independent of the autodiff path they are used to check.
"""

from __future__ import annotations

from dataclasses import dataclass

import jax
import jax.numpy as jnp
import numpy as np

from rqa_pinn import problems
from rqa_pinn.derivatives import derivatives_at
from rqa_pinn.geometry import sample_boundary, sample_initial, sample_interior, substream


def _values(field, xs, ts):
    return np.asarray(jax.jit(jax.vmap(field))(jnp.asarray(xs), jnp.asarray(ts)))


def fd_bundle(field, xs, ts, h: float = 1e-4):
    """Central differences for value, gradient, Laplacian and time derivative at many points.

    Returns ``(value, grad, lap, dt)`` as numpy arrays.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ts = np.asarray(ts, dtype=np.float64)
    n, d = xs.shape
    u0 = _values(field, xs, ts)
    grad = np.empty((n, d))
    lap = np.zeros(n)
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        up = _values(field, xs + e, ts)
        um = _values(field, xs - e, ts)
        grad[:, i] = (up - um) / (2 * h)
        lap += (up - 2 * u0 + um) / h**2
    dt = (_values(field, xs, ts + h) - _values(field, xs, ts - h)) / (2 * h)
    return u0, grad, lap, dt


def fd_operator(problem: problems.PdeProblem, field, xs, ts, h: float = 1e-4) -> np.ndarray:
    """N[field] assembled from finite-difference derivatives and the problem's closed-form coefficients."""
    u, grad, lap, dt = fd_bundle(field, xs, ts, h)
    xs = np.asarray(xs)
    r2 = np.sum(xs * xs, axis=1)
    if problem.name == "allen_cahn":
        return dt - lap - u + u**3
    div = (1.0 + 0.5 * r2) * lap + np.sum(xs * grad, axis=1)
    if problem.name == "parabolic":
        return dt - div
    return -div + np.sum(grad * grad, axis=1)


@dataclass
class SelfTestResult:
    name: str
    value: float
    tolerance: float

    @property
    def ok(self) -> bool:
        return self.value < self.tolerance

    def __str__(self) -> str:
        return f"[{'PASS' if self.ok else 'FAIL'}] {self.name}: {self.value:.3e} (< {self.tolerance:g})"


def manufactured_selftest(problem: problems.PdeProblem, n: int = 100, seed: int = 0) -> list[SelfTestResult]:
    """Check that the exact solution solves the problem as assembled.

    * the operator applied to the exact solution point by point (public
      ``derivatives_at``) equals the batched manufactured source;
    * the exact solution meets the boundary and initial data;
    * the source agrees with a finite-difference evaluation of the operator
      away from the origin and the sphere, where the exact solutions are not
      smooth enough for a difference stencil.
    """
    interior = sample_interior(n, problem.d, problem.horizon, substream(seed, "interior"))
    ts = interior.times()
    source = problems.source_values(problem, interior.x, ts)
    pointwise = np.array(
        [float(problem.operator(derivatives_at(problem.exact, x, t), jnp.asarray(x), t)) for x, t in zip(interior.x, ts)]
    )
    results = [SelfTestResult("manufactured identity max|N[u]-f|", float(np.max(np.abs(pointwise - source))), 1e-6)]

    boundary = sample_boundary(n, problem.d, problem.horizon, substream(seed, "boundary"))
    rb = problems.boundary_residual(problem, problem.exact, boundary)
    results.append(SelfTestResult("exact boundary residual max", float(rb.max()), 1e-12))
    if problem.time_dependent:
        initial = sample_initial(n, problem.d, substream(seed, "initial"))
        ri = problems.initial_residual(problem, problem.exact, initial)
        results.append(SelfTestResult("exact initial residual max", float(ri.max()), 1e-12))

    r = np.linalg.norm(interior.x, axis=1)
    keep = (r > 0.2) & (r < 0.8)
    if problem.time_dependent:
        keep &= (ts > 0.01) & (ts < 0.99)
    if keep.any():
        fd = fd_operator(problem, problem.exact, interior.x[keep], ts[keep], h=1e-4)
        rel = np.abs(fd - source[keep]) / np.maximum(np.abs(source[keep]), 1.0)
        results.append(SelfTestResult("finite-difference source agreement (rel)", float(rel.max()), 1e-4))
    return results
