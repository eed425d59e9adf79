"""Exact derivatives of scalar space-time fields.

A *field* is any JAX-traceable callable ``field(x, t) -> scalar`` with ``x`` a
``(d,)`` array and ``t`` a scalar. Networks and closed-form exact solutions are
both fields; stationary fields simply ignore ``t``.

Second derivatives use forward-over-reverse: the spatial gradient comes from one
reverse pass, and the Laplacian is the trace of its Jacobian, assembled from
``d`` forward-mode (JVP) passes along the coordinate axes. Per point the cost is
therefore linear in ``d``. There is no global tape; every call traces its own
computation, so batches can be evaluated concurrently.
"""

from __future__ import annotations

from typing import Callable, NamedTuple

import jax
import jax.numpy as jnp
import numpy as np
from jax.flatten_util import ravel_pytree

ScalarField = Callable[[jax.Array, jax.Array], jax.Array]


class EvaluationError(ArithmeticError):
    """A field, derivative or loss evaluated to a non-finite number."""

    def __init__(self, message: str, point=None):
        if point is not None:
            message = f"{message} at point {point}"
        super().__init__(message)
        self.point = point


class DerivativeBundle(NamedTuple):
    value: jax.Array
    spatial_gradient: jax.Array
    laplacian: jax.Array
    time_derivative: jax.Array


def bundle(field: ScalarField, x: jax.Array, t: jax.Array) -> DerivativeBundle:
    """Trace-friendly derivative bundle for a single point (no finiteness check)."""
    value, (grad_x, dt) = jax.value_and_grad(field, argnums=(0, 1))(x, t)

    def grad_at(y):
        return jax.grad(field, argnums=0)(y, t)

    def second_directional(e):
        return jnp.dot(jax.jvp(grad_at, (x,), (e,))[1], e)

    basis = jnp.eye(x.shape[0], dtype=x.dtype)
    lap = jnp.sum(jax.vmap(second_directional)(basis))
    return DerivativeBundle(value, grad_x, lap, dt)


def batch_bundle(field: ScalarField, xs: jax.Array, ts: jax.Array) -> DerivativeBundle:
    """Vectorized :func:`bundle` over rows of ``xs`` and entries of ``ts``."""
    return jax.vmap(lambda x, t: bundle(field, x, t))(xs, ts)


def check_finite(values, xs, ts=None, what="evaluation"):
    """Raise :class:`EvaluationError` naming the first point with a non-finite value."""
    values = np.asarray(values)
    if values.ndim > 1:
        bad_rows = ~np.isfinite(values).all(axis=tuple(range(1, values.ndim)))
    else:
        bad_rows = ~np.isfinite(values)
    if bad_rows.any():
        i = int(np.argmax(bad_rows))
        point = (np.asarray(xs)[i].tolist(), None if ts is None else float(np.asarray(ts)[i]))
        raise EvaluationError(f"non-finite {what}", point=point)


def derivatives_at(field: ScalarField, x, t=0.0) -> DerivativeBundle:
    """Value, spatial gradient, Laplacian and time derivative of ``field`` at ``(x, t)``.

    Accepts a single point (``x`` of shape ``(d,)``) or a batch (``(n, d)`` with
    ``t`` of shape ``(n,)`` or scalar). Raises :class:`EvaluationError` carrying
    the offending point if any entry is non-finite.
    """
    x = jnp.asarray(x, dtype=jnp.float64)
    if x.ndim == 1:
        t = jnp.asarray(t, dtype=jnp.float64)
        out = jax.jit(bundle, static_argnums=0)(field, x, t)
        flat = np.concatenate([np.ravel(np.asarray(v)) for v in out])
        if not np.isfinite(flat).all():
            raise EvaluationError("non-finite derivative", point=(np.asarray(x).tolist(), float(t)))
        return out
    ts = jnp.broadcast_to(jnp.asarray(t, dtype=jnp.float64), x.shape[:1])
    out = jax.jit(batch_bundle, static_argnums=0)(field, x, ts)
    stacked = np.column_stack(
        [np.asarray(out.value), np.asarray(out.spatial_gradient), np.asarray(out.laplacian), np.asarray(out.time_derivative)]
    )
    check_finite(stacked, x, ts, what="derivative")
    return out


def divergence_form(field: ScalarField, coeff, coeff_grad, x, t=0.0):
    """``div(a grad u)`` evaluated as ``a * lap(u) + grad(a) . grad(u)``.

    ``coeff`` and ``coeff_grad`` are closed-form callables of ``x`` returning
    ``a(x)`` and its gradient. Works on a single point or a batch.
    """
    b = derivatives_at(field, x, t)
    x = jnp.asarray(x, dtype=jnp.float64)
    if x.ndim == 1:
        return coeff(x) * b.laplacian + jnp.dot(coeff_grad(x), b.spatial_gradient)
    a = jax.vmap(coeff)(x)
    ga = jax.vmap(coeff_grad)(x)
    return a * b.laplacian + jnp.sum(ga * b.spatial_gradient, axis=1)


def flatten_params(params) -> np.ndarray:
    """Flat parameter vector in pytree leaf order (for networks: W1, b1, W2, b2, ..., W_out, b_out; row-major)."""
    return np.asarray(ravel_pytree(params)[0])


def parameter_gradient(loss: Callable, params) -> np.ndarray:
    """Gradient of a scalar ``loss(params)`` flattened in :func:`flatten_params` order.

    The loss is evaluated first; a non-finite value raises before any
    differentiation happens.
    """
    value = loss(params)
    if not np.isfinite(np.asarray(value)):
        raise EvaluationError(f"non-finite loss {float(value)!r}")
    grads = jax.grad(loss)(params)
    return np.asarray(ravel_pytree(grads)[0])
