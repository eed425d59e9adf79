"""Fully connected solution network with cubic-ReLU hidden activations."""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import jax
import jax.numpy as jnp
import numpy as np

from rqa_pinn.derivatives import EvaluationError

N_HIDDEN = 3
TRUNCATION = 3.0


def cubic_relu(z):
    """max(z**3, 0); its first and second derivatives are continuous at 0."""
    return jnp.where(z > 0, z**3, 0.0)


@jax.tree_util.register_pytree_node_class
@dataclass(frozen=True)
class MlpParams:
    """Layer list ``((W, b), ...)`` with ``W`` of shape ``(fan_out, fan_in)``.

    ``seed`` and ``time_dependent`` are static metadata and do not take part in
    differentiation.
    """

    layers: tuple
    seed: int | None = None
    time_dependent: bool = False

    def tree_flatten(self):
        return (self.layers,), (self.seed, self.time_dependent)

    @classmethod
    def tree_unflatten(cls, aux, children):
        return cls(children[0], *aux)

    @property
    def input_dim(self) -> int:
        return int(self.layers[0][0].shape[1])

    @property
    def spatial_dim(self) -> int:
        return self.input_dim - int(self.time_dependent)

    @property
    def shapes(self) -> list[list[int]]:
        return [list(w.shape) for w, _ in self.layers]

    @property
    def size(self) -> int:
        return sum(int(w.size + b.size) for w, b in self.layers)


def _truncated_normal(rng: np.random.Generator, shape, std: float) -> np.ndarray:
    out = rng.standard_normal(shape)
    bad = np.abs(out) > TRUNCATION
    while bad.any():
        out[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(out) > TRUNCATION
    return out * std


def init(seed: int, d: int, time_dependent: bool = True, width: int = 100) -> MlpParams:
    """Glorot truncated-normal weights (variance 2/(fan_in+fan_out), cut at 3 std), zero biases.

    Fan-in (He) scaling is unusable with a cubic activation: each layer cubes
    the previous scale and a width-100 network starts with outputs around 1e4.
    Draws come from a Philox stream keyed by ``seed`` so the result is
    platform independent.
    """
    if width < 1 or d < 1:
        raise ValueError(f"need width >= 1 and d >= 1, got width={width}, d={d}")
    rng = np.random.Generator(np.random.Philox(seed))
    sizes = [d + int(time_dependent)] + [width] * N_HIDDEN + [1]
    layers = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        w = _truncated_normal(rng, (fan_out, fan_in), np.sqrt(2.0 / (fan_in + fan_out)))
        layers.append((jnp.asarray(w), jnp.zeros(fan_out)))
    return MlpParams(tuple(layers), seed=seed, time_dependent=time_dependent)


def apply(params: MlpParams, z: jax.Array) -> jax.Array:
    """Network output for a single raw input vector ``z`` (space, then time if present)."""
    h = z
    for w, b in params.layers[:-1]:
        h = cubic_relu(w @ h + b)
    w, b = params.layers[-1]
    return (w @ h + b)[0]


def field(params: MlpParams):
    """The network as a derivative-engine field ``u(x, t)``."""
    if params.time_dependent:
        return lambda x, t: apply(params, jnp.append(x, t))
    return lambda x, t: apply(params, x)


def forward(params: MlpParams, x, t=None) -> float:
    """Evaluate the network at one point, raising on non-finite output."""
    x = jnp.atleast_1d(jnp.asarray(x, dtype=jnp.float64))
    if x.shape[0] != params.spatial_dim:
        raise ValueError(f"expected {params.spatial_dim} spatial coordinates, got {x.shape[0]}")
    if params.time_dependent:
        if t is None:
            raise ValueError("time-dependent network needs t")
        z = jnp.append(x, jnp.float64(t))
    else:
        z = x
    out = float(apply(params, z))
    if not np.isfinite(out):
        raise EvaluationError("non-finite network output", point=(np.asarray(x).tolist(), t))
    return out


def predict(params: MlpParams, xs, ts=None) -> jax.Array:
    """Batched network output at rows of ``xs`` (and ``ts`` when time dependent)."""
    xs = jnp.asarray(xs)
    if params.time_dependent:
        zs = jnp.column_stack([xs, jnp.asarray(ts)])
    else:
        zs = xs
    return jax.vmap(lambda z: apply(params, z))(zs)


def save(params: MlpParams, path) -> None:
    """Checkpoint: one JSON header line, then a flat little-endian float64 array.

    Array order is W1, b1, W2, b2, ..., each row-major.
    """
    header = {
        "shapes": params.shapes,
        "seed": params.seed,
        "time_dependent": params.time_dependent,
        "dtype": "<f8",
    }
    flat = np.concatenate(
        [np.concatenate([np.ravel(np.asarray(w)), np.asarray(b)]) for w, b in params.layers]
    ).astype("<f8")
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "wb") as fh:
        fh.write((json.dumps(header) + "\n").encode())
        fh.write(flat.tobytes())
    os.replace(tmp, path)


def load(path) -> MlpParams:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline())
        flat = np.frombuffer(fh.read(), dtype="<f8")
    layers, pos = [], 0
    for fan_out, fan_in in header["shapes"]:
        w = flat[pos : pos + fan_out * fan_in].reshape(fan_out, fan_in)
        pos += fan_out * fan_in
        b = flat[pos : pos + fan_out]
        pos += fan_out
        layers.append((jnp.asarray(w), jnp.asarray(b)))
    if pos != flat.size:
        raise ValueError(f"checkpoint {path} has {flat.size} values, header implies {pos}")
    return MlpParams(tuple(layers), seed=header["seed"], time_dependent=header["time_dependent"])
