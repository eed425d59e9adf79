"""Flat ``key = value`` experiment configs.

One assignment per line, ``#`` starts a comment. Keys are the
:class:`~rqa_pinn.trainer.TrainConfig` fields plus a few run options. Grid keys
(``strategy``, ``p``, ``q_cut``, ``q_target``) accept comma-separated lists and
expand into a sweep; ``solve`` requires them to be single-valued.

Example::

    problem = elliptic
    d = 2
    strategy = rqa, lp
    p = 4
    iterations = 2000
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from rqa_pinn.trainer import TrainConfig

GRID_KEYS = ("strategy", "p", "q_cut", "q_target")
_TYPES = {f.name: f.type for f in fields(TrainConfig)}
RUN_KEYS = {"seeds": "seeds", "dump_weights": "iters", "dump_batches": "bool"}


class ConfigError(ValueError):
    def __init__(self, message: str, key: str | None = None, line: int | None = None, path=None):
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        super().__init__(f"{': '.join(where)}: {message}" if where else message)
        self.key = key
        self.line = line


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _convert(kind: str, text: str):
    if kind == "int":
        return int(text)
    if kind == "float":
        return float(text)
    if kind == "bool":
        return _bool(text)
    if kind in ("seeds", "iters"):
        return _int_list(text)
    return text


@dataclass
class ExperimentConfig:
    base: TrainConfig
    grid: dict[str, list] = field(default_factory=dict)
    seeds: list[int] = field(default_factory=list)
    dump_weights: list[int] = field(default_factory=list)
    dump_batches: bool = False
    lines: dict[str, int] = field(default_factory=dict)

    def cells(self) -> list[TrainConfig]:
        """Every grid combination (seed untouched), in grid-key order."""
        keys = [k for k in GRID_KEYS if k in self.grid]
        combos = itertools.product(*(self.grid[k] for k in keys))
        return [replace(self.base, **dict(zip(keys, combo))) for combo in combos]

    def single(self) -> TrainConfig:
        multi = [k for k, v in self.grid.items() if len(v) > 1]
        if multi:
            raise ConfigError("a single run needs one value; use 'sweep' for grids", key=multi[0], line=self.lines.get(multi[0]))
        return self.cells()[0]


def parse(text: str, path=None) -> ExperimentConfig:
    values: dict[str, object] = {}
    grid: dict[str, list] = {}
    run: dict[str, object] = {}
    lines: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", line=lineno, path=path)
        key, value = (s.strip() for s in line.split("=", 1))
        if key in lines:
            raise ConfigError("duplicate key", key=key, line=lineno, path=path)
        lines[key] = lineno
        if not value:
            raise ConfigError("empty value", key=key, line=lineno, path=path)
        try:
            if key in RUN_KEYS:
                run[key] = _convert(RUN_KEYS[key], value)
            elif key in GRID_KEYS:
                grid[key] = [_convert(_TYPES[key], v.strip()) for v in value.split(",")]
            elif key in _TYPES:
                values[key] = _convert(_TYPES[key], value)
            else:
                raise ConfigError("unknown key", key=key, line=lineno, path=path)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc), key=key, line=lineno, path=path) from None

    cfg = ExperimentConfig(
        TrainConfig(**values), grid,
        seeds=run.get("seeds", []), dump_weights=run.get("dump_weights", []),
        dump_batches=run.get("dump_batches", False), lines=lines,
    )
    for cell in cfg.cells():
        try:
            cell.validate()
        except ValueError as exc:
            key = str(exc).split("=", 1)[0]
            raise ConfigError(str(exc), key=key, line=lines.get(key), path=path) from None
    return cfg


def load(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", path=path) from None
    return parse(text, path=path)


def dump(config: TrainConfig) -> str:
    """Serialize a single run config back to ``key = value`` text."""
    return "".join(f"{f.name} = {getattr(config, f.name)}\n" for f in fields(TrainConfig))
