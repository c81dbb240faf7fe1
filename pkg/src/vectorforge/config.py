"""Run configuration, flat ``key=value`` config files, per-phase metrics."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .optimizer import LossConfig, StopRule

REDUCE_MODES = ("det", "stoch")


@dataclass
class RunConfig:
    input: str = ""
    output: str = ""
    shapes: int = 64
    schedule: tuple[int, ...] | None = None
    adds: tuple[tuple[int, int], ...] = ()
    loss: str = "l1"
    alpha_blend: float = 1.0
    lambda_geom: float = 0.01
    lambda_p: float = 10.0
    exclusive_xor: bool = False
    reduce: str = "det"
    reduce_loss: str = "l1"
    temperature: float = 0.01
    seed: int = 0
    width: int = 240
    height: int = 240
    min_iters: int = 50
    max_iters: int = 500
    rel_improve_floor: float = 1e-4
    total_iters: int = 500
    segments: int = 4
    lr_points: float = 1.0
    lr_colors: float = 0.01

    def __post_init__(self):
        if self.shapes < 1:
            raise ValueError("shapes must be >= 1")
        if self.reduce not in REDUCE_MODES:
            raise ValueError(f"reduce must be one of {REDUCE_MODES}")
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")
        if self.width < 1 or self.height < 1:
            raise ValueError("canvas size must be positive")
        if self.segments < 2:
            raise ValueError("segments must be >= 2")
        if self.total_iters < 1:
            raise ValueError("total_iters must be >= 1")
        if self.reduce_loss not in ("l1", "mse"):
            raise ValueError("reduce_loss must be l1 or mse")
        self.loss_config()
        self.stop_rule()
        self.full_schedule()

    def loss_config(self) -> LossConfig:
        return LossConfig(self.loss, self.alpha_blend, self.lambda_geom, self.lambda_p, self.exclusive_xor)

    def stop_rule(self) -> StopRule:
        return StopRule(self.min_iters, self.max_iters, self.rel_improve_floor)

    def full_schedule(self) -> list[int]:
        """Shape counts per optimize phase, Add steps included.

        Without an explicit schedule the run starts at four times the target
        and halves twice.  Each ``(k, phase)`` add inserts a phase with ``k``
        more shapes right after ``phase``.
        """
        counts = list(self.schedule) if self.schedule else [4 * self.shapes, 2 * self.shapes, self.shapes]
        for k, phase in sorted(self.adds, key=lambda a: -a[1]):
            if k < 1 or not 0 <= phase < len(counts):
                raise ValueError(f"invalid add step {k}@{phase}")
            counts.insert(phase + 1, counts[phase] + k)
        if any(c < 1 for c in counts):
            raise ValueError("schedule counts must be >= 1")
        if any(a == b for a, b in zip(counts, counts[1:])):
            raise ValueError("consecutive schedule counts must differ")
        return counts

    def phase_budgets(self) -> list[int]:
        """Split ``total_iters`` with weight 1.5 on the first and last phase, 1 elsewhere."""
        n = len(self.full_schedule())
        weights = [1.0] * n
        if n > 2:
            weights[0] = weights[-1] = 1.5
        total = sum(weights)
        raw = [self.total_iters * w / total for w in weights]
        budgets = [int(r) for r in raw]
        order = sorted(range(n), key=lambda i: (budgets[i] - raw[i], i))
        for i in order[: self.total_iters - sum(budgets)]:
            budgets[i] += 1
        return [max(b, 1) for b in budgets]

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


@dataclass
class MetricsRecord:
    phase: int
    shapes: int
    mse: float
    mse_gray2: float
    l1: float
    geometric: float
    iterations: int
    seconds: float

    FIELDS = ("phase", "shapes", "mse", "mse_gray2", "l1", "geometric", "iterations", "seconds")

    def row(self) -> dict:
        return {name: getattr(self, name) for name in self.FIELDS}


def _parse_schedule(text: str) -> tuple[int, ...] | None:
    text = text.strip()
    return tuple(int(x) for x in text.split(",") if x.strip()) if text else None


def _parse_adds(text: str) -> tuple[tuple[int, int], ...]:
    adds = []
    for item in filter(None, (t.strip() for t in text.split(","))):
        k, _, phase = item.partition("@")
        if not phase:
            raise ValueError(f"add step {item!r} must look like k@phase")
        adds.append((int(k), int(phase)))
    return tuple(adds)


def _parse_size(text: str) -> tuple[int, int]:
    w, _, h = text.lower().partition("x")
    return int(w), int(h or w)


def _parse_bool(text: str) -> bool:
    if text.lower() in ("1", "true", "yes", "on"):
        return True
    if text.lower() in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def coerce(key: str, value: str) -> dict:
    """Turn one textual ``key=value`` into RunConfig field updates."""
    key = key.strip().replace("-", "_")
    value = value.strip()
    aliases = {"lambda_geometric": "lambda_geom", "add": "adds", "t": "temperature"}
    key = aliases.get(key, key)
    if key == "size":
        w, h = _parse_size(value)
        return {"width": w, "height": h}
    if key == "schedule":
        return {"schedule": _parse_schedule(value)}
    if key == "adds":
        return {"adds": _parse_adds(value)}
    types = {f.name: f.type for f in dataclasses.fields(RunConfig)}
    if key not in types:
        raise KeyError(f"unknown config key {key!r}")
    kind = types[key]
    if kind == "int":
        return {key: int(value)}
    if kind == "float":
        return {key: float(value)}
    if kind == "bool":
        return {key: _parse_bool(value)}
    return {key: value.lower() if key in ("loss", "reduce", "reduce_loss") else value}


def read_config_file(path) -> dict:
    updates = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        updates.update(coerce(key, value))
    return updates


def write_config_file(cfg: RunConfig, path) -> None:
    lines = []
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if f.name == "schedule":
            v = ",".join(map(str, v)) if v else ""
        elif f.name == "adds":
            v = ",".join(f"{k}@{p}" for k, p in v)
        lines.append(f"{f.name}={v}")
    Path(path).write_text("\n".join(lines) + "\n")
