"""Flat key=value run configuration: parsing, defaults, validation,
round-trip serialization.

Defaults follow the simulation setup this library targets: three roads,
5 m entry spans, 5 m vehicles, 20 m/s ceiling, 4/3 m/s^2 braking/throttle
limits, 0.1 s communication and decision gaps, 2 s epochs.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

from .core import KinematicLimits

_BEHAVIOR_CHOICES = ("constant_speed", "braking_pulse", "random_bounded", "mixed")
_POLICY_CHOICES = ("two_stage", "baseline_minimax")


@dataclass(frozen=True)
class RunConfig:
    roads: int = 3
    d: tuple[float, ...] = (5.0, 5.0, 5.0)
    l: float = 5.0
    v_max: float = 20.0
    a_dec: float = 4.0
    a_acc: float = 3.0
    v_R: float = 1.0
    A: float = 600.0
    B: float = 200.0
    W: int = 6
    delta: float = 20.0 * 0.2 * (1.0 + 4.0 / 3.0)  # v_max (tau+mu) (1 + a_dec/a_acc)
    tau: float = 0.1
    mu: float = 0.1
    epoch_gap: float = 2.0
    tick_gap: float = 0.1
    lambda_coop: float = 1.0
    lambda_noncoop: float = 0.0
    noncoop_behavior: str = "constant_speed"
    horizon: float = 100.0
    seed: int = 0
    policy: str = "two_stage"

    @property
    def limits(self) -> KinematicLimits:
        return KinematicLimits(self.v_max, self.a_dec, self.a_acc, self.l)


class ConfigError(ValueError):
    pass


def minimum_boundary_range(cfg: RunConfig) -> float:
    """Smallest B that leaves room to brake from v_max, recover, and clear
    the longest entry span: v_M^2/a_m + v_M^2/(2 a_M) + l + max d."""
    return (cfg.v_max ** 2 / cfg.a_dec + cfg.v_max ** 2 / (2.0 * cfg.a_acc)
            + cfg.l + max(cfg.d))


def validate(cfg: RunConfig) -> list[str]:
    """Raises ConfigError on anything unusable; returns advisory warnings."""
    if cfg.roads < 1 or cfg.roads != len(cfg.d):
        raise ConfigError("roads must match the length of d")
    if min(cfg.d) <= 0 or cfg.l <= 0:
        raise ConfigError("geometry lengths must be positive")
    if cfg.v_max <= 0 or cfg.a_dec <= 0 or cfg.a_acc <= 0:
        raise ConfigError("kinematic limits must be positive")
    if cfg.A < 0 or cfg.B <= 0:
        raise ConfigError("stage ranges must satisfy A >= 0, B > 0")
    if not 1 <= cfg.W <= 10:
        raise ConfigError("window size W must be in [1, 10]")
    if cfg.delta <= 0 or cfg.tau < 0 or cfg.mu <= 0:
        raise ConfigError("delta must be positive, tau nonnegative, mu positive")
    if cfg.tick_gap <= 0 or cfg.tick_gap > cfg.mu + 1e-12:
        raise ConfigError("tick_gap must be in (0, mu]")
    if cfg.epoch_gap <= 0:
        raise ConfigError("epoch_gap must be positive")
    if cfg.lambda_coop < 0 or cfg.lambda_noncoop < 0:
        raise ConfigError("arrival rates must be nonnegative")
    if cfg.noncoop_behavior not in _BEHAVIOR_CHOICES:
        raise ConfigError(f"noncoop_behavior must be one of {_BEHAVIOR_CHOICES}")
    if cfg.policy not in _POLICY_CHOICES:
        raise ConfigError(f"policy must be one of {_POLICY_CHOICES}")
    if cfg.horizon <= 0:
        raise ConfigError("horizon must be positive")
    # the epoch profile must fit a full velocity-reduction step within limits
    shortfall = cfg.v_R * cfg.epoch_gap
    K = 1.0 / cfg.a_dec + 1.0 / cfg.a_acc
    if cfg.epoch_gap ** 2 - 2.0 * K * shortfall < 0.0:
        raise ConfigError("epoch_gap too small to realize the velocity-"
                          "reduction span within the acceleration limits")
    warnings = []
    b_min = minimum_boundary_range(cfg)
    if cfg.B < b_min - 1e-9:
        warnings.append(f"B={cfg.B:g} is below the recovery bound "
                        f"{b_min:.2f}; the no-slowdown guarantee may not hold")
    if cfg.delta < cfg.v_max * (cfg.tau + cfg.mu) * (1.0 + cfg.a_dec / cfg.a_acc) - 1e-9:
        warnings.append("delta is below the no-slowdown threshold delta*")
    return warnings


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    if key == "d":
        parts = [p for p in raw.replace("(", "").replace(")", "").split(",") if p.strip()]
        return tuple(float(p) for p in parts)
    if key in ("roads", "W", "seed"):
        return int(raw)
    if key in ("noncoop_behavior", "policy"):
        return raw
    return float(raw)


def parse_config(text: str) -> RunConfig:
    """key = value lines, '#' comments, unknown keys rejected."""
    known = {f.name for f in fields(RunConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = _parse_value(key, raw)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc
    cfg = RunConfig(**values)
    validate(cfg)
    return cfg


def serialize_config(cfg: RunConfig) -> str:
    lines = []
    for f in fields(cfg):
        val = getattr(cfg, f.name)
        if isinstance(val, tuple):
            text = ",".join(repr(float(x)) for x in val)
        elif isinstance(val, float):
            text = repr(val)
        else:
            text = str(val)
        lines.append(f"{f.name} = {text}")
    return "\n".join(lines) + "\n"


def load_config(path: str) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
