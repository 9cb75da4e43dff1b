"""Run configuration shared by the pipeline stages and the command line."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import tomli


class ConfigError(ValueError):
    pass


def parse_range(text: str) -> list[float]:
    """``"start:stop:step"`` (inclusive stop) or a comma list."""
    text = str(text).strip()
    if ":" in text:
        try:
            a, b, s = (float(x) for x in text.split(":"))
        except ValueError:
            raise ConfigError(f"bad range {text!r}") from None
        if s <= 0 or b < a:
            raise ConfigError(f"bad range {text!r}")
        n = int(round((b - a) / s))
        return [a + k * s for k in range(n + 1) if a + k * s <= b + 1e-9]
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"bad list {text!r}") from None


@dataclass(frozen=True)
class RunConfig:
    """Pipeline constants.  Key names carry their units so ms and samples never mix."""

    tau_ms: float = 2.0
    t_d_letters: int = 60
    D_letters: int = 2
    run_min_letters: int = 4
    entropy_delta_bits: float = 0.05
    saccade_threshold_px: float = 4.0
    flat_threshold_px: float = 4.0
    K: int = 3
    end_residual_px: float = 1.0
    end_periods: float = 2.5
    g_min_per_ms: float = 0.001
    f_replicas: int = 10
    P_B_ms: str = "40:200:20"
    t_d_grid_letters: str = "20:60:4"
    seed: int = 0

    def __post_init__(self):
        if self.t_d_letters % 2 or self.t_d_letters < 2 * self.D_letters:
            raise ConfigError("t_d_letters must be even and >= 2 * D_letters")
        for name in ("tau_ms", "entropy_delta_bits", "saccade_threshold_px", "flat_threshold_px",
                     "end_residual_px", "end_periods", "g_min_per_ms"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.D_letters < 1 or self.run_min_letters < 1 or self.f_replicas < 1:
            raise ConfigError("D_letters, run_min_letters and f_replicas must be >= 1")
        if self.K < 3:
            raise ConfigError("K must be >= 3")

    @property
    def t_d(self) -> int:
        return self.t_d_letters

    @property
    def D(self) -> int:
        return self.D_letters

    def replace(self, **kw) -> "RunConfig":
        d = asdict(self)
        d.update(kw)
        return RunConfig(**d)

    def as_dict(self) -> dict:
        return asdict(self)


def load_config(text: str | None) -> RunConfig:
    """Parse a flat ``key = value`` file (TOML syntax, no tables)."""
    if not text:
        return RunConfig()
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"config: {exc}") from None
    known = {f.name: f.type for f in fields(RunConfig)}
    kw = {}
    for key, value in doc.items():
        if key not in known:
            raise ConfigError(f"config: unknown key {key!r}")
        if isinstance(value, dict):
            raise ConfigError(f"config: {key!r} must be a plain value")
        default = getattr(RunConfig, key)
        try:
            kw[key] = type(default)(value)
        except (TypeError, ValueError):
            raise ConfigError(f"config: bad value for {key!r}") from None
    return RunConfig(**kw)
