"""Sweep configuration: a flat ``key = value`` text format.

Grammar, one entry per line; blank lines and ``#`` comments are ignored::

    chiralities = 3,0; 4,0; 3,3      # semicolon-separated m,n pairs
    lengths     = 1-8                # a range a-b, or a comma list 1,2,5
    regimes     = ll, vv             # any of vv vl lv ll
    flavors     = pcqw, cqw
    p           = 0.5                # edge opening probability
    trajectories = 1000              # Monte Carlo runs per simulated point
    horizon     = 2000               # simulation steps
    seed        = 0
    workers     = 1
    out         = results/fig6.csv
    oracle_check = false             # add the analytic-vs-oracle span residual
    simulation_check = false         # add simulated ATP columns

Unknown keys, duplicate keys and malformed values are errors.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .lattice import TubeSpec

REGIME_CODES = ("vv", "vl", "lv", "ll")
FLAVORS = ("pcqw", "cqw")


class ConfigError(ValueError):
    pass


@dataclass
class SweepConfig:
    chiralities: list[tuple[int, int]] = field(default_factory=lambda: [(3, 0)])
    lengths: list[int] = field(default_factory=lambda: [1])
    regimes: list[str] = field(default_factory=lambda: ["ll"])
    flavors: list[str] = field(default_factory=lambda: ["pcqw"])
    p: float = 0.5
    trajectories: int = 1000
    horizon: int = 2000
    seed: int = 0
    workers: int = 1
    out: str | None = None
    oracle_check: bool = False
    simulation_check: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not self.chiralities:
            raise ConfigError("chiralities is empty")
        if not self.lengths:
            raise ConfigError("lengths is empty")
        if not self.regimes or not self.flavors:
            raise ConfigError("regimes and flavors must be non-empty")
        if any(L < 1 for L in self.lengths):
            raise ConfigError("lengths must be >= 1")
        if bad := [r for r in self.regimes if r not in REGIME_CODES]:
            raise ConfigError(f"unknown regimes {bad}")
        if bad := [f for f in self.flavors if f not in FLAVORS]:
            raise ConfigError(f"unknown flavors {bad}")
        if not 0.0 < self.p < 1.0:
            raise ConfigError("p must lie in (0, 1)")
        if self.trajectories < 1 or self.horizon < 1 or self.workers < 1:
            raise ConfigError("trajectories, horizon and workers must be >= 1")
        for m, n in self.chiralities:
            TubeSpec(m, n, 1)  # raises on invalid chirality

    def specs(self) -> list[TubeSpec]:
        return [TubeSpec(m, n, L) for (m, n) in self.chiralities for L in self.lengths]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.replace(",", " ").split()]


def _lengths(text: str) -> list[int]:
    text = text.strip()
    if "-" in text:
        a, b = (int(x) for x in text.split("-", 1))
        return list(range(a, b + 1))
    return _ints(text)


def _chiralities(text: str) -> list[tuple[int, int]]:
    out = []
    for part in text.split(";"):
        if part.strip():
            mn = _ints(part)
            if len(mn) != 2:
                raise ConfigError(f"chirality {part.strip()!r} is not an m,n pair")
            out.append((mn[0], mn[1]))
    return out


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _words(text: str) -> list[str]:
    return [w for w in text.replace(",", " ").split()]


_PARSERS = {
    "chiralities": _chiralities, "lengths": _lengths, "regimes": _words,
    "flavors": _words, "p": float, "trajectories": int, "horizon": int,
    "seed": int, "workers": int, "out": str.strip,
    "oracle_check": _bool, "simulation_check": _bool,
}


def parse_config(text: str) -> SweepConfig:
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _PARSERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _PARSERS[key](val)
        except ConfigError:
            raise
        except ValueError as err:
            raise ConfigError(f"line {lineno}: bad value for {key}: {err}") from None
    try:
        return SweepConfig(**values)
    except ValueError as err:  # TubeSpecError is a ValueError
        raise ConfigError(str(err)) from None


def format_config(cfg: SweepConfig) -> str:
    lines = []
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if v is None:
            continue
        if f.name == "chiralities":
            v = "; ".join(f"{m},{n}" for m, n in v)
        elif isinstance(v, list):
            v = ", ".join(str(x) for x in v)
        elif isinstance(v, bool):
            v = str(v).lower()
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


def load_config(path: str | Path) -> SweepConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def preset_names() -> list[str]:
    d = resources.files("tubewalk") / "presets"
    return sorted(p.name[:-4] for p in d.iterdir() if p.name.endswith(".cfg"))


def load_preset(name: str) -> SweepConfig:
    f = resources.files("tubewalk") / "presets" / f"{name}.cfg"
    if not f.is_file():
        raise ConfigError(f"no preset {name!r}; available: {', '.join(preset_names())}")
    return parse_config(f.read_text(encoding="utf-8"))
