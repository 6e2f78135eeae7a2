"""Flat ``key=value`` run configuration."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError
from .losses import LossWeights
from .synth import PairConfig
from .tracker import TrackerConfig
from .train import TrainConfig

CONFIG_VERSION = 1


@dataclass
class RunConfig:
    # region sizes and network
    n_t: int = 512
    n_s: int = 1024
    m_s: int = 128
    trunk_width: int = 256
    feat_dim: int = 16
    # losses
    tau: float = 0.5
    alpha: float = 2.0
    beta: float = 1.0
    gamma: float = 2.0
    lambda1: float = 1.0
    lambda2: float = 1.0
    lambda3: float = 1.0
    lambda4: float = 1.0
    wrap_orientation: bool = True
    use_mask: bool = True
    use_classifier: bool = True
    # optimisation
    lr: float = 1e-3
    lr_decay: float = 0.2
    lr_decay_every: int = 40
    epochs: int = 160
    batch_size: int = 16
    # regions
    search_margin: tuple[float, float, float] = (2.0, 2.0, 2.0)
    shift_max: float = 0.3
    mode: str = "long"
    seed: int = 0
    # scene generator
    n_sequences: int = 20
    frames: int = 20

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        positive = ("n_t", "n_s", "m_s", "trunk_width", "feat_dim", "batch_size",
                    "lr_decay_every", "frames", "tau", "lr")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0, got {getattr(self, name)}")
        for name in ("epochs", "n_sequences", "shift_max", "alpha", "beta", "gamma",
                     "lambda1", "lambda2", "lambda3", "lambda4", "lr_decay", "seed"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")
        if len(self.search_margin) != 3 or min(self.search_margin) < 0:
            raise ConfigError(f"search_margin must be three values >= 0, got {self.search_margin}")
        if self.m_s > self.n_s:
            raise ConfigError(f"m_s ({self.m_s}) cannot exceed n_s ({self.n_s})")
        if self.mode not in ("long", "short"):
            raise ConfigError(f"mode must be 'long' or 'short', got {self.mode!r}")

    # -- views consumed by the library ---------------------------------------

    def loss_weights(self) -> LossWeights:
        return LossWeights(self.lambda1, self.lambda2, self.lambda3, self.lambda4,
                           self.alpha, self.beta, self.gamma, self.tau,
                           self.wrap_orientation, self.use_mask, self.use_classifier)

    def train_config(self) -> TrainConfig:
        return TrainConfig(self.epochs, self.lr, self.lr_decay, self.lr_decay_every,
                           self.batch_size, self.seed, self.loss_weights())

    def pair_config(self) -> PairConfig:
        return PairConfig(self.n_t, self.n_s, self.m_s, self.search_margin, self.shift_max,
                          self.feat_dim, self.seed)

    def tracker_config(self, seed: int | None = None) -> TrackerConfig:
        return TrackerConfig(self.n_t, self.n_s, self.m_s, self.search_margin, self.feat_dim,
                             self.use_classifier, self.mode, self.seed if seed is None else seed)

    def to_text(self) -> str:
        lines = [f"version={CONFIG_VERSION}"]
        for f in fields(self):
            lines.append(f"{f.name}={_format(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(name: str, raw: str, default):
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            vals = tuple(float(v) for v in raw.split(","))
            return vals * 3 if len(vals) == 1 else vals
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    defaults = RunConfig()
    known = {f.name for f in fields(RunConfig)}
    values: dict = {}
    version = None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key == "version":
            version = raw
            continue
        if key not in known:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        values[key] = _parse(key, raw, getattr(defaults, key))
    if version is None:
        raise ConfigError(f"{source}: missing version key")
    if version != str(CONFIG_VERSION):
        raise ConfigError(f"{source}: unsupported config version {version}")
    return dataclasses.replace(defaults, **values)


def load_config(path) -> RunConfig:
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, str(path))
