"""Run configuration: a flat INI file with sections, every key defaulted.

Unknown sections or keys are rejected up front so a typo cannot silently
fall back to a default. The resolved configuration (defaults plus
overrides) is recorded in the run manifest together with its hash,
which makes replays self-describing.
"""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, LucidtabError
from .tune import DEFAULT_GRIDS, GRID_FIELDS, ParamGrid

DEFAULTS: dict[str, dict[str, str]] = {
    "run": {
        "dataset": "data/wdbc.csv",
        "seed": "42",
        "split_ratio": "0.2",
    },
    "preprocess": {
        "steps": "zscore",
    },
    "select": {
        "method": "rfe",
        "n_features": "27",
    },
    "search": {
        "method": "grid",
        "n_iter": "100",
        "folds": "5",
        "model_kinds": "mlp,cnn",
    },
    "train": {
        "epochs": "10",
        "batch_size": "32",
        "patience": "30",
        "min_delta": "0.01",
        "val_fraction": "0.1",
        "l1": "0.0",
        "l2": "0.0",
    },
    "grid.mlp": {k: ",".join(str(v) for v in vals) for k, vals in DEFAULT_GRIDS["mlp"].items()},
    "grid.cnn": {k: ",".join(str(v) for v in vals) for k, vals in DEFAULT_GRIDS["cnn"].items()},
    "explain": {
        "method": "kernel",
        "exact_features": "",
        "n_background": "100",
        "n_coalitions": "2048",
        "n_instances": "16",
        "lime_instances": "3",
        "lime_samples": "5000",
        "lime_max_features": "10",
        "lime_ridge": "0.001",
        "lime_kernel_width": "auto",
        "permutation_repeats": "5",
    },
}

_INT_KEYS = {
    ("select", "n_features"),
    ("search", "n_iter"),
    ("search", "folds"),
    ("train", "epochs"),
    ("train", "batch_size"),
    ("train", "patience"),
    ("run", "seed"),
    ("explain", "n_background"),
    ("explain", "n_coalitions"),
    ("explain", "n_instances"),
    ("explain", "lime_instances"),
    ("explain", "lime_samples"),
    ("explain", "lime_max_features"),
    ("explain", "permutation_repeats"),
}
_FLOAT_KEYS = {
    ("run", "split_ratio"),
    ("train", "min_delta"),
    ("train", "val_fraction"),
    ("train", "l1"),
    ("train", "l2"),
    ("explain", "lime_ridge"),
}


@dataclass
class RunConfig:
    """Typed view over the resolved flat configuration."""

    flat: dict[str, str] = field(default_factory=dict)

    def get(self, section: str, key: str) -> str:
        return self.flat[f"{section}.{key}"]

    def get_int(self, section: str, key: str) -> int:
        return int(self.get(section, key))

    def get_float(self, section: str, key: str) -> float:
        return float(self.get(section, key))

    def get_list(self, section: str, key: str) -> list[str]:
        return [tok.strip() for tok in self.get(section, key).split(",") if tok.strip()]

    @property
    def seed(self) -> int:
        return self.get_int("run", "seed")

    def grid(self, kind: str) -> ParamGrid:
        section = f"grid.{kind}"
        values = {}
        for name in GRID_FIELDS[kind]:
            raw = self.get_list(section, name)
            if name in ("activation", "optimizer"):
                values[name] = tuple(raw)
            elif name == "dropout":
                values[name] = tuple(float(v) for v in raw)
            else:
                values[name] = tuple(int(v) for v in raw)
        return ParamGrid(kind=kind, values=values)

    def config_hash(self) -> str:
        canon = "\n".join(f"{k}={self.flat[k]}" for k in sorted(self.flat))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()

    def render(self) -> str:
        """The resolved configuration as INI text."""
        parser = configparser.ConfigParser()
        for flat_key in sorted(self.flat):
            section, _, key = flat_key.rpartition(".")
            if not parser.has_section(section):
                parser.add_section(section)
            parser.set(section, key, self.flat[flat_key])
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()


def _validate(cfg: RunConfig) -> None:
    for section, key in _INT_KEYS:
        try:
            int(cfg.get(section, key))
        except ValueError:
            raise ConfigError(f"{section}.{key} must be an integer") from None
    for section, key in _FLOAT_KEYS:
        try:
            float(cfg.get(section, key))
        except ValueError:
            raise ConfigError(f"{section}.{key} must be a number") from None

    ratio = cfg.get_float("run", "split_ratio")
    if not 0.0 < ratio < 1.0:
        raise ConfigError(f"run.split_ratio must lie in (0, 1), got {ratio}")
    if cfg.get("search", "method") not in ("grid", "random"):
        raise ConfigError("search.method must be 'grid' or 'random'")
    kinds = cfg.get_list("search", "model_kinds")
    if not kinds or any(k not in ("mlp", "cnn") for k in kinds):
        raise ConfigError("search.model_kinds must be a non-empty subset of mlp,cnn")
    if cfg.get("select", "method") not in ("rfe", "chi2", "none"):
        raise ConfigError("select.method must be one of rfe, chi2, none")
    if not 1 <= cfg.get_int("select", "n_features") <= 30:
        raise ConfigError("select.n_features must lie in [1, 30]")
    if cfg.get_int("search", "folds") < 2:
        raise ConfigError("search.folds must be >= 2")
    if cfg.get_int("train", "epochs") < 1:
        raise ConfigError("train.epochs must be >= 1")
    if cfg.get("explain", "method") not in ("kernel", "exact"):
        raise ConfigError("explain.method must be 'kernel' or 'exact'")
    if cfg.get_int("explain", "lime_max_features") < 1:
        raise ConfigError("explain.lime_max_features must be >= 1")
    exact_features = cfg.get_list("explain", "exact_features")
    if len(exact_features) > 20:
        raise ConfigError("explain.exact_features is capped at 20 features (2^n coalition enumeration)")
    width = cfg.get("explain", "lime_kernel_width")
    if width != "auto":
        try:
            if float(width) <= 0:
                raise ConfigError("explain.lime_kernel_width must be positive or 'auto'")
        except ValueError:
            raise ConfigError("explain.lime_kernel_width must be a number or 'auto'") from None
    for kind in kinds:
        try:
            cfg.grid(kind)
        except (ValueError, LucidtabError) as exc:
            raise ConfigError(f"invalid [grid.{kind}]: {exc}") from None


def load_config(path: str | Path | None = None, overrides: dict[str, str] | None = None) -> RunConfig:
    """Resolve defaults, an optional INI file, and explicit overrides.

    `overrides` uses flat "section.key" names (e.g. CLI --seed maps to
    "run.seed"). Unknown sections or keys raise ConfigError.
    """
    flat = {f"{section}.{key}": val for section, keys in DEFAULTS.items() for key, val in keys.items()}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        parser = configparser.ConfigParser()
        try:
            parser.read(path)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
        for section in parser.sections():
            if section not in DEFAULTS:
                raise ConfigError(f"unknown config section [{section}]")
            for key, val in parser.items(section):
                if key not in DEFAULTS[section]:
                    raise ConfigError(f"unknown key {key!r} in section [{section}]")
                flat[f"{section}.{key}"] = val.strip()
    for flat_key, val in (overrides or {}).items():
        section, _, key = flat_key.rpartition(".")
        if section not in DEFAULTS or key not in DEFAULTS[section]:
            raise ConfigError(f"unknown config override {flat_key!r}")
        flat[flat_key] = str(val)
    cfg = RunConfig(flat=flat)
    _validate(cfg)
    return cfg
