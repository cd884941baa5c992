"""Run configuration: defaults, JSON file loading and validation."""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass
from pathlib import Path

from qesim.quantum import DEFAULT_MAX_QUBITS, EQ_TOL, VALID_TOL
from qesim.ubqc import DEFAULT_ENUMERATION_BOUND

CONFIG_ENV = "QESIM_CONFIG"
CRYPTO_INSTANCES = ("toy", "standard")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Config:
    seed: int = 0
    tol_valid: float = VALID_TOL
    tol_eq: float = EQ_TOL
    max_qubits: int = DEFAULT_MAX_QUBITS
    enumeration_bound: int = DEFAULT_ENUMERATION_BOUND
    crypto: str = "toy"
    modulus: int | None = None

    def __post_init__(self):
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        for name in ("tol_valid", "tol_eq"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0:
                raise ConfigError(f"{name} must be positive, got {value!r}")
        for name in ("max_qubits", "enumeration_bound"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value <= 0:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if self.crypto not in CRYPTO_INSTANCES:
            raise ConfigError(f"crypto must be one of {CRYPTO_INSTANCES}, got {self.crypto!r}")
        if self.modulus is not None and (not isinstance(self.modulus, int) or self.modulus < 7):
            raise ConfigError(f"modulus must be an integer safe prime, got {self.modulus!r}")

    def replace(self, **changes) -> "Config":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


_ALIASES = {
    "tolerance-validity": "tol_valid",
    "tolerance-equality": "tol_eq",
    "max-qubits": "max_qubits",
    "enumeration-bound": "enumeration_bound",
    "crypto-instance": "crypto",
    "group-modulus": "modulus",
}


def config_from_mapping(data: dict) -> Config:
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    fields = {f.name for f in dataclasses.fields(Config)}
    kwargs = {}
    for key, value in data.items():
        name = _ALIASES.get(key, key.replace("-", "_"))
        if name not in fields:
            raise ConfigError(f"unknown configuration key {key!r}")
        if name == "enumeration_bound" and isinstance(value, float) and value.is_integer():
            value = int(value)
        kwargs[name] = value
    return Config(**kwargs)


def load_config(path: str | os.PathLike | None = None) -> Config:
    """Config from ``path``, else from $QESIM_CONFIG, else defaults."""
    if path is None:
        path = os.environ.get(CONFIG_ENV) or None
    if path is None:
        return Config()
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return config_from_mapping(data)
