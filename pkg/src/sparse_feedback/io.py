"""Config parsing and CSV/JSON artifact helpers."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .model import LtiSystem, SynthesisSpec, zoh_discretize
from .tracking import ReferenceSignal

_KNOWN_KEYS = {"A", "B", "C", "D", "continuous", "dt", "N", "s", "variant", "norm",
               "x0", "r_plus", "r_minus", "description"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Config:
    system: LtiSystem
    spec: SynthesisSpec
    x0: np.ndarray | None = None
    reference: ReferenceSignal | None = None
    source: str | None = None


def parse_config(data: dict[str, Any], source: str | None = None) -> Config:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(data) - _KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key in ("A", "B", "N"):
        if key not in data:
            raise ConfigError(f"config is missing required key {key!r}")
    try:
        A, B = np.array(data["A"], dtype=float), np.array(data["B"], dtype=float)
        if data.get("continuous", False):
            if "dt" not in data:
                raise ConfigError("continuous systems need a sampling period 'dt'")
            A, B = zoh_discretize(A, B, float(data["dt"]))
        system = LtiSystem(A, B, data.get("C"), data.get("D"))
        spec = SynthesisSpec(N=data["N"], s=data.get("s"),
                             variant=data.get("variant", "sparse"),
                             norm=data.get("norm", "sum"))
        spec.check_against(system)
        x0 = None if data.get("x0") is None else np.array(data["x0"], dtype=float)
        if x0 is not None and x0.shape != (system.n,):
            raise ConfigError(f"x0 must have length {system.n}")
        reference = None
        if data.get("r_plus") is not None:
            reference = ReferenceSignal(r_plus=data["r_plus"], r_minus=data.get("r_minus"))
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return Config(system=system, spec=spec, x0=x0, reference=reference, source=source)


def load_config(path) -> Config:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(data, source=str(path))


def system_record(cfg: Config) -> dict[str, Any]:
    """Discrete-time description written next to solution artifacts."""
    sys, spec = cfg.system, cfg.spec
    rec = {
        "A": sys.A.tolist(), "B": sys.B.tolist(), "C": sys.C.tolist(), "D": sys.D.tolist(),
        "N": spec.N,
        "s": None if spec.s is None else [None if np.isinf(v) else float(v) for v in spec.s],
        "variant": spec.variant.value, "norm": spec.norm.value,
    }
    if cfg.x0 is not None:
        rec["x0"] = cfg.x0.tolist()
    if cfg.reference is not None:
        rec["r_plus"] = cfg.reference.r_plus.tolist()
        rec["r_minus"] = cfg.reference.r_minus.tolist()
    return rec


def save_matrix(path, M) -> None:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    with open(path, "w") as fh:
        for row in M:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def load_matrix(path) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(v) for v in line.split(",")])
    if not rows:
        return np.zeros((0, 0))
    if len({len(r) for r in rows}) != 1:
        raise ConfigError(f"{path}: ragged matrix")
    return np.array(rows)


def write_json(path, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")
