"""Text key-value configuration files.

Format: one ``key = value`` per line, ``#`` starts a comment, a repeated key
collects its values into a list, and comma-separated values become lists.
The directory defaults to the packaged ``configs/`` and can be overridden
with the ``MOVEPOSE_CONFIG_DIR`` environment variable.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import ConfigurationError

ENV_VAR = "MOVEPOSE_CONFIG_DIR"
_PACKAGED = Path(__file__).parent / "configs"


def config_dir() -> Path:
    return Path(os.environ.get(ENV_VAR) or _PACKAGED)


def parse_kv(text: str, source: str = "<string>") -> Dict[str, list]:
    out: Dict[str, list] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out.setdefault(key, []).append([v.strip() for v in value.split(",")])
    return out


def read_kv(name: str, directory: Optional[Path] = None) -> Dict[str, list]:
    path = Path(directory or config_dir()) / name
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigurationError(f"cannot read config file {path}: {e}") from e
    return parse_kv(text, str(path))


def _one(d, key, source):
    if key not in d:
        raise ConfigurationError(f"{source}: missing key {key!r}")
    return d[key][-1]


def _floats(values, key, source) -> List[float]:
    try:
        return [float(v) for v in values]
    except ValueError as e:
        raise ConfigurationError(f"{source}: {key} must be numeric") from e


@dataclass(frozen=True)
class KeypointConfig:
    names: Tuple[str, ...]
    flip_pairs: Tuple[Tuple[int, int], ...]


def load_keypoints(directory: Optional[Path] = None) -> KeypointConfig:
    d = read_kv("keypoints.txt", directory)
    names = tuple(_one(d, "keypoints", "keypoints.txt"))
    index = {n: i for i, n in enumerate(names)}
    pairs = []
    for pair in d.get("pair", []):
        if len(pair) != 2 or any(p not in index for p in pair):
            raise ConfigurationError(f"keypoints.txt: bad pair {pair!r}")
        pairs.append((index[pair[0]], index[pair[1]]))
    return KeypointConfig(names, tuple(pairs))


def load_oks_constants(directory: Optional[Path] = None, names=None) -> np.ndarray:
    d = read_kv("oks.txt", directory)
    names = names or load_keypoints(directory).names
    missing = [n for n in names if n not in d]
    if missing:
        raise ConfigurationError(f"oks.txt: missing constants for {', '.join(missing)}")
    return np.array([_floats(d[n][-1], n, "oks.txt")[0] for n in names])


@dataclass(frozen=True)
class NormalizationConfig:
    mean: Tuple[float, float, float]
    std: Tuple[float, float, float]
    box_expansion: float


def load_normalization(directory: Optional[Path] = None) -> NormalizationConfig:
    d = read_kv("preprocess.txt", directory)
    mean = _floats(_one(d, "mean", "preprocess.txt"), "mean", "preprocess.txt")
    std = _floats(_one(d, "std", "preprocess.txt"), "std", "preprocess.txt")
    exp = _floats(_one(d, "box_expansion", "preprocess.txt"), "box_expansion", "preprocess.txt")[0]
    if len(mean) != 3 or len(std) != 3:
        raise ConfigurationError("preprocess.txt: mean and std need three values")
    return NormalizationConfig(tuple(mean), tuple(std), exp)


@dataclass(frozen=True)
class PckhConfig:
    head_size_factor: float = 0.6
    mean_fraction: float = 0.5
    strict_fraction: float = 0.1


def load_pckh(directory: Optional[Path] = None) -> PckhConfig:
    d = read_kv("pckh.txt", directory)
    vals = {k: _floats(_one(d, k, "pckh.txt"), k, "pckh.txt")[0]
            for k in ("head_size_factor", "mean_fraction", "strict_fraction")}
    return PckhConfig(**vals)
