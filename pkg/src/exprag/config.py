"""Versioned key=value configuration for cue lists, weights and routing knobs.

Lookup order: explicit path, then ``$EXPRAG_CONFIG``, then the packaged
default. A user file only needs the keys it changes; a repeated ``*_cue``
key in a user file replaces the whole default list for that key.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

from .errors import DataError

ENV_VAR = "EXPRAG_CONFIG"
SUPPORTED_VERSION = 1

_FLOAT_KEYS = {
    "complexity.weight.multi_hop": "w_multi_hop",
    "complexity.weight.comparison": "w_comparison",
    "complexity.weight.conjunction": "w_conjunction",
    "complexity.weight.length": "w_length",
    "complexity.weight.history": "w_history",
    "router.adaptive_threshold": "adaptive_threshold",
}
_INT_KEYS = {
    "version": "version",
    "complexity.conjunction_cap": "conjunction_cap",
    "complexity.length_free_tokens": "length_free_tokens",
    "router.k": "router_k",
    "pool.k_rrf": "k_rrf",
    "pool.depth": "depth",
    "embed.dim": "dim",
}
_LIST_KEYS = {
    "complexity.multi_hop_cue": "multi_hop_cues",
    "complexity.comparison_cue": "comparison_cues",
}


@dataclass(frozen=True)
class Config:
    version: int = SUPPORTED_VERSION
    w_multi_hop: float = 0.35
    w_comparison: float = 0.20
    w_conjunction: float = 0.10
    conjunction_cap: int = 3
    w_length: float = 0.05
    length_free_tokens: int = 8
    w_history: float = 0.10
    multi_hop_cues: tuple[str, ...] = ()
    comparison_cues: tuple[str, ...] = ()
    adaptive_threshold: float = 0.4
    router_k: int = 5
    k_rrf: int = 60
    depth: int = 100
    dim: int = 2048
    source: str = field(default="<defaults>", compare=False)

    def compiled(self, name: str) -> tuple[re.Pattern, ...]:
        return _compile(getattr(self, name))


_PATTERN_CACHE: dict[tuple[str, ...], tuple[re.Pattern, ...]] = {}


def _compile(patterns: tuple[str, ...]) -> tuple[re.Pattern, ...]:
    if patterns not in _PATTERN_CACHE:
        _PATTERN_CACHE[patterns] = tuple(re.compile(p, re.IGNORECASE) for p in patterns)
    return _PATTERN_CACHE[patterns]


def parse_config(text: str, base: Config | None = None, source: str = "<string>") -> Config:
    values: dict = {}
    lists: dict[str, list[str]] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise DataError(f"{source}:{line_no}: expected 'key = value'")
        try:
            if key in _FLOAT_KEYS:
                values[_FLOAT_KEYS[key]] = float(value)
            elif key in _INT_KEYS:
                values[_INT_KEYS[key]] = int(value)
            elif key in _LIST_KEYS:
                re.compile(value)
                lists.setdefault(_LIST_KEYS[key], []).append(value)
            else:
                raise DataError(f"{source}:{line_no}: unknown key {key!r}")
        except (ValueError, re.error) as exc:
            if isinstance(exc, DataError):
                raise
            raise DataError(f"{source}:{line_no}: bad value for {key!r}: {exc}") from exc
    values.update({k: tuple(v) for k, v in lists.items()})
    if values.get("version", SUPPORTED_VERSION) != SUPPORTED_VERSION:
        raise DataError(f"{source}: unsupported config version {values['version']}")
    merged = {**(base.__dict__ if base else {}), **values, "source": source}
    return Config(**merged)


@lru_cache(maxsize=1)
def default_config() -> Config:
    text = resources.files("exprag").joinpath("data/exprag.conf").read_text(encoding="utf-8")
    return parse_config(text, source="exprag/data/exprag.conf")


def load_config(path: str | os.PathLike | None = None) -> Config:
    base = default_config()
    path = path or os.environ.get(ENV_VAR)
    if not path:
        return base
    p = Path(path)
    if not p.is_file():
        raise DataError(f"config file not found: {p}")
    return parse_config(p.read_text(encoding="utf-8"), base=base, source=str(p))
