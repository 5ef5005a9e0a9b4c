"""JSON run-configuration parsing with strict schema validation.

The config is validated before any computation: unknown keys are rejected
at every level, the seed is mandatory (no wall-clock default), and the
market block accepts either an explicit volatility matrix or a named
structure shortcut (bidiagonal / triangular with a scalar volatility).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .market import MarketParams
from .structures import StructureKind, build_sigma

__all__ = ["ConfigError", "RunConfig", "load_run_config", "parse_run_config"]


class ConfigError(ValueError):
    """Invalid or unparseable run configuration."""


_COMMAND_BLOCKS = {
    "simulate": {
        "strategy": "kelly",
        "horizon": 10.0,
        "steps": 1000,
        "paths": 10000,
        "v0": 1.0,
        "save_paths": 1,
        "scheme": "budget",
    },
    "optimal_fraction": {"t": 0.0, "x": None, "allow_pseudo": False},
    "structure_limits": {
        "n_values": [2, 3, 4, 5, 6],
        "sigma_values": [0.05, 0.1, 0.4],
        "sigma_scalar": 0.2,
        "a": 0.1,
        "b": 0.5,
        "t": 14.0,
        "steps": 56,
        "paths": 10000,
    },
    "dominance": {
        "lambda_list": [0.5, 1.0, 2.0],
        "horizon": 40.0,
        "steps": 4000,
        "paths": 10000,
    },
    "sensitivity": {"epsilon": 1e-4},
    "martingale_check": {
        "horizon": 2.0,
        "steps": 200,
        "paths": 10000,
        "checkpoints": 5,
    },
}

_TOP_LEVEL_KEYS = {"market", "seed", "output_dir", *_COMMAND_BLOCKS}


@dataclass
class RunConfig:
    seed: int
    market: MarketParams | None
    output_dir: str | None
    blocks: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    def block(self, name: str) -> dict:
        return dict(self.blocks.get(name, _COMMAND_BLOCKS[name]))

    def require_market(self, command: str) -> MarketParams:
        if self.market is None:
            raise ConfigError(f"command {command!r} requires a market block")
        return self.market


def _reject_unknown(mapping: dict, allowed, context: str) -> None:
    unknown = sorted(set(mapping) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown} in {context}")


def _require(mapping: dict, key: str, context: str):
    if key not in mapping:
        raise ConfigError(f"missing required key {key!r} in {context}")
    return mapping[key]


def _number(value, context: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{context} must be a number, got {value!r}")
    return float(value)


def _integer(value, context: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{context} must be an integer, got {value!r}")
    return value


def parse_market(block, context: str = "market") -> MarketParams:
    if not isinstance(block, dict):
        raise ConfigError(f"{context} must be an object")
    try:
        if "structure" in block:
            _reject_unknown(
                block,
                {"structure", "n", "sigma_scalar", "a", "b", "r", "s0"},
                context,
            )
            kind = StructureKind(
                kind=_require(block, "structure", context),
                n=_integer(_require(block, "n", context), f"{context}.n"),
                sigma_scalar=_number(
                    _require(block, "sigma_scalar", context), f"{context}.sigma_scalar"
                ),
            )
            sigma = build_sigma(kind)
        else:
            _reject_unknown(block, {"sigma", "a", "b", "r", "s0"}, context)
            sigma = np.asarray(_require(block, "sigma", context), dtype=float)
        return MarketParams(
            a=_require(block, "a", context),
            b=_require(block, "b", context),
            sigma=sigma,
            r=_number(_require(block, "r", context), f"{context}.r"),
            s0=_require(block, "s0", context),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {context}: {exc}") from exc


def _parse_block(name: str, block) -> dict:
    if not isinstance(block, dict):
        raise ConfigError(f"{name} must be an object")
    defaults = _COMMAND_BLOCKS[name]
    _reject_unknown(block, defaults, name)
    merged = dict(defaults)
    merged.update(block)
    for key in ("steps", "paths", "save_paths", "checkpoints"):
        if key in merged:
            merged[key] = _integer(merged[key], f"{name}.{key}")
            minimum = 0 if key == "save_paths" else 1
            if merged[key] < minimum:
                raise ConfigError(f"{name}.{key} must be at least {minimum}")
    for key in ("horizon", "v0", "epsilon", "t", "sigma_scalar", "a", "b"):
        if key in merged:
            merged[key] = _number(merged[key], f"{name}.{key}")
    if name == "simulate":
        merged["strategy"] = _parse_strategy(merged["strategy"])
        if merged["scheme"] not in ("budget", "log_euler"):
            raise ConfigError("simulate.scheme must be 'budget' or 'log_euler'")
    if name == "dominance":
        merged["lambda_list"] = [
            _number(v, "dominance.lambda_list entry") for v in merged["lambda_list"]
        ]
        if 1.0 not in merged["lambda_list"]:
            raise ConfigError("dominance.lambda_list must include 1.0")
    if name == "structure_limits":
        merged["n_values"] = [
            _integer(v, "structure_limits.n_values entry") for v in merged["n_values"]
        ]
        merged["sigma_values"] = [
            _number(v, "structure_limits.sigma_values entry")
            for v in merged["sigma_values"]
        ]
    return merged


def _parse_strategy(value):
    from .simulate import StrategySpec

    if isinstance(value, str):
        if value == "kelly":
            return StrategySpec.kelly()
        if value == "cash":
            return StrategySpec.cash()
        raise ConfigError(f"unknown strategy {value!r}")
    if isinstance(value, dict):
        _reject_unknown(value, {"scaled_kelly", "fixed"}, "simulate.strategy")
        if len(value) != 1:
            raise ConfigError("simulate.strategy object must have exactly one key")
        if "scaled_kelly" in value:
            return StrategySpec.scaled_kelly(
                _number(value["scaled_kelly"], "simulate.strategy.scaled_kelly")
            )
        return StrategySpec.fixed_fractions(value["fixed"])
    raise ConfigError(f"invalid strategy spec {value!r}")


def parse_run_config(raw: dict, seed_override: int | None = None) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    _reject_unknown(raw, _TOP_LEVEL_KEYS, "config")

    seed = seed_override
    if seed is None:
        if "seed" not in raw:
            raise ConfigError("seed is mandatory (config key 'seed' or --seed)")
        seed = _integer(raw["seed"], "seed")
    if not (0 <= seed < 2**64):
        raise ConfigError("seed must be an unsigned 64-bit integer")

    market = parse_market(raw["market"]) if "market" in raw else None
    output_dir = raw.get("output_dir")
    if output_dir is not None and not isinstance(output_dir, str):
        raise ConfigError("output_dir must be a string")

    blocks = {
        name: _parse_block(name, raw[name]) for name in _COMMAND_BLOCKS if name in raw
    }
    return RunConfig(
        seed=seed, market=market, output_dir=output_dir, blocks=blocks, raw=raw
    )


def market_to_dict(params: MarketParams) -> dict:
    """Explicit-form market block (round-trips through parse_market)."""
    return {
        "a": params.a.tolist(),
        "b": params.b.tolist(),
        "sigma": params.sigma.tolist(),
        "r": params.r,
        "s0": params.s0.tolist(),
    }


def load_run_config(path: str, seed_override: int | None = None) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            raw = json.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_run_config(raw, seed_override)
