"""Scenario configuration: shaper specs, experiment configs, JSON loading."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from ..bounds import BoundConstants
from ..distributions import ScalarDistribution, format_distribution, parse_distribution
from ..errors import ConfigError

SHAPER_KINDS = ("identity_embed", "partial_isometry", "replicated_average", "explicit")
SCENARIOS = ("lemmas", "scaling", "moments", "tails", "small-columns", "almost-square")
MAX_N_SMALL_COLUMNS = 10**6


@dataclass(frozen=True)
class ShaperSpec:
    kind: str = "partial_isometry"
    m: int = 16
    n: int = 16
    N: int = 64
    k: int | None = None
    matrix: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self):
        if self.kind not in SHAPER_KINDS:
            raise ConfigError(f"unknown shaper kind {self.kind!r}; expected one of {SHAPER_KINDS}")
        if min(self.m, self.n, self.N) < 1:
            raise ConfigError("shaper dimensions must be positive")

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "m": self.m, "n": self.n, "N": self.N}
        if self.k is not None:
            d["k"] = self.k
        if self.matrix is not None:
            d["matrix"] = [list(r) for r in self.matrix]
        return d


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    shaper: ShaperSpec = field(default_factory=ShaperSpec)
    dist: ScalarDistribution = field(default_factory=lambda: parse_distribution("laplace{scale=1.0}"))
    trials: int = 200
    p_grid: tuple[float, ...] = (1.0,)
    N_grid: tuple[int, ...] = ()
    seed: int = 7
    out: str | None = None
    constants: BoundConstants = field(default_factory=BoundConstants)
    method: str = "power"
    C_split: float = 1.0
    C_trunc: float = 1.0
    control: bool = True
    workers: int = 1

    def __post_init__(self):
        if self.scenario not in SCENARIOS + ("all",):
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if self.trials < 50:
            raise ConfigError("trials must be >= 50")
        if any(not (p >= 1 and math.isfinite(p)) for p in self.p_grid):
            raise ConfigError("p values must be finite and >= 1")
        if any(N < 1 for N in self.N_grid):
            raise ConfigError("N values must be positive")
        if self.method not in ("power", "exact"):
            raise ConfigError("method must be 'power' or 'exact'")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @property
    def m(self) -> int:
        return self.shaper.m

    @property
    def n(self) -> int:
        return self.shaper.n

    def with_shaper(self, **changes) -> ExperimentConfig:
        return replace(self, shaper=replace(self.shaper, **changes))

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "shaper": self.shaper.to_dict(),
            "dist": format_distribution(self.dist),
            "trials": self.trials,
            "p_grid": list(self.p_grid),
            "N_grid": list(self.N_grid),
            "seed": self.seed,
            "constants": asdict(self.constants),
            "method": self.method,
            "C_split": self.C_split,
            "C_trunc": self.C_trunc,
            "control": self.control,
        }


def default_config(scenario: str, seed: int = 7) -> ExperimentConfig:
    """Desk-scale defaults for each scenario."""
    lap = parse_distribution("laplace{scale=1.0}")
    if scenario == "scaling":
        return ExperimentConfig("scaling", ShaperSpec("partial_isometry", 32, 32, 32), lap,
                                trials=200, N_grid=(32, 128, 512, 2048), seed=seed)
    if scenario == "moments":
        return ExperimentConfig("moments", ShaperSpec("partial_isometry", 16, 16, 64), lap,
                                trials=2000, p_grid=(1.0, 2.0, 4.0, 8.0), seed=seed)
    if scenario == "tails":
        return ExperimentConfig("tails", ShaperSpec("partial_isometry", 8, 8, 32), lap,
                                trials=20000, seed=seed)
    if scenario == "small-columns":
        return ExperimentConfig("small-columns", ShaperSpec("replicated_average", 8, 8, 8 * 2504, k=2504),
                                lap, trials=400, p_grid=(1.0, 2.0, 4.0, 8.0), seed=seed)
    if scenario == "almost-square":
        return ExperimentConfig("almost-square", ShaperSpec("partial_isometry", 16, 16, 256), lap,
                                trials=1000, p_grid=(1.0, 2.0, 4.0), seed=seed)
    if scenario in ("lemmas", "all"):
        return ExperimentConfig(scenario, seed=seed)
    raise ConfigError(f"unknown scenario {scenario!r}")


def config_from_dict(data: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Overlay a JSON-style mapping onto ``base`` (or the scenario default)."""
    data = dict(data)
    scenario = data.get("scenario", base.scenario if base else None)
    if scenario is None:
        raise ConfigError("config needs a scenario")
    cfg = base if base is not None and base.scenario == scenario else default_config(scenario)
    changes = {}
    if "shaper" in data:
        sh = dict(data["shaper"])
        if "matrix" in sh and sh["matrix"] is not None:
            sh["matrix"] = tuple(tuple(float(x) for x in row) for row in sh["matrix"])
        changes["shaper"] = replace(cfg.shaper, **sh)
    if "dist" in data:
        changes["dist"] = parse_distribution(data["dist"])
    if "constants" in data:
        changes["constants"] = BoundConstants(**data["constants"])
    for key in ("trials", "seed", "workers"):
        if key in data:
            changes[key] = int(data[key])
    for key in ("C_split", "C_trunc"):
        if key in data:
            changes[key] = float(data[key])
    if "p_grid" in data:
        changes["p_grid"] = tuple(float(p) for p in data["p_grid"])
    if "N_grid" in data:
        changes["N_grid"] = tuple(int(N) for N in data["N_grid"])
    for key in ("out", "method", "control"):
        if key in data:
            changes[key] = data[key]
    unknown = set(data) - {"scenario", "shaper", "dist", "constants", "trials", "seed", "workers",
                           "C_split", "C_trunc", "p_grid", "N_grid", "out", "method", "control"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        return replace(cfg, **changes)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(data)
