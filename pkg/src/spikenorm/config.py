"""Run configuration: defaults, scale presets, strict JSON loading and echo."""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .dynamics import EXCITATORY_PARAMS, INHIBITORY_PARAMS, NeuronParams, SimConfig
from .normalization import POLICY_NAMES, NormalizationPolicy
from .plasticity import GENOME_BOUNDS

OUTPUT_DIR_ENV = "SPIKENORM_OUTPUT_DIR"
CONFIG_ECHO_NAME = "config.resolved.json"


class ConfigError(Exception):
    """Base class for configuration problems."""


class ConfigReadError(ConfigError):
    pass


class UnknownKeyError(ConfigError):
    pass


class ConfigRangeError(ConfigError):
    pass


def _neuron_dict(params: NeuronParams) -> dict[str, float]:
    d = dataclasses.asdict(params)
    d.pop("delta_t")
    return d


# Desk preset: a fifth of the full-size network.  Each input neuron pools a 1x5
# pixel block, so input spikes arrive every frame and the default synaptic gain
# drives the normalised networks into saturation; g_syn is lowered until
# norm_capped output activity is sparse but nonzero across master seeds.
PRESETS: dict[str, dict[str, Any]] = {
    "full": {},
    "desk": {
        "layer_sizes": [100, 20, 4],
        "population": 6,
        "generations": 10,
        "repeats": 3,
        "g_syn": 0.007,
    },
}


@dataclass(frozen=True)
class RunConfig:
    # network
    layer_sizes: tuple[int, ...] = (500, 50, 10)
    excitatory_fraction: float = 0.8
    w_init_lo: float = 0.0
    w_init_hi: float = 1.0
    # training and testing set-up
    frames_per_train_input: int = 10
    inputs_per_train_cycle: int = 20
    frames_per_test_input: int = 50
    inputs_per_test_cycle: int = 80
    # simulation
    dt: float = 0.02
    substeps: int = 10
    delta_t: float = 2.0
    i_pixel: float = 0.4
    g_syn: float = 0.05
    excitatory: dict = field(default_factory=lambda: _neuron_dict(EXCITATORY_PARAMS))
    inhibitory: dict = field(default_factory=lambda: _neuron_dict(INHIBITORY_PARAMS))
    # evolution
    bounds: dict = field(default_factory=lambda: {k: list(v) for k, v in GENOME_BOUNDS.items()})
    population: int = 12
    generations: int = 20
    repeats: int = 10
    kmeans_restarts: int = 10
    fixed_data: bool = False
    # normalisation
    policy: str = "norm_capped"
    cap: float = 4.0
    per_neuron_target: float = 100.0
    exc_share: float = 0.8
    # analysis
    fitness_sample: str = "best"
    # harness
    seed: int = 0
    scale: str = "full"
    output_dir: str = "runs"
    checkpoints: bool = True
    workers: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "layer_sizes", tuple(int(s) for s in self.layer_sizes))
        object.__setattr__(self, "bounds", {k: [float(x) for x in v] for k, v in self.bounds.items()})
        self.validate()

    def validate(self) -> None:
        def need(cond: bool, msg: str) -> None:
            if not cond:
                raise ConfigRangeError(msg)

        need(len(self.layer_sizes) >= 1 and all(s >= 1 for s in self.layer_sizes), "layer_sizes must be >= 1")
        need(0.0 <= self.excitatory_fraction <= 1.0, "excitatory_fraction must lie in [0, 1]")
        need(0.0 <= self.w_init_lo <= self.w_init_hi, "need 0 <= w_init_lo <= w_init_hi")
        for name in ("frames_per_train_input", "frames_per_test_input", "substeps", "kmeans_restarts", "workers"):
            need(getattr(self, name) >= 1, f"{name} must be >= 1")
        for name in ("inputs_per_train_cycle", "inputs_per_test_cycle"):
            value = getattr(self, name)
            need(value >= 4 and value % 4 == 0, f"{name} must be a positive multiple of 4")
        need(self.dt > 0, "dt must be > 0")
        need(self.delta_t >= 0, "delta_t must be >= 0")
        need(self.i_pixel >= 0 and self.g_syn >= 0, "i_pixel and g_syn must be >= 0")
        need(self.population >= 3 and self.population % 3 == 0, "population must be a positive multiple of 3")
        need(self.generations >= 0, "generations must be >= 0")
        need(self.repeats >= 1, "repeats must be >= 1")
        need(self.policy in POLICY_NAMES, f"policy must be one of {', '.join(POLICY_NAMES)}")
        need(self.cap > 0 and self.per_neuron_target > 0, "cap and per_neuron_target must be > 0")
        need(0.0 <= self.exc_share <= 1.0, "exc_share must lie in [0, 1]")
        need(self.fitness_sample in ("best", "mean"), "fitness_sample must be 'best' or 'mean'")
        need(self.scale in PRESETS, f"scale must be one of {', '.join(PRESETS)}")
        need(set(self.bounds) == set(GENOME_BOUNDS), f"bounds must give exactly {', '.join(GENOME_BOUNDS)}")
        for name, pair in self.bounds.items():
            need(len(pair) == 2 and 0 <= pair[0] <= pair[1], f"bounds[{name}] must be [min, max] with 0 <= min <= max")
        for block in ("excitatory", "inhibitory"):
            params = getattr(self, block)
            need(set(params) == set(_neuron_dict(EXCITATORY_PARAMS)), f"{block} block has wrong keys")
            try:
                NeuronParams(**params, delta_t=self.delta_t)
            except ValueError as exc:
                raise ConfigRangeError(f"{block}: {exc}") from None

    # -- derived objects --

    @property
    def sim(self) -> SimConfig:
        return SimConfig(
            dt=self.dt,
            substeps=self.substeps,
            i_pixel=self.i_pixel,
            g_syn=self.g_syn,
            excitatory=NeuronParams(**self.excitatory, delta_t=self.delta_t),
            inhibitory=NeuronParams(**self.inhibitory, delta_t=self.delta_t),
        )

    def normalization(self, policy: str | None = None) -> NormalizationPolicy:
        return NormalizationPolicy(
            name=policy or self.policy,
            cap=self.cap,
            per_neuron_target=self.per_neuron_target,
            exc_share=self.exc_share,
            inh_share=1.0 - self.exc_share,
        )

    @property
    def genome_bounds(self) -> dict[str, tuple[float, float]]:
        return {k: (v[0], v[1]) for k, v in self.bounds.items()}

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["layer_sizes"] = list(self.layer_sizes)
        return d

    def replace(self, **changes: Any) -> RunConfig:
        return resolve_config({**self.to_dict(), **changes})


FIELD_NAMES = tuple(f.name for f in dataclasses.fields(RunConfig))


def resolve_config(values: dict[str, Any] | None = None, **overrides: Any) -> RunConfig:
    """Defaults, then the preset named by ``scale``, then ``values``, then ``overrides``.

    ``overrides`` set to None are ignored (convenient for optional CLI flags).
    """
    merged = dict(values or {})
    merged.update({k: v for k, v in overrides.items() if v is not None})
    unknown = sorted(set(merged) - set(FIELD_NAMES))
    if unknown:
        raise UnknownKeyError(f"unknown config key(s): {', '.join(unknown)}")
    scale = merged.get("scale", "full")
    if scale not in PRESETS:
        raise ConfigRangeError(f"scale must be one of {', '.join(PRESETS)}")
    resolved: dict[str, Any] = {"output_dir": os.environ.get(OUTPUT_DIR_ENV, "runs")}
    resolved.update(PRESETS[scale])
    resolved.update(merged)
    try:
        return RunConfig(**resolved)
    except (TypeError, ValueError) as exc:
        raise ConfigRangeError(str(exc)) from None


def load_config(path=None, **overrides: Any) -> RunConfig:
    """Read a JSON config file (an empty file means all defaults)."""
    values: dict[str, Any] = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigReadError(f"cannot read config {path}: {exc}") from None
        if text.strip():
            try:
                values = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigReadError(f"config {path} is not valid JSON: {exc}") from None
            if not isinstance(values, dict):
                raise ConfigReadError(f"config {path} must hold a JSON object")
    return resolve_config(values, **overrides)


def write_echo(cfg: RunConfig, out_dir) -> Path:
    path = Path(out_dir) / CONFIG_ECHO_NAME
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    return path
