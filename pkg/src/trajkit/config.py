"""Run configuration: strict JSON parsing and validation.

Unknown keys are rejected with the path to the offending entry, so typos
fail loudly instead of silently running defaults.
"""

import hashlib
import json
from dataclasses import dataclass, field, fields as dc_fields

from .errors import ConfigError

__all__ = ["RunConfig", "parse_config", "config_hash", "ENGINES"]

ENGINES = ("jump", "lindblad", "gaussian", "binned", "meanfield")
STOCHASTIC_ENGINES = ("jump", "gaussian", "binned")

_PRESET_PARAM_KEYS = {
    "tc": {"n_spins", "omega", "coupling", "kappa", "mmax", "epsilon"},
    "superradiant": {"n_spins", "omega", "temperature", "kappa", "omega_bath"},
    "bh-dimer-ssb": {"n_scale", "f_tilde", "detuning", "u_tilde", "hopping",
                     "kappa", "mmax", "epsilon"},
    "bh-dimer-bistable": {"n_scale", "f_tilde", "detuning", "u_tilde", "hopping",
                          "kappa", "mmax", "epsilon"},
}

_ENGINES_BY_PRESET = {
    "tc": {"jump", "lindblad", "binned", "meanfield"},
    "superradiant": {"jump", "lindblad", "binned", "meanfield"},
    "bh-dimer-ssb": {"jump", "lindblad", "gaussian", "meanfield"},
    "bh-dimer-bistable": {"jump", "lindblad", "gaussian", "meanfield"},
}

_TOP_KEYS = {
    "preset", "engine", "params", "sizes", "scan", "grid", "dt", "n_traj",
    "seed", "observables", "initial_state", "bin_widths", "binned_mode",
    "quadrature_order", "workers", "out", "critical_point_channel",
    "record_stride", "block_size",
}

CHANNELS_BY_PRESET = {
    "tc": {"m_x", "m_y", "m_z", "m_q", "m_p", "n_ph", "var_sz", "S_E",
           "edge_occupation", "purity"},
    "superradiant": {"m_x", "m_y", "m_z", "var_sz", "S_half", "purity"},
    "bh-dimer-ssb": {"n_tot", "n_plus", "S_E", "S_E_pm", "edge_occupation",
                     "purity"},
    "bh-dimer-bistable": {"n_tot", "n_plus", "S_E", "S_E_pm", "edge_occupation",
                          "purity"},
}


@dataclass
class RunConfig:
    preset: str
    engine: str
    params: dict
    grid: dict
    dt: float = 1e-3
    sizes: list | None = None
    scan: dict | None = None
    n_traj: int | None = None
    seed: int | None = None
    observables: list | None = None
    initial_state: object = None
    bin_widths: list | None = None
    binned_mode: str = "one"
    quadrature_order: int = 8
    workers: int = 1
    out: str | None = None
    critical_point_channel: str | None = None
    record_stride: int = 1
    block_size: int = 256

    def resolved(self) -> dict:
        return {f.name: getattr(self, f.name) for f in dc_fields(self)}


def _require(cond, message, path=""):
    if not cond:
        raise ConfigError(message, path)


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON configuration document (strict mode)."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"not valid JSON: {exc}") from exc
    _require(isinstance(raw, dict), "top level must be an object")
    unknown = set(raw) - _TOP_KEYS
    _require(not unknown, f"unknown keys {sorted(unknown)}", "config")

    preset = raw.get("preset")
    _require(preset in _PRESET_PARAM_KEYS,
             f"preset must be one of {sorted(_PRESET_PARAM_KEYS)}, got {preset!r}",
             "config.preset")
    engine = raw.get("engine")
    _require(engine in ENGINES, f"engine must be one of {ENGINES}, got {engine!r}",
             "config.engine")
    _require(engine in _ENGINES_BY_PRESET[preset],
             f"engine {engine!r} not available for preset {preset!r}",
             "config.engine")

    params = raw.get("params", {})
    _require(isinstance(params, dict), "params must be an object", "config.params")
    bad = set(params) - _PRESET_PARAM_KEYS[preset]
    _require(not bad, f"unknown parameter keys {sorted(bad)}", "config.params")

    grid = raw.get("grid")
    if engine != "meanfield":
        _require(isinstance(grid, dict), "grid is required", "config.grid")
        _require(set(grid) <= {"t_final", "dt_output"},
                 f"unknown grid keys {sorted(set(grid) - {'t_final', 'dt_output'})}",
                 "config.grid")
        _require("t_final" in grid and grid["t_final"] > 0,
                 "grid.t_final must be positive", "config.grid.t_final")
    else:
        grid = grid or {"t_final": 3000.0}

    cfg = RunConfig(
        preset=preset, engine=engine, params=dict(params), grid=dict(grid),
        dt=float(raw.get("dt", 1e-3)),
        sizes=list(raw["sizes"]) if raw.get("sizes") is not None else None,
        scan=dict(raw["scan"]) if raw.get("scan") is not None else None,
        n_traj=raw.get("n_traj"),
        seed=raw.get("seed"),
        observables=(list(raw["observables"])
                     if raw.get("observables") is not None else None),
        initial_state=raw.get("initial_state"),
        bin_widths=(list(raw["bin_widths"])
                    if raw.get("bin_widths") is not None else None),
        binned_mode=raw.get("binned_mode", "one"),
        quadrature_order=int(raw.get("quadrature_order", 8)),
        workers=int(raw.get("workers", 1)),
        out=raw.get("out"),
        critical_point_channel=raw.get("critical_point_channel"),
        record_stride=int(raw.get("record_stride", 1)),
        block_size=int(raw.get("block_size", 256)),
    )

    _require(cfg.dt > 0, "dt must be positive", "config.dt")
    if engine in STOCHASTIC_ENGINES:
        _require(cfg.seed is not None,
                 f"seed is mandatory for engine {engine!r}", "config.seed")
        _require(cfg.n_traj is not None and cfg.n_traj >= 1,
                 "n_traj must be >= 1 for stochastic engines", "config.n_traj")
    if engine == "binned":
        _require(cfg.bin_widths is not None and len(cfg.bin_widths) > 0,
                 "bin_widths is required for the binned engine",
                 "config.bin_widths")
        _require(cfg.binned_mode in ("one", "two"),
                 "binned_mode must be 'one' or 'two'", "config.binned_mode")
    if cfg.scan is not None:
        _require(set(cfg.scan) == {"axis", "values"},
                 "scan needs exactly the keys 'axis' and 'values'", "config.scan")
        _require(cfg.scan["axis"] in _PRESET_PARAM_KEYS[preset],
                 f"scan axis {cfg.scan['axis']!r} is not a parameter of "
                 f"preset {preset!r}", "config.scan.axis")
        _require(len(cfg.scan["values"]) >= 1, "scan.values must be non-empty",
                 "config.scan.values")
    if cfg.observables is not None:
        allowed = CHANNELS_BY_PRESET[preset]
        bad = set(cfg.observables) - allowed
        _require(not bad,
                 f"observables {sorted(bad)} not available for preset "
                 f"{preset!r} (choose from {sorted(allowed)})",
                 "config.observables")
    if cfg.sizes is not None:
        _require(all(int(n) >= 1 for n in cfg.sizes), "sizes must be >= 1",
                 "config.sizes")
    return cfg


def config_hash(cfg: RunConfig) -> str:
    """Stable hash of the resolved configuration."""
    blob = json.dumps(cfg.resolved(), sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()
