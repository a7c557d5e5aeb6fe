"""Run configuration: a flat INI dialect that round-trips losslessly.

Every number serializes through repr, so parse(serialize(c)) == c exactly;
a written config is a complete, diffable record of an experiment. Unknown
sections or keys are rejected by name rather than ignored, because a
silently dropped option is how experiments stop being reproducible.
"""
from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass

from .damping import BathSpec
from .experiments import SWEEP_AXES, Scenario
from .model import SystemParams, TrialWindow
from .stateprep import WINDOW_MODES, ThermalSpec

QUANTITIES = ("fidelity", "threshold")
PROBES = ("damped", "lossless")
COMMANDS = ("factor", "curve", "sweep")


@dataclass(frozen=True)
class RunConfig:
    """Everything a run depends on, one flat record."""

    # [system]
    omega1: float = 1.5
    omega2: float = 2.0
    omega3: float = 1.0
    couplings: tuple = ((1, 1.0),)
    # [thermal]
    temperature: float = 3.0
    tail_cutoff: float = 1e-12
    # [bath]
    gamma3: float = 0.0
    nbar3: float = 0.0
    probe: str = "damped"
    # [protocol]
    N: int = 15
    alpha: float = 5.0
    alpha_phase: float = 0.0
    window_mode: str = "trial-window"
    n_min: int | None = None
    n_max: int | None = None
    tau: float | str = "auto"
    weight_threshold: float = 0.05
    theta: float = 0.9
    peak_floor: float = 0.9
    # [grid]
    tau_min: float = 1e-3
    tau_max: float | None = None
    points: int = 1500
    axis: str | None = None
    values: tuple = ()
    series_axis: str | None = None
    series_values: tuple = ()
    quantity: str = "fidelity"
    # [run]
    threads: int | None = None
    out_csv: str | None = None
    out_report: str | None = None

    def scenario(self) -> Scenario:
        """Materializes the physics part of the record."""
        params = SystemParams(omega1=self.omega1, omega2=self.omega2,
                              omega3=self.omega3, couplings=self.couplings)
        thermal = ThermalSpec(temperature=self.temperature, tail_cutoff=self.tail_cutoff)
        bath = None
        if self.gamma3 > 0.0 or self.nbar3 > 0.0:
            bath = BathSpec(gamma3=self.gamma3, nbar3=self.nbar3)
        trial = None
        if self.n_min is not None or self.n_max is not None:
            if self.n_min is None or self.n_max is None:
                raise ValueError("n_min and n_max must be given together")
            trial = TrialWindow(self.n_min, self.n_max)
        amp = self.alpha * complex(math.cos(self.alpha_phase), math.sin(self.alpha_phase))
        return Scenario(params=params, thermal=thermal, N=self.N, alpha=amp,
                        mode=self.window_mode, bath=bath, probe=self.probe, trial=trial)


_SCHEMA: dict[str, tuple[str, ...]] = {
    "system": ("omega1", "omega2", "omega3", "couplings"),
    "thermal": ("temperature", "tail_cutoff"),
    "bath": ("gamma3", "nbar3", "probe"),
    "protocol": ("N", "alpha", "alpha_phase", "window_mode", "n_min", "n_max",
                 "tau", "weight_threshold", "theta", "peak_floor"),
    "grid": ("tau_min", "tau_max", "points", "axis", "values",
             "series_axis", "series_values", "quantity"),
    "run": ("threads", "out_csv", "out_report"),
}

_FLOAT_KEYS = {"omega1", "omega2", "omega3", "temperature", "tail_cutoff", "gamma3",
               "nbar3", "alpha", "alpha_phase", "weight_threshold", "theta",
               "peak_floor", "tau_min"}
_INT_KEYS = {"N", "points"}
_OPT_INT_KEYS = {"n_min", "n_max", "threads"}
_OPT_FLOAT_KEYS = {"tau_max"}
_STR_KEYS = {"probe", "window_mode", "quantity"}
_OPT_STR_KEYS = {"axis", "series_axis", "out_csv", "out_report"}
_TUPLE_KEYS = {"values", "series_values"}


def _format_couplings(couplings) -> str:
    return ", ".join(f"{int(k)}:{g!r}" for k, g in couplings)


def _parse_couplings(text: str) -> tuple:
    out = []
    for entry in text.split(","):
        entry = entry.strip()
        if not entry:
            continue
        head, sep, tail = entry.partition(":")
        if not sep:
            raise ValueError(f"bad coupling entry {entry!r}, expected order:strength")
        try:
            out.append((int(head), float(tail)))
        except ValueError as exc:
            raise ValueError(f"bad coupling entry {entry!r}: {exc}") from None
    if not out:
        raise ValueError("couplings must contain at least one order:strength entry")
    return tuple(out)


def _convert(key: str, raw: str):
    raw = raw.strip()
    if key == "couplings":
        return _parse_couplings(raw)
    if key == "tau":
        return "auto" if raw == "auto" else float(raw)
    if key in _FLOAT_KEYS:
        return float(raw)
    if key in _INT_KEYS:
        return int(raw)
    if key in _OPT_INT_KEYS:
        return None if raw == "auto" else int(raw)
    if key in _OPT_FLOAT_KEYS:
        return None if raw == "auto" else float(raw)
    if key in _TUPLE_KEYS:
        return tuple(float(v) for v in raw.split(",") if v.strip())
    return raw


def parse_config(text: str) -> RunConfig:
    """Parses config text, rejecting anything the schema does not name."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ValueError(f"malformed config: {exc}") from None
    updates = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ValueError(f"unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ValueError(f"unknown key '{key}' in section [{section}]")
            updates[key] = _convert(key, raw)
    cfg = RunConfig(**updates)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.window_mode not in WINDOW_MODES:
        raise ValueError(f"unknown window_mode {cfg.window_mode!r}, "
                         f"expected one of {WINDOW_MODES}")
    if cfg.probe not in PROBES:
        raise ValueError(f"unknown probe {cfg.probe!r}, expected one of {PROBES}")
    if cfg.quantity not in QUANTITIES:
        raise ValueError(f"unknown quantity {cfg.quantity!r}, expected one of {QUANTITIES}")
    for name in ("axis", "series_axis"):
        value = getattr(cfg, name)
        if value is not None and value not in SWEEP_AXES:
            raise ValueError(f"unknown {name} {value!r}, expected one of {SWEEP_AXES}")


def _format_value(key: str, value) -> str:
    if key == "couplings":
        return _format_couplings(value)
    if key in _TUPLE_KEYS:
        return ", ".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize_config(cfg: RunConfig) -> str:
    """Writes the config in schema order; optional empties are omitted."""
    out = io.StringIO()
    for section, keys in _SCHEMA.items():
        lines = []
        for key in keys:
            value = getattr(cfg, key)
            if value is None or (key in _TUPLE_KEYS and len(value) == 0):
                continue
            lines.append(f"{key} = {_format_value(key, value)}")
        if lines:
            out.write(f"[{section}]\n")
            out.write("\n".join(lines))
            out.write("\n\n")
    return out.getvalue()


def load_config(path: str) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


_PRESET_BASE = {
    "fig2": dict(N=15, alpha=5.0),
    "fig3": dict(N=15, alpha=6.0, theta=0.9),
    "fig4": dict(N=15, alpha=8.0),
    "fig5": dict(N=35, alpha=10.0),
}

_PRESET_COMMAND = {
    ("fig2", "curve"): dict(axis="g", values=(1.0, 0.9, 0.8),
                            tau_min=1e-3, tau_max=1.5, points=1500),
    ("fig2", "sweep"): dict(axis="g", values=(1.0, 0.9, 0.8)),
    ("fig2", "factor"): dict(window_mode="full-support", tau=0.335),
    ("fig3", "curve"): dict(tau_min=1e-3, tau_max=1.5, points=1500),
    ("fig3", "sweep"): dict(axis="g",
                            values=tuple(round(0.5 + 0.1 * i, 10) for i in range(11)),
                            series_axis="k", series_values=(1.0, 2.0, 3.0, 4.0),
                            quantity="threshold"),
    ("fig3", "factor"): dict(window_mode="full-support"),
    ("fig4", "curve"): dict(axis="gamma3", values=(0.0, 0.5, 1.0),
                            tau_min=1e-3, tau_max=1.5, points=1500),
    # alpha=5 anchors tau='auto' at the fig2 working point; rows then vary alpha
    ("fig4", "sweep"): dict(alpha=5.0, axis="alpha", values=(3.0, 4.0, 5.0, 6.0, 7.0, 8.0),
                            series_axis="gamma3", series_values=(0.0, 0.5, 1.0)),
    ("fig4", "factor"): dict(window_mode="full-support", alpha=7.0),
    ("fig5", "curve"): dict(axis="alpha", values=(6.0, 8.0, 10.0),
                            tau_min=1e-3, tau_max=1.2, points=1200),
    ("fig5", "sweep"): dict(axis="alpha", values=(6.0, 8.0, 10.0)),
    ("fig5", "factor"): dict(window_mode="full-support"),
}

PRESETS = tuple(sorted(_PRESET_BASE))


def preset(name: str, command: str = "curve") -> RunConfig:
    """Bundled parameter sets; the same name adapts to the command using it."""
    if name not in _PRESET_BASE:
        raise ValueError(f"unknown preset {name!r}, expected one of {PRESETS}")
    if command not in COMMANDS:
        raise ValueError(f"unknown command {command!r}, expected one of {COMMANDS}")
    settings = dict(_PRESET_BASE[name])
    settings.update(_PRESET_COMMAND.get((name, command), {}))
    return RunConfig(**settings)
