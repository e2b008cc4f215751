"""Scenario presets, renewable-penetration derating and JSON configuration.

Renewables (PV and wind) run at their maximum power point: they add no
inertia and no governor headroom. A scenario with synchronous share
``s = 1 - pv - wind`` therefore scales the base inertia and the
governor-responsive capacity linearly by ``s``.

Configuration files are JSON. Keys mirror the dataclass field names; units
are fixed (MW, MW*s, Hz, s). Unknown keys are rejected. See
the README for the schema.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields, replace
from typing import Any, Dict, List, Optional, Tuple

from .errors import ConfigError, InvalidScenarioError
from .grid import DEFAULT_UFLS, GovernorFleet, GridModel, UflsStage
from .storage import DroopController, Kind, StepController, StorageDevice

__all__ = [
    "Scenario",
    "BaseGrid",
    "SweepSpec",
    "PRESETS",
    "base_grid",
    "build_model",
    "preset",
    "make_device",
    "default_sweep",
    "load_config",
    "config_to_dict",
    "dump_config",
]

HEES_SUPPORT_S = 3600.0  # one hour at full output


@dataclass(frozen=True)
class BaseGrid:
    """Interconnection at 0% renewables, before derating.

    ``responsive_share`` is the fraction of synchronous capacity that
    carries governor response, and ``headroom_fraction`` the fleet's spare
    mechanical power as a fraction of that responsive capacity.
    """

    load_mw: float
    capacity_mva: Optional[float] = None  # None -> equal to load_mw
    inertia_base_s: float = 5.0
    f_nominal: float = 60.0
    damping_pu_per_hz: float = 0.0
    responsive_share: float = 1.0
    droop_pu: float = 0.05
    t_governor_s: float = 0.2
    t_reheat_s: float = 8.0
    hp_fraction: float = 0.3
    headroom_fraction: float = 0.1
    ufls: Tuple[UflsStage, ...] = DEFAULT_UFLS

    def __post_init__(self):
        if self.capacity_mva is None:
            object.__setattr__(self, "capacity_mva", self.load_mw)
        object.__setattr__(self, "ufls", tuple(
            s if isinstance(s, UflsStage) else UflsStage(**s) for s in self.ufls))
        if not self.inertia_base_s > 0:
            raise InvalidScenarioError("inertia_base_s must be > 0")
        if not 0.0 <= self.responsive_share:
            raise InvalidScenarioError("responsive_share must be >= 0")
        if not self.headroom_fraction >= 0:
            raise InvalidScenarioError("headroom_fraction must be >= 0")


@dataclass(frozen=True)
class Scenario:
    name: str = "custom"
    preset: str = "Custom"
    pv_fraction: float = 0.0
    wind_fraction: float = 0.0
    loss_mw: float = 0.0
    loss_time_s: float = 1.0
    dt_s: float = 0.01
    duration_s: float = 60.0
    ufls_enabled: bool = False

    def __post_init__(self):
        for name in ("pv_fraction", "wind_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidScenarioError(f"{name} must be in [0, 1], got {v}")
        if not self.pv_fraction + self.wind_fraction < 1.0:
            raise InvalidScenarioError(
                "pv_fraction + wind_fraction must be < 1 (no synchronous generation left)")
        if not self.loss_mw >= 0:
            raise InvalidScenarioError(f"loss_mw must be >= 0, got {self.loss_mw}")
        if not self.dt_s > 0:
            raise InvalidScenarioError(f"dt_s must be > 0, got {self.dt_s}")
        if not self.duration_s > self.loss_time_s:
            raise InvalidScenarioError("duration_s must exceed loss_time_s")
        if not self.loss_time_s >= 0:
            raise InvalidScenarioError("loss_time_s must be >= 0")

    @property
    def synchronous_share(self) -> float:
        return 1.0 - self.pv_fraction - self.wind_fraction


@dataclass(frozen=True)
class SweepSpec:
    kind: str  # "capacity" or "duration"
    values: Tuple[float, ...]

    def __post_init__(self):
        if self.kind not in ("capacity", "duration"):
            raise InvalidScenarioError(f"sweep kind must be capacity or duration, got {self.kind!r}")
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if not vals:
            raise InvalidScenarioError("sweep values must not be empty")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise InvalidScenarioError("sweep values must be strictly ascending")


# Fleet parameters are calibrated per interconnection so the reduced model
# shows the expected qualitative behaviour; they are not fitted to any trace.
PRESETS: Dict[str, Dict[str, Any]] = {
    "EI": dict(
        grid=BaseGrid(load_mw=560_000.0, inertia_base_s=8.0, responsive_share=0.125,
                      droop_pu=0.05, t_governor_s=0.3, t_reheat_s=6.0,
                      hp_fraction=0.35, headroom_fraction=0.6),
        loss_mw=4_500.0,
        p_max_mw=3_100.0,
        support_s=10.0,
        droop_ratio=0.025,
        t_filter_s=0.5,
        activation_hz=59.85,
        delay_s=0.5,
        alpha=0.85,
    ),
    "ERCOT": dict(
        grid=BaseGrid(load_mw=75_000.0, inertia_base_s=18.0, responsive_share=1.0,
                      droop_pu=0.04, t_governor_s=0.3, t_reheat_s=8.0,
                      hp_fraction=0.35, headroom_fraction=0.25),
        loss_mw=2_750.0,
        p_max_mw=2_630.0,
        support_s=10.0,
        droop_ratio=0.05,
        t_filter_s=0.5,
        activation_hz=59.55,
        delay_s=0.5,
        alpha=0.85,
    ),
}

# total renewable share in percent -> (PV, wind) fractions
PENETRATION = {
    20: (0.05, 0.15),
    40: (0.25, 0.15),
    60: (0.45, 0.15),
    80: (0.65, 0.15),
}


def _preset_key(name: str) -> str:
    key = str(name).upper()
    if key not in PRESETS:
        raise InvalidScenarioError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return key


def base_grid(name: str) -> BaseGrid:
    return PRESETS[_preset_key(name)]["grid"]


def build_model(scenario: Scenario, base: Optional[BaseGrid] = None) -> GridModel:
    """Derate ``base`` by the scenario's synchronous share."""
    if base is None:
        base = base_grid(scenario.preset)
    s = scenario.synchronous_share
    if not s > 0:
        raise InvalidScenarioError(f"synchronous share {s} must be > 0")
    responsive = base.responsive_share * base.capacity_mva * s
    gov = GovernorFleet(
        responsive_mva=responsive,
        droop_pu=base.droop_pu,
        t_governor_s=base.t_governor_s,
        t_reheat_s=base.t_reheat_s,
        hp_fraction=base.hp_fraction,
        headroom_mw=base.headroom_fraction * responsive,
    )
    return GridModel(
        capacity_mva=base.capacity_mva,
        inertia_s=base.inertia_base_s * s,
        load_mw=base.load_mw,
        governor=gov,
        f_nominal=base.f_nominal,
        damping_pu_per_hz=base.damping_pu_per_hz,
        ufls=base.ufls if scenario.ufls_enabled else (),
    )


def make_device(name: str, control: str = "droop", kind: str = "hpes",
                **overrides) -> Optional[StorageDevice]:
    """The preset's aggregated storage device, or ``None`` for ``control='none'``.

    HPES carries the tabulated energy (``p_max * 10 s``); HEES gets an hour
    of full output so it never runs dry inside a one-minute run.
    """
    p = PRESETS[_preset_key(name)]
    control = control.lower()
    if control == "none":
        return None
    kind = Kind(kind.lower())
    p_max = overrides.pop("p_max_mw", p["p_max_mw"])
    support = p["support_s"] if kind is Kind.HPES else HEES_SUPPORT_S
    e_max = overrides.pop("e_max_mws", p_max * support)
    if control == "droop":
        ctrl = DroopController(
            droop_ratio=overrides.pop("droop_ratio", p["droop_ratio"]),
            t_filter_s=overrides.pop("t_filter_s", p["t_filter_s"]),
            deadband_hz=overrides.pop("deadband_hz", 0.0),
        )
    elif control == "step":
        ctrl = StepController(
            alpha=overrides.pop("alpha", p["alpha"]),
            activation_hz=overrides.pop("activation_hz", p["activation_hz"]),
            delay_s=overrides.pop("delay_s", p["delay_s"]),
            t_filter_s=overrides.pop("t_filter_s", p["t_filter_s"]),
            assumed_inertia_s=overrides.pop("assumed_inertia_s", None),
            assumed_capacity_mva=overrides.pop("assumed_capacity_mva", None),
            override_power_mw=overrides.pop("override_power_mw", None),
        )
    else:
        raise InvalidScenarioError(f"control must be droop, step or none, got {control!r}")
    if overrides:
        raise InvalidScenarioError(f"options {sorted(overrides)} do not apply to {control} control")
    return StorageDevice(p_max_mw=p_max, e_max_mws=e_max, controller=ctrl, kind=kind,
                         name=f"{kind.value}-{control}")


def preset(name: str, control: str = "droop", kind: str = "hpes",
           penetration: Optional[int] = 80, **overrides) -> Tuple[Scenario, List[StorageDevice]]:
    """Scenario and storage fleet for ``EI`` or ``ERCOT``.

    ``penetration`` picks one of the tabulated renewable scenarios (20, 40,
    60, 80 %). Scenario fields in ``overrides`` replace the preset values.
    """
    key = _preset_key(name)
    if penetration not in PENETRATION:
        raise InvalidScenarioError(f"penetration must be one of {sorted(PENETRATION)}")
    pv, wind = PENETRATION[penetration]
    sc = Scenario(name=f"{key.lower()}-{penetration}", preset=key, pv_fraction=pv,
                  wind_fraction=wind, loss_mw=PRESETS[key]["loss_mw"])
    if overrides:
        sc = replace(sc, **overrides)
    dev = make_device(key, control, kind)
    return sc, ([] if dev is None else [dev])


def default_sweep(name: str, kind: str) -> Tuple[Scenario, List[StorageDevice], SweepSpec]:
    """Reference sweep grids for a preset at 80 % renewables.

    ``capacity`` uses droop HPES with energy from near zero up to nine
    seconds of rated output. ``duration`` uses step HPES holding five
    seconds of rated energy, discharged over 10 to 54 s.
    """
    key = _preset_key(name)
    p_max = PRESETS[key]["p_max_mw"]
    if kind == "capacity":
        sc, devs = preset(key, "droop", "hpes")
        values = tuple(p_max * s for s in (0.02, 1, 2, 3, 4, 5, 6, 7, 8, 9))
    elif kind == "duration":
        sc, devs = preset(key, "step", "hpes")
        devs = [make_device(key, "step", "hpes", e_max_mws=5.0 * p_max)]
        values = tuple(float(v) for v in range(10, 56, 2))
    else:
        raise InvalidScenarioError(f"sweep kind must be capacity or duration, got {kind!r}")
    return sc, devs, SweepSpec(kind, values)


# -- configuration files ---------------------------------------------------

_SCENARIO_KEYS = {f.name for f in fields(Scenario)}
_GRID_KEYS = {f.name for f in fields(BaseGrid)}
_UFLS_KEYS = {f.name for f in fields(UflsStage)}
_DEVICE_KEYS = {"name", "control", "kind", "p_max_mw", "e_max_mws", "droop_ratio",
                "t_filter_s", "deadband_hz", "alpha", "activation_hz", "delay_s",
                "assumed_inertia_s", "assumed_capacity_mva", "override_power_mw"}
_SWEEP_KEYS = {"kind", "values"}
_TOP_KEYS = _SCENARIO_KEYS | {"grid", "storage", "sweep"}


def _reject_unknown(obj: dict, allowed: set, where: str):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object, got {type(obj).__name__}")
    extra = sorted(set(obj) - allowed)
    if extra:
        raise ConfigError(f"{where}: unknown key(s) {extra}")


def _device_from_dict(d: dict, preset_name: Optional[str], idx: int) -> StorageDevice:
    where = f"storage[{idx}]"
    _reject_unknown(d, _DEVICE_KEYS, where)
    d = dict(d)
    control = d.pop("control", "droop")
    kind = d.pop("kind", "hpes")
    name = d.pop("name", None)
    try:
        if preset_name is not None:
            dev = make_device(preset_name, control, kind, **d)
        else:
            dev = _custom_device(control, kind, d)
    except (InvalidScenarioError, ValueError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    if dev is None:
        raise ConfigError(f"{where}: control 'none' is expressed by an empty storage list")
    if name is not None:
        dev.name = name
    return dev


def _custom_device(control: str, kind: str, d: dict) -> StorageDevice:
    try:
        p_max = d.pop("p_max_mw")
        e_max = d.pop("e_max_mws")
    except KeyError as exc:
        raise InvalidScenarioError(f"missing required field {exc.args[0]!r}") from None
    if control == "droop":
        ctrl = DroopController(**{k: d.pop(k) for k in ("droop_ratio", "t_filter_s", "deadband_hz") if k in d})
    elif control == "step":
        keys = ("alpha", "activation_hz", "delay_s", "t_filter_s", "assumed_inertia_s",
                "assumed_capacity_mva", "override_power_mw")
        ctrl = StepController(**{k: d.pop(k) for k in keys if k in d})
    else:
        raise InvalidScenarioError(f"control must be droop or step, got {control!r}")
    if d:
        raise InvalidScenarioError(f"options {sorted(d)} do not apply to {control} control")
    return StorageDevice(p_max_mw=p_max, e_max_mws=e_max, controller=ctrl, kind=kind)


def config_from_dict(raw: dict):
    """Validate a parsed config; returns ``(scenario, devices, base, sweep)``."""
    _reject_unknown(raw, _TOP_KEYS, "config")
    preset_name = raw.get("preset", "Custom")
    is_preset = str(preset_name).upper() in PRESETS
    sc_kwargs = {k: raw[k] for k in _SCENARIO_KEYS & set(raw)}
    try:
        if is_preset:
            key = _preset_key(preset_name)
            sc = Scenario(name=key.lower(), preset=key,
                          pv_fraction=PENETRATION[80][0], wind_fraction=PENETRATION[80][1],
                          loss_mw=PRESETS[key]["loss_mw"])
            sc = replace(sc, **{k: v for k, v in sc_kwargs.items() if k != "preset"})
        else:
            sc = Scenario(**sc_kwargs)
    except InvalidScenarioError as exc:
        raise ConfigError(f"scenario: {exc}") from exc
    except TypeError as exc:
        raise ConfigError(f"scenario: {exc}") from exc

    base = base_grid(sc.preset) if is_preset else None
    if "grid" in raw:
        g = raw["grid"]
        _reject_unknown(g, _GRID_KEYS, "grid")
        for i, st in enumerate(g.get("ufls", [])):
            _reject_unknown(st, _UFLS_KEYS, f"grid.ufls[{i}]")
        try:
            base = replace(base, **g) if base is not None else BaseGrid(**g)
        except (InvalidScenarioError, TypeError) as exc:
            raise ConfigError(f"grid: {exc}") from exc
    if base is None:
        raise ConfigError("grid: a Custom scenario needs a 'grid' section with load_mw")
    try:
        build_model(sc, base)
    except InvalidScenarioError as exc:
        raise ConfigError(f"scenario: {exc}") from exc

    if "storage" in raw:
        st = raw["storage"]
        if isinstance(st, dict):
            st = [st]
        if not isinstance(st, list):
            raise ConfigError("storage: expected a list of device objects")
        devices = [_device_from_dict(d, sc.preset if is_preset else None, i)
                   for i, d in enumerate(st)]
    else:
        dev = make_device(sc.preset, "droop", "hpes") if is_preset else None
        devices = [] if dev is None else [dev]

    sweep = None
    if raw.get("sweep") is not None:
        _reject_unknown(raw["sweep"], _SWEEP_KEYS, "sweep")
        try:
            sweep = SweepSpec(kind=raw["sweep"].get("kind"),
                              values=tuple(raw["sweep"].get("values", ())))
        except (InvalidScenarioError, TypeError, ValueError) as exc:
            raise ConfigError(f"sweep: {exc}") from exc
    return sc, devices, base, sweep


def load_config(path) -> Tuple[Scenario, List[StorageDevice], Optional[SweepSpec]]:
    """Read and validate a JSON scenario file.

    Returns ``(scenario, devices, sweep)``; the derated base grid can be
    recovered with :func:`load_config_full`.
    """
    sc, devices, _base, sweep = load_config_full(path)
    return sc, devices, sweep


def load_config_full(path):
    if not os.path.exists(path):
        raise FileNotFoundError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return config_from_dict(raw)


def _device_to_dict(dev: StorageDevice) -> dict:
    out = {"name": dev.name, "kind": dev.kind.value, "p_max_mw": dev.p_max_mw,
           "e_max_mws": dev.e_max_mws}
    c = dev.controller
    if isinstance(c, DroopController):
        out.update(control="droop", droop_ratio=c.droop_ratio, t_filter_s=c.t_filter_s,
                   deadband_hz=c.deadband_hz)
    else:
        out.update(control="step", alpha=c.alpha, activation_hz=c.activation_hz,
                   delay_s=c.delay_s, t_filter_s=c.t_filter_s)
        for k in ("assumed_inertia_s", "assumed_capacity_mva", "override_power_mw"):
            if getattr(c, k) is not None:
                out[k] = getattr(c, k)
    return out


def config_to_dict(scenario: Scenario, devices, base: Optional[BaseGrid] = None,
                   sweep: Optional[SweepSpec] = None) -> dict:
    """Normalized, fully explicit config; ``load(dump(x))`` reproduces ``x``."""
    out = {f.name: getattr(scenario, f.name) for f in fields(Scenario)}
    if base is not None:
        g = {f.name: getattr(base, f.name) for f in fields(BaseGrid)}
        g["ufls"] = [{f.name: getattr(s, f.name) for f in fields(UflsStage)} for s in base.ufls]
        out["grid"] = g
    out["storage"] = [_device_to_dict(d) for d in devices]
    if sweep is not None:
        out["sweep"] = {"kind": sweep.kind, "values": list(sweep.values)}
    return out


def dump_config(path, scenario: Scenario, devices, base: Optional[BaseGrid] = None,
                sweep: Optional[SweepSpec] = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config_to_dict(scenario, devices, base, sweep), fh, indent=2, sort_keys=True)
        fh.write("\n")
