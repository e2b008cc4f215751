"""Aggregated single-bus frequency dynamics.

The interconnection is lumped into one inertia and one equivalent reheat
governor-turbine fleet::

    df/dt     = f_N * dP_net / (2 H C)
    dvalve/dt = (-(f - f_N) / (R f_N) - valve) / T_g
    dreheat/dt = (valve - reheat) / T_rh
    P_mech    = clip(S_resp * (F_H valve + (1 - F_H) reheat), 0, headroom)

with ``dP_net = P_mech + P_inj - P_loss - D * L_remaining * (f - f_N)
+ P_shed``. All powers are deviations from the pre-event operating point in
MW. Storage and contingency power enter through a zero-order-hold callback.
"""
from __future__ import annotations

import copy
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidScenarioError, NumericDomainError, SimulationAbort
from .storage import (Measurement, Phase, StepController, StorageDevice,
                      controller_update, estimate_rocof)

logger = logging.getLogger(__name__)

__all__ = [
    "GovernorFleet",
    "UflsStage",
    "GridModel",
    "SystemState",
    "Trace",
    "DEFAULT_UFLS",
    "mechanical_power",
    "swing_derivative",
    "governor_derivatives",
    "rk4_step",
    "run_simulation",
]


@dataclass(frozen=True)
class GovernorFleet:
    responsive_mva: float
    droop_pu: float = 0.05
    t_governor_s: float = 0.2
    t_reheat_s: float = 8.0
    hp_fraction: float = 0.3
    headroom_mw: Optional[float] = None  # None -> 10% of responsive_mva

    def __post_init__(self):
        if self.headroom_mw is None:
            object.__setattr__(self, "headroom_mw", 0.1 * self.responsive_mva)
        if not self.responsive_mva >= 0:
            raise InvalidScenarioError("governor.responsive_mva must be >= 0")
        if not self.droop_pu > 0:
            raise InvalidScenarioError("governor.droop_pu must be > 0")
        if not (self.t_governor_s > 0 and self.t_reheat_s > 0):
            raise InvalidScenarioError("governor time constants must be > 0")
        if not 0.0 <= self.hp_fraction <= 1.0:
            raise InvalidScenarioError("governor.hp_fraction must be in [0, 1]")
        if not self.headroom_mw >= 0:
            raise InvalidScenarioError("governor.headroom_mw must be >= 0")


@dataclass(frozen=True)
class UflsStage:
    threshold_hz: float
    shed_fraction: float
    delay_s: float = 0.1

    def __post_init__(self):
        if not 0.0 < self.shed_fraction <= 1.0:
            raise InvalidScenarioError("ufls shed_fraction must be in (0, 1]")
        if not self.delay_s >= 0:
            raise InvalidScenarioError("ufls delay_s must be >= 0")


DEFAULT_UFLS = (
    UflsStage(59.3, 0.05, 0.1),
    UflsStage(58.9, 0.10, 0.1),
    UflsStage(58.5, 0.10, 0.1),
)


@dataclass(frozen=True)
class GridModel:
    capacity_mva: float
    inertia_s: float
    load_mw: float
    governor: GovernorFleet
    f_nominal: float = 60.0
    damping_pu_per_hz: float = 0.0
    ufls: Tuple[UflsStage, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "ufls", tuple(self.ufls))
        for name in ("f_nominal", "capacity_mva", "inertia_s", "load_mw"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise InvalidScenarioError(f"{name} must be a positive number, got {v}")
        if not self.damping_pu_per_hz >= 0:
            raise InvalidScenarioError("damping_pu_per_hz must be >= 0")
        thresholds = [s.threshold_hz for s in self.ufls]
        if any(th >= self.f_nominal for th in thresholds):
            raise InvalidScenarioError("ufls thresholds must be below f_nominal")
        if any(b >= a for a, b in zip(thresholds, thresholds[1:])):
            raise InvalidScenarioError("ufls thresholds must be strictly decreasing")

    @property
    def kinetic_energy_mws(self) -> float:
        return self.inertia_s * self.capacity_mva


@dataclass(frozen=True)
class SystemState:
    t: float
    freq_hz: float
    gov_valve_pu: float = 0.0
    gov_reheat_pu: float = 0.0
    mech_power_mw: float = 0.0
    load_remaining_fraction: float = 1.0

    @classmethod
    def initial(cls, model: GridModel, t: float = 0.0) -> "SystemState":
        return cls(t=t, freq_hz=model.f_nominal)


def mechanical_power(model: GridModel, valve_pu: float, reheat_pu: float) -> float:
    gov = model.governor
    p = gov.responsive_mva * (gov.hp_fraction * valve_pu
                              + (1.0 - gov.hp_fraction) * reheat_pu)
    return min(max(p, 0.0), gov.headroom_mw)


def _check_finite(*values):
    for v in values:
        if not math.isfinite(v):
            raise NumericDomainError(f"non-finite input {v!r}")


def swing_derivative(model: GridModel, state: SystemState, injection_mw: float,
                     loss_mw: float = 0.0) -> float:
    """Frequency rate of change in Hz/s.

    ``injection_mw`` is external power added at the bus (storage), and
    ``loss_mw`` the lost generation. Mechanical power comes from ``state``;
    load damping and shed load are accounted for here.
    """
    _check_finite(state.freq_hz, state.mech_power_mw, injection_mw, loss_mw)
    frac = state.load_remaining_fraction
    df = state.freq_hz - model.f_nominal
    p_net = (state.mech_power_mw + injection_mw - loss_mw
             - model.damping_pu_per_hz * model.load_mw * frac * df
             + model.load_mw * (1.0 - frac))
    return model.f_nominal * p_net / (2.0 * model.inertia_s * model.capacity_mva)


def governor_derivatives(model: GridModel, state: SystemState) -> Tuple[float, float]:
    """Rates of the valve and reheat states, per-unit on responsive capacity per s."""
    _check_finite(state.freq_hz, state.gov_valve_pu, state.gov_reheat_pu)
    gov = model.governor
    target = -(state.freq_hz - model.f_nominal) / (gov.droop_pu * model.f_nominal)
    d_valve = (target - state.gov_valve_pu) / gov.t_governor_s
    d_reheat = (state.gov_valve_pu - state.gov_reheat_pu) / gov.t_reheat_s
    return d_valve, d_reheat


def _rates(model: GridModel, f: float, valve: float, reheat: float,
           frac: float, injection_mw: float):
    # hot path for rk4_step; same equations as the two public functions above
    gov = model.governor
    fn = model.f_nominal
    pm = gov.responsive_mva * (gov.hp_fraction * valve + (1.0 - gov.hp_fraction) * reheat)
    pm = min(max(pm, 0.0), gov.headroom_mw)
    df = f - fn
    p_net = (pm + injection_mw - model.damping_pu_per_hz * model.load_mw * frac * df
             + model.load_mw * (1.0 - frac))
    dfdt = fn * p_net / (2.0 * model.inertia_s * model.capacity_mva)
    dv = (-df / (gov.droop_pu * fn) - valve) / gov.t_governor_s
    dr = (valve - reheat) / gov.t_reheat_s
    return dfdt, dv, dr


def rk4_step(model: GridModel, state: SystemState, dt: float,
             injections: Callable[[float], float]) -> SystemState:
    """Advance frequency and governor states by one classical RK4 step.

    ``injections(t)`` returns the net external power (storage minus
    contingency loss) in MW at sub-step time ``t``.
    """
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    t0 = state.t
    f, v, r = state.freq_hz, state.gov_valve_pu, state.gov_reheat_pu
    frac = state.load_remaining_fraction
    h2 = 0.5 * dt
    k1 = _rates(model, f, v, r, frac, injections(t0))
    k2 = _rates(model, f + h2 * k1[0], v + h2 * k1[1], r + h2 * k1[2], frac, injections(t0 + h2))
    k3 = _rates(model, f + h2 * k2[0], v + h2 * k2[1], r + h2 * k2[2], frac, injections(t0 + h2))
    k4 = _rates(model, f + dt * k3[0], v + dt * k3[1], r + dt * k3[2], frac, injections(t0 + dt))
    s6 = dt / 6.0
    f += s6 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
    v += s6 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
    r += s6 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
    if not (math.isfinite(f) and math.isfinite(v) and math.isfinite(r)):
        raise SimulationAbort(
            f"non-finite state after step at t={t0:.6f}s: f={f}, valve={v}, reheat={r}")
    return SystemState(t=t0 + dt, freq_hz=f, gov_valve_pu=v, gov_reheat_pu=r,
                       mech_power_mw=mechanical_power(model, v, r),
                       load_remaining_fraction=frac)


@dataclass
class Trace:
    """Uniformly sampled simulation output.

    Per-device arrays have shape ``(n_devices, n_samples)``; the ``es_*``
    columns are totals over devices. ``power`` at sample ``k`` is the value
    held over ``[t_k, t_k + dt)``.
    """

    t: np.ndarray
    freq_hz: np.ndarray
    rocof_hz_s: np.ndarray
    es_power_mw: np.ndarray
    es_soc_mws: np.ndarray
    mech_mw: np.ndarray
    load_fraction: np.ndarray
    shed_mw: np.ndarray
    device_power_mw: np.ndarray
    device_soc_mws: np.ndarray
    f_nominal: float
    dt: float
    p_max_mw: Tuple[float, ...] = ()
    e_max_mws: Tuple[float, ...] = ()
    events: list = field(default_factory=list)
    devices: list = field(default_factory=list)

    def __len__(self):
        return len(self.t)


def _resolve_beliefs(model: GridModel, devices: Sequence[StorageDevice]):
    out = []
    for dev in devices:
        dev = copy.deepcopy(dev)
        ctrl = dev.controller
        if isinstance(ctrl, StepController):
            if ctrl.assumed_inertia_s is None:
                ctrl.assumed_inertia_s = model.inertia_s
            if ctrl.assumed_capacity_mva is None:
                ctrl.assumed_capacity_mva = model.capacity_mva
            if not ctrl.activation_hz < model.f_nominal:
                raise InvalidScenarioError("step activation_hz must be below f_nominal")
        out.append(dev)
    return out


def run_simulation(model: GridModel, scenario, devices: Sequence[StorageDevice] = (),
                   *, measurement_filter_s: float = 0.5,
                   rocof_window_s: float = 0.25) -> Trace:
    """Simulate a step generation loss with optional storage support.

    ``scenario`` supplies ``loss_mw``, ``loss_time_s``, ``dt_s``,
    ``duration_s`` and ``ufls_enabled``. Devices are deep-copied, so the
    caller's objects are left untouched and repeated runs are identical.
    Controllers run once per step on the state at the step start and their
    outputs are held across the RK4 sub-steps.
    """
    dt = float(scenario.dt_s)
    duration = float(scenario.duration_s)
    if not dt > 0 or not duration > 0:
        raise InvalidScenarioError("dt_s and duration_s must be > 0")
    n = int(round(duration / dt))
    devs = _resolve_beliefs(model, devices)
    meters = [Measurement(t_filter_s=d.controller.t_filter_s, window_s=rocof_window_s)
              for d in devs]
    sys_meter = Measurement(t_filter_s=measurement_filter_s, window_s=rocof_window_s)
    stages = list(model.ufls) if scenario.ufls_enabled else []
    stage_below_since = [None] * len(stages)
    stage_tripped = [False] * len(stages)
    loss_mw, loss_time = float(scenario.loss_mw), float(scenario.loss_time_s)

    nd = len(devs)
    cols = {k: np.empty(n + 1) for k in ("f", "rocof", "mech", "frac", "shed")}
    dev_p = np.zeros((nd, n + 1))
    dev_soc = np.zeros((nd, n + 1))
    events = []
    phases = [getattr(d.controller, "phase", None) for d in devs]

    state = SystemState.initial(model)
    for k in range(n + 1):
        t = k * dt
        step_dt = dt if k < n else 0.0
        if state.t != t:
            state = replace(state, t=t)
        f = state.freq_hz
        sys_meter.sample(t, f, dt)
        rocof = estimate_rocof(sys_meter)
        p_total = 0.0
        for i, (dev, meter) in enumerate(zip(devs, meters)):
            meter.sample(t, f, dt)
            p = controller_update(dev, meter, t, step_dt, model.f_nominal)
            dev_p[i, k] = p
            dev_soc[i, k] = dev.soc_mws
            p_total += p
            ph = getattr(dev.controller, "phase", None)
            if ph is not phases[i]:
                events.append((t, i, ph.value))
                phases[i] = ph

        frac = state.load_remaining_fraction
        for j, stage in enumerate(stages):
            if stage_tripped[j]:
                continue
            if sys_meter.filtered_hz < stage.threshold_hz:
                if stage_below_since[j] is None:
                    stage_below_since[j] = t
                if t - stage_below_since[j] >= stage.delay_s - 1e-9:
                    stage_tripped[j] = True
                    frac *= 1.0 - stage.shed_fraction
                    events.append((t, -1, f"ufls@{stage.threshold_hz:g}"))
            else:
                stage_below_since[j] = None
        if frac != state.load_remaining_fraction:
            state = replace(state, load_remaining_fraction=frac)

        cols["f"][k] = f
        cols["rocof"][k] = rocof
        cols["mech"][k] = state.mech_power_mw
        cols["frac"][k] = frac
        cols["shed"][k] = model.load_mw * (1.0 - frac)
        if k == n:
            break
        net = p_total - (loss_mw if t >= loss_time - 1e-9 else 0.0)
        state = rk4_step(model, state, dt, lambda _t, _net=net: _net)

    tr = Trace(
        t=np.arange(n + 1) * dt,
        freq_hz=cols["f"],
        rocof_hz_s=cols["rocof"],
        es_power_mw=dev_p.sum(axis=0),
        es_soc_mws=dev_soc.sum(axis=0),
        mech_mw=cols["mech"],
        load_fraction=cols["frac"],
        shed_mw=cols["shed"],
        device_power_mw=dev_p,
        device_soc_mws=dev_soc,
        f_nominal=model.f_nominal,
        dt=dt,
        p_max_mw=tuple(d.p_max_mw for d in devs),
        e_max_mws=tuple(d.e_max_mws for d in devs),
        events=events,
        devices=devs,
    )
    logger.debug("simulated %d steps, %d devices, %d events", n, nd, len(events))
    return tr
