"""Energy-storage devices and their primary frequency controllers.

Two controllers are provided:

* :class:`DroopController`: low-pass filtered frequency deviation times a
  gain, saturated at the converter rating.
* :class:`StepController`: waits for the filtered frequency to cross an
  activation threshold and confirms for a fixed delay. It then sizes a
  one-shot power step from the measured ROCOF and holds it until the stored
  energy runs out.

Devices only discharge. Over-frequency charging is not modelled.
"""
from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Union

from .errors import NumericDomainError

__all__ = [
    "Kind",
    "Phase",
    "DroopController",
    "StepController",
    "Measurement",
    "StorageDevice",
    "filter_frequency",
    "estimate_rocof",
    "droop_command",
    "step_magnitude",
    "controller_update",
]


class Kind(str, enum.Enum):
    HEES = "hees"  # energy dense, effectively unlimited over a minute
    HPES = "hpes"  # power dense, a few seconds of full output


class Phase(str, enum.Enum):
    ARMED = "armed"
    CONFIRMING = "confirming"
    ACTIVE = "active"
    EXHAUSTED = "exhausted"


@dataclass
class DroopController:
    """Proportional response to the filtered under-frequency.

    ``droop_ratio`` is per unit on the device rating: full output is reached
    at a deviation of ``droop_ratio * f_nominal``.
    """

    droop_ratio: float
    t_filter_s: float = 0.5
    deadband_hz: float = 0.0

    def __post_init__(self):
        if not self.droop_ratio > 0:
            raise ValueError(f"droop_ratio must be > 0, got {self.droop_ratio}")
        if not self.t_filter_s > 0:
            raise ValueError(f"t_filter_s must be > 0, got {self.t_filter_s}")
        if not self.deadband_hz >= 0:
            raise ValueError(f"deadband_hz must be >= 0, got {self.deadband_hz}")


@dataclass
class StepController:
    """ROCOF-sized constant injection, triggered by a frequency threshold.

    ``assumed_inertia_s`` and ``assumed_capacity_mva`` are the controller's
    belief about the system. Left as ``None`` they are filled in with the true
    model values when a simulation starts.
    """

    alpha: float
    activation_hz: float
    delay_s: float = 0.5
    t_filter_s: float = 0.5
    assumed_inertia_s: Optional[float] = None
    assumed_capacity_mva: Optional[float] = None
    override_power_mw: Optional[float] = None
    phase: Phase = Phase.ARMED
    confirm_started_at: Optional[float] = None
    p_step_mw: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if not self.delay_s >= 0:
            raise ValueError(f"delay_s must be >= 0, got {self.delay_s}")
        if not self.t_filter_s > 0:
            raise ValueError(f"t_filter_s must be > 0, got {self.t_filter_s}")
        if self.override_power_mw is not None and self.override_power_mw < 0:
            raise ValueError("override_power_mw must be >= 0")
        self.phase = Phase(self.phase)


Controller = Union[DroopController, StepController]


@dataclass
class Measurement:
    """PLL-style frequency measurement: first-order lag plus ROCOF window."""

    t_filter_s: float = 0.5
    window_s: float = 0.25
    raw_hz: float = math.nan
    filtered_hz: float = math.nan
    rocof_hz_per_s: float = 0.0
    warming_up: bool = True
    history: deque = field(default_factory=deque, repr=False)

    def __post_init__(self):
        if not self.window_s > 0:
            raise ValueError(f"window_s must be > 0, got {self.window_s}")
        if not self.t_filter_s > 0:
            raise ValueError(f"t_filter_s must be > 0, got {self.t_filter_s}")

    def sample(self, t: float, raw_hz: float, dt: float) -> float:
        """Filter one raw sample and append it to the ROCOF history."""
        if math.isnan(self.filtered_hz):
            self.raw_hz = self.filtered_hz = raw_hz
        else:
            filter_frequency(self, raw_hz, dt)
        h = self.history
        h.append((t, self.filtered_hz))
        # keep one sample older than the window so the span test can pass
        while len(h) > 2 and h[1][0] <= t - self.window_s + 1e-9:
            h.popleft()
        return self.filtered_hz


@dataclass
class StorageDevice:
    p_max_mw: float
    e_max_mws: float
    controller: Controller
    kind: Kind = Kind.HPES
    soc_mws: Optional[float] = None
    name: str = "es"

    def __post_init__(self):
        self.kind = Kind(self.kind)
        if not self.p_max_mw >= 0:
            raise ValueError(f"p_max_mw must be >= 0, got {self.p_max_mw}")
        if not self.e_max_mws >= 0:
            raise ValueError(f"e_max_mws must be >= 0, got {self.e_max_mws}")
        if self.soc_mws is None:
            self.soc_mws = self.e_max_mws
        if not 0 <= self.soc_mws <= self.e_max_mws:
            raise ValueError("soc_mws must lie in [0, e_max_mws]")

    @property
    def support_s(self) -> float:
        """Seconds of full-rated output the stored energy can sustain."""
        return self.e_max_mws / self.p_max_mw if self.p_max_mw > 0 else math.inf


def filter_frequency(meas: Measurement, raw_hz: float, dt: float) -> float:
    """Advance the first-order lag ``y += dt/T (u - y)`` by one sample."""
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    meas.raw_hz = raw_hz
    meas.filtered_hz += dt / meas.t_filter_s * (raw_hz - meas.filtered_hz)
    return meas.filtered_hz


def estimate_rocof(meas: Measurement, history=None) -> float:
    """Least-squares slope of filtered frequency over the trailing window.

    ``history`` is a sequence of ``(t, hz)`` pairs, newest last; by default
    the measurement's own history. Returns 0 and sets ``meas.warming_up``
    while the samples do not yet span ``meas.window_s``.
    """
    h = meas.history if history is None else history
    if len(h) < 2:
        meas.warming_up = True
        meas.rocof_hz_per_s = 0.0
        return 0.0
    t_end = h[-1][0]
    start = t_end - meas.window_s
    pts = [(t, y) for t, y in h if t >= start - 1e-9]
    if h[0][0] > start + 1e-9 or len(pts) < 2:
        if len(pts) >= 2 and pts[0][0] == pts[-1][0]:
            raise NumericDomainError("ROCOF window has identical timestamps")
        meas.warming_up = True
        meas.rocof_hz_per_s = 0.0
        return 0.0
    n = len(pts)
    tm = sum(p[0] for p in pts) / n
    ym = sum(p[1] for p in pts) / n
    sxx = sum((p[0] - tm) ** 2 for p in pts)
    if sxx == 0.0:
        raise NumericDomainError("ROCOF window has identical timestamps")
    sxy = sum((p[0] - tm) * (p[1] - ym) for p in pts)
    meas.warming_up = False
    meas.rocof_hz_per_s = sxy / sxx
    return meas.rocof_hz_per_s


def droop_command(ctrl: DroopController, device: StorageDevice,
                  f_nominal: float, filtered_hz: float) -> float:
    dev = max(0.0, f_nominal - filtered_hz - ctrl.deadband_hz)
    p = dev / (ctrl.droop_ratio * f_nominal) * device.p_max_mw
    return min(max(p, 0.0), device.p_max_mw)


def step_magnitude(ctrl: StepController, rocof: float, f_nominal: float,
                   p_max_mw: float = math.inf) -> float:
    """Size the step as ``alpha * 2 H |rocof| / f_N * C``, capped at ``p_max_mw``.

    A non-negative ROCOF is not a generation loss and yields 0. When
    ``override_power_mw`` is set it replaces the ROCOF-based size.
    """
    if ctrl.override_power_mw is not None:
        return min(ctrl.override_power_mw, p_max_mw)
    if not math.isfinite(rocof):
        raise NumericDomainError(f"non-finite ROCOF {rocof}")
    if rocof >= 0.0:
        return 0.0
    if ctrl.assumed_inertia_s is None or ctrl.assumed_capacity_mva is None:
        raise ValueError("step controller has no inertia/capacity belief")
    p = (ctrl.alpha * 2.0 * ctrl.assumed_inertia_s * (-rocof) / f_nominal
         * ctrl.assumed_capacity_mva)
    return min(p, p_max_mw)


def _step_update(ctrl: StepController, device: StorageDevice,
                 meas: Measurement, t: float, f_nominal: float) -> float:
    if ctrl.phase is Phase.ARMED:
        if meas.filtered_hz < ctrl.activation_hz:
            ctrl.phase = Phase.CONFIRMING
            ctrl.confirm_started_at = t
    if ctrl.phase is Phase.CONFIRMING:
        if t - ctrl.confirm_started_at >= ctrl.delay_s - 1e-9:
            rocof = estimate_rocof(meas)
            if ctrl.override_power_mw is None and rocof >= 0.0:
                # not a loss after all
                ctrl.phase = Phase.ARMED
                ctrl.confirm_started_at = None
                return 0.0
            ctrl.p_step_mw = step_magnitude(ctrl, rocof, f_nominal, device.p_max_mw)
            ctrl.phase = Phase.ACTIVE
        else:
            return 0.0
    if ctrl.phase is Phase.ACTIVE:
        return ctrl.p_step_mw
    return 0.0


def controller_update(device: StorageDevice, meas: Measurement, t: float,
                      dt: float, f_nominal: float = 60.0) -> float:
    """Output power for the coming step; debits the stored energy.

    ``meas`` must already hold the sample for time ``t``. The returned power
    is held over ``[t, t + dt)``. If the remaining energy cannot cover a full
    step the power is cut so the device drains to exactly zero, after which
    it stays at zero. ``dt = 0`` evaluates without debiting energy.
    """
    ctrl = device.controller
    if device.soc_mws <= 0.0:
        if isinstance(ctrl, StepController) and ctrl.phase is Phase.ACTIVE:
            ctrl.phase = Phase.EXHAUSTED
        return 0.0
    if isinstance(ctrl, DroopController):
        p = droop_command(ctrl, device, f_nominal, meas.filtered_hz)
    else:
        p = _step_update(ctrl, device, meas, t, f_nominal)
    p = min(max(p, 0.0), device.p_max_mw)
    if dt > 0 and p > 0:
        if p * dt >= device.soc_mws:
            p = device.soc_mws / dt
            device.soc_mws = 0.0
            if isinstance(ctrl, StepController):
                ctrl.phase = Phase.EXHAUSTED
        else:
            device.soc_mws -= p * dt
    return p
