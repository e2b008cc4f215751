"""Frequency-response metrics and the storage sensitivity sweeps."""
from __future__ import annotations

import copy
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .errors import SweepError
from .grid import Trace, run_simulation
from .storage import StepController, StorageDevice

__all__ = [
    "PROMINENCE_HZ",
    "CROSSOVER_TOL_HZ",
    "SETTLING_WINDOW_S",
    "Metrics",
    "SweepResult",
    "local_minima",
    "compute_metrics",
    "sweep_capacity",
    "sweep_duration",
    "point_device",
]

PROMINENCE_HZ = 0.005
CROSSOVER_TOL_HZ = 0.01
SETTLING_WINDOW_S = 5.0


@dataclass
class Metrics:
    nadir_hz: float
    nadir_time_s: float
    settling_hz: float
    min_rocof_hz_per_s: float
    energy_used_mws: float
    peak_power_mw: float
    ufls_triggered: bool
    first_local_nadir_hz: Optional[float] = None
    first_local_nadir_time_s: Optional[float] = None
    second_local_nadir_hz: Optional[float] = None
    second_local_nadir_time_s: Optional[float] = None
    support_s: float = 0.0
    exhausted: bool = False
    exhausted_at_s: Optional[float] = None

    @property
    def has_second_nadir(self) -> bool:
        return self.second_local_nadir_hz is not None

    def as_row(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def local_minima(freq: Sequence[float], prominence: float = PROMINENCE_HZ) -> List[int]:
    """Indices of the distinct dips in ``freq``.

    A dip counts once the signal has fallen at least ``prominence`` below
    the preceding high and then risen at least ``prominence`` above the dip.
    A dip still open at the end of the record is not reported.
    """
    f = np.asarray(freq, dtype=float)
    out = []
    if f.size < 3:
        return out
    seeking_min = False
    hi = lo = 0
    for i in range(1, f.size):
        x = f[i]
        if seeking_min:
            if x < f[lo]:
                lo = i
            elif x >= f[lo] + prominence:
                out.append(lo)
                seeking_min = False
                hi = i
        else:
            if x > f[hi]:
                hi = i
            elif x <= f[hi] - prominence:
                seeking_min = True
                lo = i
    return out


def compute_metrics(trace: Trace, prominence: float = PROMINENCE_HZ,
                    settling_window_s: float = SETTLING_WINDOW_S) -> Metrics:
    t, f = trace.t, trace.freq_hz
    if len(t) == 0:
        raise ValueError("empty trace")
    i = int(np.argmin(f))
    span = t[-1] - t[0]
    if span < settling_window_s:
        warnings.warn(f"trace spans {span:.3g}s < settling window {settling_window_s}s; "
                      "settling frequency uses the whole record", stacklevel=2)
    tail = t >= t[-1] - settling_window_s - 1e-9
    p = trace.es_power_mw
    active = np.flatnonzero(p > 0)
    support = 0.0 if active.size == 0 else (active[-1] - active[0] + 1) * trace.dt
    exhausted = bool(len(trace.e_max_mws)) and bool(
        np.any((trace.device_soc_mws[:, -1] <= 0.0) & (np.asarray(trace.e_max_mws) > 0)))
    exhausted_at = None
    if exhausted and active.size and active[-1] + 1 < len(t):
        # first sample after the combined output stopped
        exhausted_at = float(t[active[-1] + 1])
    m = Metrics(
        nadir_hz=float(f[i]),
        nadir_time_s=float(t[i]),
        settling_hz=float(np.mean(f[tail])),
        min_rocof_hz_per_s=float(np.min(trace.rocof_hz_s)),
        # power is held over each step, so delivered energy is a plain sum
        energy_used_mws=float(np.sum(p[:-1]) * trace.dt),
        peak_power_mw=float(np.max(p)) if p.size else 0.0,
        ufls_triggered=bool(np.any(trace.load_fraction < 1.0)),
        support_s=float(support),
        exhausted=exhausted,
        exhausted_at_s=exhausted_at,
    )
    mins = local_minima(f, prominence)
    if len(mins) > 2:
        mins = sorted(sorted(mins, key=lambda j: f[j])[:2])
    if mins:
        m.first_local_nadir_hz = float(f[mins[0]])
        m.first_local_nadir_time_s = float(t[mins[0]])
    if len(mins) == 2:
        m.second_local_nadir_hz = float(f[mins[1]])
        m.second_local_nadir_time_s = float(t[mins[1]])
    return m


@dataclass
class SweepResult:
    parameter: str
    values: np.ndarray
    metrics: List[Metrics]
    baseline: Metrics
    jump_threshold_s: float = 10.0
    tiny_support_s: float = 1.0
    fit_mask: np.ndarray = field(default=None)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.fit_mask is None:
            self.fit_mask = self.mid_range_mask()

    @property
    def nadir_hz(self) -> np.ndarray:
        return np.array([m.nadir_hz for m in self.metrics])

    @property
    def nadir_time_s(self) -> np.ndarray:
        return np.array([m.nadir_time_s for m in self.metrics])

    @property
    def support_s(self) -> np.ndarray:
        return np.array([m.support_s for m in self.metrics])

    @property
    def tiny_mask(self) -> np.ndarray:
        return self.support_s < self.tiny_support_s

    def mid_range_mask(self) -> np.ndarray:
        """Points whose storage lasted at least ``tiny_support_s`` and ran dry in the run."""
        exhausted = np.array([m.exhausted for m in self.metrics])
        return ~self.tiny_mask & exhausted

    @property
    def nadir_nondecreasing(self) -> bool:
        return bool(np.all(np.diff(self.nadir_hz) >= 0.0))

    @property
    def saturation_ratio(self) -> float:
        """Last nadir increment over the first one; small means saturated."""
        inc = np.diff(self.nadir_hz)
        return float(inc[-1] / inc[0]) if inc.size and inc[0] > 0 else math.nan

    def nadir_time_fit(self):
        """``(slope, intercept, r2)`` of nadir time against the swept value over ``fit_mask``."""
        x = self.values[self.fit_mask]
        y = self.nadir_time_s[self.fit_mask]
        if x.size < 3:
            return math.nan, math.nan, math.nan
        slope, icpt = np.polyfit(x, y, 1)
        resid = y - (slope * x + icpt)
        ss_tot = np.sum((y - y.mean()) ** 2)
        r2 = 1.0 - np.sum(resid ** 2) / ss_tot if ss_tot > 0 else 1.0
        return float(slope), float(icpt), float(r2)

    @property
    def argmax_index(self) -> int:
        return int(np.argmax(self.nadir_hz))

    @property
    def interior_argmax(self) -> bool:
        i = self.argmax_index
        return 0 < i < len(self.values) - 1

    @property
    def crossover_gap_hz(self) -> float:
        """|first - second local nadir| at the argmax point (nan without two dips)."""
        m = self.metrics[self.argmax_index]
        if not m.has_second_nadir:
            return math.nan
        return abs(m.first_local_nadir_hz - m.second_local_nadir_hz)

    @property
    def jump_indices(self) -> List[int]:
        """``i`` such that nadir time jumps by more than the threshold between ``i`` and ``i+1``."""
        d = np.abs(np.diff(self.nadir_time_s))
        return [int(i) for i in np.flatnonzero(d > self.jump_threshold_s)]

    @property
    def nadir_branch(self) -> List[str]:
        """``second`` where the global nadir comes after the storage ran dry, else ``first``.

        Short, strong discharges can merge both dips into one, so the split
        is made on timing rather than on the count of local minima.
        """
        return ["second" if m.exhausted_at_s is not None and m.nadir_time_s > m.exhausted_at_s
                else "first" for m in self.metrics]


def _run_point(args):
    model, scenario, devices = args
    return compute_metrics(run_simulation(model, scenario, devices))


def _run_all(model, scenario, device_sets, values, workers):
    jobs = [(model, scenario, d) for d in device_sets]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            futures = [ex.submit(_run_point, j) for j in jobs]
            out = []
            for v, fut in zip(values, futures):
                try:
                    out.append(fut.result())
                except Exception as exc:
                    raise SweepError(v, exc) from exc
            return out
    out = []
    for v, job in zip(values, jobs):
        try:
            out.append(_run_point(job))
        except Exception as exc:
            raise SweepError(v, exc) from exc
    return out


def _single_device(devices: Sequence[StorageDevice]) -> StorageDevice:
    if len(devices) != 1:
        raise ValueError(f"sweeps act on one aggregated device, got {len(devices)}")
    return devices[0]


def _check_ascending(values, minimum, what):
    vals = [float(v) for v in values]
    if len(vals) < minimum:
        raise ValueError(f"{what} needs at least {minimum} points, got {len(vals)}")
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise ValueError(f"{what} must be strictly ascending")
    return vals


def point_device(kind: str, proto: StorageDevice, value: float) -> StorageDevice:
    """Copy of ``proto`` configured for one sweep point.

    ``capacity`` sets the energy (full at start); ``duration`` forces the
    step size to ``min(e_max / value, p_max)``.
    """
    d = copy.deepcopy(proto)
    if kind == "capacity":
        d.e_max_mws = d.soc_mws = float(value)
    elif kind == "duration":
        if not isinstance(d.controller, StepController):
            raise ValueError("duration sweep needs a step-controlled device")
        d.controller.override_power_mw = min(d.e_max_mws / value, d.p_max_mw)
    else:
        raise ValueError(f"unknown sweep kind {kind!r}")
    return d


def sweep_capacity(model, scenario, devices: Sequence[StorageDevice], e_values,
                   *, workers: Optional[int] = None) -> SweepResult:
    """Re-run the scenario once per storage energy capacity (MW*s).

    The device keeps its own controller, usually droop for this sweep. The
    no-storage run is kept as ``baseline``.
    """
    vals = _check_ascending(e_values, 4, "e_values")
    if any(v < 0 for v in vals):
        raise ValueError("e_values must be >= 0")
    proto = _single_device(devices)
    sets = [[point_device("capacity", proto, e)] for e in vals]
    baseline = _run_point((model, scenario, []))
    metrics = _run_all(model, scenario, sets, vals, workers)
    return SweepResult("e_max_mws", np.array(vals), metrics, baseline)


def sweep_duration(model, scenario, devices: Sequence[StorageDevice], durations_s,
                   *, workers: Optional[int] = None,
                   jump_threshold_s: float = 10.0) -> SweepResult:
    """Spread the device's fixed energy over different discharge durations.

    For each duration ``T`` the step size is forced to ``min(e_max / T,
    p_max)``; the ROCOF-based sizing is bypassed.
    """
    vals = _check_ascending(durations_s, 2, "durations_s")
    if vals[0] <= 0:
        raise ValueError("durations must be positive")
    proto = _single_device(devices)
    if not isinstance(proto.controller, StepController):
        raise ValueError("duration sweep needs a step-controlled device")
    sets = [[point_device("duration", proto, td)] for td in vals]
    baseline = _run_point((model, scenario, []))
    metrics = _run_all(model, scenario, sets, vals, workers)
    return SweepResult("discharge_duration_s", np.array(vals), metrics, baseline,
                       jump_threshold_s=jump_threshold_s)
