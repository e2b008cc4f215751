"""Acceptance gate: one test per criterion, each prints a PASS/FAIL line."""
import random
import time
from fractions import Fraction

import numpy as np
import pytest

from esfreq import grid
from esfreq.analysis import CROSSOVER_TOL_HZ, compute_metrics, sweep_capacity, sweep_duration
from esfreq.grid import GovernorFleet, GridModel, SystemState, swing_derivative
from esfreq.io import write_trace_csv
from esfreq.scenario import build_model, default_sweep, preset
from esfreq.storage import StepController, step_magnitude

from conftest import ACCEPTANCE_LINES

pytestmark = pytest.mark.usefixtures("record_runs")


def report(num, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {title} ({detail})"
    ACCEPTANCE_LINES.append((num, line))
    print(line)
    assert ok, line


def simulate(name, control="none", kind="hpes", penetration=80, **sc_kw):
    sc, devs = preset(name, control, kind, penetration=penetration, **sc_kw)
    return compute_metrics(grid.run_simulation(build_model(sc), sc, devs))


def test_c1_step_magnitude_exact():
    t0 = time.perf_counter()
    ctrl = StepController(alpha=0.85, activation_hz=59.85, assumed_inertia_s=1.0,
                          assumed_capacity_mva=560_000.0)
    got = step_magnitude(ctrl, -0.24107, 60.0)
    oracle = float(Fraction("0.85") * 2 * 1 * Fraction("0.24107") / 60 * 560_000)
    rel = abs(got - oracle) / oracle
    # the quoted ROCOF is the 4.5 GW loss slope rounded to five digits
    exact = step_magnitude(ctrl, -4_500.0 * 60.0 / (2 * 1.0 * 560_000.0), 60.0)
    rel_exact = abs(exact - 3_825.0) / 3_825.0

    rng = random.Random(20240611)
    worst = 0.0
    for _ in range(20):
        dp = rng.uniform(10.0, 5_000.0)
        h = rng.uniform(1.0, 10.0)
        c = rng.uniform(5_000.0, 600_000.0)
        model = GridModel(capacity_mva=c, inertia_s=h, load_mw=c,
                          governor=GovernorFleet(responsive_mva=c))
        rocof = swing_derivative(model, SystemState.initial(model), 0.0, loss_mw=dp)
        ctrl = StepController(alpha=0.85, activation_hz=59.9, assumed_inertia_s=h,
                              assumed_capacity_mva=c)
        worst = max(worst, abs(step_magnitude(ctrl, rocof, 60.0) - 0.85 * dp) / (0.85 * dp))
    elapsed = time.perf_counter() - t0
    ok = (rel < 1e-9 and rel_exact < 1e-9 and round(got) == 3825 and worst < 1e-9
          and elapsed < 1.0)
    report(1, "step size closed form", ok,
           f"P={got:.4f} MW (rel err {rel:.1e}), exact-slope P={exact:.6f} MW "
           f"(rel err {rel_exact:.1e}), round trip worst {worst:.1e}, {elapsed:.2f}s")


def test_c2_penetration_trend():
    t0 = time.perf_counter()
    nadirs = [simulate("EI", penetration=p).nadir_hz for p in (20, 40, 60, 80)]
    elapsed = time.perf_counter() - t0
    ok = all(b < a for a, b in zip(nadirs, nadirs[1:])) and elapsed < 5.0
    report(2, "nadir falls with renewable share", ok,
           "nadirs " + ", ".join(f"{n:.4f}" for n in nadirs) + f" Hz, {elapsed:.2f}s")


def test_c3_ercot_gate():
    t0 = time.perf_counter()
    base = simulate("ERCOT").nadir_hz
    droop = simulate("ERCOT", "droop", "hees").nadir_hz
    step = simulate("ERCOT", "step", "hees").nadir_hz
    elapsed = time.perf_counter() - t0
    ok = base < 59.3 and droop >= 59.3 and step >= 59.3 and elapsed < 5.0
    report(3, "ERCOT 59.3 Hz gate", ok,
           f"no storage {base:.4f}, droop {droop:.4f}, step {step:.4f} Hz, {elapsed:.2f}s")


def test_c4_step_beats_droop():
    droop = simulate("EI", "droop", "hees").nadir_hz
    step = simulate("EI", "step", "hees").nadir_hz
    report(4, "step above droop with HEES", step - droop >= 0.005,
           f"step {step:.4f}, droop {droop:.4f}, margin {step - droop:+.4f} Hz")


def test_c5_second_nadir():
    base = simulate("EI").nadir_hz
    m = simulate("EI", "step", "hpes")
    ok = m.has_second_nadir and 0.0 <= m.second_local_nadir_hz - base <= 0.05
    second = m.second_local_nadir_hz
    detail = (f"first {m.first_local_nadir_hz:.4f} at {m.first_local_nadir_time_s:.2f}s, "
              f"second {second:.4f} at {m.second_local_nadir_time_s:.2f}s, "
              f"no storage {base:.4f}, gap {second - base:+.4f} Hz"
              if m.has_second_nadir else "only one local nadir")
    report(5, "HPES second nadir", ok, detail)


def test_c6_capacity_sweep():
    sc, devs, spec = default_sweep("EI", "capacity")
    res = sweep_capacity(build_model(sc), sc, devs, spec.values)
    _, _, r2 = res.nadir_time_fit()
    tiny = res.tiny_mask
    tiny_gap = np.abs(res.nadir_hz[tiny] - res.baseline.nadir_hz)
    ok = (res.nadir_nondecreasing and res.saturation_ratio < 0.5 and r2 >= 0.98
          and res.fit_mask.sum() >= 3 and tiny.any() and np.all(tiny_gap <= 0.005))
    report(6, "capacity sweep", ok,
           f"monotone {res.nadir_nondecreasing}, saturation ratio {res.saturation_ratio:.3f}, "
           f"R2 {r2:.4f} over {int(res.fit_mask.sum())} pts, "
           f"tiny gap {tiny_gap.max() if tiny.any() else float('nan'):.5f} Hz")


def test_c7_duration_sweep():
    sc, devs, spec = default_sweep("EI", "duration")
    res = sweep_duration(build_model(sc), sc, devs, spec.values)
    i = res.argmax_index
    jumps = res.jump_indices
    at_star = len(jumps) == 1 and jumps[0] in (i - 1, i)
    gap = res.crossover_gap_hz
    ok = res.interior_argmax and gap <= CROSSOVER_TOL_HZ and at_star
    report(7, "duration sweep", ok,
           f"T*={res.values[i]:g}s interior {res.interior_argmax}, gap {gap:.4f} Hz, "
           f"jumps after {[float(res.values[j]) for j in jumps]}")


def test_c9_numerical_integrity(tmp_path):
    worst = 0.0
    for name, control, kind in (("EI", "none", "hpes"), ("EI", "droop", "hpes"),
                                ("EI", "step", "hpes"), ("ERCOT", "droop", "hees"),
                                ("ERCOT", "step", "hees")):
        a = simulate(name, control, kind, dt_s=0.01).nadir_hz
        b = simulate(name, control, kind, dt_s=0.005).nadir_hz
        worst = max(worst, abs(a - b))

    flat = 0.0
    for name in ("EI", "ERCOT"):
        for control in ("droop", "step"):
            sc, devs = preset(name, control, "hpes", loss_mw=0.0)
            tr = grid.run_simulation(build_model(sc), sc, devs)
            flat = max(flat, float(np.max(np.abs(tr.freq_hz - tr.f_nominal))))

    blobs = []
    for k in range(2):
        sc, devs = preset("EI", "step", "hpes")
        path = tmp_path / f"trace{k}.csv"
        write_trace_csv(grid.run_simulation(build_model(sc), sc, devs), path)
        blobs.append(path.read_bytes())
    same = blobs[0] == blobs[1]
    ok = worst < 1e-4 and flat < 1e-9 and same
    report(9, "numerical integrity", ok,
           f"dt halving {worst:.2e} Hz, flat deviation {flat:.1e} Hz, CSV identical {same}")


def audit(scenario, trace):
    problems = []
    for i, (p_max, e_max) in enumerate(zip(trace.p_max_mw, trace.e_max_mws)):
        p = trace.device_power_mw[i]
        if p.min() < 0.0 or p.max() > p_max * (1 + 1e-12):
            problems.append(f"power outside [0, {p_max}]")
        if np.trapezoid(p, trace.t) > e_max * (1 + 1e-6):
            problems.append("energy above capacity")
        if trace.device_soc_mws[i].min() < 0.0:
            problems.append("negative state of charge")
    if not scenario.ufls_enabled and np.any(trace.load_fraction != 1.0):
        problems.append("load shed with UFLS disabled")
    return problems


def test_c8_conservation_audit(record_runs):
    # runs after the other criteria so every trace they produced is audited
    for name in ("EI", "ERCOT"):
        for control in ("droop", "step"):
            for kind in ("hees", "hpes"):
                simulate(name, control, kind)
    simulate("EI", "droop", "hpes", ufls_enabled=True)
    bad = [(sc.name, p) for sc, tr in record_runs for p in audit(sc, tr)]
    report(8, "conservation audit", not bad,
           f"{len(record_runs)} runs audited, {len(bad)} violations {bad[:3]}")
