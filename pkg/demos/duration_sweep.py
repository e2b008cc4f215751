"""Spreading a fixed HPES energy over longer discharges.

Short bursts leave a deep dip when the device empties; long trickles barely
help the first dip. The best duration sits where the two dips are equal.
"""
from pathlib import Path

from esfreq.analysis import sweep_duration
from esfreq.io import emit_svg_plot, write_sweep_csv
from esfreq.scenario import build_model, default_sweep

out = Path("demo_output")
out.mkdir(exist_ok=True)

sc, devs, spec = default_sweep("EI", "duration")
res = sweep_duration(build_model(sc), sc, devs, spec.values)

for td, m, branch in zip(res.values, res.metrics, res.nadir_branch):
    dips = [d for d in (m.first_local_nadir_hz, m.second_local_nadir_hz) if d is not None]
    when = "after the store ran dry" if branch == "second" else "while discharging"
    print(f"T={td:4.0f} s  P={devs[0].e_max_mws / td:6.0f} MW  nadir {m.nadir_hz:.4f} Hz "
          f"at {m.nadir_time_s:5.1f} s {when}; dips " + ", ".join(f"{d:.4f}" for d in dips))

best = res.values[res.argmax_index]
print(f"best duration {best:g} s, dips differ by {res.crossover_gap_hz:.4f} Hz there")
print("nadir time jumps after T =", [float(res.values[i]) for i in res.jump_indices])

write_sweep_csv(res, out / "duration_sweep.csv")
emit_svg_plot([(res.values, res.nadir_hz)], ["nadir"], out / "duration_nadir.svg",
              xlabel="discharge duration (s)", ylabel="nadir (Hz)")
emit_svg_plot([(res.values, res.nadir_time_s)], ["nadir time"], out / "duration_nadir_time.svg",
              xlabel="discharge duration (s)", ylabel="nadir time (s)")
