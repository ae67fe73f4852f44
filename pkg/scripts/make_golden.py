"""Regenerate the cached sweep tables under tests/golden (long: about an hour on one core)."""

import argparse
import logging
from pathlib import Path

import numpy as np

from fredkin_cqed import experiments as ex
from fredkin_cqed.dynamics import IntegratorConfig

OUT = Path(__file__).resolve().parent.parent / "tests" / "golden"
EXPM = IntegratorConfig(method="expm")


def region_grid(scenario):
    (c_rng, d_rng, _) = ex.claimed_region(scenario)
    c_lo, c_hi = ex.shrink(c_rng)
    d_lo, d_hi = ex.shrink(d_rng)
    return tuple(np.linspace(c_lo, c_hi, 3)), tuple(np.linspace(d_lo, d_hi, 3))


def save(name, rows, spec, extra=None):
    meta = ex.spec_metadata(spec)
    meta.update(extra or {})
    ex.write_results(rows, OUT / name, meta, timings=False)
    print("wrote", name, flush=True)


def anchors():
    for lossy_pulse, name in ((True, "anchors.csv"), (False, "anchors_closed_pulse.csv")):
        rows = []
        for scen in ex.SCENARIOS:
            spec = ex.SweepSpec(scenario=scen, D_grid=(ex.ANCHOR_D[scen],), lossy_pulse=lossy_pulse)
            rows += ex.sweep_detuning(spec)
        save(name, rows, spec, {"note": "scenario varies per row; D per row"})


def detuning():
    for scen in ex.SCENARIOS:
        spec = ex.SweepSpec(scenario=scen)
        save(f"detuning_{scen}.csv", ex.sweep_detuning(spec), spec)


def regions():
    interp = {"interpretation": "delta2 = c * delta1 with D = delta1/g fixed; g2 = d * g1; nominal gate time"}
    for scen in ("noon", "cat"):
        c_grid, d_grid = region_grid(scen)
        spec = ex.SweepSpec(scenario=scen, D_grid=(ex.ANCHOR_D[scen],), c_grid=c_grid, d_grid=d_grid,
                            integrator=EXPM)
        save(f"region_{scen}.csv", ex.sweep_inhomogeneity(spec), spec, interp)
    panels = {
        "noon": (np.linspace(0.9995, 1.0005, 6), np.linspace(0.95, 1.05, 6)),
        "coherent": (np.linspace(0.9995, 1.0005, 3), np.linspace(0.95, 1.05, 3)),
        "cat": (np.linspace(0.9995, 1.0005, 3), np.linspace(0.95, 1.05, 3)),
    }
    for scen, (c_grid, d_grid) in panels.items():
        spec = ex.SweepSpec(scenario=scen, D_grid=(ex.ANCHOR_D[scen],), c_grid=tuple(c_grid),
                            d_grid=tuple(d_grid), integrator=EXPM)
        save(f"panel_{scen}.csv", ex.sweep_inhomogeneity(spec), spec, interp)


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("parts", nargs="*", default=["anchors", "regions", "detuning"])
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    OUT.mkdir(parents=True, exist_ok=True)
    for part in args.parts:
        {"anchors": anchors, "detuning": detuning, "regions": regions}[part]()
