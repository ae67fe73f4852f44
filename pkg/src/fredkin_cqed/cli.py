"""Command-line entry point."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import math
import sys
from typing import List, Optional, Sequence

import numpy as np

from . import analytics, experiments as ex
from .dynamics import IntegratorConfig
from .errors import ConfigError, FredkinError
from .fredkin import (
    ControlAmplitudes,
    InitialCase,
    TargetState,
    measure_control,
    simulate_swap_test,
    target_entangled_state,
)
from .hilbert import cat_state, coherent_state, fock_state

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
SUBCOMMANDS = ("gate", "entangle", "swap-test", "sweep-d", "sweep-cd", "nv-validate", "audit")


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {text!r}")


def _key_listing() -> str:
    lines = ["config keys (section, units, default):"]
    for k in ex.CONFIG_KEYS:
        units = k.units or "-"
        lines.append(f"  [{k.section}] {k.name:<24} {units:<8} {k.default!r:<14} {k.help}")
    lines.append(f"default config directory: ${ex.CONFIG_ENV}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="config file with [params], [sweep], [integrator] sections")
    common.add_argument("--out", help="CSV output path")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key (repeatable)")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
    common.add_argument("--scenario", "--case", dest="scenario", choices=ex.SCENARIOS)
    common.add_argument("--mode", choices=("full", "effective"))
    common.add_argument("--lossy", type=_bool, metavar="BOOL")
    common.add_argument("--timing", choices=ex.TIMINGS)
    common.add_argument("--include-pulse", dest="include_pulse", action=argparse.BooleanOptionalAction,
                        default=None)
    common.add_argument("-v", "--verbose", action="store_true", help="log one line per sweep point")

    parser = argparse.ArgumentParser(
        prog="fredkin-cqed",
        description="Qutrit-mediated controlled swap of two bosonic memories.",
        epilog=_key_listing(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="{" + ",".join(SUBCOMMANDS) + "}")
    helps = {
        "gate": "run the gate stage once and compare with the ideal controlled swap",
        "entangle": "gate plus readout pulse, then measure the control",
        "swap-test": "infer |<phi|psi>|^2 from the control readout",
        "sweep-d": "fidelity versus D = delta/g",
        "sweep-cd": "fidelity over the c, d inhomogeneity grid",
        "nv-validate": "spin-ensemble versus collective-mode dynamics",
        "audit": "exact-swap identity, concurrence divergence table and truncation tails",
    }
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, parents=[common], help=helps[name], description=helps[name],
                           epilog=_key_listing(), formatter_class=argparse.RawDescriptionHelpFormatter)
        if name == "swap-test":
            p.add_argument("--state-a", default="coherent:1.1", help="memory 1 input, e.g. coherent:1.1, fock:2, "
                           "cat-even:1.1, cat-odd:1.1, vector:0.6,0.8")
            p.add_argument("--state-b", default="coherent:1.1", help="memory 2 input, same syntax")
        if name == "nv-validate":
            p.add_argument("--spins", default="3,4,5", help="comma-separated spin counts (<= 6)")
            p.add_argument("--excitations", default="1,2", help="comma-separated excitation numbers")
    return parser


def _memory_vector(text: str, dim: int) -> np.ndarray:
    kind, _, arg = text.partition(":")
    try:
        if kind == "coherent":
            return coherent_state(complex(arg), dim).amplitudes
        if kind == "fock":
            return fock_state(int(arg), dim).amplitudes
        if kind in ("cat-even", "cat-odd"):
            return cat_state(complex(arg), kind.split("-")[1], dim).amplitudes
        if kind == "vector":
            return np.array([complex(x) for x in arg.split(",")])
    except ValueError as exc:
        raise ConfigError(f"bad state spec {text!r}: {exc}") from None
    raise ConfigError(f"unknown state kind {kind!r} in {text!r}; use coherent, fock, cat-even, cat-odd or vector")


def _point_D(values, scenario) -> float:
    return values["D"] if values["D"] is not None else ex.ANCHOR_D[scenario]


def _emit(rows, args, values, extra=None):
    meta = ex.config_metadata(values)
    meta.update(extra or {})
    if args.out:
        ex.write_results(rows, args.out, meta)
        print(f"wrote {len(rows)} rows to {args.out}")


def _summary(rows) -> None:
    print(f"{'scenario':<9} {'D':>7} {'c':>9} {'d':>7} {'fidelity':>10} {'leak_a':>10}  error")
    for r in rows:
        print(f"{r.scenario:<9} {r.D:7.2f} {r.c:9.5f} {r.d:7.4f} {r.fidelity:10.6f} {r.leak_a:10.3e}  {r.error}")


def _cmd_gate(args, values, spec):
    include = bool(args.include_pulse)
    spec = dataclasses.replace(spec, include_pulse=include)
    D = _point_D(values, spec.scenario)
    row = ex.run_point(spec, D)
    if row.error:
        print(row.error, file=sys.stderr)
        return EXIT_NUMERIC
    label = "overlap with ideal" if not spec.lossy else "fidelity"
    print(f"{spec.scenario} D={D:g} mode={spec.mode} lossy={spec.lossy} pulse={include}")
    print(f"{label}: {row.fidelity:.12f}")
    print(f"leak_a: {row.leak_a:.3e}  trace_error: {row.trace_error:.3e}  t_swap: {row.t_swap:.6e} s")
    _emit([row], args, values)
    return EXIT_OK


def _cmd_entangle(args, values, spec):
    D = _point_D(values, spec.scenario)
    spec = dataclasses.replace(spec, include_pulse=True)
    params = spec.params(D)
    case = spec.case()
    row, result = ex.run_point_with_result(spec, D)
    if result is None:
        print(row.error, file=sys.stderr)
        return EXIT_NUMERIC
    outcome = measure_control(result.final_state)
    print(f"{spec.scenario} D={D:g} fidelity={result.fidelity:.6f} leak_a={result.leak_a:.3e}")
    print(f"p_g={outcome.p_g:.6f} p_e={outcome.p_e:.6f} p_a={outcome.p_a:.3e}")
    for lvl, branch, state in (("e", "+", outcome.state_e), ("g", "-", outcome.state_g)):
        if state is None:
            print(f"branch {lvl}: absent")
            continue
        try:
            target = target_entangled_state(TargetState(case, branch), params.layout)
        except FredkinError as exc:
            print(f"branch {lvl}: target undefined ({exc})")
            continue
        print(f"branch {lvl}: fidelity with target psi{branch} = {analytics.state_fidelity(target, state):.6f}")
    _emit([row], args, values)
    return EXIT_OK


def _cmd_swap_test(args, values, spec):
    d = spec.cutoff or ex.DEFAULT_CUTOFF["coherent"]
    psi = _memory_vector(args.state_a, d)
    phi = _memory_vector(args.state_b, d)
    control = ControlAmplitudes(spec.control_gamma, spec.control_eta)
    case = InitialCase.custom(psi, phi, control)
    params = dataclasses.replace(spec, cutoff=d).params(_point_D(values, "noon"))
    mode = args.mode or "effective"
    lossy = bool(args.lossy) if args.lossy is not None else False
    estimate, outcome = simulate_swap_test(params, case, mode=mode, lossy=lossy, cfg=spec.integrator,
                                           frame_correction=spec.frame_correction)
    a, b = case.memory_kets(d, d)
    exact = abs(a.overlap(b)) ** 2
    print(f"p_g={outcome.p_g:.9f}")
    print(f"inferred F^2={estimate.overlap_sq:.6f} (raw {estimate.raw:.6f}{', clamped' if estimate.clamped else ''})")
    print(f"exact |<phi|psi>|^2={exact:.6f}")
    return EXIT_OK


def _cmd_sweep_d(args, values, spec):
    rows = ex.sweep_detuning(spec, jobs=args.jobs)
    _summary(rows)
    _emit(rows, args, values)
    return EXIT_NUMERIC if all(r.error for r in rows) else EXIT_OK


def _cmd_sweep_cd(args, values, spec):
    D = _point_D(values, spec.scenario)
    spec = dataclasses.replace(spec, D_grid=(D,))
    rows = ex.sweep_inhomogeneity(spec, jobs=args.jobs)
    _summary(rows)
    _emit(rows, args, values, {"interpretation": "delta2 = c * delta1 with D = delta1/g fixed; g2 = d * g1"})
    return EXIT_NUMERIC if all(r.error for r in rows) else EXIT_OK


def _ints(text: str, name: str) -> List[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"--{name} needs comma-separated integers, got {text!r}") from None


def _cmd_nv(args, values, spec):
    from .nv import SpinEnsembleSpec, validate_low_excitation

    g = 2 * math.pi * values["g_over_2pi"]
    D = _point_D(values, "noon")
    print(f"{'N':>3} {'k':>3} {'max trace distance':>20}")
    for n in _ints(args.spins, "spins"):
        for k in _ints(args.excitations, "excitations"):
            ens = SpinEnsembleSpec.uniform(n, g / math.sqrt(n), D * g)
            dev, _ = validate_low_excitation(ens, k, cfg=IntegratorConfig(method="expm"))
            print(f"{n:3d} {k:3d} {dev:20.3e}")
    return EXIT_OK


def _cmd_audit(args, values, spec):
    from scipy.linalg import expm

    from .fredkin import ideal_fredkin, memory_parity, physical_mask, scheme_unitary
    from .model import derive, gate_hamiltonian, symmetric_params

    p = symmetric_params(values["g_over_2pi"], _point_D(values, "noon"), cutoff=4, lossy=False)
    u = expm(-1j * derive(p).t_swap * gate_hamiltonian(p, "reduced").static)
    mask = physical_mask(p.layout)
    sub = lambda m: m[np.ix_(mask, mask)]  # noqa: E731
    par = memory_parity(p.layout)
    fred = ideal_fredkin(p.layout).matrix
    print("exact-swap identity (qutrit off |a>, excitations <= d-1):")
    print(f"  bare gate vs controlled swap        {np.abs(sub(u) - sub(fred)).max():.3e}")
    print(f"  bare gate vs parity-dressed swap    {np.abs(sub(u) - sub(scheme_unitary(p.layout).matrix)).max():.3e}")
    print(f"  P2-conjugated gate vs controlled swap {np.abs(sub(par[:, None] * u * par[None, :]) - sub(fred)).max():.3e}")
    rows = analytics.divergence_table(analytics.default_divergence_points())
    print(f"concurrence closed form vs oracle: {len(rows)} divergent points")
    print(analytics.format_divergence_table(rows), end="")
    from .hilbert import coherent_tail

    for scen in ("coherent", "cat"):
        d = spec.cutoff or ex.DEFAULT_CUTOFF[scen]
        print(f"{scen}: Poisson tail beyond cutoff {d}: {coherent_tail(spec.alpha, d):.3e}")
    return EXIT_OK


HANDLERS = {
    "gate": _cmd_gate,
    "entangle": _cmd_entangle,
    "swap-test": _cmd_swap_test,
    "sweep-d": _cmd_sweep_d,
    "sweep-cd": _cmd_sweep_cd,
    "nv-validate": _cmd_nv,
    "audit": _cmd_audit,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        values = ex.load_config(args.config, args.overrides)
        changes = dict(scenario=args.scenario, mode=args.mode, lossy=args.lossy, timing=args.timing,
                       include_pulse=args.include_pulse)
        spec = ex.spec_from_config(values, **changes)
        values.update({k: v for k, v in changes.items() if v is not None})
        return HANDLERS[args.command](args, values, spec)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FredkinError, FloatingPointError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main() -> None:
    sys.exit(run())
