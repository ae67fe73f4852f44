"""Parameter sweeps, run configuration and result tables.

Sweeps are parametrized by the detuning ratio ``D = delta1 / g`` and the
inhomogeneity factors ``c = delta2 / delta1`` and ``d = g2 / g1``. Every grid
point is an independent job; rows are assembled in grid order so the output
does not depend on the worker count.
"""

from __future__ import annotations

import configparser
import csv
import itertools
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .dynamics import METHODS, IntegratorConfig
from .errors import ConfigError, FredkinError
from .fredkin import ControlAmplitudes, InitialCase, run_protocol
from .model import TWO_PI, RATE_FIELDS, derive, default_rates, symmetric_params

log = logging.getLogger(__name__)

SCENARIOS = ("noon", "coherent", "cat")
TIMINGS = ("nominal", "actual")
DEFAULT_CUTOFF = {"noon": 6, "coherent": 12, "cat": 12}
ANCHOR_D = {"noon": 16.0, "coherent": 10.0, "cat": 22.0}
DEFAULT_D_GRID = (6.0, 8.0, 10.0, 13.0, 16.0, 22.0, 30.0, 40.0)
D_BOUNDS = (1.0, 1000.0)
CD_BOUNDS = (0.5, 2.0)


@dataclass(frozen=True)
class SweepSpec:
    """One sweep: a scenario, grids over ``D``, ``c``, ``d`` and protocol switches."""

    scenario: str = "noon"
    D_grid: Tuple[float, ...] = DEFAULT_D_GRID
    c_grid: Tuple[float, ...] = (1.0,)
    d_grid: Tuple[float, ...] = (1.0,)
    timing: str = "nominal"
    include_pulse: bool = True
    lossy: bool = True
    lossy_pulse: bool = True
    mode: str = "full"
    frame_correction: bool = True
    g_over_2pi: float = 70e6
    Omega_over_2pi: float = 100e6
    theta: float = -math.pi / 2
    N: int = 5
    alpha: float = 1.1
    beta: float = 1.1
    control_gamma: float = 1 / math.sqrt(2)
    control_eta: float = 1 / math.sqrt(2)
    cutoff: Optional[int] = None
    rates: Tuple[Tuple[str, float], ...] = tuple(default_rates().items())
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        if self.timing not in TIMINGS:
            raise ConfigError(f"timing must be one of {TIMINGS}, got {self.timing!r}")
        for name, bounds in (("D_grid", D_BOUNDS), ("c_grid", CD_BOUNDS), ("d_grid", CD_BOUNDS)):
            grid = tuple(float(x) for x in getattr(self, name))
            if not grid:
                raise ConfigError(f"{name} must not be empty")
            bad = [x for x in grid if not bounds[0] <= x <= bounds[1]]
            if bad:
                raise ConfigError(f"{name} values {bad} outside sanity bounds {bounds}")
            object.__setattr__(self, name, grid)
        unknown = set(dict(self.rates)) - set(RATE_FIELDS)
        if unknown:
            raise ConfigError(f"unknown rate keys {sorted(unknown)}; valid: {list(RATE_FIELDS)}")
        if self.cutoff is not None and self.cutoff < 2:
            raise ConfigError(f"cutoff must be >= 2, got {self.cutoff}")

    @property
    def effective_cutoff(self) -> int:
        return self.cutoff if self.cutoff is not None else DEFAULT_CUTOFF[self.scenario]

    def case(self) -> InitialCase:
        control = ControlAmplitudes(self.control_gamma, self.control_eta)
        if self.scenario == "noon":
            return InitialCase.noon(self.N, control)
        if self.scenario == "coherent":
            return InitialCase.coherent(self.alpha, self.beta, control)
        return InitialCase.cat(self.alpha, self.beta, control)

    def params(self, D: float, c: float = 1.0, d: float = 1.0):
        return symmetric_params(
            self.g_over_2pi,
            D,
            c=c,
            d=d,
            lossy=self.lossy,
            cutoff=self.effective_cutoff,
            Omega_over_2pi=self.Omega_over_2pi,
            theta=self.theta,
            rates=dict(self.rates),
        )


@dataclass(frozen=True)
class SweepRow:
    scenario: str
    D: float
    c: float
    d: float
    delta_over_2pi: float
    lambda_over_2pi: float
    t_swap: float
    fidelity: float
    leak_a: float
    trace_error: float
    wall_time: float
    error: str = ""


ROW_FIELDS = tuple(f.name for f in fields(SweepRow))
FLOAT_FIELDS = tuple(f for f in ROW_FIELDS if f not in ("scenario", "error"))


def run_point(spec: SweepSpec, D: float, c: float = 1.0, d: float = 1.0) -> SweepRow:
    """Run the protocol at one grid point; numerical failures are recorded in the row."""
    return run_point_with_result(spec, D, c, d)[0]


def run_point_with_result(spec: SweepSpec, D: float, c: float = 1.0, d: float = 1.0):
    """Like :func:`run_point` but also return the :class:`ProtocolResult` (``None`` on failure)."""
    start = time.perf_counter()
    params = spec.params(D, c, d)
    timing_params = params if spec.timing == "actual" else spec.params(D)
    derived = derive(timing_params)
    actual = derive(params)
    base = dict(
        scenario=spec.scenario,
        D=float(D),
        c=float(c),
        d=float(d),
        delta_over_2pi=params.delta1 / TWO_PI,
        lambda_over_2pi=actual.lam / TWO_PI,
        t_swap=derived.t_swap,
    )
    try:
        result = run_protocol(
            params,
            spec.case(),
            mode=spec.mode,
            lossy=spec.lossy,
            include_pulse=spec.include_pulse,
            cfg=spec.integrator,
            frame_correction=spec.frame_correction,
            lossy_pulse=spec.lossy_pulse,
            t_gate=derived.t_swap,
        )
    except FredkinError as exc:
        log.warning("point D=%g c=%g d=%g failed: %s", D, c, d, exc)
        nan = float("nan")
        row = SweepRow(**base, fidelity=nan, leak_a=nan, trace_error=nan,
                       wall_time=time.perf_counter() - start, error=f"{type(exc).__name__}: {exc}")
        return row, None
    row = SweepRow(
        **base,
        fidelity=result.fidelity,
        leak_a=result.leak_a,
        trace_error=result.trace_error,
        wall_time=time.perf_counter() - start,
    )
    log.info("%s D=%g c=%.6g d=%.6g F=%.6f (%.1f s)", spec.scenario, D, c, d, row.fidelity, row.wall_time)
    return row, result


def _run_star(args):
    return run_point(*args)


def _run_grid(spec: SweepSpec, points: Sequence[Tuple[float, float, float]], jobs: int) -> List[SweepRow]:
    jobs = max(1, int(jobs))
    tasks = [(spec, D, c, d) for D, c, d in points]
    if jobs == 1 or len(tasks) <= 1:
        return [_run_star(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
        # map preserves grid order regardless of completion order
        return list(pool.map(_run_star, tasks))


def sweep_detuning(spec: SweepSpec, jobs: int = 1) -> List[SweepRow]:
    """Fidelity versus ``D`` at ``c = d = 1``."""
    return _run_grid(spec, [(D, 1.0, 1.0) for D in spec.D_grid], jobs)


def sweep_inhomogeneity(spec: SweepSpec, jobs: int = 1) -> List[SweepRow]:
    """Fidelity over the ``D x c x d`` grid (``D`` usually a single panel value)."""
    points = list(itertools.product(spec.D_grid, spec.c_grid, spec.d_grid))
    return _run_grid(spec, points, jobs)


# -- result tables ----------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    return format(float(value), ".16e")


def write_results(
    rows: Iterable[SweepRow],
    path,
    metadata: Optional[Dict[str, object]] = None,
    timings: bool = True,
) -> None:
    """Write rows as CSV with ``# key = value`` metadata lines before the header.

    With ``timings=False`` wall times are written as ``nan`` so reruns are
    byte-identical.
    """
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            for key, value in (metadata or {}).items():
                fh.write(f"# {key} = {value}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(ROW_FIELDS)
            for row in rows:
                values = asdict(row)
                if not timings:
                    values["wall_time"] = float("nan")
                writer.writerow([_fmt(values[k]) for k in ROW_FIELDS])
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc


def read_results(path) -> Tuple[List[SweepRow], Dict[str, str]]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read results from {path}: {exc}") from exc
    meta: Dict[str, str] = {}
    body = []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            meta[key.strip()] = value.strip()
        else:
            body.append(line)
    reader = csv.DictReader(body)
    if reader.fieldnames is not None and tuple(reader.fieldnames) != ROW_FIELDS:
        raise ConfigError(f"{path}: columns {reader.fieldnames} differ from {list(ROW_FIELDS)}")
    rows = []
    for rec in reader:
        kw = {k: (float(rec[k]) if k in FLOAT_FIELDS else rec[k]) for k in ROW_FIELDS}
        rows.append(SweepRow(**kw))
    return rows, meta


# -- configuration ----------------------------------------------------------


@dataclass(frozen=True)
class ConfigKey:
    section: str
    name: str
    kind: str
    default: object
    units: str
    help: str


def _keys() -> List[ConfigKey]:
    h = 1 / math.sqrt(2)
    rates = default_rates()
    keys = [
        ConfigKey("params", "g_over_2pi", "float", 70e6, "Hz", "memory-qutrit coupling g1/2pi"),
        ConfigKey("params", "Omega_over_2pi", "float", 100e6, "Hz", "readout pulse Rabi frequency"),
        ConfigKey("params", "theta", "float", -math.pi / 2, "rad", "readout pulse phase"),
        ConfigKey("params", "N", "int", 5, "photons", "NOON photon number"),
        ConfigKey("params", "alpha", "float", 1.1, "", "coherent/cat amplitude of memory 1"),
        ConfigKey("params", "beta", "float", 1.1, "", "coherent/cat amplitude of memory 2"),
        ConfigKey("params", "control_gamma", "float", h, "", "control amplitude on |g>"),
        ConfigKey("params", "control_eta", "float", h, "", "control amplitude on |e>"),
        ConfigKey("params", "cutoff", "optint", None, "levels", "Fock cutoff per memory (default by scenario)"),
    ]
    keys += [ConfigKey("params", r, "float", rates[r], "1/s", f"{r} rate") for r in RATE_FIELDS]
    keys += [
        ConfigKey("sweep", "scenario", "choice:" + ",".join(SCENARIOS), "noon", "", "input family"),
        ConfigKey("sweep", "D", "float", None, "", "single detuning ratio delta/g (default by scenario)"),
        ConfigKey("sweep", "D_grid", "floats", DEFAULT_D_GRID, "", "detuning ratios delta/g"),
        ConfigKey("sweep", "c_grid", "floats", (1.0,), "", "delta2/delta1 factors"),
        ConfigKey("sweep", "d_grid", "floats", (1.0,), "", "g2/g1 factors"),
        ConfigKey("sweep", "timing", "choice:" + ",".join(TIMINGS), "nominal", "", "gate time from nominal or perturbed lambda"),
        ConfigKey("sweep", "mode", "choice:full,effective", "full", "", "gate-stage Hamiltonian"),
        ConfigKey("sweep", "lossy", "bool", True, "", "include decay and dephasing"),
        ConfigKey("sweep", "lossy_pulse", "bool", True, "", "decoherence during the readout pulse"),
        ConfigKey("sweep", "include_pulse", "bool", True, "", "apply the readout pulse"),
        ConfigKey("sweep", "frame_correction", "bool", True, "", "pi phase rotation of memory 2 around the gate"),
        ConfigKey("integrator", "method", "choice:" + ",".join(METHODS), "rk4", "", "time integrator"),
        ConfigKey("integrator", "dt", "optfloat", None, "s", "fixed step (overrides steps_per_period)"),
        ConfigKey("integrator", "steps_per_period", "int", 40, "", "gate steps per fastest period"),
        ConfigKey("integrator", "pulse_steps_per_period", "int", 400, "", "pulse steps per Rabi period"),
        ConfigKey("integrator", "norm_tol", "float", 1e-8, "", "allowed norm drift"),
        ConfigKey("integrator", "trace_tol", "float", 1e-8, "", "allowed trace drift"),
        ConfigKey("integrator", "max_steps", "int", 5_000_000, "", "step budget per stage"),
    ]
    return keys


CONFIG_KEYS = _keys()
KEY_INDEX = {k.name: k for k in CONFIG_KEYS}
CONFIG_ENV = "FREDKIN_CQED_CONFIG_DIR"


def _parse_value(key: ConfigKey, raw: str):
    raw = raw.strip()
    try:
        if key.kind == "float":
            return float(raw)
        if key.kind == "int":
            return int(raw)
        if key.kind in ("optint", "optfloat"):
            if raw.lower() in ("", "none", "auto"):
                return None
            return int(raw) if key.kind == "optint" else float(raw)
        if key.kind == "floats":
            vals = tuple(float(x) for x in raw.replace(";", ",").split(",") if x.strip())
            if not vals:
                raise ValueError("empty list")
            return vals
        if key.kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError("expected true/false")
        if key.kind.startswith("choice:"):
            choices = key.kind.split(":", 1)[1].split(",")
            if raw.lower() not in choices:
                raise ValueError(f"expected one of {choices}")
            return raw.lower()
    except ValueError as exc:
        raise ConfigError(f"bad value {raw!r} for key {key.name!r} ({key.units or 'unitless'}): {exc}") from None
    raise AssertionError(key.kind)


def _unknown(name: str) -> ConfigError:
    return ConfigError(f"unknown config key {name!r}; valid keys: {', '.join(KEY_INDEX)}")


def resolve_config_path(path) -> Path:
    path = Path(path)
    if not path.is_absolute() and not path.exists():
        base = os.environ.get(CONFIG_ENV)
        if base and (Path(base) / path).exists():
            return Path(base) / path
    return path


def load_config(path=None, overrides: Sequence[str] = ()) -> Dict[str, object]:
    """Defaults, then the config file, then ``key=value`` overrides."""
    values = {k.name: k.default for k in CONFIG_KEYS}
    if path is not None:
        path = resolve_config_path(path)
        parser = configparser.ConfigParser()
        parser.optionxform = str
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        for section in parser.sections():
            if section not in ("params", "sweep", "integrator"):
                raise ConfigError(f"unknown config section [{section}] in {path}")
            for name, raw in parser.items(section):
                key = KEY_INDEX.get(name)
                if key is None:
                    raise _unknown(name)
                if key.section != section:
                    raise ConfigError(f"key {name!r} belongs in section [{key.section}], found in [{section}]")
                values[name] = _parse_value(key, raw)
    for item in overrides:
        name, sep, raw = item.partition("=")
        name = name.strip()
        if not sep:
            raise ConfigError(f"override {item!r} must look like key=value")
        key = KEY_INDEX.get(name)
        if key is None:
            raise _unknown(name)
        values[name] = _parse_value(key, raw)
    return values


def integrator_from_config(values: Dict[str, object]) -> IntegratorConfig:
    try:
        return IntegratorConfig(
            dt=values["dt"],
            method=values["method"],
            steps_per_period=values["steps_per_period"],
            pulse_steps_per_period=values["pulse_steps_per_period"],
            norm_tol=values["norm_tol"],
            trace_tol=values["trace_tol"],
            max_steps=values["max_steps"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def spec_from_config(values: Dict[str, object], **changes) -> SweepSpec:
    """Build a :class:`SweepSpec`; ``changes`` override config values (CLI flags)."""
    values = {**values, **{k: v for k, v in changes.items() if v is not None}}
    kw = dict(
        scenario=values["scenario"],
        D_grid=values["D_grid"],
        c_grid=values["c_grid"],
        d_grid=values["d_grid"],
        timing=values["timing"],
        include_pulse=values["include_pulse"],
        lossy=values["lossy"],
        lossy_pulse=values["lossy_pulse"],
        mode=values["mode"],
        frame_correction=values["frame_correction"],
        g_over_2pi=values["g_over_2pi"],
        Omega_over_2pi=values["Omega_over_2pi"],
        theta=values["theta"],
        N=values["N"],
        alpha=values["alpha"],
        beta=values["beta"],
        control_gamma=values["control_gamma"],
        control_eta=values["control_eta"],
        cutoff=values["cutoff"],
        rates=tuple((r, values[r]) for r in RATE_FIELDS),
        integrator=integrator_from_config(values),
    )
    try:
        return SweepSpec(**kw)
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def config_metadata(values: Dict[str, object]) -> Dict[str, object]:
    """Effective configuration as ordered ``section.key -> value`` for CSV headers."""
    return {f"{k.section}.{k.name}": values[k.name] for k in CONFIG_KEYS}


def claimed_region(scenario: str) -> Tuple[Tuple[float, float], Tuple[float, float], float]:
    """Claimed high-fidelity ``(c range, d range, threshold)`` of the inhomogeneity grid."""
    regions = {
        "noon": ((0.9995, 1.0003), (0.98, 1.05), 0.90),
        "cat": ((0.9998, 1.0005), (0.97, 1.05), 0.92),
    }
    if scenario not in regions:
        raise ConfigError(f"no claimed region for scenario {scenario!r}")
    return regions[scenario]


def shrink(bounds: Tuple[float, float], slack: float = 0.2) -> Tuple[float, float]:
    """Move both ends of an interval inward by ``slack`` times its width."""
    lo, hi = bounds
    w = hi - lo
    return lo + slack * w, hi - slack * w


def interior_maximum(rows: Sequence[SweepRow]) -> bool:
    """True when the largest finite fidelity sits strictly inside the ``D`` grid."""
    pts = sorted((r.D, r.fidelity) for r in rows if math.isfinite(r.fidelity))
    if len(pts) < 3:
        return False
    best = max(range(len(pts)), key=lambda i: pts[i][1])
    return 0 < best < len(pts) - 1


def spec_metadata(spec: SweepSpec) -> Dict[str, object]:
    """Flat description of a sweep for CSV headers."""
    meta: Dict[str, object] = {}
    for f in fields(SweepSpec):
        value = getattr(spec, f.name)
        if f.name == "integrator":
            for g in fields(IntegratorConfig):
                meta[f"integrator.{g.name}"] = getattr(value, g.name)
        elif f.name == "rates":
            for name, rate in value:
                meta[f"rates.{name}"] = rate
        else:
            meta[f"sweep.{f.name}"] = value
    meta["sweep.cutoff"] = spec.effective_cutoff
    return meta
