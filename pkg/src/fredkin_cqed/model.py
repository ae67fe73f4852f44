"""Physical parameters, Hamiltonians and collapse operators.

All frequencies are angular (rad/s) and all rates are in 1/s. The frames used
are interaction pictures, so only detunings enter; absolute transition and
resonator frequencies never appear.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, fields, replace
from typing import Optional

import numpy as np
from scipy.linalg import expm

from .errors import ConditionViolated, ConfigError, DimensionError
from .hilbert import (
    A,
    E,
    G,
    MODE1,
    MODE2,
    QUTRIT,
    LinOp,
    SpaceLayout,
    annihilation,
    embed,
    number,
    projector,
    transition_operator,
)

TWO_PI = 2 * math.pi
DISPERSIVE_RATIO_WARN = 5.0
SYMMETRY_RTOL = 1e-9


class DispersiveWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PhysicalParams:
    g1: float
    g2: float
    delta1: float
    delta2: float
    Omega: float = TWO_PI * 100e6
    theta: float = -math.pi / 2
    kappa1: float = 0.0
    kappa2: float = 0.0
    gamma_ag: float = 0.0
    gamma_ea: float = 0.0
    gamma_eg: float = 0.0
    gamma_phi_a: float = 0.0
    gamma_phi_e: float = 0.0
    d1: int = 6
    d2: int = 6

    def __post_init__(self):
        for name in ("g1", "g2", "delta1", "delta2"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigError(f"{name} must be a positive finite frequency, got {value!r}")
        if not (math.isfinite(self.Omega) and self.Omega >= 0):
            raise ConfigError(f"Omega must be non-negative, got {self.Omega!r}")
        for name in RATE_FIELDS:
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ConfigError(f"{name} must be a non-negative rate, got {value!r}")
        for name in ("d1", "d2"):
            if int(getattr(self, name)) < 2:
                raise DimensionError(f"{name} cutoff must be >= 2, got {getattr(self, name)}")
            object.__setattr__(self, name, int(getattr(self, name)))
        for i in (1, 2):
            ratio = getattr(self, f"delta{i}") / getattr(self, f"g{i}")
            if ratio < DISPERSIVE_RATIO_WARN:
                warnings.warn(
                    f"delta{i}/g{i} = {ratio:.3g} < {DISPERSIVE_RATIO_WARN}: "
                    "dispersive approximation is poor",
                    DispersiveWarning,
                    stacklevel=3,
                )

    @property
    def layout(self) -> SpaceLayout:
        return SpaceLayout.qutrit_modes(self.d1, self.d2)

    def lossless(self) -> "PhysicalParams":
        return replace(self, **{name: 0.0 for name in RATE_FIELDS})

    def is_symmetric(self, rtol: float = SYMMETRY_RTOL) -> bool:
        return math.isclose(self.delta1, self.delta2, rel_tol=rtol) and math.isclose(
            self.g1, self.g2, rel_tol=rtol
        )


RATE_FIELDS = (
    "kappa1",
    "kappa2",
    "gamma_ag",
    "gamma_ea",
    "gamma_eg",
    "gamma_phi_a",
    "gamma_phi_e",
)
PARAM_FIELDS = tuple(f.name for f in fields(PhysicalParams))


@dataclass(frozen=True)
class DerivedParams:
    lam: float
    omega_stark: float
    omega_stark2: float
    delta_prime: float
    t_swap: float
    t_pulse: float


def derive(params: PhysicalParams) -> DerivedParams:
    """Swap rate, Stark shifts and stage durations."""
    lam = 0.5 * params.g1 * params.g2 * (1 / params.delta1 + 1 / params.delta2)
    t_pulse = math.pi / (4 * params.Omega) if params.Omega > 0 else math.inf
    return DerivedParams(
        lam=lam,
        omega_stark=params.g1**2 / params.delta1,
        omega_stark2=params.g2**2 / params.delta2,
        delta_prime=params.delta2 - params.delta1,
        t_swap=math.pi / (2 * lam),
        t_pulse=t_pulse,
    )


class TDHamiltonian:
    """``H(t) = H_static + sum_k (exp(i w_k t) X_k + h.c.)``.

    Keeping the oscillating terms separate lets the integrators apply each
    piece as a fixed matrix scaled by a phase.

    ``frame`` optionally holds the diagonal of a generator ``H0`` with
    ``e^{i H0 t} X_k e^{-i H0 t} = e^{i w_k t} X_k``; in that rotating frame
    the Hamiltonian ``H0 + H_static + sum_k (X_k + h.c.)`` is time independent.
    """

    def __init__(self, layout: SpaceLayout, static=None, terms=(), frame=None):
        self.layout = layout
        n = layout.dim
        self.static = np.zeros((n, n), dtype=complex) if static is None else np.asarray(static, complex)
        self.terms = tuple((float(w), np.asarray(x, complex)) for w, x in terms)
        self.frame = None if frame is None else np.asarray(frame, dtype=float)

    def __call__(self, t: float) -> LinOp:
        mat = self.static.copy()
        for w, x in self.terms:
            phase = np.exp(1j * w * t)
            mat += phase * x + np.conj(phase) * x.conj().T
        return LinOp(self.layout, mat, True)

    @property
    def is_static(self) -> bool:
        return not any(w != 0.0 for w, _ in self.terms)

    @property
    def max_frequency(self) -> float:
        return max((abs(w) for w, _ in self.terms), default=0.0)

    def propagator(self, t: float) -> LinOp:
        """Exact ``exp(-i H t)``; only for time-independent Hamiltonians."""
        if not self.is_static:
            raise ValueError("exact propagator requires a time-independent Hamiltonian")
        return LinOp(self.layout, expm(-1j * self(0.0).matrix * t))

    def __add__(self, other: "TDHamiltonian") -> "TDHamiltonian":
        frame = None
        if self.frame is not None and other.frame is not None and np.array_equal(self.frame, other.frame):
            frame = self.frame
        return TDHamiltonian(self.layout, self.static + other.static, self.terms + other.terms, frame)


def _ops(layout: SpaceLayout):
    a1 = embed(annihilation(layout.factor_dims[MODE1]), MODE1, layout).matrix
    a2 = embed(annihilation(layout.factor_dims[MODE2]), MODE2, layout).matrix
    lvl = {
        (i, j): embed(transition_operator(i, j), QUTRIT, layout).matrix
        for i in range(3)
        for j in range(3)
    }
    return a1, a2, lvl


def _frame_diagonal(layout: SpaceLayout, a_shift: float, mode2_shift: float) -> np.ndarray:
    q, _, n2 = np.meshgrid(*[np.arange(d) for d in layout.factor_dims], indexing="ij")
    return (a_shift * (q == A) + mode2_shift * n2).ravel().astype(float)


def gate_hamiltonian(params: PhysicalParams, mode: str = "full") -> TDHamiltonian:
    """Gate-stage Hamiltonian.

    ``mode`` is ``"full"`` (resonant-exchange interaction picture),
    ``"dispersive"`` (second-order form with Stark shifts on ``a`` and ``g``
    and the time-dependent exchange terms) or ``"reduced"`` (symmetric
    parameters, ``g`` branch only, time independent).
    """
    layout = params.layout
    a1, a2, lvl = _ops(layout)
    sig_up = lvl[(G, A)]  # |a><g|
    if mode == "full":
        # H0 = delta1 |a><a| - (delta2 - delta1) a2^dag a2
        frame = _frame_diagonal(layout, params.delta1, -(params.delta2 - params.delta1))
        return TDHamiltonian(
            layout,
            terms=[(params.delta1, params.g1 * a1 @ sig_up), (params.delta2, params.g2 * a2 @ sig_up)],
            frame=frame,
        )
    der = derive(params)
    pa, pg = lvl[(A, A)], lvl[(G, G)]
    n1, n2 = a1.conj().T @ a1, a2.conj().T @ a2
    w1, w2 = der.omega_stark, der.omega_stark2
    if mode == "reduced":
        if not params.is_symmetric():
            raise ConditionViolated(
                "reduced effective Hamiltonian requires delta1 == delta2 and g1 == g2 "
                f"(got delta ratio {params.delta2 / params.delta1!r}, g ratio {params.g2 / params.g1!r})"
            )
        static = -w1 * (n1 + n2) @ pg - der.lam * (a1.conj().T @ a2 + a1 @ a2.conj().T) @ pg
        return TDHamiltonian(layout, static=static)
    if mode == "dispersive":
        static = (w1 * a1 @ a1.conj().T + w2 * a2 @ a2.conj().T) @ pa - (w1 * n1 + w2 * n2) @ pg
        dp = der.delta_prime
        # both branches carry e^{+i delta' t} a1^dag a2, as generated by the exchange terms
        terms = [
            (dp, der.lam * a1.conj().T @ a2 @ pa),
            (dp, -der.lam * a1.conj().T @ a2 @ pg),
        ]
        if dp == 0.0:
            static = static + sum(x + x.conj().T for _, x in terms)
            return TDHamiltonian(layout, static=static)
        return TDHamiltonian(layout, static=static, terms=terms, frame=_frame_diagonal(layout, 0.0, -dp))
    raise ValueError(f"unknown Hamiltonian mode {mode!r}")


def full_hamiltonian(params: PhysicalParams, t: float) -> LinOp:
    """Exchange Hamiltonian ``g_j (e^{i delta_j t} a_j |a><g| + h.c.)`` at time ``t``."""
    return gate_hamiltonian(params, "full")(t)


def effective_hamiltonian(params: PhysicalParams, t: float, reduced: bool) -> LinOp:
    return gate_hamiltonian(params, "reduced" if reduced else "dispersive")(t)


def pulse_hamiltonian(params: PhysicalParams) -> TDHamiltonian:
    """Resonant ``g <-> e`` drive ``Omega (e^{i theta} |g><e| + h.c.)``, identity on the modes."""
    if not params.Omega > 0:
        raise ConfigError(f"pulse needs Omega > 0, got {params.Omega!r}")
    layout = params.layout
    ge = embed(transition_operator(E, G), QUTRIT, layout).matrix  # |g><e|
    x = params.Omega * np.exp(1j * params.theta) * ge
    return TDHamiltonian(layout, static=x + x.conj().T)


def excitation_number(layout: SpaceLayout) -> LinOp:
    """``a1^dag a1 + a2^dag a2 + |a><a|``, conserved by the gate-stage Hamiltonians."""
    return (
        embed(number(layout.factor_dims[MODE1]), MODE1, layout)
        + embed(number(layout.factor_dims[MODE2]), MODE2, layout)
        + embed(projector(A), QUTRIT, layout)
    )


def collapse_channels(params: PhysicalParams):
    """``(name, sqrt(rate) * L)`` for every channel with a nonzero rate."""
    layout = params.layout
    a1 = embed(annihilation(params.d1), MODE1, layout)
    a2 = embed(annihilation(params.d2), MODE2, layout)

    def q(frm, to):
        return embed(transition_operator(frm, to), QUTRIT, layout)

    spec = [
        ("kappa1", params.kappa1, a1),
        ("kappa2", params.kappa2, a2),
        ("gamma_ag", params.gamma_ag, q(A, G)),
        ("gamma_ea", params.gamma_ea, q(E, A)),
        ("gamma_eg", params.gamma_eg, q(E, G)),
        ("gamma_phi_a", params.gamma_phi_a, q(A, A)),
        ("gamma_phi_e", params.gamma_phi_e, q(E, E)),
    ]
    return [(name, math.sqrt(rate) * op) for name, rate, op in spec if rate > 0]


def collapse_operators(params: PhysicalParams):
    return [op for _, op in collapse_channels(params)]


def default_rates() -> dict:
    """Memory lifetimes 5 us, qutrit relaxation 5 us per path, dephasing 2 us."""
    return dict(
        kappa1=1 / 5e-6,
        kappa2=1 / 5e-6,
        gamma_ag=1 / 5e-6,
        gamma_ea=1 / 5e-6,
        gamma_eg=1 / 5e-6,
        gamma_phi_a=1 / 2e-6,
        gamma_phi_e=1 / 2e-6,
    )


def symmetric_params(
    g_over_2pi: float,
    D: float,
    c: float = 1.0,
    d: float = 1.0,
    lossy: bool = True,
    cutoff: int = 6,
    Omega_over_2pi: float = 100e6,
    theta: float = -math.pi / 2,
    rates: Optional[dict] = None,
) -> PhysicalParams:
    """Parameters with ``delta1 = D g``, ``delta2 = c delta1``, ``g2 = d g``."""
    g = TWO_PI * g_over_2pi
    delta = D * g
    kw = (rates if rates is not None else default_rates()) if lossy else {}
    return PhysicalParams(
        g1=g,
        g2=d * g,
        delta1=delta,
        delta2=c * delta,
        Omega=TWO_PI * Omega_over_2pi,
        theta=theta,
        d1=cutoff,
        d2=cutoff,
        **kw,
    )
