"""Fredkin gate, entangling protocol and swap test.

The protocol runs the gate stage for ``t_swap`` (optionally lossy), then a
resonant ``g <-> e`` readout rotation, and compares the result with the
ideal output obtained by applying :func:`ideal_fredkin` and the exact pulse
propagator to the initial ket.

Second-order dispersive dynamics produce the memory exchange dressed by the
total photon parity: on the ``|g>`` branch the gate maps
``|n, m> -> (-1)^(n+m) |m, n>``. Conjugating the gate stage with a ``pi``
phase rotation of memory 2 (``P2 = exp(i pi n2)``) removes this and yields the
exact controlled swap. ``frame_correction=True`` applies that conjugation;
it is equivalent to reversing the sign of the memory-2 coupling.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm

from .analytics import leakage_and_truncation, state_fidelity
from .dynamics import IntegratorConfig, evolve_lindblad, propagate_pure
from .errors import (
    ConfigError,
    DegenerateStateError,
    InvalidState,
    LayoutError,
    NonInvertibleError,
    TruncationError,
)
from .hilbert import (
    A,
    DEFAULT_TAIL_TOL,
    E,
    G,
    MODE1,
    MODE2,
    QUTRIT,
    DensityOp,
    Ket,
    LinOp,
    SpaceLayout,
    cat_state,
    coherent_state,
    fock_state,
    tensor,
)
from .model import PhysicalParams, collapse_operators, derive, gate_hamiltonian, pulse_hamiltonian

VARIANTS = ("noon", "coherent", "cat", "custom")
MODES = ("full", "effective")
TOP_FOCK_TOL = 1e-6
BRANCH_TOL = 1e-12


@dataclass(frozen=True)
class ControlAmplitudes:
    """Control qubit ``gamma |g> + eta |e>``."""

    gamma: complex = 1 / math.sqrt(2)
    eta: complex = 1 / math.sqrt(2)

    def __post_init__(self):
        gamma, eta = complex(self.gamma), complex(self.eta)
        norm = abs(gamma) ** 2 + abs(eta) ** 2
        if abs(norm - 1.0) > 1e-10:
            raise InvalidState(f"|gamma|^2 + |eta|^2 = {norm!r}, expected 1")
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "eta", eta)

    @property
    def cross(self) -> float:
        """``gamma* eta + gamma eta*``, the contrast factor of the swap test."""
        return 2.0 * (self.gamma.conjugate() * self.eta).real

    def ket(self) -> Ket:
        vec = np.zeros(3, dtype=complex)
        vec[G], vec[E] = self.gamma, self.eta
        return Ket(SpaceLayout((3,)), vec)


def _memory_ket(vec, dim: int, name: str) -> Ket:
    vec = np.asarray(vec, dtype=complex).ravel()
    if vec.size > dim:
        if np.any(np.abs(vec[dim:]) > 0):
            raise TruncationError(
                f"{name} has support beyond cutoff dim {dim}", required_dim=int(vec.size)
            )
        vec = vec[:dim]
    padded = np.zeros(dim, dtype=complex)
    padded[: vec.size] = vec
    return Ket.normalized(SpaceLayout((dim,)), padded)


@dataclass(frozen=True)
class InitialCase:
    """Memory inputs ``|psi>_1 |phi>_2`` and the control superposition.

    ``noon``: ``|N>|0>``; ``coherent``: ``|alpha>|-beta>``; ``cat``: even cat
    of ``alpha`` in memory 1 and odd cat of ``beta`` in memory 2; ``custom``:
    arbitrary amplitude vectors (zero-padded to the cutoff).
    """

    variant: str = "noon"
    control: ControlAmplitudes = field(default_factory=ControlAmplitudes)
    N: int = 5
    alpha: complex = 1.1
    beta: complex = 1.1
    first: Optional[tuple] = None
    second: Optional[tuple] = None
    tail_tol: float = DEFAULT_TAIL_TOL

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.variant == "noon" and self.N < 0:
            raise ConfigError(f"NOON photon number must be >= 0, got {self.N}")
        if self.variant == "custom":
            if self.first is None or self.second is None:
                raise ConfigError("custom case needs both memory vectors")
            object.__setattr__(self, "first", tuple(complex(x) for x in np.ravel(self.first)))
            object.__setattr__(self, "second", tuple(complex(x) for x in np.ravel(self.second)))

    @classmethod
    def noon(cls, N: int = 5, control: Optional[ControlAmplitudes] = None) -> "InitialCase":
        return cls("noon", control or ControlAmplitudes(), N=N)

    @classmethod
    def coherent(cls, alpha=1.1, beta=1.1, control=None) -> "InitialCase":
        return cls("coherent", control or ControlAmplitudes(), alpha=alpha, beta=beta)

    @classmethod
    def cat(cls, alpha=1.1, beta=1.1, control=None) -> "InitialCase":
        return cls("cat", control or ControlAmplitudes(), alpha=alpha, beta=beta)

    @classmethod
    def custom(cls, first, second, control=None) -> "InitialCase":
        if isinstance(first, Ket):
            first = first.amplitudes
        if isinstance(second, Ket):
            second = second.amplitudes
        return cls("custom", control or ControlAmplitudes(), first=first, second=second)

    def memory_kets(self, d1: int, d2: int) -> Tuple[Ket, Ket]:
        """The single-memory inputs ``(|psi>_1, |phi>_2)`` at the given cutoffs."""
        if self.variant == "noon":
            return fock_state(self.N, d1), fock_state(0, d2)
        if self.variant == "coherent":
            return (
                coherent_state(self.alpha, d1, self.tail_tol),
                coherent_state(-self.beta, d2, self.tail_tol),
            )
        if self.variant == "cat":
            return (
                cat_state(self.alpha, "even", d1, self.tail_tol),
                cat_state(self.beta, "odd", d2, self.tail_tol),
            )
        return _memory_ket(self.first, d1, "memory 1 input"), _memory_ket(self.second, d2, "memory 2 input")


def initial_state(case: InitialCase, layout: SpaceLayout) -> Ket:
    if layout.nfactors != 3 or layout.factor_dims[QUTRIT] != 3:
        raise LayoutError(f"expected a qutrit-mode-mode layout, got {layout.factor_dims}")
    psi, phi = case.memory_kets(layout.factor_dims[MODE1], layout.factor_dims[MODE2])
    return tensor(case.control.ket(), psi, phi)


# -- unitaries --------------------------------------------------------------


def _swap_matrix(d: int) -> sp.csr_matrix:
    idx = np.arange(d * d)
    n, m = np.divmod(idx, d)
    return sp.csr_matrix((np.ones(d * d), (m * d + n, idx)), shape=(d * d, d * d))


def _check_equal_cutoffs(layout: SpaceLayout) -> int:
    if layout.nfactors != 3 or layout.factor_dims[QUTRIT] != 3:
        raise LayoutError(f"expected a qutrit-mode-mode layout, got {layout.factor_dims}")
    d1, d2 = layout.factor_dims[MODE1], layout.factor_dims[MODE2]
    if d1 != d2:
        raise LayoutError(f"memory swap needs equal cutoffs, got d1={d1}, d2={d2}")
    return d1


def _controlled(layout: SpaceLayout, on_g: sp.spmatrix) -> LinOp:
    d = layout.factor_dims[MODE1]
    pg = np.diag([1.0, 0.0, 0.0])
    rest = np.eye(3) - pg
    mat = sp.kron(pg, on_g) + sp.kron(rest, sp.identity(d * d))
    return LinOp(layout, mat.toarray().astype(complex), hermitian_hint=True)


def ideal_fredkin(layout: SpaceLayout) -> LinOp:
    """Swap the memories when the control is in ``|g>``; identity otherwise."""
    d = _check_equal_cutoffs(layout)
    return _controlled(layout, _swap_matrix(d))


def scheme_unitary(layout: SpaceLayout) -> LinOp:
    """The gate realized by the bare dispersive dynamics: parity-dressed swap on ``|g>``."""
    d = _check_equal_cutoffs(layout)
    n = np.arange(d)
    parity = sp.diags(((-1.0) ** np.add.outer(n, n)).ravel())
    return _controlled(layout, parity @ _swap_matrix(d))


def memory_parity(layout: SpaceLayout, slot: int = MODE2) -> np.ndarray:
    """Diagonal of ``exp(i pi n)`` on one memory, as a vector over the full space."""
    grids = np.meshgrid(*[np.arange(d) for d in layout.factor_dims], indexing="ij")
    return ((-1.0) ** grids[slot]).ravel()


def physical_mask(layout: SpaceLayout) -> np.ndarray:
    """Basis states off ``|a>`` whose total excitation fits below every memory cutoff.

    On these states truncation cannot distort the swap, so gate unitaries
    are compared there.
    """
    q, n1, n2 = np.meshgrid(*[np.arange(d) for d in layout.factor_dims], indexing="ij")
    dmin = min(layout.factor_dims[1:])
    return ((q != A) & (n1 + n2 < dmin)).ravel()


def pulse_propagator(params: PhysicalParams) -> np.ndarray:
    """Exact readout rotation ``exp(-i H_pulse t_pulse)``."""
    ham = pulse_hamiltonian(params)
    return expm(-1j * derive(params).t_pulse * ham.static)


# -- protocol ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ProtocolResult:
    """Final state and diagnostics of one protocol run."""

    final_state: Union[Ket, DensityOp]
    reference: Ket
    fidelity: float
    leak_a: float
    trace_error: float
    top_fock_mass: Tuple[float, float]
    min_eigenvalue: float
    t_gate: float
    timings: Dict[str, float]
    frame_correction: bool


def _max_excitation(psi: Ket) -> int:
    amps = np.abs(psi.tensor_view()) > 1e-14
    _, n1, n2 = np.nonzero(amps)
    return int((n1 + n2).max()) if n1.size else 0


def _audit_top(state, layout: SpaceLayout, where: str) -> Tuple[float, float]:
    top = leakage_and_truncation(state)[1]
    for slot, mass in zip((MODE1, MODE2), top):
        if mass > TOP_FOCK_TOL:
            d = layout.factor_dims[slot]
            raise TruncationError(
                f"{where}: memory {slot} holds {mass:.2e} at its top Fock level n={d - 1} "
                f"(tolerance {TOP_FOCK_TOL:g}); raise the cutoff",
                required_dim=d + 2,
            )
    return top


def _fidelity(reference: Ket, state) -> float:
    if isinstance(state, Ket):
        return min(abs(reference.overlap(state)), 1.0)
    return state_fidelity(reference, state)


def _apply_diag(state, diag, tol=1e-10):
    if isinstance(state, Ket):
        return Ket.from_evolution(state.layout, diag * state.amplitudes, tol)
    return DensityOp(state.layout, diag[:, None] * state.matrix * diag[None, :].conj())


def _apply_unitary(state, u, tol=1e-10):
    if isinstance(state, Ket):
        return Ket.from_evolution(state.layout, u @ state.amplitudes, tol)
    return DensityOp(state.layout, u @ state.matrix @ u.conj().T)


def run_protocol(
    params: PhysicalParams,
    case: InitialCase,
    mode: str = "full",
    lossy: bool = True,
    include_pulse: bool = True,
    cfg: IntegratorConfig = IntegratorConfig(),
    frame_correction: bool = True,
    lossy_pulse: bool = True,
    t_gate: Optional[float] = None,
    audit_truncation: bool = True,
) -> ProtocolResult:
    """Run gate stage, then (optionally) the readout pulse, and score the result.

    ``mode="full"`` integrates the time-dependent qutrit-memory coupling;
    ``mode="effective"`` uses the dispersive effective Hamiltonian. Without
    ``lossy`` the state stays a ket. ``t_gate`` defaults to ``t_swap`` of
    ``params``. ``lossy_pulse=False`` keeps the pulse stage closed even when
    the gate stage is lossy. With ``audit_truncation`` a run whose inputs can
    reach the top Fock level fails with :class:`TruncationError` once that
    level holds more than ``1e-6``.
    """
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
    layout = params.layout
    psi0 = initial_state(case, layout)
    derived = derive(params)
    t_gate = derived.t_swap if t_gate is None else float(t_gate)
    if not t_gate >= 0:
        raise ConfigError(f"gate time must be >= 0, got {t_gate!r}")

    timings: Dict[str, float] = {}
    start = time.perf_counter()
    ref = ideal_fredkin(layout).matrix @ psi0.amplitudes
    if include_pulse:
        ref = pulse_propagator(params) @ ref
    reference = Ket.from_evolution(layout, ref, 1e-10)
    timings["reference"] = time.perf_counter() - start

    ham = gate_hamiltonian(params, "full" if mode == "full" else "dispersive")
    gate_cfg = cfg if mode == "full" else replace(cfg, method="expm")
    collapse = collapse_operators(params) if lossy else []
    parity2 = memory_parity(layout, MODE2)

    state = psi0
    if frame_correction:
        state = _apply_diag(state, parity2)
    drift_tol = cfg.norm_tol + 1e-10
    start = time.perf_counter()
    if lossy:
        state = evolve_lindblad(ham, collapse, state, 0.0, t_gate, gate_cfg)
    else:
        state = propagate_pure(ham, state, 0.0, t_gate, gate_cfg)
    timings["gate"] = time.perf_counter() - start
    if frame_correction:
        state = _apply_diag(state, parity2, drift_tol)

    audit = audit_truncation and _max_excitation(psi0) >= min(params.d1, params.d2)
    if audit:
        _audit_top(state, layout, "after gate stage")

    if include_pulse:
        start = time.perf_counter()
        pulse_cfg = cfg.for_pulse()
        if lossy and lossy_pulse:
            state = evolve_lindblad(pulse_hamiltonian(params), collapse, state, 0.0, derived.t_pulse, pulse_cfg)
        else:
            state = _apply_unitary(state, pulse_propagator(params), drift_tol)
        timings["pulse"] = time.perf_counter() - start

    leak, top = leakage_and_truncation(state)
    if audit:
        _audit_top(state, layout, "after pulse stage")
    if isinstance(state, Ket):
        trace_error = abs(np.linalg.norm(state.amplitudes) ** 2 - 1.0)
        min_eig = 0.0
    else:
        trace_error = abs(state.trace - 1.0)
        min_eig = state.min_eigenvalue()
    return ProtocolResult(
        final_state=state,
        reference=reference,
        fidelity=_fidelity(reference, state),
        leak_a=leak,
        trace_error=float(trace_error),
        top_fock_mass=top,
        min_eigenvalue=float(min_eig),
        t_gate=t_gate,
        timings=timings,
        frame_correction=frame_correction,
    )


# -- measurement and swap test ----------------------------------------------


@dataclass(frozen=True, eq=False)
class MeasurementOutcome:
    """Control readout in ``{|g>, |e>}``; conditional memory states or ``None`` if absent."""

    p_g: float
    state_g: Optional[Union[Ket, DensityOp]]
    p_e: float
    state_e: Optional[Union[Ket, DensityOp]]
    p_a: float


def measure_control(state) -> MeasurementOutcome:
    """Project the control on ``|g>`` and ``|e>`` and return renormalized memory states.

    ``p_a`` is the leaked population. A branch with probability below
    ``1e-12`` is reported as absent (``None``).
    """
    layout = state.layout
    mem = layout.sub((MODE1, MODE2))
    branches = {}
    if isinstance(state, Ket):
        view = state.amplitudes.reshape(3, mem.dim)
        for lvl in (G, A, E):
            vec = view[lvl]
            p = float(np.vdot(vec, vec).real)
            cond = Ket.normalized(mem, vec) if p > BRANCH_TOL else None
            branches[lvl] = (p, cond)
    else:
        blocks = state.matrix.reshape(3, mem.dim, 3, mem.dim)
        for lvl in (G, A, E):
            block = blocks[lvl, :, lvl, :]
            p = float(np.trace(block).real)
            cond = DensityOp(mem, block / p) if p > BRANCH_TOL else None
            branches[lvl] = (p, cond)
    return MeasurementOutcome(
        p_g=branches[G][0],
        state_g=branches[G][1],
        p_e=branches[E][0],
        state_e=branches[E][1],
        p_a=branches[A][0],
    )


@dataclass(frozen=True)
class SwapTestEstimate:
    overlap_sq: float
    raw: float
    clamped: bool


def swap_test_infer(p_g: float, control: ControlAmplitudes) -> SwapTestEstimate:
    """Invert ``p_g = (1 - (gamma* eta + gamma eta*) F^2) / 2`` for ``F^2``."""
    cross = control.cross
    if abs(cross) < 1e-12:
        raise NonInvertibleError(
            f"gamma* eta + gamma eta* = {cross:.3e} vanishes; p_g carries no overlap information"
        )
    raw = (1.0 - 2.0 * p_g) / cross
    value = min(max(raw, 0.0), 1.0)
    # round-off at the endpoints is not worth flagging
    return SwapTestEstimate(overlap_sq=value, raw=raw, clamped=abs(value - raw) > 1e-12)


def simulate_swap_test(
    params: PhysicalParams,
    case: InitialCase,
    mode: str = "effective",
    lossy: bool = False,
    cfg: IntegratorConfig = IntegratorConfig(),
    frame_correction: bool = True,
) -> Tuple[SwapTestEstimate, MeasurementOutcome]:
    """Run the pulsed protocol and infer ``|<phi|psi>|^2`` from the control readout."""
    result = run_protocol(
        params, case, mode=mode, lossy=lossy, include_pulse=True, cfg=cfg, frame_correction=frame_correction
    )
    outcome = measure_control(result.final_state)
    return swap_test_infer(outcome.p_g, case.control), outcome


# -- entangled targets ------------------------------------------------------


@dataclass(frozen=True)
class TargetState:
    """Branch ``+`` or ``-`` of ``gamma |phi>_1|psi>_2 +/- eta |psi>_1|phi>_2`` for a case."""

    case: InitialCase
    branch: str = "+"

    def __post_init__(self):
        if self.branch not in ("+", "-"):
            raise ConfigError(f"branch must be '+' or '-', got {self.branch!r}")


def coherent_overlap(alpha, beta) -> complex:
    """``<alpha|beta>`` for untruncated coherent states."""
    alpha, beta = complex(alpha), complex(beta)
    return np.exp(-0.5 * abs(alpha) ** 2 - 0.5 * abs(beta) ** 2 + alpha.conjugate() * beta)


def analytic_overlap(case: InitialCase) -> complex:
    """Exact ``<psi|phi>`` of the two memory inputs in the untruncated space."""
    if case.variant == "noon":
        return 1.0 + 0j if case.N == 0 else 0j
    if case.variant == "coherent":
        return complex(coherent_overlap(case.alpha, -case.beta))
    if case.variant == "cat":
        return 0j
    raise ConfigError("custom inputs have no analytic overlap; use the truncated vectors")


def target_norm_sq(case: InitialCase, branch: str, overlap: complex) -> float:
    """``|gamma|^2 + |eta|^2 +/- 2 Re(gamma* eta) |<psi|phi>|^2``."""
    sign = 1.0 if branch == "+" else -1.0
    return 1.0 + sign * case.control.cross * abs(overlap) ** 2


def target_entangled_state(target: TargetState, layout: SpaceLayout) -> Ket:
    """Normalized two-memory target on ``layout.sub((MODE1, MODE2))`` or a two-mode layout."""
    if layout.nfactors == 3:
        layout = layout.sub((MODE1, MODE2))
    if layout.nfactors != 2 or layout.factor_dims[0] != layout.factor_dims[1]:
        raise LayoutError(f"target needs two memories with equal cutoffs, got {layout.factor_dims}")
    d = layout.factor_dims[0]
    case = target.case
    psi, phi = case.memory_kets(d, d)
    ctrl = case.control
    sign = 1.0 if target.branch == "+" else -1.0
    vec = ctrl.gamma * np.kron(phi.amplitudes, psi.amplitudes) + sign * ctrl.eta * np.kron(
        psi.amplitudes, phi.amplitudes
    )
    norm_sq = target_norm_sq(case, target.branch, psi.overlap(phi))
    if norm_sq < BRANCH_TOL:
        raise DegenerateStateError(
            f"target branch {target.branch!r} vanishes (norm^2 = {norm_sq:.3e}); inputs coincide"
        )
    return Ket.from_evolution(layout, vec / math.sqrt(norm_sq), 1e-9)
