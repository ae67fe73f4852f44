"""Fixed-step time integration of the Schroedinger and Lindblad equations.

Both integrators use the classical fourth-order Runge-Kutta scheme in the
interaction picture on an aligned grid of ``n = ceil((t1 - t0) / dt)`` equal
steps, with ``dt`` resolving the fastest oscillation of ``H(t)``. No
renormalization is applied; norm and trace drift are reported as
convergence diagnostics.

Lindblad evolution applies prebuilt sparse superoperators, one static part
plus one per oscillating Hamiltonian term, each scaled by its phase at the
stage time. The ``expm`` method instead moves to the Hamiltonian's diagonal
rotating frame (when one exists and leaves every collapse channel
invariant), where the generator is time independent, and applies its exact
exponential.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.sparse.linalg import expm_multiply

from .errors import IntegratorDivergence, LayoutError
from .hilbert import DensityOp, Ket, LinOp
from .model import TDHamiltonian

METHODS = ("rk4", "adaptive", "expm")


@dataclass(frozen=True)
class IntegratorConfig:
    """Step control. ``dt=None`` resolves the fastest oscillation with ``steps_per_period`` steps.

    ``pulse_steps_per_period`` is used by the protocol runner for the
    readout-pulse stage, whose Rabi rotation needs a finer grid than the
    gate stage for the same accuracy. Pure-state RK4, and master-equation
    RK4 without collapse operators, use at least ``pure_steps_per_period``:
    the scheme is not exactly unitary and 40 steps per period drift by
    ~1e-7 over a gate, above ``norm_tol`` and ``eig_tol``.
    """

    dt: Optional[float] = None
    method: str = "rk4"
    steps_per_period: int = 40
    pulse_steps_per_period: int = 400
    pure_steps_per_period: int = 160
    norm_tol: float = 1e-8
    trace_tol: float = 1e-8
    herm_tol: float = 1e-10
    eig_tol: float = 1e-8
    max_steps: int = 5_000_000
    rtol: float = 1e-10
    atol: float = 1e-12

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown integrator method {self.method!r}; expected one of {METHODS}")
        if self.dt is not None and not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if min(self.steps_per_period, self.pulse_steps_per_period, self.pure_steps_per_period) < 1:
            raise ValueError("steps per period must be >= 1")

    def for_pulse(self) -> "IntegratorConfig":
        return replace(self, steps_per_period=self.pulse_steps_per_period)


def _as_td(ham):
    if isinstance(ham, TDHamiltonian):
        return ham
    if isinstance(ham, LinOp):
        return TDHamiltonian(ham.layout, static=ham.matrix)
    if callable(ham):
        return None
    raise TypeError(f"unsupported Hamiltonian type {type(ham)!r}")


def rotating_frame(ham: TDHamiltonian, collapse_ops: Sequence[LinOp] = ()) -> Optional[np.ndarray]:
    """Verified diagonal frame for ``ham`` and ``collapse_ops``, or ``None``."""
    n = ham.layout.dim
    if ham.is_static:
        h = np.zeros(n)
    elif ham.frame is None:
        return None
    else:
        h = ham.frame
    scale = max(float(np.max(np.abs(h), initial=0.0)), ham.max_frequency, 1.0)
    tol = 1e-9 * scale
    diff = h[:, None] - h[None, :]
    for w, x in ham.terms:
        if np.any(np.abs(diff[x != 0] - w) > tol):
            return None
    if np.any(np.abs(diff[ham.static != 0]) > tol):
        return None
    for c in collapse_ops:
        vals = diff[c.matrix != 0]
        if vals.size and np.ptp(vals) > tol:
            return None
    return h


class _Generator:
    """``H(t) @ X`` for repeated application, time-dependent or in a rotating frame."""

    def __init__(self, ham, frame: Optional[np.ndarray] = None):
        td = _as_td(ham)
        self.callable = ham if td is None else None
        self.layout = None if td is None else td.layout
        self.frame = frame
        if td is None:
            self.fastest = None
            return
        total = td.static + sum((x + x.conj().T for _, x in td.terms), np.zeros_like(td.static))
        self.fastest = max(td.max_frequency, _spectral_bound(total))
        if frame is not None:
            self.static = sp.csr_matrix(total + np.diag(frame))
            self.terms = []
        else:
            static = sp.csr_matrix(td.static)
            self.static = static if static.nnz else None
            self.terms = [(w, sp.csr_matrix(x), sp.csr_matrix(x.conj().T)) for w, x in td.terms]

    def matrix_at(self, t):
        h = self.callable(t)
        return h.matrix if isinstance(h, LinOp) else np.asarray(h)

    def apply(self, t: float, x: np.ndarray) -> np.ndarray:
        if self.callable is not None:
            return self.matrix_at(t) @ x
        out = self.static @ x if self.static is not None else np.zeros_like(x)
        for w, m, mh in self.terms:
            phase = np.exp(1j * w * t)
            out += phase * (m @ x)
            out += np.conj(phase) * (mh @ x)
        return out


def _spectral_bound(mat: np.ndarray) -> float:
    if not np.any(mat):
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvalsh(0.5 * (mat + mat.conj().T)))))


def resolve_steps(fastest: Optional[float], t0: float, t1: float, cfg: IntegratorConfig, probe=None):
    """Number of steps and step size for the aligned grid on ``[t0, t1]``."""
    span = t1 - t0
    if span < 0:
        raise ValueError(f"t1 must not precede t0 ({t0} -> {t1})")
    if span == 0:
        return 0, 0.0
    if cfg.dt is not None:
        dt_target = cfg.dt
    else:
        if fastest is None:
            fastest = _spectral_bound(probe(t0))
        if fastest == 0.0:
            return 1, span
        dt_target = 2 * math.pi / fastest / cfg.steps_per_period
    n = max(1, math.ceil(span / dt_target - 1e-9))
    if n > cfg.max_steps:
        raise IntegratorDivergence(
            f"{n} steps exceed max_steps={cfg.max_steps} for interval {span:.3e} s",
            suggested_dt=span / cfg.max_steps,
        )
    return n, span / n


def _rk4(f, y, t0, n, h, callback=None, post=None):
    for i in range(n):
        t = t0 + i * h
        k1 = f(t, y)
        k2 = f(t + h / 2, y + (h / 2) * k1)
        k3 = f(t + h / 2, y + (h / 2) * k2)
        k4 = f(t + h, y + h * k3)
        y = y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        if post is not None:
            y = post(y)
        if callback is not None:
            callback(t0 + (i + 1) * h, y)
    return y


def _adaptive(f, y0, t0, t1, cfg):
    if t1 == t0:
        return y0
    sol = solve_ivp(f, (t0, t1), y0, method="DOP853", rtol=cfg.rtol, atol=cfg.atol)
    if not sol.success:
        raise IntegratorDivergence(f"adaptive integration failed: {sol.message}")
    return sol.y[:, -1]


def propagate_pure(
    ham,
    psi0: Ket,
    t0: float,
    t1: float,
    cfg: IntegratorConfig = IntegratorConfig(),
    callback: Optional[Callable[[float, np.ndarray], None]] = None,
) -> Ket:
    """Integrate ``i d|psi>/dt = H(t)|psi>`` from ``t0`` to ``t1``.

    ``ham`` is a :class:`TDHamiltonian`, a static :class:`LinOp`, or any
    callable ``t -> LinOp``. ``callback(t, amplitudes)`` receives
    interaction-picture amplitudes after every step (``rk4`` only). Raises
    :class:`IntegratorDivergence` when the norm drifts by more than
    ``cfg.norm_tol``.
    """
    td = _as_td(ham)
    if td is not None and td.layout != psi0.layout:
        raise LayoutError("Hamiltonian and state layouts differ")
    y0 = psi0.amplitudes.copy()
    dt = None
    if cfg.method == "expm":
        frame = _require_frame(td)
        gen = _Generator(td, frame)
        y = np.exp(-1j * frame * t0) * y0
        if t1 > t0:
            y = expm_multiply(-1j * (t1 - t0) * gen.static, y)
        y = np.exp(1j * frame * t1) * y
    else:
        gen = _Generator(ham)

        def f(t, y):
            return -1j * gen.apply(t, y)

        if cfg.method == "adaptive":
            y = _adaptive(f, y0, t0, t1, cfg)
        else:
            fine = replace(cfg, steps_per_period=max(cfg.steps_per_period, cfg.pure_steps_per_period))
            n, dt = resolve_steps(gen.fastest, t0, t1, fine, gen.matrix_at)
            y = _rk4(f, y0, t0, n, dt, callback)
    drift = abs(np.linalg.norm(y) - 1.0)
    if drift > cfg.norm_tol:
        suggested = None if dt is None else 0.8 * dt * (cfg.norm_tol / drift) ** 0.2
        raise IntegratorDivergence(
            f"norm drift {drift:.3e} exceeds tolerance {cfg.norm_tol:g}"
            + (f"; try dt <= {suggested:.3e} s" if suggested else ""),
            suggested_dt=suggested,
        )
    return Ket.from_evolution(psi0.layout, y, cfg.norm_tol)


def _require_frame(td, collapse_ops=()):
    frame = None if td is None else rotating_frame(td, collapse_ops)
    if frame is None:
        raise ValueError("method 'expm' needs a Hamiltonian with a verified rotating frame")
    return frame


class LindbladGenerator:
    """Matrix-form right-hand side of the master equation.

    ``L rho = -i[H, rho] + sum_k (C_k rho C_k^dag - {C_k^dag C_k, rho}/2)``,
    symmetrized so every evaluation is exactly Hermitian. Used when no
    rotating frame is available.
    """

    def __init__(self, ham, collapse_ops: Sequence[LinOp], frame=None):
        self.gen = _Generator(ham, frame)
        self.jumps = [sp.csr_matrix(c.matrix) for c in collapse_ops]
        self.anti_diag = None
        self.anti = None
        if self.jumps:
            kmat = sum((j.conj().T @ j for j in self.jumps[1:]), self.jumps[0].conj().T @ self.jumps[0])
            kmat = sp.csr_matrix(kmat)
            off = kmat - sp.diags(kmat.diagonal())
            if off.count_nonzero() == 0:
                k = np.real(kmat.diagonal())
                self.anti_diag = 0.5 * (k[:, None] + k[None, :])
            else:
                self.anti = kmat

    def __call__(self, t: float, rho: np.ndarray) -> np.ndarray:
        hr = self.gen.apply(t, rho)
        out = -1j * (hr - hr.conj().T)
        if not self.jumps:
            return out
        diss = np.zeros_like(rho)
        for c in self.jumps:
            diss += c @ (c @ rho).conj().T
        if self.anti_diag is not None:
            diss -= self.anti_diag * rho
        else:
            diss -= self.anti @ rho
        out += 0.5 * (diss + diss.conj().T)
        return out


def liouvillian(hamiltonian: sp.spmatrix, collapse_ops: Sequence[LinOp]) -> sp.csr_matrix:
    """Sparse superoperator acting on row-major ``vec(rho)``.

    Uses ``vec(A rho B) = (A kron B^T) vec(rho)``.
    """
    n = hamiltonian.shape[0]
    eye = sp.identity(n, format="csr", dtype=complex)
    h = sp.csr_matrix(hamiltonian, dtype=complex)
    sup = -1j * (sp.kron(h, eye) - sp.kron(eye, h.T))
    kmat = sp.csr_matrix((n, n), dtype=complex)
    for c in collapse_ops:
        cm = sp.csr_matrix(c.matrix)
        sup = sup + sp.kron(cm, cm.conj())
        kmat = kmat + cm.conj().T @ cm
    sup = sup - 0.5 * (sp.kron(kmat, eye) + sp.kron(eye, kmat.T))
    sup = sp.csr_matrix(sup)
    sup.eliminate_zeros()
    return sup


def _commutator_super(x: sp.spmatrix, eye) -> sp.csr_matrix:
    return sp.csr_matrix(-1j * (sp.kron(x, eye) - sp.kron(eye, x.T)))


class SuperGenerator:
    """Interaction-picture Liouvillian ``L(t) v`` on row-major ``vec(rho)``.

    Oscillating terms sharing a frequency are merged so each distinct
    frequency costs two sparse products per evaluation.
    """

    def __init__(self, ham: TDHamiltonian, collapse_ops: Sequence[LinOp]):
        n = ham.layout.dim
        eye = sp.identity(n, format="csr", dtype=complex)
        self.static = liouvillian(sp.csr_matrix(ham.static), collapse_ops)
        merged = {}
        for w, x in ham.terms:
            merged[w] = merged.get(w, 0) + x
        self.terms = [
            (w, _commutator_super(sp.csr_matrix(x), eye), _commutator_super(sp.csr_matrix(x.conj().T), eye))
            for w, x in merged.items()
        ]
        total = ham.static + sum((x + x.conj().T for x in merged.values()), np.zeros_like(ham.static))
        self.fastest = max(ham.max_frequency, _spectral_bound(total))

    def __call__(self, t: float, v: np.ndarray) -> np.ndarray:
        out = self.static @ v
        for w, s_up, s_dn in self.terms:
            phase = np.exp(1j * w * t)
            out += phase * (s_up @ v)
            out += np.conj(phase) * (s_dn @ v)
        return out


def evolve_lindblad(
    ham,
    collapse_ops: Sequence[LinOp],
    rho0: Union[DensityOp, Ket],
    t0: float,
    t1: float,
    cfg: IntegratorConfig = IntegratorConfig(),
    callback: Optional[Callable[[float, np.ndarray], None]] = None,
    validate: bool = True,
) -> DensityOp:
    """Integrate the Lindblad master equation from ``t0`` to ``t1``.

    ``collapse_ops`` are already scaled by the square roots of their rates.
    With ``validate`` the result is checked for trace, Hermiticity and
    positivity at the tolerances of ``cfg``; violations raise
    :class:`IntegratorDivergence`, with a suggested step for ``rk4``.
    """
    if isinstance(rho0, Ket):
        rho0 = rho0.to_density()
    td = _as_td(ham)
    if td is not None and td.layout != rho0.layout:
        raise LayoutError("Hamiltonian and state layouts differ")
    n = rho0.layout.dim
    y0 = rho0.matrix.copy()
    tr0 = rho0.trace
    dt = None
    if not collapse_ops:
        # without dissipation nothing masks the scheme's small loss of positivity
        cfg = replace(cfg, steps_per_period=max(cfg.steps_per_period, cfg.pure_steps_per_period))

    def hermitize(v):
        m = v.reshape(n, n)
        return (0.5 * (m + m.conj().T)).ravel()

    if cfg.method == "expm":
        frame = _require_frame(td, collapse_ops)
        phase = frame[:, None] - frame[None, :]
        sup = liouvillian(_Generator(td, frame).static, collapse_ops)
        v = (np.exp(-1j * phase * t0) * y0).ravel()
        if t1 > t0:
            v = expm_multiply((t1 - t0) * sup, v)
        y = np.exp(1j * phase * t1) * hermitize(v).reshape(n, n)
    elif td is None:
        gen = LindbladGenerator(ham, collapse_ops)
        if cfg.method == "adaptive":
            y = _adaptive(lambda t, v: gen(t, v.reshape(n, n)).ravel(), y0.ravel(), t0, t1, cfg)
            y = y.reshape(n, n)
        else:
            steps, dt = resolve_steps(None, t0, t1, cfg, gen.gen.matrix_at)
            y = _rk4(gen, y0, t0, steps, dt, callback)
    else:
        sgen = SuperGenerator(td, collapse_ops)
        if cfg.method == "adaptive":
            v = _adaptive(sgen, y0.ravel(), t0, t1, cfg)
        else:
            steps, dt = resolve_steps(sgen.fastest, t0, t1, cfg)
            cb = None
            if callback is not None:
                cb = lambda t, v: callback(t, v.reshape(n, n))  # noqa: E731
            v = _rk4(sgen, y0.ravel(), t0, steps, dt, cb, post=hermitize)
        y = hermitize(v).reshape(n, n)
    rho = DensityOp(rho0.layout, y)
    if validate:
        try:
            check_density(rho, cfg, reference_trace=tr0)
        except IntegratorDivergence as err:
            if dt is None:
                raise
            raise IntegratorDivergence(f"{err}; try dt <= {dt / 2:.3e} s", suggested_dt=dt / 2) from err
    return rho


def check_density(rho: DensityOp, cfg: IntegratorConfig = IntegratorConfig(), reference_trace: float = 1.0):
    """Raise :class:`IntegratorDivergence` if ``rho`` violates the configured tolerances.

    Returns ``(trace_error, hermiticity_error, min_eigenvalue)``.
    """
    tr_err = abs(rho.trace - reference_trace)
    if tr_err > cfg.trace_tol:
        raise IntegratorDivergence(f"trace drift {tr_err:.3e} exceeds {cfg.trace_tol:g}")
    herm = rho.hermiticity_error()
    if herm > cfg.herm_tol:
        raise IntegratorDivergence(f"Hermiticity error {herm:.3e} exceeds {cfg.herm_tol:g}")
    lam = rho.min_eigenvalue()
    if lam < -cfg.eig_tol:
        raise IntegratorDivergence(f"min eigenvalue {lam:.3e} below -{cfg.eig_tol:g}")
    return tr_err, herm, lam
