"""Fidelities, pure-state concurrence and state audits."""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import asdict, dataclass
from typing import Iterable, List, Sequence, Tuple, Union

import numpy as np

from .errors import DegenerateStateError, InvalidState, LayoutError
from .hilbert import A, NORM_TOL, DensityOp, Ket, SpaceLayout


class RadicandWarning(RuntimeWarning):
    """The closed-form concurrence produced a negative radicand."""


@dataclass(frozen=True)
class FidelityReport:
    value: float
    target: str
    trace_error: float
    leak_a: float


def _check_layouts(a: SpaceLayout, b: SpaceLayout):
    if a != b:
        raise LayoutError(f"layout mismatch: {a.factor_dims} vs {b.factor_dims}")


def state_fidelity(psi_id: Ket, rho: Union[DensityOp, Ket]) -> float:
    """``sqrt(<psi_id| rho |psi_id>)``; small negative round-off is clamped to zero."""
    if isinstance(rho, Ket):
        rho = rho.to_density()
    _check_layouts(psi_id.layout, rho.layout)
    v = psi_id.amplitudes
    value = float(np.vdot(v, rho.matrix @ v).real)
    return math.sqrt(min(max(value, 0.0), 1.0))


def fidelity_report(psi_id: Ket, rho: Union[DensityOp, Ket], target: str = "") -> FidelityReport:
    state = rho.to_density() if isinstance(rho, Ket) else rho
    return FidelityReport(
        value=state_fidelity(psi_id, state),
        target=target,
        trace_error=abs(state.trace - 1.0),
        leak_a=leakage_and_truncation(state)[0],
    )


def overlap_fidelity(psi: Ket, phi: Ket) -> float:
    """``|<phi|psi>|`` for two states of the same memory."""
    _check_layouts(psi.layout, phi.layout)
    return min(abs(phi.overlap(psi)), 1.0)


def leakage_and_truncation(state) -> Tuple[float, Tuple[float, float]]:
    """Population of ``|a>`` and each memory's population at its top Fock level."""
    layout = state.layout
    if layout.nfactors != 3 or layout.factor_dims[0] != 3:
        raise LayoutError(f"expected a qutrit-mode-mode layout, got {layout.factor_dims}")
    if isinstance(state, Ket):
        probs = np.abs(state.tensor_view()) ** 2
    else:
        probs = np.real(np.diag(state.matrix)).reshape(layout.factor_dims)
    clip = lambda x: min(max(float(x), 0.0), 1.0)  # noqa: E731
    return clip(probs[A].sum()), (clip(probs[:, -1, :].sum()), clip(probs[:, :, -1].sum()))


# -- concurrence ------------------------------------------------------------


def concurrence_oracle(psi: Ket) -> float:
    """``sqrt(2 (1 - Tr rho_r^2))`` from the reduced state of the first factor."""
    if psi.layout.nfactors != 2:
        raise LayoutError(f"concurrence needs a bipartite ket, got {psi.layout.factor_dims}")
    norm = np.linalg.norm(psi.amplitudes)
    if abs(norm - 1.0) > NORM_TOL:
        raise InvalidState(f"concurrence needs a normalized ket, norm is {norm!r}")
    # Schmidt coefficients give Tr rho_r^2 without forming rho_r
    s = np.linalg.svd(psi.tensor_view(), compute_uv=False)
    purity = float(np.sum(s**4))
    return math.sqrt(max(2.0 * (1.0 - purity), 0.0))


def branch_state(gamma, eta, F: float, branch: str) -> Ket:
    """Normalized ``gamma |phi,psi> +/- eta |psi,phi>`` for qubit states with real ``<phi|psi> = F``."""
    if not 0.0 <= F <= 1.0:
        raise ValueError(f"overlap F must lie in [0, 1], got {F}")
    sign = {"+": 1.0, "-": -1.0}[branch]
    psi = np.array([1.0, 0.0], dtype=complex)
    phi = np.array([F, math.sqrt(1.0 - F * F)], dtype=complex)
    vec = gamma * np.kron(phi, psi) + sign * eta * np.kron(psi, phi)
    return Ket.normalized(SpaceLayout((2, 2)), vec)


def concurrence_of_branch(gamma, eta, F: float, branch: str) -> float:
    return concurrence_oracle(branch_state(gamma, eta, F, branch))


def concurrence_closed_form(gamma, eta, F: float, branch: str) -> float:
    """The published closed-form concurrence, evaluated exactly as printed.

    A negative radicand emits :class:`RadicandWarning` and returns 0.
    """
    gamma, eta = complex(gamma), complex(eta)
    if abs(abs(gamma) ** 2 + abs(eta) ** 2 - 1.0) > 1e-10:
        raise InvalidState("|gamma|^2 + |eta|^2 must equal 1")
    if not 0.0 <= F <= 1.0:
        raise ValueError(f"overlap F must lie in [0, 1], got {F}")
    sign = {"+": 1.0, "-": -1.0}[branch]
    g2, e2 = abs(gamma) ** 2, abs(eta) ** 2
    cross = (gamma * eta.conjugate() + gamma.conjugate() * eta).real
    quartic = (gamma**2 * eta.conjugate() ** 2 + gamma.conjugate() ** 2 * eta**2).real
    inner = g2**2 + e2**2 + 2 * (2 * g2 * e2 + sign * cross) * F**2 + quartic * F**4
    radicand = 2.0 - 0.5 * inner
    if radicand < 0:
        warnings.warn(f"closed-form radicand {radicand:.6g} < 0 at F={F}, branch {branch}", RadicandWarning)
        return 0.0
    return math.sqrt(radicand)


@dataclass(frozen=True)
class DivergenceRow:
    gamma: complex
    eta: complex
    F: float
    branch: str
    closed_form: float
    oracle: float
    difference: float


def divergence_table(
    points: Iterable[Tuple[complex, complex, float, str]], tol: float = 1e-6
) -> List[DivergenceRow]:
    """Rows where the closed form and the partial-trace oracle disagree by more than ``tol``."""
    rows = []
    for gamma, eta, F, branch in points:
        closed = concurrence_closed_form(gamma, eta, F, branch)
        try:
            oracle = concurrence_of_branch(gamma, eta, F, branch)
        except DegenerateStateError:
            # the branch state vanishes, so no concurrence is defined
            oracle = float("nan")
        if not abs(closed - oracle) <= tol:
            rows.append(DivergenceRow(complex(gamma), complex(eta), F, branch, closed, oracle, closed - oracle))
    return rows


def default_divergence_points() -> List[Tuple[complex, complex, float, str]]:
    h = 1 / math.sqrt(2)
    pts = [(h, h, F, "+") for F in (0.0, 0.3, 0.5, 0.7, 0.9, 1.0)]
    pts += [(h, h, F, "-") for F in (0.0, 0.3, 0.5, 0.7, 0.9)]
    pts += [(1.0, 0.0, F, b) for b in "+-" for F in (0.0, 0.5)]
    pts += [(math.sqrt(0.8), math.sqrt(0.2), 0.5, b) for b in "+-"]
    return pts


def format_divergence_table(rows: Sequence[DivergenceRow]) -> str:
    buf = io.StringIO()
    names = list(DivergenceRow.__dataclass_fields__)
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(names)
    for row in rows:
        d = asdict(row)
        writer.writerow([repr(d[k]) if isinstance(d[k], float) else d[k] for k in names])
    return buf.getvalue()
