"""Spin-ensemble memories and their collective bosonic description.

A memory made of ``N`` two-level spins (``|0>`` down, ``|1>`` up) couples to
the ``g <-> a`` transition through ``sum_k mu_k (|a><g| tau_k^- e^{i Delta t} + h.c.)``.
The bright collective mode ``b = sum_k mu_k tau_k^- / (sqrt(N) mu_bar)`` behaves as a
harmonic oscillator at low excitation, with coupling ``mu = sqrt(N) mu_bar``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .dynamics import IntegratorConfig, propagate_pure
from .errors import ConfigError, DimensionError
from .hilbert import A, G, QUTRIT, Ket, LinOp, SpaceLayout, annihilation, embed, transition_operator
from .model import PhysicalParams, TDHamiltonian, derive

MAX_SPINS = 6


@dataclass(frozen=True)
class SpinEnsembleSpec:
    """``N`` spins with couplings ``mu`` (rad/s) and detuning ``Delta`` (rad/s)."""

    mu: tuple
    Delta: float

    def __post_init__(self):
        mu = tuple(float(m) for m in np.ravel(self.mu))
        if len(mu) < 1:
            raise ConfigError("a spin ensemble needs at least one spin")
        if not all(math.isfinite(m) for m in mu):
            raise ConfigError(f"spin couplings must be finite, got {mu}")
        if not math.isfinite(self.Delta):
            raise ConfigError(f"detuning must be finite, got {self.Delta}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "Delta", float(self.Delta))

    @classmethod
    def uniform(cls, N: int, mu0: float, Delta: float) -> "SpinEnsembleSpec":
        return cls((mu0,) * N, Delta)

    @property
    def N(self) -> int:
        return len(self.mu)


def collective_coupling(spec: SpinEnsembleSpec) -> Tuple[float, float]:
    """Root-mean-square coupling ``mu_bar`` and the enhanced ``mu = sqrt(N) mu_bar``."""
    mu_bar = math.sqrt(sum(m * m for m in spec.mu) / spec.N)
    return mu_bar, math.sqrt(spec.N) * mu_bar


def spin_layout(N: int, max_spins: int = MAX_SPINS) -> SpaceLayout:
    if N > max_spins:
        raise DimensionError(
            f"{N} spins exceed the microscopic limit of {max_spins} (dimension {3 * 2**N})"
        )
    return SpaceLayout((3,) + (2,) * N)


def _spin_lowering(layout: SpaceLayout, k: int) -> np.ndarray:
    return embed(annihilation(2), k + 1, layout).matrix


def collective_lowering(spec: SpinEnsembleSpec, max_spins: int = MAX_SPINS) -> LinOp:
    """``b`` on the qutrit-spins layout (identity on the qutrit)."""
    layout = spin_layout(spec.N, max_spins)
    mu_bar, _ = collective_coupling(spec)
    if mu_bar == 0:
        raise ConfigError("collective mode undefined for all-zero couplings")
    mat = sum(m * _spin_lowering(layout, k) for k, m in enumerate(spec.mu))
    return LinOp(layout, mat / (math.sqrt(spec.N) * mu_bar))


def spin_td_hamiltonian(spec: SpinEnsembleSpec, max_spins: int = MAX_SPINS) -> TDHamiltonian:
    layout = spin_layout(spec.N, max_spins)
    up = embed(transition_operator(G, A), QUTRIT, layout).matrix  # |a><g|
    x = sum(m * (up @ _spin_lowering(layout, k)) for k, m in enumerate(spec.mu))
    frame = spec.Delta * (np.arange(layout.dim) // 2**spec.N == A)
    return TDHamiltonian(layout, terms=[(spec.Delta, x)], frame=frame.astype(float))


def spin_hamiltonian(spec: SpinEnsembleSpec, t: float, max_spins: int = MAX_SPINS) -> LinOp:
    """Microscopic interaction-picture Hamiltonian at time ``t`` on qutrit x spins."""
    return spin_td_hamiltonian(spec, max_spins)(t)


def spin_excitation_number(N: int, max_spins: int = MAX_SPINS) -> LinOp:
    """Number of up spins plus the ``|a>`` population."""
    layout = spin_layout(N, max_spins)
    diag = np.array([bin(i % 2**N).count("1") + (i // 2**N == A) for i in range(layout.dim)], float)
    return LinOp(layout, np.diag(diag).astype(complex), hermitian_hint=True)


def bosonic_equivalent(spec: SpinEnsembleSpec, second: SpinEnsembleSpec, **kwargs) -> PhysicalParams:
    """Resonator-model parameters with each ensemble replaced by its collective mode.

    Extra keyword arguments (cutoffs, rates, pulse settings) pass through to
    :class:`PhysicalParams`.
    """
    _, mu1 = collective_coupling(spec)
    _, mu2 = collective_coupling(second)
    return PhysicalParams(g1=mu1, g2=mu2, delta1=spec.Delta, delta2=second.Delta, **kwargs)


def _bosonic_td_hamiltonian(mu: float, Delta: float, cutoff: int) -> TDHamiltonian:
    layout = SpaceLayout((3, cutoff))
    up = embed(transition_operator(G, A), QUTRIT, layout).matrix
    x = mu * (up @ embed(annihilation(cutoff), 1, layout).matrix)
    frame = Delta * (np.arange(layout.dim) // cutoff == A)
    return TDHamiltonian(layout, terms=[(Delta, x)], frame=frame.astype(float))


def bright_isometry(spec: SpinEnsembleSpec, cutoff: int, max_spins: int = MAX_SPINS) -> np.ndarray:
    """Columns ``|q> (b^dag)^k |vac> / norm`` mapping ``qutrit x Fock(cutoff)`` into the spin space."""
    b = collective_lowering(spec, max_spins).matrix
    bdag = b.conj().T
    nspin = 2**spec.N
    vac = np.zeros(nspin, dtype=complex)
    vac[0] = 1.0
    ladder = []
    vec = vac
    for k in range(cutoff):
        if k:
            vec = bdag[:nspin, :nspin] @ vec
        norm = np.linalg.norm(vec)
        if norm < 1e-14:
            raise DimensionError(f"bright mode of {spec.N} spins holds at most {k - 1} excitations")
        ladder.append(vec / norm)
    ladder = np.array(ladder).T
    return np.kron(np.eye(3), ladder)


def _trace_distance(u: np.ndarray, v: np.ndarray) -> float:
    diff = np.outer(u, u.conj()) - np.outer(v, v.conj())
    return 0.5 * float(np.abs(np.linalg.eigvalsh(diff)).sum())


def validate_low_excitation(
    spec: SpinEnsembleSpec,
    max_excitation: int,
    horizon: Optional[float] = None,
    cfg: IntegratorConfig = IntegratorConfig(method="expm"),
    samples: int = 64,
    max_spins: int = MAX_SPINS,
) -> Tuple[float, List[float]]:
    """Largest trace distance between spin and bosonic dynamics over ``[0, horizon]``.

    Both models start in ``|g>`` with ``max_excitation`` quanta in the bright
    mode. The spin state is projected on the bright ladder before comparison,
    so population escaping into dark states counts as deviation. ``horizon``
    defaults to one swap period of a symmetric pair of such ensembles.
    Returns ``(max_deviation, deviations at each sample time)``.
    """
    if max_excitation < 0 or max_excitation > spec.N:
        raise ConfigError(f"max_excitation must lie in [0, N={spec.N}], got {max_excitation}")
    _, mu = collective_coupling(spec)
    if horizon is None:
        pair = bosonic_equivalent(spec, spec)
        horizon = derive(pair).t_swap
    cutoff = max_excitation + 1
    iso = bright_isometry(spec, cutoff, max_spins)
    micro_ham = spin_td_hamiltonian(spec, max_spins)
    boson_ham = _bosonic_td_hamiltonian(mu, spec.Delta, cutoff)

    boson = Ket.basis(boson_ham.layout, G, max_excitation)
    micro = Ket(micro_ham.layout, iso @ boson.amplitudes)
    times = np.linspace(0.0, horizon, samples + 1)
    deviations = []
    for t0, t1 in zip(times[:-1], times[1:]):
        micro = propagate_pure(micro_ham, micro, t0, t1, cfg)
        boson = propagate_pure(boson_ham, boson, t0, t1, cfg)
        projected = iso.conj().T @ micro.amplitudes
        deviations.append(_trace_distance(projected, boson.amplitudes))
    return max(deviations), deviations
