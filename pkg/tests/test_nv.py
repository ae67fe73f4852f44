import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fredkin_cqed.errors import ConfigError, DimensionError
from fredkin_cqed.hilbert import A, G
from fredkin_cqed.model import TWO_PI, derive, symmetric_params
from fredkin_cqed.nv import (
    SpinEnsembleSpec,
    bosonic_equivalent,
    collective_coupling,
    collective_lowering,
    spin_excitation_number,
    spin_hamiltonian,
    spin_layout,
    validate_low_excitation,
)

MU0 = TWO_PI * 7e6
DELTA = 16 * TWO_PI * 70e6


@pytest.mark.parametrize(
    "mu, mu_bar, mu_total",
    [
        ((1, 1, 1, 1), 1.0, 2.0),
        ((3.0,), 3.0, 3.0),
        ((1, 2, 2, 4), 2.5, 5.0),
    ],
)
def test_collective_coupling(mu, mu_bar, mu_total):
    got = collective_coupling(SpinEnsembleSpec(mu, DELTA))
    assert got == pytest.approx((mu_bar, mu_total), rel=1e-12)


def test_spec_validation():
    with pytest.raises(ConfigError):
        SpinEnsembleSpec((), DELTA)
    with pytest.raises(ConfigError):
        SpinEnsembleSpec((1.0, math.nan), DELTA)
    with pytest.raises(DimensionError):
        spin_layout(7)


def test_spin_hamiltonian_matrix_element():
    mu = tuple(MU0 * np.array([1.0, 0.5, 2.0]))
    spec = SpinEnsembleSpec(mu, DELTA)
    layout = spin_layout(3)
    h = spin_hamiltonian(spec, 0.0).matrix
    for j in range(3):
        up = [0, 0, 0]
        up[j] = 1
        assert h[layout.basis_index(A, 0, 0, 0), layout.basis_index(G, *up)] == pytest.approx(mu[j])


@settings(max_examples=10, deadline=None)
@given(st.lists(st.floats(-2.0, 2.0), min_size=1, max_size=4), st.floats(0.0, 1e-7))
def test_spin_hamiltonian_hermitian_and_conserving(scales, t):
    spec = SpinEnsembleSpec(tuple(MU0 * np.array(scales)), DELTA)
    h = spin_hamiltonian(spec, t).matrix
    n = spin_excitation_number(spec.N).matrix
    assert np.max(np.abs(h - h.conj().T)) < 1e-6
    assert np.max(np.abs(h @ n - n @ h)) < 1e-6


def test_zero_couplings_give_zero_operator():
    h = spin_hamiltonian(SpinEnsembleSpec((0.0, 0.0), DELTA), 3e-9).matrix
    assert not np.any(h)


@settings(max_examples=20)
@given(st.lists(st.floats(0.1, 3.0), min_size=1, max_size=5))
def test_collective_mode_commutator_on_vacuum(scales):
    spec = SpinEnsembleSpec(tuple(scales), DELTA)
    b = collective_lowering(spec).matrix
    comm = b @ b.conj().T - b.conj().T @ b
    vac = np.zeros(b.shape[0], dtype=complex)
    vac[spin_layout(spec.N).basis_index(G, *([0] * spec.N))] = 1.0
    assert np.vdot(vac, comm @ vac).real == pytest.approx(1.0, abs=1e-12)


def test_bosonic_equivalent_example():
    spec = SpinEnsembleSpec.uniform(100, MU0, DELTA)
    p = bosonic_equivalent(spec, spec, d1=3, d2=3)
    assert p.g1 / TWO_PI == pytest.approx(70e6, rel=1e-12)
    der = derive(p)
    assert der.lam == pytest.approx(p.g1**2 / DELTA, rel=1e-12)
    resonator = symmetric_params(70e6, 16, lossy=False, cutoff=3)
    assert der.t_swap == pytest.approx(derive(resonator).t_swap, rel=1e-12)


def test_bosonic_equivalent_is_relabeling():
    a = SpinEnsembleSpec.uniform(4, MU0, DELTA)
    b = SpinEnsembleSpec((2 * MU0,), DELTA * 1.01)
    p = bosonic_equivalent(a, b)
    assert (p.g1, p.g2, p.delta1, p.delta2) == pytest.approx((2 * MU0, 2 * MU0, DELTA, 1.01 * DELTA))


@pytest.mark.parametrize("N", [1, 4])
def test_single_excitation_is_exactly_bosonic(N):
    dev, trace = validate_low_excitation(SpinEnsembleSpec.uniform(N, MU0 * 10 / math.sqrt(N), DELTA), 1)
    assert dev <= 1e-6
    assert len(trace) == 64


def test_two_excitation_deviation_shrinks_with_N():
    devs = [
        validate_low_excitation(SpinEnsembleSpec.uniform(N, MU0 * 10 / math.sqrt(N), DELTA), 2)[0]
        for N in (3, 4, 5)
    ]
    assert all(d > 1e-3 for d in devs)
    assert devs[0] > devs[1] > devs[2]


def test_excitation_bound():
    with pytest.raises(ConfigError):
        validate_low_excitation(SpinEnsembleSpec.uniform(2, MU0, DELTA), 3)
