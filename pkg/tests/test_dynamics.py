import math
from dataclasses import replace

import numpy as np
import pytest

from fredkin_cqed.dynamics import (
    IntegratorConfig,
    check_density,
    evolve_lindblad,
    propagate_pure,
    resolve_steps,
    rotating_frame,
)
from fredkin_cqed.errors import IntegratorDivergence, LayoutError
from fredkin_cqed.fredkin import InitialCase, run_protocol
from fredkin_cqed.hilbert import E, G, DensityOp, Ket, SpaceLayout, annihilation, fock_state, number
from fredkin_cqed.model import (
    TDHamiltonian,
    collapse_channels,
    derive,
    gate_hamiltonian,
    pulse_hamiltonian,
    symmetric_params,
)

EXPM = IntegratorConfig(method="expm")


@pytest.fixture
def params():
    return symmetric_params(70e6, 16, c=1.01, d=0.99, lossy=False, cutoff=3)


def test_zero_hamiltonian_leaves_state_unchanged():
    layout = SpaceLayout((3, 2, 2))
    psi = Ket.normalized(layout, np.arange(1, 13) + 0.5j)
    ham = TDHamiltonian(layout)
    out = propagate_pure(ham, psi, 0.0, 1e-6)
    assert np.allclose(out.amplitudes, psi.amplitudes, atol=1e-14)


@pytest.mark.parametrize("method", ["rk4", "adaptive", "expm"])
def test_pulse_on_ground_state(method):
    p = symmetric_params(70e6, 16, lossy=False, cutoff=2)
    g = Ket.basis(p.layout, G, 0, 0)
    e = Ket.basis(p.layout, E, 0, 0)
    cfg = IntegratorConfig(method=method).for_pulse()
    out = propagate_pure(pulse_hamiltonian(p), g, 0.0, derive(p).t_pulse, cfg)
    expected = (g.amplitudes + e.amplitudes) / math.sqrt(2)
    assert np.max(np.abs(out.amplitudes - expected)) < 1e-8


@pytest.mark.parametrize("method", ["rk4", "expm"])
def test_reduced_gate_swaps_single_photon(method):
    p = symmetric_params(70e6, 16, lossy=False, cutoff=2)
    ham = gate_hamiltonian(p, "reduced")
    out = propagate_pure(ham, Ket.basis(p.layout, G, 1, 0), 0.0, derive(p).t_swap, IntegratorConfig(method=method))
    target = Ket.basis(p.layout, G, 0, 1)
    assert abs(target.overlap(out)) == pytest.approx(1.0, abs=1e-8)


def test_norm_drift_raises_with_suggested_dt(params):
    ham = gate_hamiltonian(params, "full")
    psi = Ket.basis(params.layout, G, 1, 0)
    cfg = IntegratorConfig(steps_per_period=4, pure_steps_per_period=4)
    with pytest.raises(IntegratorDivergence) as info:
        propagate_pure(ham, psi, 0.0, derive(params).t_swap, cfg)
    assert info.value.suggested_dt is not None and info.value.suggested_dt > 0


def test_layout_mismatch(params):
    with pytest.raises(LayoutError):
        propagate_pure(gate_hamiltonian(params, "full"), Ket.basis(SpaceLayout((3, 2, 2)), G, 0, 0), 0, 1e-9)


def test_default_step_resolves_fastest_oscillation(params):
    n, dt = resolve_steps(params.delta2, 0.0, 1e-7, IntegratorConfig())
    assert dt <= 2 * math.pi / params.delta2 / 40
    assert n * dt == pytest.approx(1e-7)


def test_composition_on_aligned_grid(params):
    ham = gate_hamiltonian(params, "full")
    psi = Ket.normalized(params.layout, np.exp(0.3j * np.arange(params.layout.dim)) * (np.arange(27) < 9))
    dt = 2 * math.pi / params.delta2 / 200
    cfg = IntegratorConfig(dt=dt)
    t1, t2 = 300 * dt, 700 * dt
    whole = propagate_pure(ham, psi, 0.0, t2, cfg)
    split = propagate_pure(ham, propagate_pure(ham, psi, 0.0, t1, cfg), t1, t2, cfg)
    assert np.max(np.abs(whole.amplitudes - split.amplitudes)) < 1e-9


def test_rk4_matches_rotating_frame_propagator(params):
    ham = gate_hamiltonian(params, "full")
    assert rotating_frame(ham) is not None
    psi = Ket.normalized(params.layout, np.cos(np.arange(params.layout.dim)))
    t = derive(params).t_swap
    a = propagate_pure(ham, psi, 0.0, t)
    b = propagate_pure(ham, psi, 0.0, t, EXPM)
    assert abs(a.overlap(b)) == pytest.approx(1.0, abs=1e-7)


def test_photon_decay():
    layout = SpaceLayout((6,))
    kappa = 2e5
    a = annihilation(6)
    rho0 = fock_state(3, 6).to_density()
    ham = TDHamiltonian(layout)
    for t in (1e-6, 5e-6):
        rho = evolve_lindblad(ham, [math.sqrt(kappa) * a], rho0, 0.0, t, IntegratorConfig(dt=1e-8))
        assert rho.expect(number(6)).real == pytest.approx(3 * math.exp(-kappa * t), abs=1e-6)


def test_pure_dephasing_of_coherence():
    p = symmetric_params(70e6, 16, lossy=False, cutoff=2)
    gamma = 5e5
    p = replace(p, gamma_phi_e=gamma)
    plus = Ket.normalized(p.layout, Ket.basis(p.layout, G, 0, 0).amplitudes + Ket.basis(p.layout, E, 0, 0).amplitudes)
    ops = [op for _, op in collapse_channels(p)]
    ig, ie = p.layout.basis_index(G, 0, 0), p.layout.basis_index(E, 0, 0)
    for t in (1e-6, 4e-6):
        rho = evolve_lindblad(TDHamiltonian(p.layout), ops, plus, 0.0, t, IntegratorConfig(dt=1e-8))
        assert abs(rho.matrix[ig, ie]) == pytest.approx(0.5 * math.exp(-gamma * t / 2), abs=1e-6)


@pytest.mark.parametrize("method", ["rk4", "expm"])
def test_lossless_lindblad_matches_pure(params, method):
    ham = gate_hamiltonian(params, "full")
    psi = Ket.normalized(params.layout, np.sin(1.0 + np.arange(params.layout.dim)))
    t = derive(params).t_swap
    cfg = IntegratorConfig(method=method)
    rho = evolve_lindblad(ham, [], psi, 0.0, t, cfg)
    pure = propagate_pure(ham, psi, 0.0, t, cfg)
    assert np.max(np.abs(rho.matrix - pure.to_density().matrix)) < 1e-8


def test_lossy_gate_keeps_density_valid():
    p = symmetric_params(70e6, 16, c=1.01, d=0.99, cutoff=3)
    psi = Ket.normalized(p.layout, np.ones(p.layout.dim))
    rho = evolve_lindblad(gate_hamiltonian(p, "full"), [op for _, op in collapse_channels(p)], psi, 0.0, derive(p).t_swap)
    tr_err, herm, lam = check_density(rho)
    assert tr_err < 1e-8 and herm < 1e-10 and lam > -1e-8


def weakly_damped(params):
    p = replace(params, kappa1=2e5, gamma_phi_e=5e5)
    psi = Ket.normalized(p.layout, np.exp(0.7j * np.arange(p.layout.dim)))
    return p, psi, [op for _, op in collapse_channels(p)]


def test_lindblad_steps_stay_hermitian(params):
    p, psi, ops = weakly_damped(params)
    herm = []
    evolve_lindblad(
        gate_hamiltonian(p, "full"), ops, psi, 0.0, 2e-8, validate=False,
        callback=lambda t, m: herm.append(np.max(np.abs(m - m.conj().T))),
    )
    assert herm and max(herm) == 0.0


def test_positivity_loss_raises_with_suggested_dt(params):
    p, psi, ops = weakly_damped(params)
    ham = gate_hamiltonian(p, "full")
    with pytest.raises(IntegratorDivergence) as info:
        evolve_lindblad(ham, ops, psi, 0.0, 2e-8)
    dt = info.value.suggested_dt
    assert dt is not None
    evolve_lindblad(ham, ops, psi, 0.0, 2e-8, IntegratorConfig(dt=dt / 4))


def test_check_density_flags_bad_trace():
    rho = DensityOp(SpaceLayout((2,)), np.diag([0.5, 0.4]))
    with pytest.raises(IntegratorDivergence):
        check_density(rho)


def test_unknown_method():
    with pytest.raises(ValueError):
        IntegratorConfig(method="euler")
    with pytest.raises(ValueError):
        IntegratorConfig(dt=0.0)


@pytest.mark.slow
def test_halving_step_changes_noon_fidelity_little():
    p = symmetric_params(70e6, 16, cutoff=6)
    case = InitialCase.noon()
    base = IntegratorConfig()
    fine = replace(base, steps_per_period=80, pulse_steps_per_period=800)
    f1 = run_protocol(p, case, cfg=base).fidelity
    f2 = run_protocol(p, case, cfg=fine).fidelity
    assert abs(f1 - f2) < 1e-5
