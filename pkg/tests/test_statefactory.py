import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import constants

from hybridwitness.catalgebra import analytic_entries, oracle_entries, wootters_concurrence
from hybridwitness.errors import CutoffTooSmall, InputError
from hybridwitness.fockcore import (
    cat_ket,
    check_density,
    fock_ket,
    ladder_ops,
    partial_trace,
    tensor,
)
from hybridwitness.statefactory import (
    NoiseParams,
    default_cutoff,
    ideal_hybrid_state,
    noisy_state_fock,
    thermal_occupation,
    thermal_state,
)
from hybridwitness.witnesslab import correlations


def test_noise_params_validation():
    for bad in (dict(eta=-0.1), dict(eta_d=1.1), dict(n_th=-1.0), dict(eta=float("nan"))):
        with pytest.raises(InputError):
            NoiseParams(**bad)


def test_ideal_state():
    psi = ideal_hybrid_state(1.0, 30)
    assert abs(psi.norm - 1) < 1e-12
    red = partial_trace(psi.dm(), [0]).matrix
    assert np.abs(np.linalg.eigvalsh(red) - 0.5).max() < 1e-12
    ref = tensor(fock_ket(0, 1), cat_ket(1.0, -1, 30))
    assert abs(psi.overlap(ref) - 1 / math.sqrt(2)) < 1e-12


def test_ideal_state_cutoff_too_small():
    with pytest.raises(CutoffTooSmall):
        ideal_hybrid_state(1.0, 5)


def test_thermal_state():
    assert np.abs(thermal_state(0.0, 10).matrix - np.diag([1.0] + [0.0] * 10)).max() == 0
    rho = thermal_state(0.5, 60).matrix
    assert abs(np.real(np.trace(rho @ np.diag(np.arange(61.0)))) - 0.5) < 1e-9
    rho1 = thermal_state(1.0, 60).matrix
    assert abs(np.real(np.trace(rho1 @ rho1)) - 1 / 3) < 1e-9
    with pytest.raises(CutoffTooSmall):
        thermal_state(1.0, 10)


def test_noiseless_state_is_pure_target():
    rho = noisy_state_fock(1.0, NoiseParams(), 30)
    psi = ideal_hybrid_state(1.0, 30).amplitudes
    assert np.real(np.vdot(psi, rho.matrix @ psi)) >= 1 - 1e-10


def test_full_loss_is_product():
    rho = noisy_state_fock(1.0, NoiseParams(1.0, 1.0), 30)
    m = rho.matrix.reshape(2, 31, 2, 31)
    vac = np.zeros((2, 31, 2, 31))
    vac[0, 0, 0, 0] = 1.0
    assert np.abs(m - vac).max() < 1e-12
    r4 = np.zeros((4, 4))
    r4[0, 0] = 1.0
    assert wootters_concurrence(r4) == 0.0


def test_oracle_matches_closed_forms_at_point():
    noise = NoiseParams(0.2, 0.2)
    a, o = analytic_entries(1.0, noise), oracle_entries(1.0, noise)
    assert max(abs(getattr(a, k) - getattr(o, k)) for k in ("w", "z", "x1", "x2", "c", "y")) < 1e-8


@settings(max_examples=100, deadline=None)
@given(st.floats(0.3, 1.6), st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.sampled_from([0.0, 0.0, 0.1, 0.3]))
def test_noisy_state_is_density(alpha, eta, eta_d, n_th):
    N = default_cutoff(alpha, n_th)
    rho = noisy_state_fock(alpha, NoiseParams(eta, eta_d, n_th), N)
    check_density(rho, trace_tol=1e-8)


def test_fidelity_monotone_in_noise():
    N = 20
    psi = ideal_hybrid_state(1.0, N).amplitudes
    grid = np.linspace(0, 0.9, 10)
    F = np.array([[np.real(np.vdot(psi, noisy_state_fock(1.0, NoiseParams(e, ed), N).matrix @ psi))
                   for ed in grid] for e in grid])
    assert np.all(np.diff(F, axis=0) <= 1e-12)
    assert np.all(np.diff(F, axis=1) <= 1e-12)


@pytest.mark.parametrize("eta,eta_d", [(0.1, 0.1), (0.3, 0.0), (0.5, 0.4)])
def test_thermal_first_moments_invariant(eta, eta_d):
    N = default_cutoff(1.0, 0.2)
    c0 = correlations(noisy_state_fock(1.0, NoiseParams(eta, eta_d, 0.0), N))
    c1 = correlations(noisy_state_fock(1.0, NoiseParams(eta, eta_d, 0.2), N))
    assert np.abs(np.subtract(c0, c1)).max() < 1e-6


def test_thermal_noise_changes_photon_number():
    N = default_cutoff(1.0, 0.2)
    _, _, n = ladder_ops(N)
    num = np.kron(np.eye(2), n.matrix)
    r0 = noisy_state_fock(1.0, NoiseParams(0.3, 0.0, 0.0), N).matrix
    r1 = noisy_state_fock(1.0, NoiseParams(0.3, 0.0, 0.2), N).matrix
    # loss beam splitter adds eta * n_th photons from the reservoir
    assert abs(np.real(np.trace(num @ (r1 - r0))) - 0.3 * 0.2) < 1e-9


def test_noisy_state_cutoff_convergence():
    noise = NoiseParams(0.25, 0.1)
    a = correlations(noisy_state_fock(1.3, noise, 20))
    b = correlations(noisy_state_fock(1.3, noise, 40))
    assert np.abs(np.subtract(a, b)).max() < 1e-8


def test_thermal_occupation():
    x = constants.h * 5e14 / (constants.k * 300.0)
    val = thermal_occupation(5e14, 300.0)
    assert abs(val / math.exp(-x) - 1) < 1e-12
    assert 1e-36 < val < 1e-34
    assert thermal_occupation(5e14, 1e-3) == 0.0
    T = constants.h * 1e9 / (constants.k * math.log(2))
    assert abs(thermal_occupation(1e9, T) - 1) < 1e-12
    with pytest.raises(InputError):
        thermal_occupation(0.0, 300.0)
