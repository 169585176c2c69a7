import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hybridwitness.catalgebra import ENTRY_NAMES, oracle_entries
from hybridwitness.errors import DomainError, IncompleteKraus, NotUnitary
from hybridwitness.fockcore import cat_ket
from hybridwitness.kraus import (
    IDEAL_RHO4,
    KrausSet,
    apply_kraus_channel,
    basis_change_u,
    cat_overlap_matrix,
    channel_state,
    continuous_angles,
    continuous_kraus,
    decompose_discrete_noise,
    dilate_and_trace,
    dilation_checks,
    discrete_kraus,
    kraus_from_angles,
    naimark_unitaries,
    printed_discrete_noise_matrix,
    _safe_arccos,
)
from hybridwitness.statefactory import NoiseParams

IDENTITY = KrausSet((np.eye(2), np.zeros((2, 2))))


def random_rho4(rng):
    g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    r = g @ g.conj().T
    return r / np.trace(r)


def test_discrete_kraus_examples():
    ks = discrete_kraus(0.0)
    assert np.abs(ks.elements[0] - np.eye(2)).max() == 0 and np.abs(ks.elements[1]).max() == 0
    out = discrete_kraus(0.3).apply(np.diag([0.0, 1.0]))
    assert np.abs(out - np.diag([0.3, 0.7])).max() < 1e-15


@settings(max_examples=20, deadline=None)
@given(st.floats(0.0, 1.0))
def test_discrete_completeness(ed):
    assert discrete_kraus(ed).completeness_residual <= 1e-15


@pytest.mark.parametrize("alpha", [0.7, 1.0, 1.3])
@pytest.mark.parametrize("eta", np.linspace(0.05, 0.95, 10))
def test_continuous_completeness(alpha, eta):
    assert continuous_kraus(eta, alpha).completeness_residual <= 1e-12


def test_angle_special_forms():
    # theta_b = 0: amplitude damping form; theta_a = theta_b: dephasing form
    ad = kraus_from_angles(0.4, 0.0)
    assert ad.elements[1][0, 1] == 0 and ad.elements[0][1, 1] == 1
    assert abs(ad.apply(np.diag([1.0, 0.0]))[1, 1] - math.sin(0.4) ** 2) < 1e-15
    # equal angles: (1 - p) rho + p X rho X, i.e. dephasing in the X eigenbasis
    deph = kraus_from_angles(0.4, 0.4)
    rng = np.random.default_rng(4)
    g = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    rho = g @ g.conj().T
    rho /= np.trace(rho)
    X = np.array([[0, 1], [1, 0]])
    p = math.sin(0.4) ** 2
    assert np.abs(deph.apply(rho) - ((1 - p) * rho + p * X @ rho @ X)).max() < 1e-15


def test_arccos_slack():
    assert _safe_arccos(1 + 5e-13, "t") == 0.0
    with pytest.raises(DomainError):
        _safe_arccos(1 + 1e-9, "t")


def test_incomplete_kraus_rejected():
    bad = KrausSet((np.eye(2) * 0.9, np.zeros((2, 2))))
    with pytest.raises(IncompleteKraus):
        apply_kraus_channel(IDEAL_RHO4, bad, IDENTITY)


def test_basis_change():
    assert np.abs(basis_change_u(1.0, 0.0) - np.eye(2)).max() < 1e-12
    u = basis_change_u(1.0, 0.3)
    assert np.abs(u.conj().T @ u - np.eye(2)).max() < 1e-10
    # direct Fock inner products <C+-(sqrt 0.7)|C+(1)>
    N = 30
    direct = [cat_ket(math.sqrt(0.7), s, N).overlap(cat_ket(1.0, 1, N)) for s in (1, -1)]
    T = cat_overlap_matrix(1.0, 0.3, N)
    assert np.abs(T[:, 0] - direct).max() < 1e-14
    col = np.array(direct) / np.linalg.norm(direct)
    assert np.abs(u[:, 0] - col).max() < 1e-10


def test_identity_channel():
    rng = np.random.default_rng(3)
    r = random_rho4(rng)
    assert np.abs(apply_kraus_channel(r, IDENTITY, IDENTITY) - r).max() < 1e-15


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.05, 0.95), st.floats(0.4, 1.6), st.floats(0, 1))
def test_channel_trace_preserving(seed, eta, alpha, ed):
    r = random_rho4(np.random.default_rng(seed))
    out = apply_kraus_channel(r, continuous_kraus(eta, alpha), discrete_kraus(ed), basis_change_u(alpha, eta))
    assert abs(np.trace(out) - 1) < 1e-12


@pytest.mark.parametrize("alpha,eta,ed", [(1.0, 0.2, 0.2), (0.7, 0.6, 0.1), (1.3, 0.35, 0.8)])
def test_channel_matches_oracle(alpha, eta, ed):
    noise = NoiseParams(eta, ed)
    ch, orc = channel_state(alpha, noise), oracle_entries(alpha, noise)
    assert max(abs(getattr(ch, k) - getattr(orc, k)) for k in ENTRY_NAMES) < 1e-8


def test_printed_u_d_not_unitary():
    _, Ud = naimark_unitaries(1.0, NoiseParams(0.5, 0.3))
    assert not Ud.is_unitary()
    # the column holding two sqrt(eta_d) entries has squared norm 2 eta_d
    assert abs(Ud.residual - abs(2 * 0.3 - 1)) < 1e-12
    with pytest.raises(NotUnitary):
        Ud.check()


def test_corrected_u_d_identity_at_zero_loss():
    _, Ud = naimark_unitaries(1.0, NoiseParams(0.5, 0.0), "corrected")
    assert np.abs(Ud.matrix - np.eye(4)).max() == 0


@pytest.mark.parametrize("variant", ["printed", "corrected"])
def test_u_c_unitary(variant):
    Uc, _ = naimark_unitaries(1.0, NoiseParams(0.4, 0.2), variant)
    assert Uc.residual <= 1e-12


@pytest.mark.parametrize("alpha,eta,ed", [(1.0, 0.2, 0.3), (0.7, 0.75, 0.6)])
def test_dilation_reproduces_channel(alpha, eta, ed):
    rec = dilation_checks(alpha, NoiseParams(eta, ed), "corrected", "reservoir_major")
    for k in ("U_c", "U_d", "both"):
        assert rec[f"{k}_vs_channel_max_err"] <= 1e-10
    printed = dilation_checks(alpha, NoiseParams(eta, ed), "printed", "reservoir_major")
    assert printed["U_d_vs_channel_max_err"] is None
    assert printed["U_c_vs_channel_max_err"] <= 1e-10


def test_system_major_reading_flips_coherence():
    rec = dilation_checks(1.0, NoiseParams(0.3, 0.0), "corrected", "system_major")
    assert rec["U_c_vs_channel_max_err"] > 1e-3


def test_dilation_kraus_elements_match_channel():
    Uc, Ud = naimark_unitaries(1.0, NoiseParams(0.3, 0.4), "corrected")
    for U, ks in ((Uc, continuous_kraus(0.3, 1.0)), (Ud, discrete_kraus(0.4))):
        got = U.kraus().elements
        # Kraus elements are fixed only up to a sign each
        for a, b in zip(got, ks.elements):
            assert min(np.abs(a - b).max(), np.abs(a + b).max()) < 1e-12


def test_discrete_decomposition():
    for ed in (0.2, 0.4, 0.7):
        we, ws, pe, ps = decompose_discrete_noise(ed)
        assert abs(we + ws - 1) < 1e-15
        assert abs(np.linalg.norm(pe) - 1) < 1e-15
        # psi_sep is the product |C+>|0>
        assert np.abs(ps - [1, 0, 0, 0]).max() == 0
        _, Ud = naimark_unitaries(1.0, NoiseParams(0.5, ed), "corrected")
        out = dilate_and_trace(IDEAL_RHO4, None, Ud)
        mix = we * np.outer(pe, pe) + ws * np.outer(ps, ps)
        assert np.abs(mix - out).max() < 1e-12
        # the published matrix differs only in its last diagonal entry
        diff = np.abs(printed_discrete_noise_matrix(ed) - np.real(out))
        assert list(zip(*np.nonzero(diff > 1e-12))) == [(3, 3)]


def test_continuous_angles_domain():
    ta, tb = continuous_angles(0.3, 1.0)
    assert 0 <= ta <= math.pi / 2 and 0 <= tb <= math.pi / 2
