import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hybridwitness.errors import CutoffTooSmall, DegenerateCat, InputError, ShapeMismatch
from hybridwitness.fockcore import (
    Ket,
    Operator,
    beamsplitter_unitary,
    cat_ket,
    check_density,
    coherent_ket,
    cutoff_for,
    embed,
    fock_ket,
    identity,
    ladder_ops,
    partial_trace,
    tensor,
)


def random_density(rng, d, rank=None):
    rank = rank or d
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    r = g @ g.conj().T
    return r / np.trace(r)


def test_coherent_vacuum():
    k = coherent_ket(0.0, 8)
    e0 = np.zeros(9)
    e0[0] = 1
    assert np.abs(k.amplitudes - e0).max() < 1e-15


def test_coherent_overlap_series():
    ov = coherent_ket(1.0, 40).overlap(coherent_ket(-1.0, 40))
    # independent series: sum_n e^{-1} (-1)^n / n!
    series = sum(math.exp(-1.0) * (-1.0) ** n / math.factorial(n) for n in range(41))
    assert abs(ov - series) < 1e-14
    assert abs(ov - math.exp(-2.0)) < 1e-12


def test_coherent_cutoff_too_small():
    with pytest.raises(CutoffTooSmall):
        coherent_ket(1.0, 2)


def test_complex_alpha_rejected():
    with pytest.raises(InputError):
        coherent_ket(1.0 + 0.5j, 20)


def test_cat_parity_and_orthogonality():
    cp, cm = cat_ket(1.0, 1, 40), cat_ket(1.0, -1, 40)
    assert abs(cp.overlap(cm)) < 1e-15
    assert np.abs(cp.amplitudes[1::2]).max() == 0
    assert np.abs(cm.amplitudes[0::2]).max() == 0
    assert abs(cp.norm - 1) < 1e-14


def test_cat_matches_normalized_superposition():
    a = 1.3
    plus = coherent_ket(a, 40).amplitudes + coherent_ket(-a, 40).amplitudes
    ref = plus / math.sqrt(2 * (1 + math.exp(-2 * a * a)))
    assert np.abs(cat_ket(a, 1, 40).amplitudes - ref).max() < 1e-12


def test_odd_cat_mean_photon_number():
    _, _, n = ladder_ops(40)
    cm = cat_ket(1.0, -1, 40)
    val = np.real(np.vdot(cm.amplitudes, n.matrix @ cm.amplitudes))
    # direct series over odd levels
    w = [1.0 / math.factorial(k) for k in range(1, 41, 2)]
    series = sum(k * wk for k, wk in zip(range(1, 41, 2), w)) / sum(w)
    assert abs(val - series) < 1e-12
    assert abs(val - 1.0 / math.tanh(1.0)) < 1e-12


def test_degenerate_odd_cat():
    with pytest.raises(DegenerateCat):
        cat_ket(1e-9, -1, 5)


def test_ladder_ops():
    a, ad, n = ladder_ops(6)
    assert np.abs((a @ fock_ket(1, 6)).amplitudes - fock_ket(0, 6).amplitudes).max() < 1e-15
    x = a.matrix + ad.matrix
    for k in range(6):
        assert abs(x[k, k + 1] - math.sqrt(k + 1)) < 1e-15
    comm = a.matrix @ ad.matrix - ad.matrix @ a.matrix
    assert np.abs(comm[:6, :6] - np.eye(6)).max() < 1e-14
    assert abs(comm[6, 6] + 6) < 1e-14
    assert np.abs(n.matrix - np.diag(np.arange(7.0))).max() == 0


def test_beamsplitter_identity_and_unitary():
    assert np.abs(beamsplitter_unitary(0.0, 6).matrix - np.eye(49)).max() < 1e-15
    u = beamsplitter_unitary(0.37, 12).matrix
    assert np.abs(u.conj().T @ u - np.eye(u.shape[0])).max() < 1e-12


def test_beamsplitter_coherent_split():
    N = 30
    psi = tensor(coherent_ket(1.0, N), fock_ket(0, N))
    out = beamsplitter_unitary(0.3, N) @ psi
    ref = tensor(coherent_ket(math.sqrt(0.7), N), coherent_ket(math.sqrt(0.3), N))
    assert abs(out.overlap(ref)) ** 2 >= 1 - 1e-8


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.1, 1.5))
def test_beamsplitter_conserves_photon_number(eta, alpha):
    N = 25
    psi = tensor(coherent_ket(alpha, N), cat_ket(0.7, 1, N))
    out = beamsplitter_unitary(eta, N) @ psi
    _, _, n = ladder_ops(N)
    ntot = (embed(n, 0, (N + 1, N + 1)) + embed(n, 1, (N + 1, N + 1))).matrix
    before = np.vdot(psi.amplitudes, ntot @ psi.amplitudes).real
    after = np.vdot(out.amplitudes, ntot @ out.amplitudes).real
    assert abs(before - after) < 1e-10


def test_partial_trace_product():
    rng = np.random.default_rng(1)
    r, s = random_density(rng, 2), random_density(rng, 5)
    prod = tensor(Operator(r, (2,)), Operator(s, (5,)))
    assert np.abs(partial_trace(prod, [0]).matrix - r).max() < 1e-14
    assert np.abs(partial_trace(prod, [1]).matrix - s).max() < 1e-14


def test_partial_trace_bell():
    bell = Ket(np.array([1, 0, 0, 1]) / math.sqrt(2), (2, 2))
    assert np.abs(partial_trace(bell.dm(), [0]).matrix - np.eye(2) / 2).max() < 1e-15


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([(2, 3), (2, 3, 4), (3, 2, 2)]))
def test_partial_trace_linear_and_trace_preserving(seed, dims):
    rng = np.random.default_rng(seed)
    d = int(np.prod(dims))
    A = Operator(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)), dims)
    B = Operator(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)), dims)
    c = complex(rng.normal(), rng.normal())
    for keep in ([0], [1], [0, 1], [len(dims) - 1]):
        lhs = partial_trace(A + B * c, keep).matrix
        rhs = partial_trace(A, keep).matrix + c * partial_trace(B, keep).matrix
        assert np.abs(lhs - rhs).max() < 1e-10
        assert abs(np.trace(partial_trace(A, keep).matrix) - A.trace()) < 1e-10


def test_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        Operator(np.eye(3), (2, 2))
    with pytest.raises(ShapeMismatch):
        identity((2,)) @ identity((3,))
    with pytest.raises(ShapeMismatch):
        partial_trace(identity((2, 3)), [2])


def test_density_check_and_immutability():
    rng = np.random.default_rng(2)
    rho = Operator(random_density(rng, 4), (2, 2))
    check_density(rho)
    with pytest.raises(ValueError):
        rho.matrix[0, 0] = 2


def test_cutoff_rule_is_smallest_passing():
    for a in (0.5, 1.0, 1.6):
        N = cutoff_for(a)
        coherent_ket(a, N)
        with pytest.raises(CutoffTooSmall):
            coherent_ket(a, N - 1)


def test_cat_convergence_under_cutoff_doubling():
    _, _, n1 = ladder_ops(20)
    _, _, n2 = ladder_ops(40)
    v1 = np.vdot(cat_ket(1.3, -1, 20).amplitudes, n1.matrix @ cat_ket(1.3, -1, 20).amplitudes).real
    v2 = np.vdot(cat_ket(1.3, -1, 40).amplitudes, n2.matrix @ cat_ket(1.3, -1, 40).amplitudes).real
    assert abs(v1 - v2) < 1e-8
