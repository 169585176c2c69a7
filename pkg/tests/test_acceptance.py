"""Acceptance criteria, each at its stated tolerance, one PASS/FAIL line apiece."""

import json
import math
from pathlib import Path

import numpy as np
import pytest
from scipy import stats as sps
from scipy.optimize import brentq

from hybridwitness.catalgebra import (
    ENTRY_NAMES,
    analytic_entries,
    concurrence,
    concurrence_raw,
    ideal_witness_fock,
    ideal_witness_value,
    oracle_entries,
    wootters_concurrence,
)
from hybridwitness.homodyne import estimate_photon_stats_em, run_protocol, sample_conjugate_z
from hybridwitness.kraus import verify_report
from hybridwitness.statefactory import NoiseParams, default_cutoff, noisy_state_fock
from hybridwitness.witnesslab import (
    WitnessConfig,
    check_witness_validity,
    critical_noise,
    f_of_n,
    f_of_n_bruteforce,
    f_of_n_hermite,
    witness_expectation,
)

REPORT = Path(__file__).resolve().parents[1] / "reports" / "closed_form_discrepancy.json"


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {number}: {'PASS' if ok else 'FAIL'} | {detail}")
        return ok
    return emit


def test_criterion_01_zero_noise_exactness(report):
    noise = NoiseParams()
    rho = noisy_state_fock(1.0, noise)
    orc = oracle_entries(1.0, noise)
    C_analytic = concurrence(analytic_entries(1.0, noise))
    C_oracle = wootters_concurrence(orc.to_matrix())
    W_analytic = ideal_witness_value(analytic_entries(1.0, noise))
    W_fock = ideal_witness_fock(rho, 1.0, 0.0)
    errs = [abs(C_analytic - 1), abs(C_oracle - 1), abs(W_analytic + 0.5), abs(W_fock + 0.5)]
    ok = max(errs) <= 1e-10
    report(1, ok, f"C = {C_oracle:.12f}, Tr[W rho] = {W_fock:.12f}, max err {max(errs):.1e} (tol 1e-10)")
    assert ok


def test_criterion_02_oracle_equivalence(report):
    grid = [(a, e, ed) for a in (0.7, 1.0, 1.3) for e in np.linspace(0, 0.8, 5) for ed in np.linspace(0, 0.8, 5)]
    worst = 0.0
    for a, e, ed in grid:
        noise = NoiseParams(e, ed)
        A, O = analytic_entries(a, noise), oracle_entries(a, noise)
        worst = max(worst, max(abs(getattr(A, k) - getattr(O, k)) for k in ENTRY_NAMES))
    doc = json.loads(REPORT.read_text())
    ok = worst <= 1e-8 and doc["authoritative"] == "fock-dilation oracle"
    report(2, ok, f"{len(grid)} points, max entry error {worst:.1e} (tol 1e-8); published w, x2, z "
                  f"disagree, see {REPORT.name}: {doc['printed_entries_disagreeing']}")
    assert ok


def _diagonal_root(fn, lo, hi):
    return brentq(lambda e: fn(NoiseParams(e, e)), lo, hi, xtol=1e-12)


def test_criterion_03_concurrence_boundary(report):
    # oracle-driven: the closed forms equal the oracle (criterion 2) and are checked again at the root
    eta0 = _diagonal_root(lambda n: concurrence_raw(analytic_entries(1.0, n)), 0.3, 0.99)
    at_root = concurrence_raw(oracle_entries(1.0, NoiseParams(eta0, eta0)))
    ok = abs(eta0 - 0.80) <= 0.05
    report(3, ok, f"concurrence crosses zero at eta = eta_d = {eta0:.4f} (oracle value there {at_root:.1e}); "
                  f"target 0.80 +- 0.05")
    assert abs(at_root) < 1e-8
    assert ok


def test_criterion_04_ideal_witness_boundary(report):
    eta0 = _diagonal_root(lambda n: ideal_witness_value(analytic_entries(1.0, n)), 0.1, 0.95)
    rho = noisy_state_fock(1.0, NoiseParams(eta0, eta0))
    at_root = ideal_witness_fock(rho, 1.0, eta0)
    ok = abs(eta0 - 0.50) <= 0.05
    report(4, ok, f"Tr[W rho] crosses zero at eta = eta_d = {eta0:.4f} (Fock trace there {at_root:.1e}); "
                  f"target 0.50 +- 0.05")
    assert abs(at_root) < 1e-8
    assert ok


def test_criterion_05_f_of_n(report):
    closed = {1: 0.5, 2: math.sqrt(3) / 2, 3: math.sqrt(3 + math.sqrt(6)) / 2}
    e_closed = max(abs(f_of_n(N) - v) for N, v in closed.items())
    e_herm = max(abs(f_of_n(N) - f_of_n_hermite(N)[0]) for N in range(1, 13))
    e_brute = max(f_of_n(N) - f_of_n_bruteforce(N) for N in range(1, 13))
    over = max(f_of_n_bruteforce(N) - f_of_n(N) for N in range(1, 13))
    ok = e_closed <= 1e-9 and e_herm <= 1e-9 and e_brute <= 1e-6 and over <= 1e-9 and f_of_n(3) > 1
    report(5, ok, f"closed-form err {e_closed:.1e}, Hermite-route err {e_herm:.1e}, brute-force gap {e_brute:.1e} "
                  f"(N <= 12), f(3) = {f_of_n(3):.7f} > 1")
    assert ok


@pytest.mark.slow
def test_criterion_06_witness_validity(report):
    rep = check_witness_validity(WitnessConfig.default(3), n_samples=100_000, seed=2024)
    ok = rep.violations == 0 and rep.min_value >= -1e-9
    report(6, ok, f"{rep.n_samples} separable states at N = 3, min Tr[W~ sigma] = {rep.min_value:.3e}, "
                  f"violations {rep.violations}")
    assert ok


def test_criterion_07_critical_noise(report):
    r3 = critical_noise(1.0, 3, "m1")
    r4 = critical_noise(1.0, 4, "m1")
    r2 = critical_noise(1.0, 2, "m1")
    ok3 = 0.19 <= r3.eta_c <= 0.27
    ok4 = r4.eta_c <= 0.25 + 0.02
    report(7, ok3 and ok4,
           f"N=3: eta_c = {r3.eta_c:.4f} (zero-noise witness {r3.witness_at_zero_noise:+.5f}, window [0.19, 0.27]); "
           f"N=4: eta_c = {r4.eta_c:.4f} (<= 0.27); for reference N=2 gives {r2.eta_c:.4f}")
    assert ok4
    assert ok3


def test_criterion_08_kraus_naimark(report):
    rep = verify_report(eta_ds=(0.0, 0.2, 0.5, 0.8))
    pts = rep["points"]
    comp = max(max(p["completeness_residual"].values()) for p in pts)
    ch = max(p["channel_vs_oracle_max_err"] for p in pts)
    dil = [v for p in pts for key, d in p["dilations"].items() if key.endswith("/reservoir_major")
           for k, v in d.items() if k.endswith("_vs_channel_max_err") and v is not None]
    res_printed_ud = max(p["dilations"]["printed/reservoir_major"]["U_d_residual"] for p in pts)
    ok = comp <= 1e-12 and ch <= 1e-8 and max(dil) <= 1e-10
    report(8, ok, f"{len(pts)} points: completeness {comp:.1e}, channel vs oracle {ch:.1e}, "
                  f"unitary dilations vs channel {max(dil):.1e}; published U_d unitarity residual up to "
                  f"{res_printed_ud:.2f} (reported, not unitary)")
    assert ok


def test_criterion_09_thermal_invariance(report):
    cfg = WitnessConfig.default(3)
    N = default_cutoff(1.0, 0.2)
    vals = {}
    for cut in (N, 2 * N):
        vals[cut] = [witness_expectation(noisy_state_fock(1.0, NoiseParams(0.1, 0.1, nth), cut), cfg)
                     for nth in (0.0, 0.2)]
    conv = max(abs(a - b) for a, b in zip(vals[N], vals[2 * N]))
    diff = abs(vals[N][0] - vals[N][1])
    ok = diff <= 1e-6 and conv < 1e-8
    report(9, ok, f"|Tr[W~ rho(0)] - Tr[W~ rho(0.2)]| = {diff:.1e} at cutoff {N} (cutoff-doubling change {conv:.1e})")
    assert ok


@pytest.mark.slow
def test_criterion_10_method2_statistics(report):
    zv = sample_conjugate_z(np.array([1.0]), 100_000, seed=101)
    sv = estimate_photon_stats_em(zv)
    tv_vac = 0.5 * (abs(sv.populations[0] - 1) + sv.populations[1:].sum())
    M = 40
    pc = sps.poisson.pmf(np.arange(M + 1), 1.0)
    pc /= pc.sum()
    zc = sample_conjugate_z(pc, 100_000, seed=102)
    sc = estimate_photon_stats_em(zc)
    n = max(M + 1, sc.populations.size)
    tv_coh = 0.5 * np.abs(np.pad(sc.populations, (0, n - sc.populations.size)) - np.pad(pc, (0, n - pc.size))).sum()
    ks = sps.kstest(zv, lambda z: 1 - np.exp(-z))
    ok = tv_vac <= 0.02 and tv_coh <= 0.05 and ks.pvalue > 0.01
    report(10, ok, f"TV vacuum {tv_vac:.4f} (<= 0.02), TV coherent {tv_coh:.4f} (<= 0.05), "
                   f"KS p-value {ks.pvalue:.3f} (> 0.01)")
    assert ok


@pytest.mark.slow
def test_criterion_11_end_to_end(report):
    res = {eta: run_protocol(1.0, NoiseParams(eta, eta), count=1_000_000, seed=11, method="M2_two")
           for eta in (0.15, 0.4)}
    z = {eta: abs(r.witness_value - r.exact_witness) / r.standard_errors["witness"] for eta, r in res.items()}
    ok = (res[0.15].verdict == "entangled" and res[0.4].verdict == "inconclusive"
          and all(v <= 3 for v in z.values()))
    report(11, ok, "; ".join(f"eta={eta}: {r.verdict}, w = {r.witness_value:+.4f} vs exact {r.exact_witness:+.4f} "
                             f"({z[eta]:.2f} SE)" for eta, r in res.items()))
    assert ok
