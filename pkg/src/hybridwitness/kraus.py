"""Kraus and dilation-unitary description of the loss channels on the 4x4 model.

System index convention: 2 * cat + qubit, cat 0 = C+ and cat 1 = C-, matching
the damped-cat basis order of ``catalgebra``.

A 4x4 dilation unitary acts on one system level pair and one reservoir qubit.
Two index orderings are supported: ``reservoir_major`` (index 2 r + s) and
``system_major`` (index 2 s + r). The published two-angle matrices reproduce
the Kraus sets exactly under ``reservoir_major``; under ``system_major`` the
continuous one flips the sign of the (C+,0)/(C-,1) coherence.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import polar

from .catalgebra import ENTRY_NAMES, CatBasisState, damped_amplitude, oracle_entries
from .errors import DomainError, IncompleteKraus, InputError, NotUnitary
from .fockcore import cat_ket, cutoff_for
from .statefactory import NoiseParams, MIN_SWEEP_CUTOFF

COMPLETENESS_TOL = 1e-12
DOMAIN_SLACK = 1e-12
ORDERINGS = ("reservoir_major", "system_major")
DILATION_LABELS = {
    "reservoir_major": ("|0>_r|+>", "|0>_r|->", "|1>_r|+>", "|1>_r|->"),
    "system_major": ("|+>|0>_r", "|+>|1>_r", "|->|0>_r", "|->|1>_r"),
}

IDEAL_RHO4 = np.array([[0, 0, 0, 0], [0, .5, .5, 0], [0, .5, .5, 0], [0, 0, 0, 0]], dtype=complex)


@dataclass(frozen=True)
class KrausSet:
    elements: tuple
    label: str = ""

    def __post_init__(self):
        els = tuple(np.asarray(k, dtype=complex) for k in self.elements)
        if not els or any(k.shape != els[0].shape or k.shape[0] != k.shape[1] for k in els):
            raise InputError("Kraus elements must be equal-size square matrices")
        object.__setattr__(self, "elements", els)

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]

    @property
    def completeness_residual(self) -> float:
        s = sum(k.conj().T @ k for k in self.elements)
        return float(np.abs(s - np.eye(self.dim)).max())

    def check(self, tol: float = COMPLETENESS_TOL) -> "KrausSet":
        r = self.completeness_residual
        if r > tol:
            raise IncompleteKraus(f"{self.label or 'Kraus set'}: completeness residual {r:.2e}")
        return self

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return sum(k @ rho @ k.conj().T for k in self.elements)


@dataclass(frozen=True)
class DilationUnitary:
    matrix: np.ndarray
    ordering: str = "reservoir_major"
    label: str = ""
    notes: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.ordering not in ORDERINGS:
            raise InputError(f"unknown ordering {self.ordering!r}")

    @property
    def basis_labels(self) -> tuple:
        return DILATION_LABELS[self.ordering]

    def as_system_major(self) -> np.ndarray:
        """Matrix with indices rearranged to (system, reservoir) order."""
        m = np.asarray(self.matrix).reshape(2, 2, 2, 2)
        if self.ordering == "reservoir_major":
            m = m.transpose(1, 0, 3, 2)
        return m.reshape(4, 4)

    @property
    def residual(self) -> float:
        m = np.asarray(self.matrix)
        return float(np.abs(m.conj().T @ m - np.eye(m.shape[0])).max())

    def is_unitary(self, tol: float = COMPLETENESS_TOL) -> bool:
        return self.residual <= tol

    def check(self, tol: float = 1e-8) -> "DilationUnitary":
        if self.residual > tol:
            raise NotUnitary(self.residual, self.label)
        return self

    def kraus(self) -> KrausSet:
        """Kraus elements <r| U |0>_r for a reservoir starting in |0>."""
        m = self.as_system_major().reshape(2, 2, 2, 2)  # [s', r', s, r]
        return KrausSet(tuple(m[:, r, :, 0] for r in range(2)), label=f"{self.label} kraus")


# --- Kraus sets --------------------------------------------------------------

def discrete_kraus(eta_d: float) -> KrausSet:
    """Amplitude damping |1> -> |0> with probability eta_d."""
    if not 0.0 <= eta_d <= 1.0:
        raise InputError(f"eta_d={eta_d} outside [0, 1]")
    D1 = np.diag([1.0, np.sqrt(1.0 - eta_d)])
    D2 = np.array([[0.0, np.sqrt(eta_d)], [0.0, 0.0]])
    return KrausSet((D1, D2), label="discrete")


def kraus_from_angles(theta_a: float, theta_b: float, label: str = "continuous") -> KrausSet:
    C1 = np.diag([np.cos(theta_a), np.cos(theta_b)])
    C2 = np.array([[0.0, np.sin(theta_b)], [np.sin(theta_a), 0.0]])
    return KrausSet((C1, C2), label=label)


def _safe_arccos(x: float, name: str) -> float:
    if x > 1 + DOMAIN_SLACK or x < -1 - DOMAIN_SLACK or np.isnan(x):
        raise DomainError(f"arccos argument for {name} is {x!r}")
    return float(np.arccos(np.clip(x, -1.0, 1.0)))


def continuous_angles(eta: float, alpha: float) -> tuple[float, float]:
    if not 0.0 < eta < 1.0:
        raise InputError(f"eta={eta} outside (0, 1)")
    if not alpha > 0:
        raise InputError(f"alpha={alpha} must be > 0")
    E = np.exp(-2 * alpha**2)
    K = np.exp(-2 * (1 - eta) * alpha**2)
    f = np.exp(-2 * eta * alpha**2)
    ta = _safe_arccos(np.sqrt((1 + K) * (1 + f)) / np.sqrt(2 + 2 * E), "theta_a")
    tb = _safe_arccos(np.sqrt((1 - K) * (1 + f)) / np.sqrt(2 - 2 * E), "theta_b")
    return ta, tb


def continuous_kraus(eta: float, alpha: float) -> KrausSet:
    return kraus_from_angles(*continuous_angles(eta, alpha))


def cat_overlap_matrix(alpha: float, eta: float, N: int | None = None) -> np.ndarray:
    """T[i, j] = <C_i(s)|C_j(alpha)>, i, j in (C+, C-), evaluated in Fock space."""
    if not alpha > 0:
        raise InputError(f"alpha={alpha} must be > 0")
    if not 0.0 <= eta < 1.0:
        raise InputError(f"eta={eta} outside [0, 1)")
    if N is None:
        N = max(MIN_SWEEP_CUTOFF, cutoff_for(alpha))
    s = damped_amplitude(alpha, eta)
    new = [cat_ket(s, +1, N), cat_ket(s, -1, N)]
    old = [cat_ket(alpha, +1, N), cat_ket(alpha, -1, N)]
    return np.array([[a.overlap(b) for b in old] for a in new])


def basis_change_u(alpha: float, eta: float, N: int | None = None) -> np.ndarray:
    """Unitary part of the cat-coefficient transfer matrix into the damped basis."""
    u, _ = polar(cat_overlap_matrix(alpha, eta, N))
    return u


def apply_kraus_channel(rho4, continuous: KrausSet, discrete: KrausSet, u=None) -> np.ndarray:
    """sum_ij (C_i U (x) D_j) rho (C_i U (x) D_j)^dagger on the 4x4 (cat, qubit) space."""
    rho4 = np.asarray(rho4, dtype=complex)
    if rho4.shape != (4, 4):
        raise InputError(f"need a 4x4 matrix, got {rho4.shape}")
    for ks in (continuous, discrete):
        if ks.dim != 2:
            raise InputError(f"{ks.label}: elements must be 2x2")
        ks.check(1e-10)
    u = np.eye(2) if u is None else np.asarray(u)
    out = np.zeros((4, 4), dtype=complex)
    for C in continuous.elements:
        for D in discrete.elements:
            K = np.kron(C @ u, D)
            out += K @ rho4 @ K.conj().T
    return out


def channel_state(alpha: float, noise: NoiseParams) -> CatBasisState:
    """Noisy 4x4 state obtained by the Kraus route from the ideal state."""
    if noise.eta == 0:
        cont = KrausSet((np.eye(2), np.zeros((2, 2))), label="identity")
    else:
        cont = continuous_kraus(noise.eta, alpha)
    r = np.real(apply_kraus_channel(IDEAL_RHO4, cont, discrete_kraus(noise.eta_d), basis_change_u(alpha, noise.eta)))
    return CatBasisState(w=r[0, 0], z=r[0, 3], x1=r[1, 1], x2=r[2, 2], c=r[1, 2], y=r[3, 3],
                         alpha=float(alpha), eta=noise.eta, eta_d=noise.eta_d,
                         provenance={k: "kraus channel" for k in ENTRY_NAMES})


# --- dilation unitaries ------------------------------------------------------

def _twolevel_unitary(cd, sd, cg, sg) -> np.ndarray:
    return np.array([
        [cd, 0, 0, sd],
        [0, cg, sg, 0],
        [0, -sg, cg, 0],
        [-sd, 0, 0, cd],
    ], dtype=complex)


def naimark_unitaries(alpha: float, noise: NoiseParams, variant: str = "printed",
                      ordering: str = "reservoir_major"):
    """(U_c, U_d) dilation unitaries.

    ``printed`` transcribes the published matrices (square-root normalizers);
    its U_d is not unitary because the lower diagonal entry reads sqrt(eta_d).
    ``corrected`` replaces that entry by sqrt(1 - eta_d). ``ordering`` says how
    the 4 indices are read; the matrices themselves are the same.
    """
    if not 0.0 < noise.eta < 1.0:
        raise InputError(f"eta={noise.eta} outside (0, 1)")
    if not alpha > 0:
        raise InputError(f"alpha={alpha} must be > 0")
    ed = noise.eta_d
    E = np.exp(-2 * alpha**2)
    K = np.exp(-2 * (1 - noise.eta) * alpha**2)
    f = np.exp(-2 * noise.eta * alpha**2)
    Np, Nm = np.sqrt(2 * (1 + E)), np.sqrt(2 * (1 - E))
    ca, sa = np.sqrt((1 + K) * (1 + f)) / Np, np.sqrt((1 - K) * (1 - f)) / Np
    cb, sb = np.sqrt((1 - K) * (1 + f)) / Nm, np.sqrt((1 + K) * (1 - f)) / Nm
    if variant == "printed":
        Uc = _twolevel_unitary(ca, sa, cb, sb)
        Ud = np.array([
            [1, 0, 0, 0],
            [0, np.sqrt(1 - ed), np.sqrt(ed), 0],
            [0, -np.sqrt(ed), np.sqrt(ed), 0],
            [0, 0, 0, 1],
        ], dtype=complex)
    elif variant == "corrected":
        Uc = _twolevel_unitary(ca, sa, cb, sb)
        Ud = _twolevel_unitary(1.0, 0.0, np.sqrt(1 - ed), np.sqrt(ed))
    else:
        raise InputError(f"unknown variant {variant!r}")
    notes = {"discrete labels": "+ -> |0>, - -> |1>"}
    return (DilationUnitary(Uc, ordering, label=f"U_c ({variant}, {ordering})"),
            DilationUnitary(Ud, ordering, label=f"U_d ({variant}, {ordering})", notes=notes))


def dilate_and_trace(rho4, U_c: DilationUnitary | None = None, U_d: DilationUnitary | None = None) -> np.ndarray:
    """Tr_{r_c, r_d}[(U_c (x) U_d)(rho (x) |00><00|)(...)^dagger] with reservoirs interleaved."""
    rho4 = np.asarray(rho4, dtype=complex)
    uc = np.eye(4) if U_c is None else U_c.as_system_major()
    ud = np.eye(4) if U_d is None else U_d.as_system_major()
    # embed: system (c, q) -> (c, r_c, q, r_d) with both reservoirs in |0>
    iso = np.zeros((16, 4), dtype=complex)
    for c in range(2):
        for q in range(2):
            iso[((c * 2 + 0) * 2 + q) * 2 + 0, 2 * c + q] = 1.0
    big = np.kron(uc, ud) @ iso
    full = (big @ rho4 @ big.conj().T).reshape(2, 2, 2, 2, 2, 2, 2, 2)
    # indices (c, r_c, q, r_d | c', r_c', q', r_d'); trace both reservoirs
    return np.einsum("axbycxdy->abcd", full).reshape(4, 4)


def printed_discrete_noise_matrix(eta_d: float) -> np.ndarray:
    """The published qubit-loss-only 4x4 state, transcribed literally."""
    s = np.sqrt(1 - eta_d) / 2
    return np.array([
        [eta_d / 2, 0, 0, 0],
        [0, (1 - eta_d) / 2, s, 0],
        [0, s, 0.5, 0],
        [0, 0, 0, 1.0],
    ])


def decompose_discrete_noise(eta_d: float):
    """Split the qubit-loss-only state into entangled and product pure parts.

    Returns (weight_ent, weight_sep, psi_ent, psi_sep) with 4-vectors in the
    (cat, qubit) basis. psi_ent is normalized by sqrt(2 - eta_d).
    """
    if not 0.0 < eta_d < 1.0:
        raise InputError(f"eta_d={eta_d} outside (0, 1)")
    w_ent = (1 + (1 - eta_d)) / 2
    w_sep = (1 - (1 - eta_d)) / 2
    psi_ent = np.zeros(4)
    psi_ent[2] = 1.0                      # |C-> |0>
    psi_ent[1] = np.sqrt(1 - eta_d)       # |C+> |1>
    psi_ent /= np.sqrt(2 - eta_d)
    psi_sep = np.zeros(4)
    psi_sep[0] = 1.0                      # |C+> |0>
    return w_ent, w_sep, psi_ent, psi_sep


def _entry_diff(a: CatBasisState, b: CatBasisState) -> float:
    return max(abs(getattr(a, k) - getattr(b, k)) for k in ENTRY_NAMES)


_IDENTITY_KRAUS = KrausSet((np.eye(2), np.zeros((2, 2))), label="identity")


def dilation_checks(alpha: float, noise: NoiseParams, variant: str, ordering: str) -> dict:
    """Unitarity of U_c, U_d and, for each unitary one, agreement of dilate-and-trace with its Kraus channel."""
    Uc, Ud = naimark_unitaries(alpha, noise, variant, ordering)
    cont, disc = continuous_kraus(noise.eta, alpha), discrete_kraus(noise.eta_d)
    rec = {"U_c_residual": Uc.residual, "U_d_residual": Ud.residual}
    cases = {
        "U_c": (Uc.is_unitary(), (Uc, None), (cont, _IDENTITY_KRAUS)),
        "U_d": (Ud.is_unitary(), (None, Ud), (_IDENTITY_KRAUS, disc)),
        "both": (Uc.is_unitary() and Ud.is_unitary(), (Uc, Ud), (cont, disc)),
    }
    for name, (unitary, (a, b), (kc, kd)) in cases.items():
        if not unitary:
            rec[f"{name}_vs_channel_max_err"] = None
            continue
        out = dilate_and_trace(IDEAL_RHO4, a, b)
        rec[f"{name}_vs_channel_max_err"] = float(np.abs(out - apply_kraus_channel(IDEAL_RHO4, kc, kd)).max())
    return rec


def verify_report(etas=None, alphas=(0.7, 1.0, 1.3), eta_ds=(0.0, 0.2, 0.5, 0.8), N: int | None = None,
                  ordering: str = "reservoir_major") -> dict:
    """JSON-ready verification of Kraus completeness, channel equivalence and dilations.

    The pass/fail summary uses ``ordering``; dilation checks are reported for
    both orderings and both variants so the convention dependence is visible.
    """
    if etas is None:
        etas = tuple(float(e) for e in np.round(np.linspace(0.05, 0.95, 10), 6))
    points = []
    ok = {"completeness": True, "channel_vs_oracle": True, "printed_dilation_vs_channel": True,
          "corrected_dilation_vs_channel": True}
    for a in alphas:
        for e in etas:
            res_c = continuous_kraus(float(e), a).completeness_residual
            ok["completeness"] &= res_c <= COMPLETENESS_TOL
            for ed in eta_ds:
                noise = NoiseParams(float(e), float(ed))
                res_d = discrete_kraus(ed).completeness_residual
                ok["completeness"] &= res_d <= COMPLETENESS_TOL
                ch_err = _entry_diff(channel_state(a, noise), oracle_entries(a, noise, N))
                ok["channel_vs_oracle"] &= bool(ch_err <= 1e-8)
                rec = {"alpha": a, "eta": float(e), "eta_d": float(ed),
                       "completeness_residual": {"continuous": res_c, "discrete": res_d},
                       "channel_vs_oracle_max_err": ch_err, "dilations": {}}
                for variant in ("printed", "corrected"):
                    for order in ORDERINGS:
                        d = dilation_checks(a, noise, variant, order)
                        rec["dilations"][f"{variant}/{order}"] = d
                        if order == ordering:
                            errs = [v for k, v in d.items() if k.endswith("_vs_channel_max_err") and v is not None]
                            ok[f"{variant}_dilation_vs_channel"] &= all(x <= 1e-10 for x in errs)
                points.append(rec)
    discrete_only = []
    for ed in (0.2, 0.4, 0.7):
        Ud = naimark_unitaries(1.0, NoiseParams(0.5, ed), "corrected", ordering)[1]
        out = np.real(dilate_and_trace(IDEAL_RHO4, None, Ud))
        w_ent, w_sep, pe, ps = decompose_discrete_noise(ed)
        mix = w_ent * np.outer(pe, pe) + w_sep * np.outer(ps, ps)
        diff = np.abs(printed_discrete_noise_matrix(ed) - out)
        printed_norm = np.sqrt(ed)
        discrete_only.append({
            "eta_d": ed,
            "printed_vs_dilation_max_err": float(diff.max()),
            "printed_entries_off": [[int(i), int(j)] for i, j in zip(*np.nonzero(diff > 1e-10))],
            "decomposition_vs_dilation_max_err": float(np.abs(mix - out).max()),
            "psi_ent_norm_with_printed_normalizer": float(np.sqrt(2 - ed) / printed_norm),
        })
    return {"ordering": ordering, "all_pass": all(ok.values()), "checks": {k: bool(v) for k, v in ok.items()},
            "points": points, "discrete_only": discrete_only}
