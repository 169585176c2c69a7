"""Ideal and noisy hybrid qubit/cat states in truncated Fock space.

The noisy state is produced by explicit dilation: each channel gets a
reservoir mode, the loss unitary acts on the (system, reservoir) pair and the
reservoirs are traced out. This is the ground truth the 4x4 closed forms,
Kraus channels and witness values are compared against.

Mode order for every operator produced here is (qubit, field): dims (2, N+1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import constants

from .errors import CutoffTooSmall, InputError
from .fockcore import (
    TAU_TRUNC,
    Ket,
    Operator,
    beamsplitter_unitary,
    cat_ket,
    check_density,
    cutoff_for,
)

QUBIT_DIM = 2
MIN_SWEEP_CUTOFF = 20


@dataclass(frozen=True)
class NoiseParams:
    """Loss fraction of the field (eta) and qubit (eta_d) channels, plus the
    thermal occupancy of the field reservoir."""

    eta: float = 0.0
    eta_d: float = 0.0
    n_th: float = 0.0

    def __post_init__(self):
        for name in ("eta", "eta_d"):
            v = float(getattr(self, name))
            if not (0.0 <= v <= 1.0) or math.isnan(v):
                raise InputError(f"{name}={v} outside [0, 1]")
            object.__setattr__(self, name, v)
        n = float(self.n_th)
        if not n >= 0.0:
            raise InputError(f"n_th={n} must be >= 0")
        object.__setattr__(self, "n_th", n)


def default_cutoff(alpha: float, n_th: float = 0.0) -> int:
    """Cutoff used by sweeps: max(20, Poisson-tail rule), raised further for a thermal reservoir."""
    n = max(MIN_SWEEP_CUTOFF, cutoff_for(alpha))
    if n_th > 0:
        n = max(n, _thermal_cutoff(n_th) + cutoff_for(alpha))
    return n


def ideal_hybrid_state(alpha: float, N: int) -> Ket:
    """(|0>|C-(alpha)> + |1>|C+(alpha)>) / sqrt(2) on dims (2, N+1)."""
    if not alpha > 0:
        raise InputError(f"alpha={alpha} must be > 0")
    cm = cat_ket(alpha, -1, N).amplitudes
    cp = cat_ket(alpha, +1, N).amplitudes
    amp = np.concatenate([cm, cp]) / np.sqrt(2.0)
    return Ket(amp, (QUBIT_DIM, N + 1))


def _thermal_cutoff(n_th: float, tol: float = TAU_TRUNC) -> int:
    q = n_th / (1.0 + n_th)
    # tail beyond level N of the geometric distribution is q^(N+1)
    return max(1, int(math.ceil(math.log(tol) / math.log(q))))


def thermal_populations(n_th: float, N: int, tol: float = TAU_TRUNC) -> np.ndarray:
    if n_th < 0:
        raise InputError(f"n_th={n_th} must be >= 0")
    p = np.zeros(N + 1)
    if n_th == 0:
        p[0] = 1.0
        return p
    q = n_th / (1.0 + n_th)
    tail = q ** (N + 1)
    if tail >= tol:
        raise CutoffTooSmall(f"thermal tail {tail:.2e} beyond n={N} for n_th={n_th}")
    p = (1.0 - q) * q ** np.arange(N + 1)
    return p / p.sum()


def thermal_state(n_th: float, N: int) -> Operator:
    return Operator(np.diag(thermal_populations(n_th, N)), (N + 1,))


def _discrete_loss(phi: np.ndarray, eta_d: float) -> np.ndarray:
    """Two-level loss on the leading qubit axis.

    |0>|0>_r -> |0>|0>_r and |1>|0>_r -> sqrt(1-eta_d)|1>|0>_r + sqrt(eta_d)|0>|1>_r.
    Returns amplitudes indexed [q, r_d, ...].
    """
    out = np.zeros((2, 2) + phi.shape[1:], dtype=complex)
    out[0, 0] = phi[0]
    out[1, 0] = np.sqrt(1.0 - eta_d) * phi[1]
    out[0, 1] = np.sqrt(eta_d) * phi[1]
    return out


def apply_noise(psi: Ket, noise: NoiseParams) -> Operator:
    """Send a pure qubit/field state through both loss channels and trace the reservoirs."""
    if len(psi.dims) != 2 or psi.dims[0] != QUBIT_DIM:
        raise InputError(f"expected (qubit, field) dims, got {psi.dims}")
    d = psi.dims[1]
    N = d - 1
    amp = psi.amplitudes.reshape(QUBIT_DIM, d)
    u = beamsplitter_unitary(noise.eta, N).matrix
    pops = thermal_populations(noise.n_th, N)
    rho = np.zeros((QUBIT_DIM * d, QUBIT_DIM * d), dtype=complex)
    for n, p in enumerate(pops):
        if p < 1e-300:
            continue
        # field x reservoir amplitudes with the reservoir in |n>
        joint = np.zeros((QUBIT_DIM, d, d), dtype=complex)
        joint[:, :, n] = amp
        phi = (joint.reshape(QUBIT_DIM, d * d) @ u.T).reshape(QUBIT_DIM, d, d)
        a = _discrete_loss(phi, noise.eta_d)  # [q, r_d, t, r_c]
        rho += p * _trace_reservoirs(a)
    return check_density(Operator(rho, (QUBIT_DIM, d)), trace_tol=1e-8)


def _trace_reservoirs(a: np.ndarray) -> np.ndarray:
    d = a.shape[2]
    # rho[(q,t),(q',t')] = sum_{r_d, r_c} a[q,r_d,t,r_c] conj(a[q',r_d,t',r_c])
    m = np.einsum("qstr,psur->qtpu", a, a.conj())
    return m.reshape(QUBIT_DIM * d, QUBIT_DIM * d)


def noisy_state_fock(alpha: float, noise: NoiseParams, N: int | None = None) -> Operator:
    """Reduced (qubit, field) density operator after loss on both channels."""
    if N is None:
        N = default_cutoff(alpha, noise.n_th)
    return apply_noise(ideal_hybrid_state(alpha, N), noise)


def thermal_occupation(frequency: float, temperature: float) -> float:
    """Bose-Einstein mean photon number 1 / (exp(h nu / k T) - 1)."""
    if not frequency > 0 or not temperature > 0:
        raise InputError("frequency and temperature must be positive")
    x = constants.h * frequency / (constants.k * temperature)
    if x > 700:
        return math.exp(-x)
    return 1.0 / math.expm1(x)
