"""Truncated Fock-space linear algebra.

Dense complex matrices over an explicit tensor product of modes. Mode order is
fixed by ``dims``; every tensor/trace operation names modes by index. This
layer is the brute-force oracle that the closed-form results are checked
against, so it favours plain, obviously-correct constructions.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.linalg import expm
from scipy.special import gammaln
from scipy.stats import poisson

from .errors import CutoffTooSmall, DegenerateCat, InputError, NotPositive, ShapeMismatch

TAU_TRUNC = 1e-10
HERMITIAN_TOL = 1e-12
POSITIVITY_TOL = 1e-10

ModeShape = tuple[int, ...]


def _check_dims(dims: Sequence[int]) -> ModeShape:
    dims = tuple(int(d) for d in dims)
    if not dims or any(d < 2 for d in dims):
        raise ShapeMismatch(f"every mode needs dimension >= 2, got {dims}")
    return dims


@dataclass(frozen=True)
class Ket:
    amplitudes: np.ndarray
    dims: ModeShape

    def __post_init__(self):
        dims = _check_dims(self.dims)
        amp = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amp.size != int(np.prod(dims)):
            raise ShapeMismatch(f"{amp.size} amplitudes do not fit dims {dims}")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)
        object.__setattr__(self, "dims", dims)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def overlap(self, other: "Ket") -> complex:
        """<self|other>."""
        if self.dims != other.dims:
            raise ShapeMismatch(f"{self.dims} vs {other.dims}")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def dm(self) -> "Operator":
        return Operator(np.outer(self.amplitudes, self.amplitudes.conj()), self.dims)


@dataclass(frozen=True)
class Operator:
    matrix: np.ndarray
    dims: ModeShape

    def __post_init__(self):
        dims = _check_dims(self.dims)
        m = np.asarray(self.matrix, dtype=complex)
        d = int(np.prod(dims))
        if m.shape != (d, d):
            raise ShapeMismatch(f"matrix {m.shape} does not match dims {dims}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "dims", dims)

    def dag(self) -> "Operator":
        return Operator(self.matrix.conj().T, self.dims)

    def __matmul__(self, other):
        if isinstance(other, Operator):
            if other.dims != self.dims:
                raise ShapeMismatch(f"{self.dims} vs {other.dims}")
            return Operator(self.matrix @ other.matrix, self.dims)
        if isinstance(other, Ket):
            if other.dims != self.dims:
                raise ShapeMismatch(f"{self.dims} vs {other.dims}")
            return Ket(self.matrix @ other.amplitudes, self.dims)
        return NotImplemented

    def __add__(self, other: "Operator") -> "Operator":
        if other.dims != self.dims:
            raise ShapeMismatch(f"{self.dims} vs {other.dims}")
        return Operator(self.matrix + other.matrix, self.dims)

    def __sub__(self, other: "Operator") -> "Operator":
        if other.dims != self.dims:
            raise ShapeMismatch(f"{self.dims} vs {other.dims}")
        return Operator(self.matrix - other.matrix, self.dims)

    def __mul__(self, scalar) -> "Operator":
        return Operator(self.matrix * scalar, self.dims)

    __rmul__ = __mul__

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def expect(self, rho: "Operator") -> complex:
        """Tr[self rho]."""
        if rho.dims != self.dims:
            raise ShapeMismatch(f"{self.dims} vs {rho.dims}")
        return complex(np.einsum("ij,ji->", self.matrix, rho.matrix))


def identity(dims: Sequence[int]) -> Operator:
    dims = _check_dims(dims)
    return Operator(np.eye(int(np.prod(dims))), dims)


def density_residuals(rho: Operator) -> dict[str, float]:
    m = rho.matrix
    herm = float(np.abs(m - m.conj().T).max())
    evals = np.linalg.eigvalsh((m + m.conj().T) / 2)
    return {
        "hermiticity": herm,
        "trace_error": float(abs(np.trace(m) - 1.0)),
        "min_eigenvalue": float(evals.min()),
    }


def check_density(rho: Operator, trace_tol: float = TAU_TRUNC,
                  herm_tol: float = HERMITIAN_TOL, pos_tol: float = POSITIVITY_TOL) -> Operator:
    """Raise ``NotPositive`` unless ``rho`` is a valid density operator."""
    r = density_residuals(rho)
    if r["hermiticity"] > herm_tol:
        raise NotPositive(f"not Hermitian (residual {r['hermiticity']:.2e})")
    if r["trace_error"] > trace_tol:
        raise NotPositive(f"trace off by {r['trace_error']:.2e}")
    if r["min_eigenvalue"] < -pos_tol:
        raise NotPositive(f"negative eigenvalue {r['min_eigenvalue']:.2e}")
    return rho


# --- single-mode states ------------------------------------------------------

def poisson_tail(alpha: float, cutoff: int) -> float:
    """Probability mass of a coherent state beyond Fock level ``cutoff``."""
    return float(poisson.sf(cutoff, alpha * alpha))


def cutoff_for(alpha: float, tol: float = TAU_TRUNC) -> int:
    """Smallest cutoff whose Poisson tail for amplitude ``alpha`` is below ``tol``."""
    n = 1
    while poisson_tail(alpha, n) >= tol:
        n += 1
    return n


def _real_alpha(alpha) -> float:
    if np.iscomplexobj(alpha) and np.imag(alpha) != 0:
        raise InputError("complex amplitudes are not supported")
    return float(np.real(alpha))


def _coherent_amplitudes(alpha: float, cutoff: int) -> np.ndarray:
    n = np.arange(cutoff + 1)
    if alpha == 0:
        amp = np.zeros(cutoff + 1)
        amp[0] = 1.0
        return amp
    mag = np.exp(-alpha * alpha / 2 + n * np.log(abs(alpha)) - 0.5 * gammaln(n + 1))
    return mag * np.sign(alpha) ** n


def coherent_ket(alpha: float, cutoff: int, tol: float = TAU_TRUNC) -> Ket:
    alpha = _real_alpha(alpha)
    if cutoff < 1:
        raise InputError("cutoff must be >= 1")
    tail = poisson_tail(alpha, cutoff)
    if tail >= tol:
        raise CutoffTooSmall(f"alpha={alpha}: tail mass {tail:.2e} beyond n={cutoff}")
    amp = _coherent_amplitudes(alpha, cutoff)
    return Ket(amp / np.linalg.norm(amp), (cutoff + 1,))


def cat_ket(alpha: float, sign: int, cutoff: int, tol: float = TAU_TRUNC) -> Ket:
    """Normalized (|alpha> + sign |-alpha>), built from its parity-filtered Fock amplitudes."""
    alpha = _real_alpha(alpha)
    if sign not in (1, -1):
        raise InputError("sign must be +1 or -1")
    if sign == -1 and abs(alpha) < 1e-8:
        raise DegenerateCat(f"odd cat undefined for alpha={alpha}")
    if cutoff < 1:
        raise InputError("cutoff must be >= 1")
    tail = poisson_tail(alpha, cutoff)
    if tail >= tol:
        raise CutoffTooSmall(f"alpha={alpha}: tail mass {tail:.2e} beyond n={cutoff}")
    amp = _coherent_amplitudes(alpha, cutoff)
    parity = np.arange(cutoff + 1) % 2
    amp = np.where(parity == (0 if sign == 1 else 1), amp, 0.0)
    return Ket(amp / np.linalg.norm(amp), (cutoff + 1,))


def fock_ket(n: int, cutoff: int) -> Ket:
    if not 0 <= n <= cutoff:
        raise InputError(f"level {n} outside 0..{cutoff}")
    amp = np.zeros(cutoff + 1)
    amp[n] = 1.0
    return Ket(amp, (cutoff + 1,))


def ladder_ops(cutoff: int) -> tuple[Operator, Operator, Operator]:
    """(a, a_dagger, number) on levels 0..cutoff."""
    if cutoff < 1:
        raise InputError("cutoff must be >= 1")
    a = np.diag(np.sqrt(np.arange(1, cutoff + 1)), 1)
    dims = (cutoff + 1,)
    return Operator(a, dims), Operator(a.T, dims), Operator(np.diag(np.arange(cutoff + 1.0)), dims)


# --- composite systems -------------------------------------------------------

def tensor(*items):
    """Kronecker product of Operators (or of Kets), dims concatenated."""
    if len(items) == 1 and isinstance(items[0], (list, tuple)):
        items = tuple(items[0])
    if not items:
        raise ShapeMismatch("nothing to tensor")
    if all(isinstance(x, Ket) for x in items):
        amp = items[0].amplitudes
        for k in items[1:]:
            amp = np.kron(amp, k.amplitudes)
        return Ket(amp, sum((k.dims for k in items), ()))
    if all(isinstance(x, Operator) for x in items):
        m = items[0].matrix
        for op in items[1:]:
            m = np.kron(m, op.matrix)
        return Operator(m, sum((op.dims for op in items), ()))
    raise ShapeMismatch("tensor needs all Kets or all Operators")


def partial_trace(rho: Operator, keep: Sequence[int]) -> Operator:
    dims = rho.dims
    keep = sorted(set(int(k) for k in keep))
    if not keep or any(k < 0 or k >= len(dims) for k in keep):
        raise ShapeMismatch(f"cannot keep modes {keep} of {dims}")
    n = len(dims)
    t = rho.matrix.reshape(dims + dims)
    # trace out from the highest index down so axis numbers stay valid
    for m in sorted(set(range(n)) - set(keep), reverse=True):
        cur = t.ndim // 2
        t = np.trace(t, axis1=m, axis2=m + cur)
    kept = tuple(dims[k] for k in keep)
    d = int(np.prod(kept))
    return Operator(t.reshape(d, d), kept)


def embed(op: Operator, mode: int, dims: Sequence[int]) -> Operator:
    """Lift a single-mode operator onto mode ``mode`` of ``dims``."""
    dims = _check_dims(dims)
    if op.dims != (dims[mode],):
        raise ShapeMismatch(f"{op.dims} does not fit mode {mode} of {dims}")
    parts = [identity((d,)) for d in dims]
    parts[mode] = op
    return tensor(*parts)


# --- beam splitter -----------------------------------------------------------

@lru_cache(maxsize=32)
def _beamsplitter_matrix(eta: float, cutoff: int) -> np.ndarray:
    d = cutoff + 1
    u = np.zeros((d * d, d * d), dtype=complex)
    theta = np.arcsin(np.sqrt(eta))
    # a^dag b - a b^dag conserves n1 + n2; exponentiate each sector separately
    for k in range(2 * cutoff + 1):
        n1 = np.arange(max(0, k - cutoff), min(k, cutoff) + 1)
        idx = n1 * d + (k - n1)
        if n1.size == 1:
            u[idx[0], idx[0]] = 1.0
            continue
        # <n1+1, n2-1| a^dag b |n1, n2> = sqrt(n1+1) sqrt(n2)
        off = np.sqrt(n1[:-1] + 1.0) * np.sqrt(k - n1[:-1])
        g = np.diag(off, -1) - np.diag(off, 1)
        u[np.ix_(idx, idx)] = expm(-theta * g)
    u.setflags(write=False)
    return u


def beamsplitter_unitary(eta: float, cutoff: int) -> Operator:
    """Two-mode loss beam splitter: |a>|0> -> |sqrt(1-eta) a>|sqrt(eta) a>.

    Exact on every total-photon sector n1 + n2 <= cutoff; sectors above that
    are truncated but still exponentiated from an anti-Hermitian generator,
    so the result is unitary to machine precision.
    """
    if not 0.0 <= eta <= 1.0:
        raise InputError(f"eta={eta} outside [0, 1]")
    if cutoff < 1:
        raise InputError("cutoff must be >= 1")
    return Operator(_beamsplitter_matrix(float(eta), int(cutoff)), (cutoff + 1, cutoff + 1))
