"""The homodyne-implementable witness and its separable-state bounds.

    W~ = 1 - 1/2 [1 + sx (x) (a + a^dag)/n_x - sy (x) i(a - a^dag)/n_y]

For a product state the correlation term is bounded by 2 max(1/n_x, 1/n_y)
times sup sum_i |l_i||l_{i+1}| sqrt(i+1) over unit vectors on levels 0..N.
That supremum, f(N), is half the top eigenvalue of the Jacobi matrix of the
probabilists' Hermite polynomials. Method 1 uses f(N); Method 2 replaces
|l_i||l_{i+1}| by sqrt(p_i p_{i+1}) from measured photon statistics.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial import hermite_e
from scipy.linalg import eigh_tridiagonal

from .catalgebra import SIGMA_X, SIGMA_Y
from .errors import BadStatistics, InputError, ShapeMismatch, UncertifiedConfig
from .fockcore import Operator, ladder_ops
from .statefactory import NoiseParams, default_cutoff, noisy_state_fock

CERT_TOL = 1e-12


# --- f(N) --------------------------------------------------------------------

def _jacobi_offdiag(N: int) -> np.ndarray:
    return np.sqrt(np.arange(1, N + 1, dtype=float))


def f_of_n(N: int) -> float:
    """sup over unit l on levels 0..N of sum_i l_i l_{i+1} sqrt(i+1)."""
    if N < 1:
        raise InputError("N must be >= 1")
    top = eigh_tridiagonal(np.zeros(N + 1), _jacobi_offdiag(N), eigvals_only=True,
                           select="i", select_range=(N, N))
    return 0.5 * float(top[0])


def maximizer(N: int) -> np.ndarray:
    """Nonnegative unit vector attaining f(N)."""
    if N < 1:
        raise InputError("N must be >= 1")
    _, v = eigh_tridiagonal(np.zeros(N + 1), _jacobi_offdiag(N), select="i", select_range=(N, N))
    v = v[:, 0]
    return np.abs(v) / np.linalg.norm(v)


def f_of_n_hermite(N: int) -> tuple[float, np.ndarray]:
    """f(N) by the root-then-kernel route.

    Take the largest root x of He_{N+1}; the stationarity system
    (J - x) l = 0 then has a one-dimensional kernel whose vector has a
    single sign. Returns (x / 2, kernel vector).
    """
    if N < 1:
        raise InputError("N must be >= 1")
    coeffs = np.zeros(N + 2)
    coeffs[-1] = 1.0
    x = float(np.max(np.real(hermite_e.hermeroots(coeffs))))
    off = _jacobi_offdiag(N)
    M = np.diag(off, 1) + np.diag(off, -1) - x * np.eye(N + 1)
    _, sv, vh = np.linalg.svd(M)
    v = vh[-1]
    if not (np.all(v >= -1e-9) or np.all(v <= 1e-9)):
        raise InputError(f"kernel vector for N={N} changes sign")
    v = np.abs(v) / np.linalg.norm(v)
    return 0.5 * x, v


def hermite_residual(N: int, x: float) -> float:
    """|He_{N+1}(x)| relative to the size of its terms."""
    coeffs = np.zeros(N + 2)
    coeffs[-1] = 1.0
    poly = hermite_e.herme2poly(coeffs)
    scale = float(np.sum(np.abs(poly) * np.abs(x) ** np.arange(poly.size)))
    return abs(float(hermite_e.hermeval(x, coeffs))) / scale


def chain_sum(lam: np.ndarray) -> float:
    lam = np.asarray(lam)
    return float(np.sum(lam[:-1] * lam[1:] * np.sqrt(np.arange(1, lam.size))))


def f_of_n_bruteforce(N: int, restarts: int = 20, iterations: int = 4000, seed: int = 0) -> float:
    """Projected gradient ascent of the chain sum on the nonnegative unit sphere."""
    if N < 1:
        raise InputError("N must be >= 1")
    if N > 12:
        raise InputError("brute force is meant for N <= 12")
    rng = np.random.default_rng(seed)
    off = _jacobi_offdiag(N)
    step = 1.0 / (2.0 * np.sqrt(N))
    best = 0.0
    for _ in range(restarts):
        lam = rng.random(N + 1)
        lam /= np.linalg.norm(lam)
        for _ in range(iterations):
            grad = np.zeros_like(lam)
            grad[:-1] += off * lam[1:]
            grad[1:] += off * lam[:-1]
            nxt = np.maximum(lam + step * grad, 0.0)
            nrm = np.linalg.norm(nxt)
            if nrm == 0:
                break
            nxt /= nrm
            done = np.abs(nxt - lam).max() < 1e-15
            lam = nxt
            if done:
                break
        best = max(best, chain_sum(lam))
    return best


# --- configuration and bounds -------------------------------------------------

@dataclass(frozen=True)
class WitnessConfig:
    n_x: float
    n_y: float
    N: int

    def __post_init__(self):
        if not (self.n_x > 0 and self.n_y > 0):
            raise InputError("scale factors must be positive")
        if int(self.N) != self.N or self.N < 1:
            raise InputError("N must be an integer >= 1")
        object.__setattr__(self, "N", int(self.N))

    @classmethod
    def default(cls, N: int) -> "WitnessConfig":
        """Smallest symmetric certified scales, n_x = n_y = 2 f(N)."""
        n = 2.0 * f_of_n(N)
        return cls(n, n, N)

    @property
    def bound_value(self) -> float:
        return 2.0 * f_of_n(self.N) * max(1.0 / self.n_x, 1.0 / self.n_y)

    @property
    def certified(self) -> bool:
        return self.bound_value <= 1.0 + CERT_TOL


@dataclass(frozen=True)
class SeparableBound:
    value: float
    method: str
    N: int
    n_x: float
    n_y: float
    f_N: float | None = None
    chain: float | None = None
    stats: np.ndarray | None = field(default=None, compare=False)

    @property
    def certified(self) -> bool:
        return self.value <= 1.0 + CERT_TOL

    def to_dict(self) -> dict:
        d = asdict(self)
        d["stats"] = None if self.stats is None else [float(x) for x in self.stats]
        d["certified"] = self.certified
        return d


def separable_bound_m1(config: WitnessConfig) -> SeparableBound:
    fN = f_of_n(config.N)
    value = 2.0 * fN * max(1.0 / config.n_x, 1.0 / config.n_y)
    return SeparableBound(value, "worst_case_M1", config.N, config.n_x, config.n_y, f_N=fN)


def _populations(stats) -> np.ndarray:
    p = np.asarray(getattr(stats, "populations", stats), dtype=float)
    if p.ndim != 1 or p.size < 2:
        raise BadStatistics("photon statistics must be a vector with at least 2 levels")
    if np.any(p < -1e-12) or abs(p.sum() - 1.0) > 1e-6:
        raise BadStatistics(f"populations must be nonnegative and sum to 1 (sum={p.sum():.8g})")
    return np.clip(p, 0.0, None)


def stats_chain(stats) -> float:
    """sum_i sqrt(p_i p_{i+1}) sqrt(i+1)."""
    p = _populations(stats)
    return float(np.sum(np.sqrt(p[:-1] * p[1:]) * np.sqrt(np.arange(1, p.size))))


def separable_bound_m2(stats, config: WitnessConfig) -> SeparableBound:
    """Bound that uses |rho_{i,i+1}| <= sqrt(rho_ii rho_{i+1,i+1}) for the measured diagonal."""
    p = _populations(stats)
    if p.size != config.N + 1:
        raise BadStatistics(f"need {config.N + 1} populations for N={config.N}, got {p.size}")
    S = stats_chain(p)
    value = 2.0 * S * max(1.0 / config.n_x, 1.0 / config.n_y)
    return SeparableBound(value, "stats_informed_M2", config.N, config.n_x, config.n_y,
                          f_N=f_of_n(config.N), chain=S, stats=p)


def m2_config(stats) -> WitnessConfig:
    """Smallest symmetric scales certified by the statistics-informed bound, n = 2 S."""
    p = _populations(stats)
    S = stats_chain(p)
    if S <= 0:
        raise BadStatistics("statistics admit no coherences; any scale works")
    return WitnessConfig(2.0 * S, 2.0 * S, p.size - 1)


# --- the witness operator -----------------------------------------------------

def correlation_operators(cutoff: int) -> tuple[Operator, Operator]:
    """sx (x) (a + a^dag) and sy (x) i(a - a^dag) on (qubit, field) dims."""
    a, ad, _ = ladder_ops(cutoff)
    X = a.matrix + ad.matrix
    P = 1j * (a.matrix - ad.matrix)
    dims = (2, cutoff + 1)
    return Operator(np.kron(SIGMA_X, X), dims), Operator(np.kron(SIGMA_Y, P), dims)


def tilde_witness_operator(config: WitnessConfig, N_eval: int | None = None,
                           allow_uncertified: bool = False) -> Operator:
    if not config.certified and not allow_uncertified:
        raise UncertifiedConfig(f"bound {config.bound_value:.6g} > 1 for {config}")
    N_eval = config.N if N_eval is None else int(N_eval)
    if N_eval < config.N:
        raise InputError("evaluation cutoff must be >= N")
    cx, cy = correlation_operators(N_eval)
    ident = np.eye(2 * (N_eval + 1))
    m = ident - 0.5 * (ident + cx.matrix / config.n_x - cy.matrix / config.n_y)
    return Operator(m, cx.dims)


def correlations(rho: Operator) -> tuple[float, float]:
    """(<sx (x) (a + a^dag)>, <sy (x) i(a - a^dag)>)."""
    if len(rho.dims) != 2 or rho.dims[0] != 2:
        raise ShapeMismatch(f"expected (qubit, field) dims, got {rho.dims}")
    cx, cy = correlation_operators(rho.dims[1] - 1)
    vx, vy = cx.expect(rho), cy.expect(rho)
    if max(abs(vx.imag), abs(vy.imag)) > 1e-10:
        raise ShapeMismatch("correlations have an imaginary part; is rho Hermitian?")
    return vx.real, vy.real


def witness_from_correlations(cx: float, cy: float, n_x: float, n_y: float) -> float:
    return 1.0 - 0.5 * (1.0 + cx / n_x - cy / n_y)


def witness_expectation(rho: Operator, config: WitnessConfig, allow_uncertified: bool = False) -> float:
    W = tilde_witness_operator(config, rho.dims[1] - 1 if len(rho.dims) == 2 else None, allow_uncertified)
    if W.dims != rho.dims:
        raise ShapeMismatch(f"{W.dims} vs {rho.dims}")
    v = W.expect(rho)
    if abs(v.imag) > 1e-10:
        raise ShapeMismatch(f"imaginary witness value {v.imag:.2e}")
    return v.real


def optimize_scales(rho: Operator, N: int, large: float = 1e12) -> WitnessConfig:
    """Certified (n_x, n_y) minimizing Tr[W~ rho] for a given state.

    Each term is monotone in its own scale, so the optimum sits at 2 f(N)
    when the term helps detection and at ``large`` (term switched off) otherwise.
    """
    cx, cy = correlations(rho)
    n_min = 2.0 * f_of_n(N)
    return WitnessConfig(n_min if cx > 0 else large, n_min if cy < 0 else large, N)


# --- critical noise -------------------------------------------------------------

@dataclass(frozen=True)
class CriticalNoise:
    alpha: float
    N: int
    method: str
    eta_c: float
    detected_at_zero_noise: bool
    witness_at_zero_noise: float
    f_N: float
    bound: float

    def to_dict(self) -> dict:
        return asdict(self)


def diagonal_noise_witness(alpha: float, eta: float, N: int, method: str = "m1",
                           cutoff: int | None = None) -> tuple[float, SeparableBound]:
    """Tr[W~ rho] at eta = eta_d with the certified scales of the chosen method."""
    cutoff = default_cutoff(alpha) if cutoff is None else cutoff
    rho = noisy_state_fock(alpha, NoiseParams(eta, eta), cutoff)
    if method == "m1":
        cfg = WitnessConfig.default(N)
        bound = separable_bound_m1(cfg)
    elif method == "m2":
        p = photon_populations(rho)
        cfg = m2_config(p)
        bound = separable_bound_m2(p, cfg)
    else:
        raise InputError(f"unknown method {method!r}")
    cx, cy = correlations(rho)
    return witness_from_correlations(cx, cy, cfg.n_x, cfg.n_y), bound


def photon_populations(rho: Operator) -> np.ndarray:
    """Diagonal of the reduced field state."""
    d = rho.dims[1]
    m = rho.matrix.reshape(2, d, 2, d)
    p = np.real(np.einsum("qiqj->ij", m).diagonal()).copy()
    return np.clip(p, 0.0, None) / np.clip(p, 0.0, None).sum()


def critical_noise(alpha: float, N: int, method: str = "m1", tol: float = 1e-4,
                   scan_points: int = 41, cutoff: int | None = None) -> CriticalNoise:
    """Largest eta = eta_d with a negative certified witness value (0 if none at zero noise)."""
    if not alpha > 0:
        raise InputError("alpha must be > 0")
    g = lambda e: diagonal_noise_witness(alpha, e, N, method, cutoff)[0]
    g0, b0 = diagonal_noise_witness(alpha, 0.0, N, method, cutoff)
    fN = f_of_n(N)
    if g0 >= 0:
        return CriticalNoise(float(alpha), int(N), method, 0.0, False, float(g0), fN, float(b0.value))
    grid = np.linspace(0.0, 1.0, scan_points)
    vals = np.array([g0] + [g(e) for e in grid[1:]])
    last = int(np.nonzero(vals < 0)[0].max())
    if last == grid.size - 1:
        return CriticalNoise(float(alpha), int(N), method, 1.0, True, float(g0), fN, float(b0.value))
    lo, hi = grid[last], grid[last + 1]
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if g(mid) < 0:
            lo = mid
        else:
            hi = mid
    return CriticalNoise(float(alpha), int(N), method, float(0.5 * (lo + hi)), True, float(g0), fN,
                         float(b0.value))


# --- separable-state validity checker ------------------------------------------------

def _random_field_vectors(rng, count: int, N: int) -> np.ndarray:
    v = rng.normal(size=(count, N + 1)) + 1j * rng.normal(size=(count, N + 1))
    # random support sizes so low-dimensional states are well represented
    keep = rng.integers(1, N + 2, size=count)
    v[np.arange(N + 1)[None, :] >= keep[:, None]] = 0.0
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _targeted_field_vectors(rng, count: int, N: int, spread: float = 0.05) -> np.ndarray:
    lam = maximizer(N)
    phase = rng.uniform(0, 2 * np.pi, size=(count, 1)) * np.arange(N + 1)[None, :]
    v = lam[None, :] * np.exp(1j * phase)
    v = v + spread * rng.random((count, 1)) * (rng.normal(size=v.shape) + 1j * rng.normal(size=v.shape))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _field_moments(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(<a + a^dag>, <i(a - a^dag)>) for rows of Fock amplitudes."""
    s = np.sqrt(np.arange(1, v.shape[1]))
    a = np.sum(np.conj(v[:, :-1]) * v[:, 1:] * s, axis=1)
    return 2 * a.real, -2 * a.imag


def _random_bloch(rng, count: int, in_plane: bool = False) -> np.ndarray:
    v = rng.normal(size=(count, 3))
    if in_plane:
        v[:, 2] = 0.0
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v


@dataclass(frozen=True)
class ValidityReport:
    n_samples: int
    min_value: float
    violations: int
    tolerance: float
    seed: int

    @property
    def passed(self) -> bool:
        return self.violations == 0


def sample_product_witness_values(config: WitnessConfig, count: int, rng,
                                  targeted_fraction: float = 0.2) -> np.ndarray:
    """Tr[W~ sigma] for random pure product states with field support on levels 0..N."""
    n_t = int(round(targeted_fraction * count))
    v = np.concatenate([_random_field_vectors(rng, count - n_t, config.N),
                        _targeted_field_vectors(rng, n_t, config.N)])
    X, P = _field_moments(v)
    bloch = np.concatenate([_random_bloch(rng, count - n_t), np.zeros((n_t, 3))])
    if n_t:
        # qubit aligned with the field moments: the worst case for this field state
        tx, ty = X[count - n_t:] / config.n_x, -P[count - n_t:] / config.n_y
        nrm = np.hypot(tx, ty)
        nrm[nrm == 0] = 1.0
        bloch[count - n_t:, 0] = tx / nrm
        bloch[count - n_t:, 1] = ty / nrm
    return witness_from_correlations(bloch[:, 0] * X, bloch[:, 1] * P, config.n_x, config.n_y)


def check_witness_validity(config: WitnessConfig, n_samples: int = 100_000, seed: int = 0,
                           max_components: int = 5, tol: float = 1e-9) -> ValidityReport:
    """Evaluate the witness on random separable states (products and mixtures of up to ``max_components``)."""
    rng = np.random.default_rng(seed)
    n_pure = n_samples // 2
    n_mix = n_samples - n_pure
    pure = sample_product_witness_values(config, n_pure, rng)
    k = rng.integers(2, max_components + 1, size=n_mix)
    comps = sample_product_witness_values(config, int(k.sum()), rng)
    weights = rng.dirichlet(np.ones(max_components), size=n_mix)
    weights[np.arange(max_components)[None, :] >= k[:, None]] = 0.0
    weights /= weights.sum(axis=1, keepdims=True)
    starts = np.concatenate([[0], np.cumsum(k)[:-1]])
    mixed = np.zeros(n_mix)
    for j in range(max_components):
        has = j < k
        mixed[has] += weights[has, j] * comps[starts[has] + j]
    vals = np.concatenate([pure, mixed])
    return ValidityReport(int(vals.size), float(vals.min()), int(np.sum(vals < -tol)), tol, seed)


def product_state_density(bloch: Sequence[float], field: np.ndarray) -> Operator:
    """|q><q| (x) |phi><phi| from a Bloch vector and field amplitudes (full-matrix route)."""
    bx, by, bz = bloch
    q = 0.5 * np.array([[1 + bz, bx - 1j * by], [bx + 1j * by, 1 - bz]])
    phi = np.asarray(field, dtype=complex)
    return Operator(np.kron(q, np.outer(phi, phi.conj())), (2, phi.size))
