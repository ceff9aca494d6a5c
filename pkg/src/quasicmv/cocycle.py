"""Szegő cocycles, rescaled transfer products and Lyapunov exponents."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .frequency import check_frequency
from .sampling import SamplingFunction, StripError

# Q* M Q is real for the det-1 Szegő matrix
Q = -1.0 / (1.0 + 1.0j) * np.array([[1.0, -1.0j], [1.0, 1.0j]])
Q_STAR = Q.conj().T

DEFAULT_GRID = 2 ** 10
_LOG2 = np.log(2.0)


def principal_sqrt(z) -> complex:
    """sqrt(z) for z = exp(i t), t in [0, 2 pi)."""
    z = complex(z)
    t = np.angle(z) % (2 * np.pi)
    return np.sqrt(abs(z)) * np.exp(0.5j * t)


def _check_z(z) -> complex:
    z = complex(z)
    if abs(abs(z) - 1.0) > 1e-12:
        raise ValueError(f"spectral parameter must lie on the unit circle, |z| = {abs(z)}")
    return z


def szego_matrices(alpha, z) -> np.ndarray:
    """Det-z Szegő matrices (1/rho)[[z, -conj(a)], [-a z, 1]], stacked over ``alpha``."""
    a = np.asarray(alpha, dtype=complex)
    if np.any(np.abs(a) >= 1):
        raise StripError("Verblunsky coefficients must lie in the open unit disk")
    rho = np.sqrt(1.0 - np.abs(a) ** 2)
    out = np.empty(a.shape + (2, 2), complex)
    out[..., 0, 0] = z / rho
    out[..., 0, 1] = -np.conj(a) / rho
    out[..., 1, 0] = -a * z / rho
    out[..., 1, 1] = 1.0 / rho
    return out


def norm2x2(A) -> np.ndarray:
    """Spectral norm of (stacked) 2x2 matrices from the Gram matrix A A*.

    The eigenvalue discriminant is written as (p - q)^2 + 4 |g|^2, which avoids
    the cancellation of trace^2 - 4 det near unitary matrices.
    """
    A = np.asarray(A)
    a, b, c, d = A[..., 0, 0], A[..., 0, 1], A[..., 1, 0], A[..., 1, 1]
    p = np.abs(a) ** 2 + np.abs(b) ** 2
    q = np.abs(c) ** 2 + np.abs(d) ** 2
    g = a * np.conj(c) + b * np.conj(d)
    return np.sqrt(0.5 * (p + q + np.hypot(p - q, 2.0 * np.abs(g))))


@dataclass(frozen=True)
class CocycleStep:
    S: np.ndarray
    M: np.ndarray
    A: np.ndarray


def step(alpha, z) -> CocycleStep:
    """One cocycle step in det-z, det-1 and real SL(2) forms."""
    a = complex(alpha)
    if abs(a) >= 1:
        raise StripError(f"|alpha| = {abs(a)} is not < 1")
    z = _check_z(z)
    S = szego_matrices(a, z)
    M = S / principal_sqrt(z)
    A = (Q_STAR @ M @ Q).real
    return CocycleStep(S, M, A)


@dataclass
class TransferProduct:
    """True product = exp(log_scale) * matrix."""

    matrix: np.ndarray
    log_scale: float
    steps: int

    def log_norm(self) -> float:
        return self.log_scale + float(np.log(norm2x2(self.matrix)))

    def value(self) -> np.ndarray:
        return np.exp(self.log_scale) * self.matrix


def _rescale(P, log_scale):
    """Renormalize stacked products whose max-abs entry left [1/2, 2]."""
    m = np.abs(P).max(axis=(-2, -1))
    bad = (m > 2.0) | (m < 0.5)
    if np.any(bad):
        s = np.where(bad, m, 1.0)
        P = P / s[..., None, None]
        log_scale = log_scale + np.log(s)
    return P, log_scale


def product(matrices, initial: TransferProduct | None = None) -> TransferProduct:
    """Rescaled ordered product ``matrices[n-1] @ ... @ matrices[0]``."""
    if initial is None:
        P, ls, n0 = np.eye(2, dtype=complex), 0.0, 0
    else:
        P, ls, n0 = initial.matrix.copy(), initial.log_scale, initial.steps
    for T in matrices:
        P = T @ P
        P, ls = _rescale(P, ls)
    return TransferProduct(P, float(ls), n0 + len(matrices))


def transfer_matrices(alphas, z, form: str = "det-1") -> np.ndarray:
    z = _check_z(z)
    S = szego_matrices(alphas, z)
    if form == "det-z":
        return S
    if form == "det-1":
        return S / principal_sqrt(z)
    raise ValueError(f"unknown form {form!r}")


def transfer_from_alphas(alphas, z, form: str = "det-1") -> TransferProduct:
    """Transfer product over the given coefficients, later indices on the left."""
    return product(transfer_matrices(alphas, z, form))


def transfer(f: SamplingFunction, omega, x: float, z, n: int, form: str = "det-1") -> TransferProduct:
    """n-step transfer matrix M(x + (n-1) omega) ... M(x)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    w = check_frequency(omega)
    alphas = f.evaluate(x + w * np.arange(n))
    return transfer_from_alphas(alphas, z, form)


def log_norms_of(step_matrices, omega, xs, n: int) -> np.ndarray:
    """(1/n) log ||T(x + (n-1) omega) ... T(x)|| for every phase in ``xs``.

    ``step_matrices(x)`` returns stacked 2x2 matrices for a phase array.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    w = check_frequency(omega)
    xs = np.asarray(xs, dtype=float)
    P = np.broadcast_to(np.eye(2, dtype=complex), xs.shape + (2, 2)).copy()
    ls = np.zeros(xs.shape)
    for j in range(n):
        P = step_matrices(xs + j * w) @ P
        P, ls = _rescale(P, ls)
    return (ls + np.log(norm2x2(P))) / n


def log_norms(f: SamplingFunction, omega, xs, z, n: int) -> np.ndarray:
    """(1/n) log ||M_n(x)|| for every phase in ``xs`` (vectorized over phases)."""
    z = _check_z(z)
    sz = principal_sqrt(z)
    return log_norms_of(lambda x: szego_matrices(f.evaluate(x), z) / sz, omega, xs, n)


def walk_matrices(alpha, E) -> np.ndarray:
    """Two-step walk cocycle (1/rho)[[E, -conj(a)], [-a, 1/E]], stacked over ``alpha``."""
    a = np.asarray(alpha, dtype=complex)
    rho = np.sqrt(1.0 - np.abs(a) ** 2)
    out = np.empty(a.shape + (2, 2), complex)
    out[..., 0, 0] = E / rho
    out[..., 0, 1] = -np.conj(a) / rho
    out[..., 1, 0] = -a / rho
    out[..., 1, 1] = 1.0 / (E * rho)
    return out


def phase_grid(grid: int) -> np.ndarray:
    if grid < 1:
        raise ValueError("phase grid must be >= 1")
    return np.arange(grid) / grid


def finite_lyapunov(f: SamplingFunction, omega, z, n: int, grid: int = DEFAULT_GRID) -> float:
    """Uniform-grid average over phases of (1/n) log ||M_n(x)||."""
    # numpy's pairwise summation gives a fixed reduction order
    return float(np.mean(log_norms(f, omega, phase_grid(grid), z, n)))


@dataclass
class LyapunovEstimate:
    estimate: float
    uncertainty: float
    values: dict = field(default_factory=dict)
    divisibility_ok: bool = True
    empirical_C: float = 0.0

    def __iter__(self):
        yield self.estimate
        yield self.uncertainty


def lyapunov(f: SamplingFunction, omega, z, schedule=(64, 128, 256), grid: int = DEFAULT_GRID,
             tol: float = 1e-3, tail: int = 3) -> LyapunovEstimate:
    """Estimate L(z) as L_n at the largest n of ``schedule``.

    The uncertainty is the spread of the last ``tail`` schedule entries around
    the final one.  Pairs with m | n are checked for L_n <= L_m + tol and the
    largest (L_n - L_m) n / m is reported as an empirical constant.
    """
    sched = [int(n) for n in schedule]
    if not sched or any(b <= a for a, b in zip(sched, sched[1:])) or sched[0] < 1:
        raise ValueError("schedule must be a nonempty increasing list of positive integers")
    values = {n: finite_lyapunov(f, omega, z, n, grid) for n in sched}
    last = values[sched[-1]]
    unc = max(abs(values[n] - last) for n in sched[-tail:])
    ok, emp = True, 0.0
    for m in sched:
        for n in sched:
            if n > m and n % m == 0:
                gap = values[n] - values[m]
                ok &= gap <= tol
                emp = max(emp, gap * n / m)
    return LyapunovEstimate(last, unc, values, bool(ok), emp)


def polar_decompose(A):
    """Return (U1, U2, Lam) with A = U1 U2 Lam U2*, U1, U2 in SU(2), Lam = diag(s, 1/s)."""
    A = np.asarray(A, dtype=complex)
    if abs(np.linalg.det(A) - 1.0) > 1e-10:
        raise ValueError("polar_decompose needs det A = 1")
    s = float(norm2x2(A))
    if s - 1.0 <= 1e-14:
        return A.copy(), np.eye(2, dtype=complex), np.eye(2)
    H = A.conj().T @ A
    # eigenvector of A* A for eigenvalue s^2, completed to an SU(2) matrix
    v = np.array([H[0, 1], s * s - H[0, 0]])
    if abs(v[0]) + abs(v[1]) < 1e-12 * s * s:
        v = np.array([s * s - H[1, 1], H[1, 0]])
    v = v / np.linalg.norm(v)
    U2 = np.array([[v[0], -np.conj(v[1])], [v[1], np.conj(v[0])]])
    Lam = np.diag([s, 1.0 / s])
    U1 = A @ U2 @ np.diag([1.0 / s, s]) @ U2.conj().T
    return U1, U2, Lam
