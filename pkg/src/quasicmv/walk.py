"""Coined quantum walks on Z and their correspondence with CMV matrices.

Flattening: site n with spin up is index 2(n - lo), spin down is 2(n - lo) + 1.
One step sends delta_n (x) e_up to c11_n delta_{n+1} (x) e_up + c21_n delta_{n-1} (x) e_down
and delta_n (x) e_down to c12_n delta_{n+1} (x) e_up + c22_n delta_{n-1} (x) e_down.

Up to a diagonal unitary gauge the walk matrix equals the extended CMV matrix
with alpha_{2n} = 0, where CMV index 2n + 1 carries (n, up) and 2n + 2
carries (n, down).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .cmv import CmvOperator, from_coefficients
from .frequency import check_frequency
from .sampling import VerblunskySequence

P_SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])


class DegenerateCoinError(ValueError):
    """A coin with |c11| in {0, 1} has no CMV counterpart."""


class LightConeError(ValueError):
    """The initial state is too close to the window edge for the requested time."""


def _check_unitary(C, tol=1e-12):
    C = np.asarray(C, dtype=complex)
    defect = np.abs(C.conj().swapaxes(-1, -2) @ C - np.eye(2)).max(axis=(-2, -1))
    if np.any(defect > tol):
        raise ValueError(f"coin not unitary (defect {defect.max():.2e})")
    return C


@dataclass(frozen=True)
class CoinSequence:
    """Coins C_n for sites lo..hi, shape (hi - lo + 1, 2, 2)."""

    lo: int
    hi: int
    coins: np.ndarray

    def __post_init__(self):
        c = _check_unitary(self.coins)
        if c.shape != (self.hi - self.lo + 1, 2, 2):
            raise ValueError("coin array does not match window")
        c.setflags(write=False)
        object.__setattr__(self, "coins", c)

    @property
    def size(self) -> int:
        return self.hi - self.lo + 1

    def __getitem__(self, n):
        return self.coins[n - self.lo]


def coin_from_alpha(alpha) -> np.ndarray:
    """Coin [[rho, -alpha], [conj(alpha), rho]], whose CMV gauge is trivial."""
    a = np.asarray(alpha, dtype=complex)
    rho = np.sqrt(1.0 - np.abs(a) ** 2)
    C = np.empty(a.shape + (2, 2), complex)
    C[..., 0, 0] = rho
    C[..., 0, 1] = -a
    C[..., 1, 0] = np.conj(a)
    C[..., 1, 1] = rho
    return C


def coins_from_sampling(coin, omega, x0: float, window) -> CoinSequence:
    """C_n = coin(x0 + n omega); ``coin`` maps a phase array to stacked 2x2 unitaries."""
    w = check_frequency(omega)
    lo, hi = map(int, window)
    x = np.mod(x0 + w * np.arange(lo, hi + 1), 1.0)
    return CoinSequence(lo, hi, np.asarray(coin(x), dtype=complex))


def coins_from_alpha_function(f, omega, x0: float, window) -> CoinSequence:
    """Coins built from an analytic alpha(x) via :func:`coin_from_alpha`."""
    return coins_from_sampling(lambda x: coin_from_alpha(f.evaluate(x)), omega, x0, window)


def random_coins(rng: np.random.Generator, lo: int, hi: int, c11_range=(0.05, 0.95)) -> CoinSequence:
    """Haar-like random U(2) coins with |c11| uniform in ``c11_range``."""
    n = hi - lo + 1
    r = rng.uniform(*c11_range, n)
    s = np.sqrt(1.0 - r * r)
    ph = np.exp(2j * np.pi * rng.random((4, n)))
    C = np.empty((n, 2, 2), complex)
    # U(2) element: e^{i d} [[a, b], [-conj(b), conj(a)]]
    a, b = r * ph[0], s * ph[1]
    C[:, 0, 0], C[:, 0, 1] = a, b
    C[:, 1, 0], C[:, 1, 1] = -np.conj(b), np.conj(a)
    return CoinSequence(lo, hi, C * ph[2][:, None, None])


@dataclass(frozen=True, eq=False)
class WalkOperator:
    lo: int
    hi: int
    matrix: sp.csr_matrix
    coins: CoinSequence

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def truncated_rows(self) -> np.ndarray:
        """Rows that would receive amplitude from outside the window."""
        return np.array([0, self.size - 1])

    @property
    def interior(self) -> np.ndarray:
        return np.arange(1, self.size - 1)

    def flat_index(self, n: int, spin: int) -> int:
        return 2 * (n - self.lo) + spin

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()


def build_walk(coins: CoinSequence, window=None) -> WalkOperator:
    """Walk matrix on the sites of ``window`` (default: the coin window); outside amplitude is dropped."""
    lo, hi = (coins.lo, coins.hi) if window is None else map(int, window)
    if lo < coins.lo or hi > coins.hi:
        raise ValueError(f"coins cover [{coins.lo}, {coins.hi}], window is [{lo}, {hi}]")
    N = 2 * (hi - lo + 1)
    rows, cols, vals = [], [], []
    for n in range(lo, hi + 1):
        C = coins[n]
        for spin in (0, 1):
            col = 2 * (n - lo) + spin
            if n + 1 <= hi:
                rows.append(2 * (n + 1 - lo)); cols.append(col); vals.append(C[0, spin])
            if n - 1 >= lo:
                rows.append(2 * (n - 1 - lo) + 1); cols.append(col); vals.append(C[1, spin])
    U = sp.csr_matrix((vals, (rows, cols)), shape=(N, N), dtype=complex)
    return WalkOperator(lo, hi, U, coins)


@dataclass(frozen=True)
class GaugePair:
    """CMV coefficients on indices [2 lo, 2 hi + 2] and gauge phases on [2 lo, 2 hi + 3].

    For the walk on sites lo..hi, Lambda* U Lambda equals the CMV section on
    [2 lo + 1, 2 hi + 2], with Lambda restricted to those indices.
    """

    alphas: VerblunskySequence
    lam: np.ndarray
    lam_lo: int

    def phases(self, lo: int, hi: int) -> np.ndarray:
        return self.lam[lo - self.lam_lo:hi - self.lam_lo + 1]

    def operator(self) -> CmvOperator:
        """The CMV section matching the walk window."""
        s = self.alphas
        return from_coefficients(s.alpha, s.lo + 1, s.hi, "extended")


def _unit(z):
    return z / np.abs(z)


def walk_to_cmv(coins: CoinSequence) -> GaugePair:
    """Find alpha (with alpha_even = 0) and Lambda so that Lambda* U Lambda is CMV.

    Gauge phases start at 1 on the two leftmost indices and are propagated
    along the even and odd index chains so that the rho entries come out
    real and positive.
    """
    c = coins.coins
    mag = np.abs(c[:, 0, 0])
    if np.any(mag < 1e-12) or np.any(mag > 1 - 1e-12):
        raise DegenerateCoinError("coins with |c11| in {0, 1} break the CMV correspondence")
    lo, hi = coins.lo, coins.hi
    n = coins.size
    lam = np.ones(2 * n + 4, complex)  # CMV indices 2 lo .. 2 hi + 3
    for m in range(n):
        # make conj(lam_{2m}) c22 lam_{2m+2} and conj(lam_{2m+3}) c11 lam_{2m+1} positive
        lam[2 * m + 2] = lam[2 * m] * np.conj(_unit(c[m, 1, 1]))
        lam[2 * m + 3] = lam[2 * m + 1] * _unit(c[m, 0, 0])
    alpha = np.zeros(2 * n + 1, complex)  # indices 2 lo .. 2 hi + 2
    for m in range(n):
        alpha[2 * m + 1] = lam[2 * m] * np.conj(c[m, 1, 0]) * np.conj(lam[2 * m + 1])
    seq = VerblunskySequence(2 * lo, 2 * hi + 2, alpha)
    return GaugePair(seq, lam, 2 * lo)


def gauge_residual(U: WalkOperator, gp: GaugePair) -> float:
    """max |Lambda* U Lambda - E| over the window."""
    E = gp.operator().to_dense()
    lam = gp.phases(2 * U.lo + 1, 2 * U.hi + 2)
    conj = np.conj(lam)[:, None] * U.to_dense() * lam[None, :]
    return float(np.abs(conj - E).max())


def cmv_to_coins(gp: GaugePair, lo: int, hi: int) -> CoinSequence:
    """Read coins back from U = Lambda E Lambda*."""
    E = gp.operator().to_dense()
    lam = gp.phases(2 * lo + 1, 2 * hi + 2)
    U = lam[:, None] * E * np.conj(lam)[None, :]
    # the end coins lose one row to truncation; complete it from unitarity and det C
    n = hi - lo + 1
    C = np.empty((n, 2, 2), complex)
    for m in range(n):
        up, dn = 2 * m, 2 * m + 1
        if m + 1 < n:
            C[m, 0, 0], C[m, 0, 1] = U[up + 2, up], U[up + 2, dn]
        if m >= 1:
            C[m, 1, 0], C[m, 1, 1] = U[up - 1, up], U[up - 1, dn]
        if m + 1 >= n:  # complete the top row from the bottom row: rows orthonormal
            a, b = C[m, 1, 0], C[m, 1, 1]
            d = gp_det_phase(gp, lo + m)
            C[m, 0, 0], C[m, 0, 1] = np.conj(b) * d, -np.conj(a) * d
        if m < 1:
            a, b = C[m, 0, 0], C[m, 0, 1]
            d = gp_det_phase(gp, lo + m)
            C[m, 1, 0], C[m, 1, 1] = -np.conj(b) * d, np.conj(a) * d
    return CoinSequence(lo, hi, C)


def gp_det_phase(gp: GaugePair, n: int) -> complex:
    """det C_n recovered from the gauge phases around site n."""
    k = 2 * n - gp.lam_lo
    lam = gp.lam
    # c11 c22 - c12 c21 with c11 = rho lam_{2n+3} conj(lam_{2n+1}),
    # c22 = rho lam_{2n} conj(lam_{2n+2}) and c12 c21 = -|alpha|^2 times the same phase
    return lam[k + 3] * np.conj(lam[k + 1]) * lam[k] * np.conj(lam[k + 2])


@dataclass(frozen=True)
class GZStep:
    Mf: np.ndarray
    Mg: np.ndarray
    ME: np.ndarray
    SE: np.ndarray


def _gz_f(alpha):
    a = complex(alpha)
    r = np.sqrt(1 - abs(a) ** 2)
    return np.array([[-a, 1], [1, -np.conj(a)]]) / r


def _gz_g(alpha, E):
    a = complex(alpha)
    r = np.sqrt(1 - abs(a) ** 2)
    return np.array([[-np.conj(a), E], [1 / E, -a]]) / r


def gz_step(alpha_f, alpha_g, E) -> GZStep:
    """G-Z matrices M_f, M_g, their product M^E = M_f M_g and S^E = P M^E P."""
    if abs(alpha_f) >= 1 or abs(alpha_g) >= 1:
        raise ValueError("coefficients must lie in the open unit disk")
    E = complex(E)
    if abs(abs(E) - 1) > 1e-12:
        raise ValueError("E must lie on the unit circle")
    Mf, Mg = _gz_f(alpha_f), _gz_g(alpha_g, E)
    ME = Mf @ Mg
    return GZStep(Mf, Mg, ME, P_SWAP @ ME @ P_SWAP)


def gz_propagate(seq: VerblunskySequence, E, k0: int, k1: int, init=(1.0, 0.0)):
    """Propagate (u(k), v(k)) from k0 to k1.

    Step into an odd k uses M_f with alpha_{k-1}; step into an even k uses
    M_g with alpha_{k-1}.  Returns mantissas (k1 - k0 + 1, 2) and log scales.
    """
    E = complex(E)
    n = k1 - k0 + 1
    w = np.empty((n, 2), complex)
    ls = np.zeros(n)
    w[0] = init
    for i in range(1, n):
        k = k0 + i
        T = _gz_f(seq[k - 1]) if k % 2 else _gz_g(seq[k - 1], E)
        x = T @ w[i - 1]
        s = np.abs(x).max()
        w[i] = x / s
        ls[i] = ls[i - 1] + np.log(s)
    return w, ls


def gz_solution_check(seq: VerblunskySequence, E, window) -> float:
    """Max interior residual of E u = E u and M u = E v, after scaling to unit max."""
    k0, k1 = window
    if k1 - k0 < 5:
        raise ValueError("window too short for an interior check")
    w, ls = gz_propagate(seq, E, k0, k1)
    scale = np.exp(ls - ls.max())[:, None]
    u, v = (w * scale).T
    op = from_coefficients(seq.take(k0 - 1, k1), k0, k1, "extended")
    E = complex(E)
    rows = slice(2, k1 - k0 - 1)
    r1 = (op.E @ u - E * u)[rows]
    r2 = (op.M @ u - E * v)[rows]
    return float(max(np.abs(r1).max(), np.abs(r2).max()))


@dataclass
class Trajectory:
    sites: np.ndarray
    distribution: np.ndarray  # (T + 1, nsites)
    second_moment: np.ndarray
    return_probability: np.ndarray
    participation: np.ndarray
    norm_drift: float

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "second_moment", "return_probability", "participation_ratio"])
            for t in range(len(self.second_moment)):
                w.writerow([t, repr(float(self.second_moment[t])),
                            repr(float(self.return_probability[t])),
                            repr(float(self.participation[t]))])


def simulate(U: WalkOperator, psi0, T: int) -> Trajectory:
    """Evolve psi0 for T steps and summarize the position distribution.

    The second moment is taken about the initial mean position and the
    return probability is the weight on the initially most occupied site.
    """
    if T < 1:
        raise ValueError("T must be positive")
    psi = np.asarray(psi0, dtype=complex).copy()
    if psi.shape != (U.size,):
        raise ValueError("psi0 has the wrong length")
    nrm = np.linalg.norm(psi)
    if abs(nrm - 1) > 1e-10:
        raise ValueError("psi0 must be normalized")
    sites = np.arange(U.lo, U.hi + 1)
    P0 = np.abs(psi.reshape(-1, 2)) ** 2
    occ = sites[P0.sum(1) > 0]
    if occ.min() - U.lo < T + 1 or U.hi - occ.max() < T + 1:
        raise LightConeError("initial support must stay T + 1 sites away from the window edges")
    dist = np.empty((T + 1, len(sites)))
    dist[0] = P0.sum(1)
    for t in range(1, T + 1):
        psi = U.matrix @ psi
        dist[t] = (np.abs(psi.reshape(-1, 2)) ** 2).sum(1)
    n0 = float(sites @ dist[0])
    home = int(np.argmax(dist[0]))
    m2 = dist @ (sites - n0) ** 2
    pr = 1.0 / (dist ** 2).sum(1)
    drift = float(np.abs(dist.sum(1) - 1.0).max())
    return Trajectory(sites, dist, m2, dist[:, home], pr, drift)
