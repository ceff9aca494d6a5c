"""Characteristic polynomials and finite-volume Green's functions of CMV sections.

Normalization: for a section on [a, b] the normalized polynomial divides the
determinant by the product of the coupling coefficients rho_a .. rho_{b-1},
the ones whose blocks lie inside the section.  With this choice the 2x2 matrix
of normalized polynomials for boundary phases (+-beta, +-gamma) equals
[[z, -conj(gamma)], [z, conj(gamma)]] S_{b-a} [[1, 1], [beta, -beta]]
exactly, where S_{b-a} is the det-z transfer product over alpha_a .. alpha_{b-1}.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.linalg import lapack

from .cmv import CmvOperator, from_coefficients
from .cocycle import norm2x2, transfer_from_alphas
from .sampling import VerblunskySequence

NEAR_SINGULAR = 1e-8


class NearSingularError(ArithmeticError):
    """z is within the near-singular threshold of the section's spectrum."""

    def __init__(self, distance: float):
        super().__init__(f"z is {distance:.3e} from the spectrum of the section")
        self.distance = distance


def _unimodular(v) -> complex:
    v = complex(v)
    if abs(abs(v) - 1.0) > 1e-12:
        raise ValueError(f"boundary phase must lie on the unit circle, got |{v}| = {abs(v)}")
    return v


def section(seq: VerblunskySequence, a: int, b: int, left, right) -> CmvOperator:
    """Section on [a, b] with modified end coefficients alpha_{a-1} = left, alpha_b = right."""
    inner = seq.take(a, b - 1) if b > a else np.zeros(0, complex)
    return from_coefficients(np.concatenate([[left], inner, [right]]), a, b)


def restriction(seq, a, b, beta, gamma) -> CmvOperator:
    return section(seq, a, b, -complex(beta), complex(gamma))


def _banded_logdet(ab: np.ndarray, kl: int, ku: int):
    """log|det| and phase of a band matrix given in LAPACK layout (kl + ku + 1 rows)."""
    n = ab.shape[1]
    work = np.zeros((2 * kl + ku + 1, n), complex)
    work[kl:] = ab
    lu, piv, info = lapack.zgbtrf(work, kl, ku)
    if info < 0:
        raise ValueError("invalid banded LU input")
    diag = lu[kl + ku]
    if np.any(diag == 0):
        return -np.inf, 1.0 + 0j
    swaps = int(np.count_nonzero(piv != np.arange(n)))
    mag = np.abs(diag)
    phase = np.prod(diag / mag) * (-1) ** swaps
    return float(np.sum(np.log(mag))), complex(phase)


def _log_char(E: CmvOperator, z):
    ab = -E.band()
    ab[2] += z
    return _banded_logdet(ab, 2, 2)


@dataclass(frozen=True)
class CharPoly:
    a: int
    b: int
    beta: complex
    gamma: complex
    z: complex
    log_abs: float  # log |Phi|
    phase: complex  # Phi / |Phi|
    log_rho: float  # sum of log rho_n, n = a .. b-1

    @property
    def Phi(self) -> complex:
        return self.phase * np.exp(self.log_abs)

    @property
    def phi(self) -> complex:
        return self.phase * np.exp(self.log_abs - self.log_rho)

    @property
    def log_abs_phi(self) -> float:
        return self.log_abs - self.log_rho


def _char_poly(seq, a, b, left, right, z, beta, gamma) -> CharPoly:
    if b < a:  # empty interval
        return CharPoly(a, b, beta, gamma, z, 0.0, 1.0 + 0j, 0.0)
    E = section(seq, a, b, left, right)
    la, ph = _log_char(E, z)
    lr = float(np.sum(np.log(seq.rho[a - seq.lo:b - seq.lo]))) if b > a else 0.0
    return CharPoly(a, b, beta, gamma, complex(z), la, ph, lr)


def char_poly(seq: VerblunskySequence, interval, beta, gamma, z) -> CharPoly:
    """det(z - E) for the unitary restriction to ``interval`` with phases beta, gamma."""
    a, b = interval
    beta, gamma = _unimodular(beta), _unimodular(gamma)
    return _char_poly(seq, a, b, -beta, gamma, complex(z), beta, gamma)


def left_piece(seq, a, j, beta, z) -> CharPoly:
    """Polynomial on [a, j-1] with left phase beta and the original alpha_{j-1} at the cut."""
    return _char_poly(seq, a, j - 1, -complex(beta), seq[j - 1] if j > a else 0, z, beta, None)


def right_piece(seq, k, b, gamma, z) -> CharPoly:
    """Polynomial on [k+1, b] with the original alpha_k at the cut and right phase gamma."""
    return _char_poly(seq, k + 1, b, seq[k] if k < b else 0, complex(gamma), z, None, gamma)


def _tridiagonal_system(E: CmvOperator, z) -> np.ndarray:
    """z L* - M in LAPACK band layout with one sub- and one superdiagonal."""
    A = (z * E.L.conj().T - E.M).todia()
    n = E.size
    ab = np.zeros((3, n), complex)
    for k, off in enumerate(A.offsets):
        ab[1 - off, :] += A.data[k][:n]
    return ab


@dataclass
class GreensSlice:
    a: int
    b: int
    beta: complex
    gamma: complex
    z: complex
    G: np.ndarray
    distance: float  # 1 / ||G||, equal to dist(z, spectrum) for unitary sections

    def __call__(self, j, k):
        return self.G[j - self.a, k - self.a]

    def residual(self, E: CmvOperator) -> float:
        A = (self.z * E.L.conj().T - E.M).toarray()
        return float(np.abs(self.G @ A - np.eye(E.size)).max())

    def to_csv(self, path) -> None:
        """Rows (j, k, Re G, Im G, log|G|)."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["j", "k", "re", "im", "logmag"])
            n = self.G.shape[0]
            for i in range(n):
                for m in range(n):
                    g = self.G[i, m]
                    lm = np.log(abs(g)) if g != 0 else -np.inf
                    w.writerow([self.a + i, self.a + m, repr(float(g.real)),
                                repr(float(g.imag)), repr(float(lm))])


def greens_direct(seq: VerblunskySequence, interval, beta, gamma, z,
                  threshold: float = NEAR_SINGULAR) -> GreensSlice:
    """G = (z L* - M)^{-1} for the unitary restriction, by a banded solve."""
    a, b = interval
    beta, gamma = _unimodular(beta), _unimodular(gamma)
    E = restriction(seq, a, b, beta, gamma)
    n = E.size
    ab = _tridiagonal_system(E, z)
    try:
        G = scipy.linalg.solve_banded((1, 1), ab, np.eye(n, dtype=complex))
    except np.linalg.LinAlgError:
        raise NearSingularError(0.0) from None
    # L is unitary, so ||G|| = ||(z - E)^{-1}|| = 1 / dist(z, spectrum)
    dist = 1.0 / float(np.linalg.norm(G, 2))
    if dist < threshold:
        raise NearSingularError(dist)
    return GreensSlice(a, b, beta, gamma, complex(z), G, dist)


def greens_formula(seq: VerblunskySequence, interval, beta, gamma, j: int, k: int, z) -> float:
    """|G(j, k)| from normalized characteristic polynomials.

    |G(j, k)| = |phi_left phi_right / phi| / (rho_{j-1} rho_k) with the left
    piece on [a, j-1] and the right piece on [k+1, b] cut at the original
    coefficients.  A rho factor is dropped when its piece is empty.  The
    expression is symmetric under exchanging j and k.
    """
    a, b = interval
    j, k = min(j, k), max(j, k)
    if not a <= j <= k <= b:
        raise ValueError("need a <= j, k <= b")
    full = char_poly(seq, (a, b), beta, gamma, z)
    left = left_piece(seq, a, j, beta, z)
    right = right_piece(seq, k, b, gamma, z)
    log_g = left.log_abs_phi + right.log_abs_phi - full.log_abs_phi
    if j > a:
        log_g -= np.log(seq.rho_at(j - 1))
    if k < b:
        log_g -= np.log(seq.rho_at(k))
    return float(np.exp(log_g))


@dataclass
class PhiIdentity:
    lhs: np.ndarray  # [[phi(b,g), phi(-b,g)], [phi(b,-g), phi(-b,-g)]] / exp(log_scale)
    rhs: np.ndarray
    log_scale: float
    residual: float  # relative Frobenius residual
    best_signs: tuple[int, int]  # (sign of beta, sign of gamma) maximizing |phi|
    C: float  # max |phi| / ||S||


def transfer_phi_identity(seq: VerblunskySequence, interval, beta0, gamma0, z) -> PhiIdentity:
    """Compare the four normalized polynomials with the transfer-matrix expression."""
    a, b = interval
    beta0, gamma0 = _unimodular(beta0), _unimodular(gamma0)
    z = complex(z)
    if b > a:
        T = transfer_from_alphas(seq.take(a, b - 1), z, form="det-z")
    else:
        T = transfer_from_alphas(np.zeros(0), z, form="det-z")
    S, ls = T.matrix, T.log_scale
    left = np.array([[z, -np.conj(gamma0)], [z, np.conj(gamma0)]])
    right = np.array([[1, 1], [beta0, -beta0]])
    rhs = left @ S @ right
    lhs = np.empty((2, 2), complex)
    for r, sg in enumerate((1, -1)):
        for c, sb in enumerate((1, -1)):
            cp = char_poly(seq, (a, b), sb * beta0, sg * gamma0, z)
            lhs[r, c] = cp.phase * np.exp(cp.log_abs_phi - ls)
    res = float(np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs))
    r, c = np.unravel_index(np.argmax(np.abs(lhs)), (2, 2))
    C = float(np.abs(lhs).max() / norm2x2(S))
    return PhiIdentity(lhs, rhs, ls, res, (1 - 2 * int(c), 1 - 2 * int(r)), C)


def left_bound_ratio(seq: VerblunskySequence, a: int, j: int, beta, z) -> float:
    """|phi_[a, j-1] with phases (beta, alpha_{j-1})| / (sqrt 2 ||S_{j-a}||); at most 1."""
    if j <= a:
        raise ValueError("need j > a")
    piece = left_piece(seq, a, j, beta, z)
    T = transfer_from_alphas(seq.take(a, j - 1), z, form="det-z")
    return float(np.exp(piece.log_abs_phi - T.log_scale) / (np.sqrt(2) * norm2x2(T.matrix)))


def boundary_terms(seq: VerblunskySequence, a: int, b: int, beta, gamma, z, xi_at):
    """Values of (z L_r* - M_r) xi_r at the ends a and b of the restriction.

    ``xi_at(n)`` returns the solution at site n.  The formulas depend on which
    factor owns the blocks crossing each end.
    """
    al, r = seq[a], seq.rho_at(a)
    if a % 2 == 0:  # the block of alpha_{a-1} lies in M
        pa = (z * al - beta) * xi_at(a) + z * r * xi_at(a + 1)
    else:
        pa = (z * np.conj(beta) - np.conj(al)) * xi_at(a) - r * xi_at(a + 1)
    al, r = seq[b - 1], seq.rho_at(b - 1)
    if b % 2 == 0:  # the block of alpha_b lies in L
        pb = (z * gamma + al) * xi_at(b) - r * xi_at(b - 1)
    else:
        pb = -(np.conj(gamma) + z * np.conj(al)) * xi_at(b) + z * r * xi_at(b - 1)
    return complex(pa), complex(pb)


def eigen_reconstruct(seq: VerblunskySequence, interval, beta, gamma, z, xi, xi_lo: int):
    """Rebuild a solution of E xi = z xi on [a, b] from its boundary data.

    ``xi`` is given on sites xi_lo .. xi_lo + len(xi) - 1, which must strictly
    contain [a, b].  Returns the reconstructed values on [a, b].
    """
    a, b = interval
    xi = np.asarray(xi, dtype=complex)
    if not (xi_lo < a and b < xi_lo + len(xi) - 1 and a < b):
        raise ValueError("xi must be given on a window strictly containing [a, b], a < b")
    g = greens_direct(seq, (a, b), beta, gamma, z)
    pa, pb = boundary_terms(seq, a, b, g.beta, g.gamma, complex(z), lambda n: xi[n - xi_lo])
    return g.G[:, 0] * pa + g.G[:, -1] * pb


@dataclass
class PavingReport:
    hypothesis_holds: bool
    conclusion_holds: bool
    c: float
    hypothesis_margin: float  # min over pairs of -c|n1-n2| - log|G_sub|
    conclusion_margin: float  # min over pairs of -(c/2)|n1-n2| - log|G_I|
    subintervals: int
    message: str


def _resolvent(E: CmvOperator, z) -> np.ndarray:
    return np.linalg.inv(z * np.eye(E.size) - E.to_dense())


def paving_check(seq: VerblunskySequence, interval, n: int, z, c_target: float | None = None,
                 beta=None, gamma=None) -> PavingReport:
    """Check that decay of the resolvent on size-n pieces carries over to the whole interval.

    Resolvents are (z - E_S)^{-1} of plain truncations, or of unitary
    restrictions when ``beta`` and ``gamma`` are given.  With ``c_target``
    None the largest rate admitted by the pieces is used (scaled by 0.99).
    """
    lo, hi = interval
    if not 1 <= n <= hi - lo + 1:
        raise ValueError("piece size must lie in [1, len(interval)]")

    def resolvent(p, q):
        if beta is None:
            E = section(seq, p, q, seq[p - 1], seq[q])
        else:
            E = restriction(seq, p, q, beta, gamma)
        return _resolvent(E, complex(z))

    starts = sorted({min(max(x - n // 2, lo), hi - n + 1) for x in range(lo, hi + 1)})
    dist = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
    logs = []
    for s in starts:
        with np.errstate(divide="ignore"):
            logs.append(np.log(np.abs(resolvent(s, s + n - 1))))
    off = dist > 0
    if c_target is None:
        rates = [(-lg[off] / dist[off]).min() for lg in logs] if n > 1 else [np.inf]
        diag_ok = all(np.diag(lg).max() < 0 for lg in logs)
        c = 0.99 * float(min(rates)) if diag_ok and min(rates) > 0 else 0.0
    else:
        c = float(c_target)
    hyp = min(float((-c * dist - lg).min()) for lg in logs)
    N = hi - lo + 1
    dN = np.abs(np.subtract.outer(np.arange(N), np.arange(N)))
    with np.errstate(divide="ignore"):
        lgI = np.log(np.abs(resolvent(lo, hi)))
    concl = float((-(c / 2) * dN - lgI).min())
    hyp_ok = c > 0 and hyp > 0
    if not hyp_ok:
        msg = "hypothesis not satisfied"
    else:
        msg = "conclusion holds" if concl > 0 else "conclusion fails"
    return PavingReport(hyp_ok, concl > 0, c, hyp, concl, len(starts), msg)
