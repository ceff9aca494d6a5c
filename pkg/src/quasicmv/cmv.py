"""Finite sections of CMV matrices and their L M factorization.

Index conventions.  The extended operator on integer sites is E = L M, where
L is the direct sum of 2x2 blocks theta(alpha_n) on sites (n, n+1) for even n
and M collects the same blocks for odd n.  A section on the window [lo, hi]
is built from a modified coefficient array on [lo - 1, hi]: interior blocks
use alpha_lo .. alpha_{hi-1}; site lo carries the corner entry
-alpha_{lo-1} in the factor owning that block, and site hi carries
conj(alpha_hi) in the factor owning its block.  Plain truncation keeps the
original coefficients at the ends; the unitary restriction with boundary
phases (beta, gamma) sets alpha_{lo-1} = -beta and alpha_hi = gamma.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.sparse as sp

from .sampling import StripError, VerblunskySequence

FORMAT_VERSION = 1


def theta(alpha) -> np.ndarray:
    """The 2x2 unitary block [[conj(a), rho], [rho, -a]]."""
    a = complex(alpha)
    if abs(a) > 1:
        raise StripError(f"|alpha| = {abs(a)} exceeds 1")
    r = np.sqrt(max(0.0, 1.0 - abs(a) ** 2))
    return np.array([[np.conj(a), r], [r, -a]])


def _tridiagonal_factors(alpha_mod: np.ndarray, lo: int, hi: int):
    """Return (L, M) as sparse tridiagonal matrices for the window [lo, hi]."""
    n = hi - lo + 1
    a = alpha_mod[1:-1]  # alpha_lo .. alpha_{hi-1}
    rho = np.sqrt(np.maximum(0.0, 1.0 - np.abs(a) ** 2))
    diags = {0: [np.zeros(n, complex), np.zeros(n, complex)],
             1: [np.zeros(n - 1, complex), np.zeros(n - 1, complex)]}
    # which factor (0 = L, 1 = M) owns the block starting at absolute index m
    owner = lambda m: m % 2  # noqa: E731
    for i in range(n - 1):
        f = owner(lo + i)
        diags[0][f][i] = np.conj(a[i])
        diags[0][f][i + 1] = -a[i]
        diags[1][f][i] = rho[i]
    diags[0][owner(lo - 1)][0] += -alpha_mod[0]
    diags[0][owner(hi)][n - 1] += np.conj(alpha_mod[-1])
    out = []
    for f in (0, 1):
        if n == 1:
            out.append(sp.csr_matrix(diags[0][f].reshape(1, 1)))
        else:
            off = diags[1][f]
            out.append(sp.diags([off, diags[0][f], off], [-1, 0, 1], format="csr"))
    return out[0], out[1]


@dataclass(frozen=True, eq=False)
class CmvOperator:
    """A CMV section on sites lo..hi with its factors.

    ``alpha_mod`` holds the (possibly boundary-modified) coefficients on
    [lo - 1, hi].  ``beta`` and ``gamma`` are None for plain truncations.
    """

    lo: int
    hi: int
    kind: str
    alpha_mod: np.ndarray
    L: sp.csr_matrix
    M: sp.csr_matrix
    E: sp.csr_matrix
    beta: complex | None = None
    gamma: complex | None = None

    @property
    def size(self) -> int:
        return self.hi - self.lo + 1

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.lo, self.hi + 1)

    @property
    def is_unitary_section(self) -> bool:
        return self.beta is not None

    def band(self) -> np.ndarray:
        """E in LAPACK band layout (5, n): ``ab[2 + i - j, j] = E[i, j]``."""
        n = self.size
        ab = np.zeros((5, n), complex)
        dia = self.E.todia()
        for k, off in enumerate(dia.offsets):
            if abs(off) > 2:
                if np.any(dia.data[k]):
                    raise AssertionError("CMV section is not pentadiagonal")
                continue
            # dia.data[k][j] holds E[j - off, j]
            ab[2 - off, :] += dia.data[k][:n]
        return ab

    def to_dense(self) -> np.ndarray:
        return self.E.toarray()

    def to_sparse(self) -> sp.csr_matrix:
        return self.E

    def __matmul__(self, v):
        return self.E @ v


def from_coefficients(alpha_mod, lo: int, hi: int, kind: str = "extended",
                      beta=None, gamma=None) -> CmvOperator:
    """Build the section on [lo, hi] from coefficients indexed on [lo - 1, hi].

    The end entries of ``alpha_mod`` may be arbitrary complex numbers; this is
    how mixed-boundary pieces used by the Green's function formula are formed.
    """
    if hi < lo:
        raise ValueError("empty window")
    alpha_mod = np.array(alpha_mod, dtype=complex)
    if alpha_mod.shape != (hi - lo + 2,):
        raise ValueError("alpha_mod must cover [lo - 1, hi]")
    if np.any(np.abs(alpha_mod[1:-1]) >= 1):
        raise StripError("interior coefficients must lie in the open unit disk")
    alpha_mod.setflags(write=False)
    L, M = _tridiagonal_factors(alpha_mod, lo, hi)
    return CmvOperator(lo, hi, kind, alpha_mod, L, M, (L @ M).tocsr(), beta, gamma)


def _check_unimodular(name, value):
    value = complex(value)
    if abs(abs(value) - 1.0) > 1e-12:
        raise StripError(f"{name} must lie on the unit circle, |{name}| = {abs(value)}")
    return value


def build(seq: VerblunskySequence, window: tuple[int, int] | None = None,
          kind: str = "extended", beta=None, gamma=None) -> CmvOperator:
    """Build a CMV section from a coefficient sequence.

    kind="extended" without boundary phases gives the plain truncation of the
    two-sided operator to ``window`` and needs alpha on [lo - 1, hi].  Passing
    ``beta`` or ``gamma`` (or kind="restricted") gives the unitary restriction
    with those boundary phases, each defaulting to 1.  kind="halfline" is the
    restriction with beta = 1 on a window starting at 0, i.e. alpha_{-1} = -1.
    """
    if window is None:
        window = (seq.lo + 1, seq.hi) if kind == "extended" and beta is None and gamma is None \
            else (seq.lo, seq.hi + 1)
    lo, hi = map(int, window)
    if kind == "halfline":
        if lo != 0:
            raise ValueError("half-line sections start at site 0")
        if beta not in (None, 1):
            raise ValueError("half-line sections fix beta = 1")
        beta = 1
    elif kind not in ("extended", "restricted"):
        raise ValueError(f"unknown kind {kind!r}")
    if kind == "extended" and beta is None and gamma is None:
        return from_coefficients(seq.take(lo - 1, hi), lo, hi, kind)
    beta = _check_unimodular("beta", 1 if beta is None else beta)
    gamma = _check_unimodular("gamma", 1 if gamma is None else gamma)
    inner = seq.take(lo, hi - 1) if hi > lo else np.zeros(0, complex)
    alpha_mod = np.concatenate([[-beta], inner, [gamma]])
    return from_coefficients(alpha_mod, lo, hi, "restricted" if kind == "extended" else kind,
                             beta, gamma)


def restrict(E: CmvOperator, a: int, b: int, beta=1, gamma=1) -> CmvOperator:
    """Unitary restriction of ``E`` to [a, b] with boundary phases beta, gamma."""
    if a < E.lo or b > E.hi or b < a:
        raise ValueError(f"[{a}, {b}] is not inside [{E.lo}, {E.hi}]")
    beta = _check_unimodular("beta", beta)
    gamma = _check_unimodular("gamma", gamma)
    inner = E.alpha_mod[a - E.lo + 1:b - E.lo + 1]
    return from_coefficients(np.concatenate([[-beta], inner, [gamma]]), a, b,
                             "restricted", beta, gamma)


def truncate(E: CmvOperator, a: int, b: int) -> CmvOperator:
    """Plain truncation P E P* to [a, b] (generally not unitary)."""
    if a < E.lo or b > E.hi or b < a:
        raise ValueError(f"[{a}, {b}] is not inside [{E.lo}, {E.hi}]")
    return from_coefficients(E.alpha_mod[a - E.lo:b - E.lo + 2], a, b, "extended")


def lm_factor(E: CmvOperator):
    """Return the sparse factors (L, M) with E = L M."""
    return E.L, E.M


def dump_matrix_market(E: CmvOperator, path) -> None:
    """Write E in Matrix Market coordinate format with a versioned header comment."""
    header = (f"quasicmv-cmv format={FORMAT_VERSION} kind={E.kind} lo={E.lo} hi={E.hi}"
              + (f" beta={E.beta!r} gamma={E.gamma!r}" if E.beta is not None else ""))
    scipy.io.mmwrite(str(path), E.E.tocoo(), comment=header, field="complex",
                     precision=17, symmetry="general")


def load_matrix_market(path):
    """Read a dump back as (sparse matrix, header dict)."""
    header = {}
    with open(path) as fh:
        for line in fh:
            if line.startswith("%") and "quasicmv-cmv" in line:
                for tok in line.strip("% \n").split()[1:]:
                    k, _, v = tok.partition("=")
                    header[k] = v
                break
    if header.get("format") != str(FORMAT_VERSION):
        raise ValueError(f"unsupported operator dump format {header.get('format')!r}")
    return scipy.io.mmread(str(path)).tocsr(), header
