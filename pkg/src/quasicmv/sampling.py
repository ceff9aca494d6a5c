"""Analytic sampling functions and the Verblunsky sequences they generate."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .frequency import check_frequency

VALIDATION_GRID = 2 ** 14
# strip-norm evaluation stays this far inside the declared strip
_STRIP_SHRINK = 1.0 - 2.0 ** -20


class StripError(ValueError):
    """Raised when a sampling function leaves the unit disk on a strip."""


class DomainError(ValueError):
    """A parameter lies outside its admissible range."""


class SamplingFunction:
    """Base class: a 1-periodic analytic map x -> alpha(x) with |alpha| < 1 on the reals.

    Subclasses implement :meth:`_eval`, vectorized over complex arguments, and
    :meth:`_derivative_bound`, an upper bound on sup |alpha'| over the reals.
    """

    strip: float = math.inf

    def _eval(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _derivative_bound(self) -> float:
        raise NotImplementedError

    def __call__(self, x):
        return self.evaluate(x)

    def evaluate(self, x):
        """Evaluate at real or complex ``x``; complex points must lie in the declared strip."""
        x = np.asarray(x)
        if np.iscomplexobj(x):
            if np.any(np.abs(x.imag) >= self.strip):
                raise StripError(f"argument outside declared strip |Im x| < {self.strip}")
            return self._eval(x.astype(complex))
        return self._eval(np.mod(x.astype(float), 1.0))

    def real_sup_bound(self, grid: int = VALIDATION_GRID) -> float:
        """Grid maximum of |alpha| plus a derivative margin covering the gaps."""
        x = np.arange(grid) / grid
        return float(np.abs(self._eval(x)).max() + self._derivative_bound() / (2 * grid))

    def _validate(self):
        bound = self.real_sup_bound()
        if not bound < 1.0:
            raise StripError(f"|alpha| may reach 1 on the real line (bound {bound:.6g})")


def _as_coeff_dict(coeffs) -> dict[int, complex]:
    items = coeffs.items() if isinstance(coeffs, dict) else coeffs
    out: dict[int, complex] = {}
    for k, c in items:
        c = complex(c)
        if c != 0:
            out[int(k)] = out.get(int(k), 0) + c
    return out


@dataclass(frozen=True, eq=False)
class TrigPolynomial(SamplingFunction):
    """alpha(x) = sum_k c_k exp(2 pi i k x) with finitely many nonzero c_k."""

    coeffs: dict = field(default_factory=dict)
    strip: float = math.inf
    validate: bool = True

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _as_coeff_dict(self.coeffs))
        if self.strip <= 0:
            raise ValueError("strip half-width must be positive")
        if self.validate:
            self._validate()

    @classmethod
    def constant(cls, c, **kw):
        return cls({0: c}, **kw)

    @classmethod
    def cosine(cls, amplitude, k: int = 1, offset=0.0, **kw):
        """offset + amplitude * cos(2 pi k x)."""
        return cls({0: offset, k: amplitude / 2, -k: amplitude / 2}, **kw)

    @property
    def frequencies(self) -> np.ndarray:
        return np.array(sorted(self.coeffs), dtype=int)

    def _eval(self, x):
        out = np.zeros(np.shape(x), dtype=complex)
        for k, c in self.coeffs.items():
            out += c * np.exp(2j * np.pi * k * x)
        return out

    def _derivative_bound(self):
        return sum(2 * np.pi * abs(k) * abs(c) for k, c in self.coeffs.items())

    def is_real(self, tol: float = 0.0) -> bool:
        """True when the coefficients are Hermitian, so the polynomial is real on the reals."""
        return all(abs(c - np.conj(self.coeffs.get(-k, 0))) <= tol
                   for k, c in self.coeffs.items())

    def period_divisor(self) -> int | None:
        """Largest q with p(x + 1/q) = p(x); None for a constant."""
        ks = [abs(k) for k in self.coeffs if k != 0]
        return reduce(math.gcd, ks) if ks else None


def phase_polynomial(coeffs) -> TrigPolynomial:
    """A real trigonometric polynomial used as a phase; no unit-disk check applies."""
    p = TrigPolynomial(coeffs, validate=False)
    if not p.is_real(1e-14):
        raise ValueError("phase coefficients must be Hermitian (c_-k = conj(c_k))")
    return p


def cosine_phase(amplitude: float, k: int = 1) -> TrigPolynomial:
    """amplitude * cos(2 pi k x) as a phase polynomial."""
    return phase_polynomial({k: amplitude / 2, -k: amplitude / 2})


@dataclass(frozen=True, eq=False)
class ZhangForm(SamplingFunction):
    """alpha(x) = lam * exp(2 pi i h(x)) with h(x) = k x + theta(x).

    ``theta`` is a real trigonometric polynomial (Hermitian coefficients); None
    means theta = 0.
    """

    lam: float
    k: int = 1
    theta: TrigPolynomial | None = None
    strip: float = math.inf

    def __post_init__(self):
        if not 0.0 < self.lam < 1.0:
            raise DomainError(f"lam must lie in (0, 1), got {self.lam}")
        if self.k == 0:
            raise ValueError("degree k must be nonzero")
        if self.theta is not None and not self.theta.is_real(1e-14):
            raise ValueError("theta must be real-valued on the reals")
        if self.strip <= 0:
            raise ValueError("strip half-width must be positive")

    def phase(self, x):
        """h(x) = k x + theta(x)."""
        h = self.k * np.asarray(x)
        if self.theta is not None:
            th = self.theta._eval(np.asarray(x))
            h = h + (th if np.iscomplexobj(x) else th.real)
        return h

    def _eval(self, x):
        return self.lam * np.exp(2j * np.pi * self.phase(x))

    def _derivative_bound(self):
        return 0.0  # |alpha| = lam exactly on the reals

    def period_divisor(self) -> int | None:
        return None if self.theta is None else self.theta.period_divisor()


@dataclass(frozen=True, eq=False)
class CallableSampling(SamplingFunction):
    """Wrap a vectorized callable; the caller supplies a derivative bound."""

    func: object
    derivative_bound: float
    strip: float = math.inf

    def __post_init__(self):
        self._validate()

    def _eval(self, x):
        return np.asarray(self.func(x), dtype=complex)

    def _derivative_bound(self):
        return float(self.derivative_bound)


@dataclass(frozen=True)
class VerblunskySequence:
    """Coefficients alpha_n for integer n in the closed window [lo, hi]."""

    lo: int
    hi: int
    alpha: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=complex)
        if a.shape != (self.hi - self.lo + 1,):
            raise ValueError("alpha length does not match window")
        if np.any(np.abs(a) >= 1.0):
            raise StripError("Verblunsky coefficients must lie in the open unit disk")
        a.setflags(write=False)
        object.__setattr__(self, "alpha", a)

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.lo, self.hi + 1)

    @property
    def rho(self) -> np.ndarray:
        return np.sqrt(1.0 - np.abs(self.alpha) ** 2)

    def __getitem__(self, n):
        """alpha_n by absolute index (integer or integer array)."""
        n = np.asarray(n)
        if np.any(n < self.lo) or np.any(n > self.hi):
            raise IndexError(f"index outside window [{self.lo}, {self.hi}]")
        return self.alpha[n - self.lo]

    def take(self, lo: int, hi: int) -> np.ndarray:
        """alpha_lo .. alpha_hi as an array."""
        if lo < self.lo or hi > self.hi:
            raise IndexError(f"[{lo}, {hi}] outside window [{self.lo}, {self.hi}]")
        return self.alpha[lo - self.lo:hi - self.lo + 1]

    def rho_at(self, n):
        return np.sqrt(1.0 - np.abs(self[n]) ** 2)

    @classmethod
    def from_array(cls, alpha, lo: int = 0):
        alpha = np.asarray(alpha, dtype=complex)
        return cls(lo, lo + len(alpha) - 1, alpha)


def sequence(f: SamplingFunction, omega, x0: float, window: tuple[int, int]) -> VerblunskySequence:
    """alpha_n = f(x0 + n omega) for n in ``window`` (inclusive)."""
    w = check_frequency(omega)
    lo, hi = map(int, window)
    if hi < lo:
        raise ValueError("empty window")
    n = np.arange(lo, hi + 1, dtype=float)
    return VerblunskySequence(lo, hi, f.evaluate(float(x0) + n * w))


def strip_norm(f: SamplingFunction, h: float, grid: int = 4096) -> float:
    """Grid estimate of max |f(x + i y)| over |y| <= h; raises if it reaches 1."""
    if h < 0:
        raise ValueError("h must be nonnegative")
    if h >= f.strip:
        raise StripError(f"h={h} is not inside the declared strip {f.strip}")
    x = np.arange(grid) / grid
    y = h * _STRIP_SHRINK
    vals = [np.abs(f.evaluate(x + 1j * y)).max(), np.abs(f.evaluate(x - 1j * y)).max()]
    if h > 0:
        vals.append(np.abs(f.evaluate(x + 0j)).max())
    norm = float(max(vals))
    if norm >= 1.0:
        raise StripError(f"sup norm {norm:.6g} on strip of half-width {h} is not < 1")
    return norm


def c_alpha(norm: float) -> float:
    """C_alpha = log(2 / sqrt(1 - ||alpha||_h^2))."""
    if not 0 <= norm < 1:
        raise StripError("strip norm must lie in [0, 1)")
    return math.log(2.0 / math.sqrt(1.0 - norm * norm))


def c_of_alpha(norm: float) -> float:
    """C(alpha) = exp(C_alpha) * 3**(1/3)."""
    return math.exp(c_alpha(norm)) * 3.0 ** (1.0 / 3.0)
