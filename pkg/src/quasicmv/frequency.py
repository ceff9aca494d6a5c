"""Continued-fraction analysis of rotation frequencies."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np

# remainder below this is treated as noise in the Gauss map
PRECISION_FLOOR = 2.0 ** -40
# q_s * q_{s+1} beyond this exceeds what a double can resolve about omega
_Q_PRODUCT_LIMIT = 2.0 ** 50


class FrequencyError(ValueError):
    """Frequency outside (0, 1)."""


GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
SILVER = math.sqrt(2.0) - 1.0
NAMED = {"golden": GOLDEN, "silver": SILVER}


def check_frequency(omega) -> float:
    """Return `omega` as a float after validating 0 < omega < 1."""
    w = float(omega)
    if not 0.0 < w < 1.0:
        raise FrequencyError(f"frequency must lie in (0, 1), got {omega!r}")
    return w


@dataclass(frozen=True)
class ContinuedFraction:
    """Partial quotients a_1..a_s and convergents p_s/q_s of omega = [0; a_1, a_2, ...].

    ``exhausted`` is True when the expansion was cut short because the
    remaining quotients are below floating resolution; ``terminated`` is True
    when the value is rational and the expansion ended exactly.
    """

    omega: float
    partial_quotients: tuple[int, ...]
    convergents: tuple[tuple[int, int], ...]
    exhausted: bool = False
    terminated: bool = False

    @property
    def depth(self) -> int:
        return len(self.partial_quotients)

    @property
    def denominators(self) -> np.ndarray:
        return np.array([q for _, q in self.convergents], dtype=float)

    def value(self) -> Fraction:
        """Exact value of the finite expansion."""
        p, q = self.convergents[-1]
        return Fraction(p, q)


def continued_fraction(omega, depth: int) -> ContinuedFraction:
    """Expand ``omega`` in (0, 1) to at most ``depth`` partial quotients.

    The Gauss map runs in exact rational arithmetic on the binary value of
    ``omega`` (a ``Fraction`` input is expanded exactly), so the only source of
    error is the representation of omega itself.  Expansion stops early for
    rationals, and is flagged ``exhausted`` once the remainder drops below
    2**-40 or the convergent denominators outgrow double resolution.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    x = omega if isinstance(omega, Fraction) else Fraction(check_frequency(omega))
    if not 0 < x < 1:
        raise ValueError(f"frequency must lie in (0, 1), got {omega!r}")

    quotients: list[int] = []
    convergents: list[tuple[int, int]] = []
    p_prev, p = 1, 0
    q_prev, q = 0, 1
    exhausted = terminated = False
    r = x
    while len(quotients) < depth:
        if r == 0:
            terminated = True
            break
        if r < PRECISION_FLOOR and not isinstance(omega, Fraction):
            exhausted = True
            break
        inv = 1 / r
        a = inv.numerator // inv.denominator
        p_next, q_next = a * p + p_prev, a * q + q_prev
        if (not isinstance(omega, Fraction) and convergents
                and float(q) * float(q_next) > _Q_PRODUCT_LIMIT):
            exhausted = True
            break
        quotients.append(a)
        p_prev, p = p, p_next
        q_prev, q = q, q_next
        convergents.append((p, q))
        r = inv - a
    if r == 0:
        terminated = True
    return ContinuedFraction(float(x), tuple(quotients), tuple(convergents),
                             exhausted=exhausted, terminated=terminated)


def beta_upper(cf: ContinuedFraction, tail_start: int = 0) -> float:
    """Finite-depth surrogate for beta(omega) = limsup log(q_{s+1}) / q_s.

    Returns the maximum of ``log(q_{s+1}) / q_s`` over convergent indices
    ``s >= tail_start`` (0-based into ``cf.convergents``).
    """
    if len(cf.convergents) < 2:
        raise ValueError("need at least two convergents")
    q = cf.denominators
    ratios = np.log(q[1:]) / q[:-1]
    tail = ratios[tail_start:]
    if tail.size == 0:
        raise ValueError("tail_start beyond available convergents")
    return float(max(tail.max(), 0.0))


class DiophantineResult(NamedTuple):
    satisfied: bool
    worst_k: int
    worst_ratio: float  # min over k of ||k omega|| * k**A / c; satisfied iff > 1


def distance_to_integers(x):
    x = np.asarray(x, dtype=float)
    return np.abs(x - np.rint(x))


def diophantine_check(omega, c: float, A: float, K: int) -> DiophantineResult:
    """Test ||k omega|| > c |k|^-A for 0 < |k| <= K.

    Only positive k are scanned since ||-k omega|| = ||k omega||.
    """
    w = check_frequency(omega)
    if c <= 0 or A <= 0:
        raise ValueError("c and A must be positive")
    if K < 1:
        raise ValueError("K must be >= 1")
    k = np.arange(1, K + 1, dtype=float)
    # exact integer products keep k*omega accurate up to K ~ 1e6
    ratio = distance_to_integers(k * w) * k ** A / c
    i = int(np.argmin(ratio))
    return DiophantineResult(bool(ratio[i] > 1.0), i + 1, float(ratio[i]))
