"""Numerical experiments: spectra, eigenvector decay, large deviations, positivity scans."""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg

from .cmv import CmvOperator, build
from .cocycle import log_norms, log_norms_of, walk_matrices
from .frequency import check_frequency
from .sampling import SamplingFunction, TrigPolynomial, ZhangForm, c_alpha, sequence

SCHEMA_VERSION = 1
SPECTRUM_CAP = 2000
DECAY_FLOOR = 1e-14


class CapError(ValueError):
    """A window exceeds the configured size cap."""


@dataclass
class EigenPair:
    z: complex
    xi: np.ndarray
    residual: float


def spectrum(E: CmvOperator, cap: int = SPECTRUM_CAP) -> list[EigenPair]:
    """Eigenpairs of a unitary section, sorted by argument in [0, 2 pi).

    A complex Schur form of a normal matrix is diagonal, so the Schur vectors
    are orthonormal eigenvectors.  Residuals and orthonormality are checked.
    """
    if E.size > cap:
        raise CapError(f"window of {E.size} sites exceeds cap {cap}")
    if not E.is_unitary_section:
        raise ValueError("spectrum needs a unitary restriction (beta, gamma on the circle)")
    A = E.to_dense()
    T, Z = scipy.linalg.schur(A, output="complex")
    w = np.diag(T)
    res = np.linalg.norm(A @ Z - Z * w, axis=0)
    if res.max() > 1e-8:
        raise ArithmeticError(f"eigen residual {res.max():.2e} exceeds 1e-8")
    if np.abs(Z.conj().T @ Z - np.eye(E.size)).max() > 1e-8:
        raise ArithmeticError("eigenvectors are not orthonormal")
    order = np.argsort(np.mod(np.angle(w), 2 * np.pi), kind="stable")
    return [EigenPair(complex(w[i]), Z[:, i], float(res[i])) for i in order]


@dataclass
class DecayFit:
    rate: float
    r2: float
    points: int
    passed: bool
    center: int


def decay_rate(xi, center: int | None = None, tail=(0.25, 0.9), floor: float = DECAY_FLOOR,
               min_points: int = 20, r2_min: float = 0.9) -> DecayFit:
    """Exponential decay rate of |xi_n| away from ``center`` (default: the peak).

    On each side the tail region spans the given fractions of the resolvable
    extent, the distance from the center to the window edge or to the last
    entry above ``floor``, whichever is nearer.  The rate is minus the
    least-squares slope of log|xi_n| against |n - center| pooled over both
    sides.  ``passed`` requires ``min_points`` points, R^2 >= ``r2_min`` and a
    positive rate.
    """
    x = np.abs(np.asarray(xi))
    x = x / np.linalg.norm(x)
    n = len(x)
    c = int(np.argmax(x)) if center is None else int(center)
    above = np.nonzero(x > floor)[0]
    ds, ys = [], []
    for side, edge in ((-1, min(c, c - above.min())), (1, min(n - 1 - c, above.max() - c))):
        lo, hi = tail[0] * edge, tail[1] * edge
        d = np.arange(int(np.ceil(lo)), int(np.floor(hi)) + 1)
        d = d[d > 0]
        vals = x[c + side * d]
        keep = vals > floor
        ds.append(d[keep])
        ys.append(np.log(vals[keep]))
    d = np.concatenate(ds).astype(float)
    y = np.concatenate(ys)
    if len(d) < 2:
        return DecayFit(float("nan"), 0.0, len(d), False, c)
    slope, intercept = np.polyfit(d, y, 1)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum((y - (slope * d + intercept)) ** 2))
    # a tail flat to round-off carries no decay information
    r2 = 1.0 - ss_res / ss_tot if np.ptp(y) > 1e-8 else 0.0
    rate = -float(slope)
    return DecayFit(rate, r2, len(d), bool(len(d) >= min_points and r2 >= r2_min and rate > 0), c)


def in_arc(z, arc) -> bool:
    """True when arg z lies on the counterclockwise arc from arc[0] to arc[1] (radians)."""
    t0, t1 = arc
    span = (t1 - t0) % (2 * np.pi) or 2 * np.pi
    return bool((np.angle(z) - t0) % (2 * np.pi) <= span)


@dataclass
class LocalizationEntry:
    z: complex
    center: int
    rate: float
    r2: float
    points: int
    passed: bool
    lyapunov: float
    ratio: float


@dataclass
class LocalizationReport:
    entries: list = field(default_factory=list)
    in_arc: int = 0
    pass_fraction: float = 0.0
    factor2_fraction: float = 0.0  # among passing entries, rate / L in [1/2, 2]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["re_z", "im_z", "center", "rate", "r2", "points", "passed",
                        "lyapunov", "ratio"])
            for e in self.entries:
                w.writerow([repr(e.z.real), repr(e.z.imag), e.center, repr(e.rate),
                            repr(e.r2), e.points, int(e.passed), repr(e.lyapunov),
                            repr(e.ratio)])

    def summary(self) -> dict:
        return {"schema": SCHEMA_VERSION, "in_arc": self.in_arc,
                "pass_fraction": self.pass_fraction, "factor2_fraction": self.factor2_fraction}


def localization_report(f: SamplingFunction, omega, x0: float, window, boundary=(1, 1),
                        arc=(0.0, 2 * np.pi), lyap_n: int = 256, lyap_grid: int = 256,
                        tail=(0.25, 0.9), r2_min: float = 0.9, min_points: int = 20,
                        cap: int = SPECTRUM_CAP) -> LocalizationReport:
    """Compare eigenvector decay with the Lyapunov exponent on an energy arc."""
    lo, hi = window
    seq = sequence(f, omega, x0, (lo, hi))
    E = build(seq, (lo, hi), beta=boundary[0], gamma=boundary[1])
    pairs = [p for p in spectrum(E, cap) if in_arc(p.z, arc)]
    xs = np.arange(lyap_grid) / lyap_grid
    entries = []
    for p in pairs:
        fit = decay_rate(p.xi, tail=tail, r2_min=r2_min, min_points=min_points)
        z = p.z / abs(p.z)
        L = float(np.mean(log_norms(f, omega, xs, z, lyap_n)))
        ratio = fit.rate / L if L > 0 and fit.passed else float("nan")
        entries.append(LocalizationEntry(complex(p.z), lo + fit.center, fit.rate, fit.r2,
                                         fit.points, fit.passed, L, ratio))
    passed = [e for e in entries if e.passed]
    pf = len(passed) / len(entries) if entries else 0.0
    f2 = (sum(0.5 <= e.ratio <= 2.0 for e in passed) / len(passed)) if passed else 0.0
    return LocalizationReport(entries, len(entries), pf, f2)


@dataclass
class LdtCurve:
    kappa: float
    ns: np.ndarray
    measures: np.ndarray
    lyapunov: np.ndarray  # grid estimate of L_n for each n
    slope: float = float("nan")  # of log(measure) against n
    intercept: float = float("nan")
    r2: float = float("nan")
    implied_c1: float = float("nan")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "kappa", "measure", "L_n"])
            for n, m, L in zip(self.ns, self.measures, self.lyapunov):
                w.writerow([int(n), repr(self.kappa), repr(float(m)), repr(float(L))])


def deviation_measures(values: np.ndarray, kappas) -> np.ndarray:
    """Fraction of grid phases with |v - mean(v)| > kappa, for each kappa."""
    dev = np.abs(values - values.mean())
    return np.array([float(np.mean(dev > k)) for k in np.atleast_1d(kappas)])


def _fit_log_linear(ns, measures, n_min):
    m = (ns >= n_min) & (measures > 0)
    if m.sum() < 2:
        return float("nan"), float("nan"), float("nan")
    x, y = ns[m].astype(float), np.log(measures[m])
    slope, intercept = np.polyfit(x, y, 1)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum((y - slope * x - intercept) ** 2)) / ss_tot if ss_tot > 0 else float("nan")
    return float(slope), float(intercept), r2


def ldt_curves(f: SamplingFunction, omega, z, kappas, n_schedule, grid: int = 1024,
               strip_norm: float | None = None, n_min: int = 0) -> list[LdtCurve]:
    """Deviation-set measures for several kappa values sharing one set of transfer norms.

    The log-measure is fitted linearly in n over n >= ``n_min`` where the
    measure is positive.  With ``strip_norm`` (the sup of |alpha| on the strip)
    the slope is converted to c_1 via measure ~ exp(-(c_1 / C_alpha^3) kappa^3 n).
    """
    ns = np.array(sorted(int(n) for n in n_schedule))
    xs = np.arange(grid) / grid
    kappas = np.atleast_1d(np.asarray(kappas, dtype=float))
    if np.any(kappas <= 0):
        raise ValueError("kappa must be positive")
    table = np.empty((len(kappas), len(ns)))
    Ls = np.empty(len(ns))
    for j, n in enumerate(ns):
        v = log_norms(f, omega, xs, z, int(n))
        Ls[j] = v.mean()
        table[:, j] = deviation_measures(v, kappas)
    out = []
    for i, k in enumerate(kappas):
        slope, icpt, r2 = _fit_log_linear(ns, table[i], n_min)
        c1 = float("nan")
        if strip_norm is not None and np.isfinite(slope):
            c1 = -slope * c_alpha(strip_norm) ** 3 / k ** 3
        out.append(LdtCurve(float(k), ns, table[i], Ls.copy(), slope, icpt, r2, c1))
    return out


def ldt_curve(f, omega, z, kappa, n_schedule, grid: int = 1024, strip_norm=None,
              n_min: int = 0) -> LdtCurve:
    return ldt_curves(f, omega, z, [kappa], n_schedule, grid, strip_norm, n_min)[0]


def exact_resonances(k: int, omega, form: str = "szego") -> np.ndarray:
    """Energy parameters t (z = exp(2 pi i t)) at the center of the zero-exponent band when theta = 0.

    For theta = 0 the cocycle is conjugate to a constant matrix whose trace
    vanishes exactly at these t.
    """
    w = float(omega)
    if form == "szego":
        return np.array([(0.5 - k * w) % 1.0])
    if form == "walk":
        return np.sort(np.array([(0.25 + m / 2 - k * w / 2) % 1.0 for m in (0, 1)]))
    raise ValueError(f"unknown form {form!r}")


def constant_phase_lyapunov(lam: float, k: int, omega, t: float, form: str = "szego") -> float:
    """Exact Lyapunov exponent for theta = 0 from the conjugated constant matrix."""
    rho = np.sqrt(1 - lam * lam)
    if form == "szego":
        c = abs(np.cos(np.pi * t + np.pi * k * omega)) / rho
    elif form == "walk":
        c = abs(np.cos(2 * np.pi * t + np.pi * k * omega)) / rho
    else:
        raise ValueError(f"unknown form {form!r}")
    return float(np.arccosh(max(c, 1.0)))


@dataclass
class PositivityScan:
    lambdas: np.ndarray
    omegas: np.ndarray
    ts: np.ndarray  # z = exp(2 pi i t)
    values: np.ndarray  # L_n, shape (lambda, omega, t)
    offsets: np.ndarray  # L_n + log(1 - lambda) / 2
    c0: float
    flagged: np.ndarray  # bool, same shape
    form: str = "szego"

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lambda", "omega", "t", "L_n", "offset", "flagged"])
            for idx in np.ndindex(self.values.shape):
                i, j, l = idx
                w.writerow([repr(float(self.lambdas[i])), repr(float(self.omegas[j])),
                            repr(float(self.ts[l])), repr(float(self.values[idx])),
                            repr(float(self.offsets[idx])), int(self.flagged[idx])])

    def summary(self) -> dict:
        return {"schema": SCHEMA_VERSION, "form": self.form, "c0": self.c0,
                "flagged": int(self.flagged.sum()), "cells": int(self.values.size)}


def positivity_scan(k: int, theta: TrigPolynomial | None, lambdas, omegas, ts, n: int,
                    grid: int = 256, form: str = "szego", mad_factor: float = 3.0,
                    mapper=map) -> PositivityScan:
    """Scan L_n of Zhang's example alpha = lam exp(2 pi i (k x + theta(x))).

    ``form`` selects the one-step Szegő cocycle or the two-step walk cocycle
    with energy E = exp(2 pi i t).  Cells whose offset L_n + log(1 - lam)/2
    lies more than ``mad_factor`` median absolute deviations below the median
    are flagged.  ``mapper`` may be a parallel map; results keep grid order.
    """
    lambdas, omegas, ts = (np.atleast_1d(np.asarray(a, dtype=float)) for a in (lambdas, omegas, ts))
    if np.any((lambdas <= 0) | (lambdas >= 1)):
        raise ValueError("lambda values must lie in (0, 1)")
    for w in omegas:
        check_frequency(w)
    xs = np.arange(grid) / grid
    cells = list(np.ndindex(len(lambdas), len(omegas), len(ts)))

    def cell(idx):
        i, j, l = idx
        f = ZhangForm(float(lambdas[i]), k, theta)
        z = np.exp(2j * np.pi * ts[l])
        if form == "szego":
            v = log_norms(f, omegas[j], xs, z, n)
        elif form == "walk":
            v = log_norms_of(lambda x: walk_matrices(f.evaluate(x), z), omegas[j], xs, n)
        else:
            raise ValueError(f"unknown form {form!r}")
        return float(v.mean())

    values = np.array(list(mapper(cell, cells))).reshape(len(lambdas), len(omegas), len(ts))
    offsets = values + 0.5 * np.log(1 - lambdas)[:, None, None]
    med = np.median(offsets)
    mad = np.median(np.abs(offsets - med))
    flagged = offsets < med - mad_factor * max(mad, 1e-12)
    return PositivityScan(lambdas, omegas, ts, values, offsets, float(offsets.min()),
                          flagged, form)


def write_json(obj, path) -> None:
    """Deterministic JSON (sorted keys, fixed separators)."""
    def default(o):
        if isinstance(o, np.generic):
            return o.item()
        if isinstance(o, complex):
            return [o.real, o.imag]
        if hasattr(o, "__dataclass_fields__"):
            return asdict(o)
        raise TypeError(type(o))
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2, default=default)
        fh.write("\n")
