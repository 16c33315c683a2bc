"""Secret key rate of a Gaussian-modulated CV-QKD link with a finite-FER decoder.

The key rate per pulse is ``K_t = (1 - FER) * (beta * I_AB - chi_BE)`` with
``beta = R / I_AB``, so the information term reduces to ``R - chi_BE``.

Channel model (homodyne detection, reverse reconciliation, trusted detector
noise), all variances in shot-noise units::

    T       = 10 ** (-alpha_db * d / 10)
    snr     = eta T V_A / (1 + v_el + eta T xi)
    I_AB    = 0.5 log2(1 + snr)
    V       = V_A + 1
    chi_line = 1/T - 1 + xi
    chi_hom  = (1 - eta)/eta + v_el/eta
    chi_tot  = chi_line + chi_hom / T

Eve's Holevo information is ``G(l1) + G(l2) - G(l3) - G(l4)`` with
``G(l) = g((l - 1)/2)``, ``g(x) = (x+1) log2(x+1) - x log2(x)`` and
symplectic eigenvalues::

    A = V^2 (1 - 2T) + 2T + T^2 (V + chi_line)^2
    B = T^2 (V chi_line + 1)^2
    l1,2^2 = (A +- sqrt(A^2 - 4B)) / 2
    C = (V sqrt(B) + T (V + chi_line) + A chi_hom) / (T (V + chi_tot))
    D = sqrt(B) (V + sqrt(B) chi_hom) / (T (V + chi_tot))
    l3,4^2 = (C +- sqrt(C^2 - 4D)) / 2
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize_scalar

FER_FLOOR = 1e-6
_EIG_TOL = 1e-9


class SkrError(ValueError):
    pass


@dataclass(frozen=True)
class CvQkdParams:
    V_A: float
    d: float
    rate: float
    alpha_db: float = 0.2
    xi: float = 0.01
    eta: float = 0.6
    v_el: float = 0.1

    def __post_init__(self) -> None:
        if not self.V_A > 0:
            raise SkrError("V_A must be positive")
        if self.d < 0 or self.alpha_db < 0:
            raise SkrError("distance and loss must be non-negative")
        if not 0 < self.eta <= 1:
            raise SkrError("eta must lie in (0, 1]")
        if self.xi < 0 or self.v_el < 0:
            raise SkrError("noise terms must be non-negative")
        if not 0 < self.rate < 1:
            raise SkrError("code rate must lie in (0, 1)")

    @property
    def T(self) -> float:
        return 10.0 ** (-self.alpha_db * self.d / 10.0)

    def with_va(self, v_a: float) -> "CvQkdParams":
        return replace(self, V_A=float(v_a))


def beta(rate: float, snr: float) -> float:
    """Reconciliation efficiency ``R / (0.5 log2(1 + snr))``."""
    if not snr > 0:
        raise SkrError("snr must be positive")
    b = rate / (0.5 * math.log2(1.0 + snr))
    if b > 1:
        warnings.warn(f"beta = {b:.4f} > 1: rate above capacity at snr {snr}", stacklevel=2)
    return b


def snr_of_va(params: CvQkdParams) -> float:
    eT = params.eta * params.T
    return eT * params.V_A / (1.0 + params.v_el + eT * params.xi)


def va_of_snr(params: CvQkdParams, snr: float) -> float:
    """Inverse of :func:`snr_of_va` for the other parameters of ``params``."""
    eT = params.eta * params.T
    return snr * (1.0 + params.v_el + eT * params.xi) / eT


def calibrate_eta(d: float, v_a: float, snr: float, *, alpha_db: float = 0.2,
                  xi: float = 0.01, v_el: float = 0.1) -> float:
    """Detector efficiency that maps ``v_a`` to ``snr`` at distance ``d``."""
    T = 10.0 ** (-alpha_db * d / 10.0)
    denom = T * (v_a - snr * xi)
    if denom <= 0:
        raise SkrError("no positive efficiency reproduces this (V_A, snr) pair")
    eta = snr * (1.0 + v_el) / denom
    if not 0 < eta <= 1:
        raise SkrError(f"calibrated efficiency {eta:.4f} outside (0, 1]")
    return eta


def calibrated_params(d: float, rate: float, v_a: float, snr: float, **kw) -> CvQkdParams:
    eta = calibrate_eta(d, v_a, snr, **kw)
    return CvQkdParams(V_A=v_a, d=d, rate=rate, eta=eta, **kw)


# Operating points the presets are calibrated to: (d, R, V_A, snr).
REFERENCE_POINTS = {
    0.2: (25.0, 0.2, 6.3692, 0.3707),
    0.1: (50.0, 0.1, 2.9221, 0.1701),
}


def preset(rate: float) -> CvQkdParams:
    """Calibrated link for the rate-0.2 (25 km) or rate-0.1 (50 km) code."""
    try:
        d, R, va, snr = REFERENCE_POINTS[rate]
    except KeyError:
        raise SkrError(f"no preset for rate {rate}") from None
    return calibrated_params(d, R, va, snr)


def _g(x: float) -> float:
    if x <= 0:
        return 0.0
    return (x + 1) * math.log2(x + 1) - x * math.log2(x)


def _eigs(s: float, prod: float) -> tuple[float, float]:
    disc = s * s - 4 * prod
    if disc < -_EIG_TOL * max(1.0, s * s):
        raise SkrError("non-physical covariance matrix (complex symplectic eigenvalues)")
    root = math.sqrt(max(disc, 0.0))
    out = []
    for sq in ((s + root) / 2, (s - root) / 2):
        if sq < 1 - 1e-7:
            raise SkrError(f"non-physical covariance matrix (symplectic eigenvalue^2 = {sq:.6g})")
        out.append(math.sqrt(max(sq, 1.0)))
    return out[0], out[1]


def holevo_bound(params: CvQkdParams) -> float:
    T, xi, eta, v_el = params.T, params.xi, params.eta, params.v_el
    V = params.V_A + 1
    chi_line = 1 / T - 1 + xi
    chi_hom = (1 - eta) / eta + v_el / eta
    chi_tot = chi_line + chi_hom / T
    A = V * V * (1 - 2 * T) + 2 * T + T * T * (V + chi_line) ** 2
    B = T * T * (V * chi_line + 1) ** 2
    l1, l2 = _eigs(A, B)
    sB = math.sqrt(B)
    C = (V * sB + T * (V + chi_line) + A * chi_hom) / (T * (V + chi_tot))
    D = sB * (V + sB * chi_hom) / (T * (V + chi_tot))
    l3, l4 = _eigs(C, D)
    G = lambda lam: _g((lam - 1) / 2)
    return G(l1) + G(l2) - G(l3) - G(l4)


def mutual_information(params: CvQkdParams) -> dict:
    """``{"snr", "I_AB", "chi_BE"}`` for the link in ``params``."""
    snr = snr_of_va(params)
    return {"snr": snr, "I_AB": 0.5 * math.log2(1 + snr), "chi_BE": holevo_bound(params)}


# --------------------------------------------------------------------------
# FER model


@dataclass(frozen=True)
class FerModel:
    """``FER(snr) = 1 / (1 + exp(a (snr - b)))`` clamped to ``[1e-6, 1]``."""

    a: float
    b: float
    points: tuple[tuple[float, float], ...] = ()

    def __call__(self, snr):
        z = np.clip(self.a * (np.asarray(snr, dtype=np.float64) - self.b), -700, 700)
        out = np.clip(1.0 / (1.0 + np.exp(z)), FER_FLOOR, 1.0)
        return float(out) if np.ndim(out) == 0 else out

    def of_va(self, params: CvQkdParams, v_a: float) -> float:
        return self(snr_of_va(params.with_va(v_a)))


def fit_fer(points, frames: int | None = None) -> FerModel:
    """Least-squares logit-linear fit of ``(snr, fer)`` points.

    Zero and one are pulled in by half a frame (``frames`` given) or by
    ``1e-3`` before taking the logit.
    """
    pts = [(float(s), float(f)) for s, f in points]
    if len(pts) < 3:
        raise SkrError("need at least 3 points to fit a FER curve")
    snr = np.array([s for s, _ in pts])
    fer = np.array([f for _, f in pts])
    if np.any((fer < 0) | (fer > 1)):
        raise SkrError("FER values must lie in [0, 1]")
    if np.all(fer <= 0) or np.all(fer >= 1):
        raise SkrError("all points are 0 or all are 1; widen the SNR sweep")
    if np.ptp(snr) == 0:
        raise SkrError("points need at least two distinct SNR values")
    eps = 0.5 / frames if frames else 1e-3
    f = np.clip(fer, eps, 1 - eps)
    y = np.log(f / (1 - f))
    slope, intercept = np.polyfit(snr, y, 1)
    a = -slope
    if not a > 0:
        raise SkrError("fitted FER does not decrease with SNR; check the sweep")
    return FerModel(a=float(a), b=float(intercept / a), points=tuple(pts))


# --------------------------------------------------------------------------
# optimisation


@dataclass(frozen=True)
class KeyRateResult:
    V_A: float
    snr: float
    fer: float
    beta: float
    I_AB: float
    chi_BE: float
    K_opt: float
    zero_rate: bool = False

    @property
    def k_raw(self) -> float:
        return (1 - self.fer) * (self.beta * self.I_AB - self.chi_BE)


def key_rate(params: CvQkdParams, fer_model) -> float:
    """``K_t`` (may be negative) at ``params.V_A``."""
    mi = mutual_information(params)
    fer = float(fer_model(mi["snr"]))
    return (1 - fer) * (params.rate - mi["chi_BE"])


def _result(params: CvQkdParams, fer_model, v_a: float) -> KeyRateResult:
    p = params.with_va(v_a)
    mi = mutual_information(p)
    fer = float(fer_model(mi["snr"]))
    b = params.rate / mi["I_AB"]
    k = (1 - fer) * (params.rate - mi["chi_BE"])
    return KeyRateResult(V_A=float(v_a), snr=mi["snr"], fer=fer, beta=b, I_AB=mi["I_AB"],
                         chi_BE=mi["chi_BE"], K_opt=max(k, 0.0), zero_rate=k <= 0)


def optimize_va(params: CvQkdParams, fer_model, bounds=(0.5, 20.0), grid: int = 400) -> KeyRateResult:
    """Maximise ``K_t`` over ``V_A`` in ``bounds``.

    A dense grid brackets the best point; a bounded scalar search then
    refines it inside the neighbouring grid cells.
    """
    lo, hi = map(float, bounds)
    if not (0 < lo < hi and math.isfinite(hi)):
        raise SkrError("bounds must be positive, finite and increasing")
    xs = np.linspace(lo, hi, grid)
    ks = np.array([key_rate(params.with_va(x), fer_model) for x in xs])
    i = int(np.argmax(ks))
    a, b = xs[max(i - 1, 0)], xs[min(i + 1, grid - 1)]
    best = xs[i]
    if b > a:
        res = minimize_scalar(lambda x: -key_rate(params.with_va(x), fer_model),
                              bounds=(a, b), method="bounded", options={"xatol": 1e-6})
        if -res.fun >= ks[i]:
            best = float(res.x)
    return _result(params, fer_model, best)


def gain(with_erase: KeyRateResult, without_erase: KeyRateResult) -> float:
    """Relative improvement ``K_with / K_without - 1`` (inf if the baseline is zero)."""
    if without_erase.K_opt <= 0:
        return math.inf if with_erase.K_opt > 0 else 0.0
    return with_erase.K_opt / without_erase.K_opt - 1.0


def realtime_skr(k_opt: float, throughput_bps: float) -> float:
    """Key bits per second with one pulse per decoded bit."""
    if k_opt < 0 or throughput_bps < 0:
        raise SkrError("key rate and throughput must be non-negative")
    return k_opt * throughput_bps
