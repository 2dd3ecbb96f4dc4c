"""Per-span, per-channel fit of the three-parameter power profile.

The nonlinear engine models every channel's power along a span as

    P(z) = P(0) exp(-2 alpha0 z + (2 alpha1 / sigma) (e^{-sigma z} - 1))

and consumes the triple (alpha0, alpha1, sigma).  The triple is chosen
to minimise the power-weighted squared log residual against the
numerical evolution P_num:

    cost = int_0^L P_num(z)^{m_c} [ln(P_num/P(0)) + 2 alpha0 z
                                   + 2 alpha1 g(z)]^2 dz,
    g(z) = (1 - e^{-sigma z}) / sigma.

The residual is linear in (alpha0, alpha1), so for fixed sigma the
optimum solves a 2x2 normal system in closed form; the outer search
over sigma is a golden-section scan of a bracket expressed in units of
the span's intrinsic attenuation.  The weight exponent m_c > 0 skews
the fit quality toward the high-power start of the span, where the
NLI is generated.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFitError

logger = logging.getLogger(__name__)

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0

__all__ = [
    "FitSettings",
    "FittedProfile",
    "model_profile",
    "fit_cost",
    "solve_alpha01",
    "fit_profile",
    "fit_span_profiles",
]


@dataclass(frozen=True)
class FitSettings:
    """Knobs of the profile fit.

    The sigma bracket is [sigma_lo, sigma_hi] in units of the intrinsic
    alpha; when the optimum lands on the bracket edge, the search is
    widened once to [widen_lo, widen_hi].  gs_tol stops the golden
    section once the bracket has shrunk to that fraction of its start
    width.
    """

    m_c: float = 2.0
    sigma_lo: float = 1.0
    sigma_hi: float = 4.0
    widen_lo: float = 0.25
    widen_hi: float = 8.0
    gs_tol: float = 1e-4


@dataclass(frozen=True)
class FittedProfile:
    """Fitted triple of one (span, channel) pair; alphas in Np/m."""

    span_index: int
    channel_index: int
    alpha0: float
    alpha1: float
    sigma: float
    cost: float
    m_c: float
    hit_boundary: bool = False

    def __post_init__(self) -> None:
        if self.sigma <= 0.0:
            raise ValueError("sigma must be positive")


def model_profile(p0: float, alpha0: float, alpha1: float, sigma: float, z):
    """Three-parameter profile P(z), W.  z scalar or array, m."""
    zv = np.asarray(z, dtype=float)
    return p0 * np.exp(-2.0 * alpha0 * zv + (2.0 * alpha1 / sigma) * np.expm1(-sigma * zv))


def _trap_weights(z: np.ndarray) -> np.ndarray:
    """Trapezoid quadrature weights of a (not necessarily uniform) grid."""
    w = np.empty_like(z)
    w[0] = 0.5 * (z[1] - z[0])
    w[-1] = 0.5 * (z[-1] - z[-2])
    w[1:-1] = 0.5 * (z[2:] - z[:-2])
    return w


def _g_of_z(sigma: float, z: np.ndarray) -> np.ndarray:
    return -np.expm1(-sigma * z) / sigma


class _FitWorkspace:
    """Per-channel precomputation shared by all sigma iterates.

    With w = quadrature weights times P^{m_c} and r = ln(P/P0), the
    normal system for (alpha0, alpha1) at fixed sigma is

        [ S(w z z)  S(w z g) ] [alpha0]   [ -S(w z r)/2 ]
        [ S(w z g)  S(w g g) ] [alpha1] = [ -S(w g r)/2 ]

    where only the g-dependent sums change with sigma.
    """

    def __init__(self, z: np.ndarray, power: np.ndarray, m_c: float):
        self.z = z
        self.m_c = m_c
        self.w = _trap_weights(z) * power ** m_c
        self.lnr = np.log(power / power[0])
        self.wz = self.w * z
        self.wlnr = self.w * self.lnr
        self.a11 = float(self.wz @ z)
        self.b1 = -0.5 * float(self.wz @ self.lnr)

    def solve(self, sigma: float):
        g = _g_of_z(sigma, self.z)
        a12 = float(self.wz @ g)
        a22 = float((self.w * g) @ g)
        b2 = -0.5 * float(self.wlnr @ g)

        # eigenvalues of the symmetric 2x2 Gram matrix
        t = self.a11 + a22
        root = math.hypot(self.a11 - a22, 2.0 * a12)
        lam_max = 0.5 * (t + root)
        lam_min = 0.5 * (t - root)
        if lam_min <= 0.0 or lam_max / lam_min > 1e12:
            raise DegenerateFitError(
                f"degenerate fit geometry: basis functions z and g(z) are "
                f"numerically collinear at sigma = {sigma:.3e} 1/m")

        det = self.a11 * a22 - a12 * a12
        alpha0 = (a22 * self.b1 - a12 * b2) / det
        alpha1 = (self.a11 * b2 - a12 * self.b1) / det
        return alpha0, alpha1, g

    def cost_at(self, alpha0: float, alpha1: float, g: np.ndarray) -> float:
        r = self.lnr + 2.0 * alpha0 * self.z + 2.0 * alpha1 * g
        return float((self.w * r) @ r)

    def best_at(self, sigma: float):
        alpha0, alpha1, g = self.solve(sigma)
        return alpha0, alpha1, self.cost_at(alpha0, alpha1, g)


def fit_cost(z, power, alpha0: float, alpha1: float, sigma: float,
             m_c: float = 2.0) -> float:
    """Weighted squared log residual of a candidate triple.

    z and power are one channel's sampled evolution (power[0] is the
    launch).  Integration is trapezoidal on the given grid.
    """
    z = np.asarray(z, dtype=float)
    power = np.asarray(power, dtype=float)
    g = _g_of_z(sigma, z)
    r = np.log(power / power[0]) + 2.0 * alpha0 * z + 2.0 * alpha1 * g
    return float(np.trapezoid(power ** m_c * r * r, z))


def solve_alpha01(z, power, sigma: float, m_c: float = 2.0):
    """Optimal (alpha0, alpha1) at fixed sigma, from the 2x2 normal system.

    Raises DegenerateFitError when the system's condition number
    exceeds 1e12 (z and g(z) numerically collinear, e.g. sigma L << 1).
    """
    ws = _FitWorkspace(np.asarray(z, dtype=float), np.asarray(power, dtype=float), m_c)
    alpha0, alpha1, _ = ws.solve(sigma)
    return alpha0, alpha1


def _golden_section(ws: _FitWorkspace, lo: float, hi: float, gs_tol: float):
    """Minimise ws cost over sigma in [lo, hi]; returns (sigma, a0, a1, cost)."""
    width0 = hi - lo
    x1 = hi - INV_PHI * (hi - lo)
    x2 = lo + INV_PHI * (hi - lo)
    f1 = ws.best_at(x1)[2]
    f2 = ws.best_at(x2)[2]
    while hi - lo > gs_tol * width0:
        if f1 < f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - INV_PHI * (hi - lo)
            f1 = ws.best_at(x1)[2]
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + INV_PHI * (hi - lo)
            f2 = ws.best_at(x2)[2]
    sigma = 0.5 * (lo + hi)
    alpha0, alpha1, cost = ws.best_at(sigma)
    return sigma, alpha0, alpha1, cost


def fit_profile(z, power, intrinsic_alpha: float,
                settings: FitSettings = FitSettings(),
                span_index: int = 0, channel_index: int = 0) -> FittedProfile:
    """Fit the three-parameter profile to one channel of one span.

    intrinsic_alpha (Np/m) scales the sigma bracket.  When the optimum
    sticks to a bracket edge the search widens once; if it still ends
    on the edge the profile is returned with hit_boundary=True and a
    warning is logged.
    """
    z = np.asarray(z, dtype=float)
    power = np.asarray(power, dtype=float)
    ws = _FitWorkspace(z, power, settings.m_c)

    lo = settings.sigma_lo * intrinsic_alpha
    hi = settings.sigma_hi * intrinsic_alpha
    sigma, alpha0, alpha1, cost = _golden_section(ws, lo, hi, settings.gs_tol)

    edge = 0.02 * (hi - lo)
    hit = sigma - lo < edge or hi - sigma < edge
    if hit:
        wide_lo = settings.widen_lo * intrinsic_alpha
        wide_hi = settings.widen_hi * intrinsic_alpha
        sigma, alpha0, alpha1, cost = _golden_section(ws, wide_lo, wide_hi, settings.gs_tol)
        edge = 0.02 * (wide_hi - wide_lo)
        hit = sigma - wide_lo < edge or wide_hi - sigma < edge
        if hit:
            logger.warning(
                "span %d channel %d: sigma search ended on the widened bracket "
                "boundary (sigma = %.3e 1/m, bracket [%.3e, %.3e])",
                span_index, channel_index, sigma, wide_lo, wide_hi)

    return FittedProfile(span_index=span_index, channel_index=channel_index,
                         alpha0=alpha0, alpha1=alpha1, sigma=sigma,
                         cost=cost, m_c=settings.m_c, hit_boundary=hit)


def fit_span_profiles(evolution, link, settings: FitSettings = FitSettings()) -> dict:
    """Fit every non-pump channel of one span's evolution.

    Returns {(span_index, channel_index): FittedProfile}.  Pump entries
    are skipped: their power history shapes the signals' profiles but
    they never enter the NLI sums.
    """
    out = {}
    for pos, ch in enumerate(link.channels):
        if ch.is_pump:
            continue
        alpha = link.spans[evolution.span_index - 1].intrinsic_alpha[ch.index]
        z, p = evolution.channel(pos)
        out[(evolution.span_index, ch.index)] = fit_profile(
            z, p, alpha, settings,
            span_index=evolution.span_index, channel_index=ch.index)
    return out
