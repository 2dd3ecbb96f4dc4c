"""Coupled power evolution of a WDM comb under stimulated Raman scattering.

The comb obeys, per channel l with power P_l(z),

    dP_l/dz = - sum_{i<l} (f_l/f_i) C_R(f_l - f_i) P_i P_l
              + sum_{i>l} C_R(f_i - f_l) P_i P_l
              - 2 alpha_l P_l

where channel 1 sits lowest in frequency.  The f_l/f_i ratios are the
photon-conversion factors of the downward-pumping terms; with them the
photon flux sum(P_j / f_j) is conserved when alpha = 0.

The integrator works on ln P, which keeps powers positive by
construction and makes the no-Raman case exactly linear in z.  Three
analytic solutions of restricted regimes (flat comb approximations and
a perturbative single-channel profile) are provided for cross checks
and as fit seeds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp

from .errors import SolverDivergenceError
from .link_model import Link, RamanGainProfile

__all__ = [
    "GridSpec",
    "PowerEvolution",
    "evaluate_gain",
    "solve_power_evolution",
    "analytic_flat_solution",
    "analytic_uniform_solution",
    "perturbative_triple",
    "perturbative_profile",
]


@dataclass(frozen=True)
class GridSpec:
    """Integrator accuracy and output sampling.

    rtol/atol are the accuracy targets on the channel powers (atol in
    W).  Internally the solver integrates ln P, where an absolute error
    maps onto a relative power error, so the local tolerances handed to
    the integrator are scaled two decades below rtol.  The dense
    solution is resampled onto a uniform grid of
    max(min_points, ceil(length / segment)) points.
    """

    rtol: float = 1e-8
    atol: float = 1e-15
    min_points: int = 200
    segment: float = 250.0  # m
    max_step: Optional[float] = None


@dataclass(eq=False)
class PowerEvolution:
    """Sampled solution of one span: powers[ch, iz] over z[iz]."""

    span_index: int  # 1-based
    z: np.ndarray  # (nz,), m, uniform, z[0] = 0
    powers: np.ndarray  # (n_channels, nz), W

    def __post_init__(self) -> None:
        self.z = np.asarray(self.z, dtype=float)
        self.powers = np.asarray(self.powers, dtype=float)
        if self.powers.ndim != 2 or self.powers.shape[1] != self.z.size:
            raise ValueError("powers must be (n_channels, nz)")
        if self.z[0] != 0.0 or np.any(np.diff(self.z) <= 0.0):
            raise ValueError("z grid must start at 0 and increase")
        if not np.all(self.powers > 0.0):
            raise ValueError("powers must stay positive")

    @property
    def launch(self) -> np.ndarray:
        return self.powers[:, 0]

    @property
    def end_powers(self) -> np.ndarray:
        return self.powers[:, -1]

    def channel(self, position: int):
        """(z, P(z)) of one channel by 0-based row position."""
        return self.z, self.powers[position]


def evaluate_gain(profile: RamanGainProfile, offset):
    """Raman gain C_R at signed frequency offset(s), 1/(W m).

    offset is f_pump - f_signal; positive offsets amplify the signal.
    The returned function is odd in the offset.
    """
    u = np.asarray(offset, dtype=float)
    if profile.kind == "triangular":
        slope = profile.c_r_max / profile.delta_f
        out = np.where(np.abs(u) <= profile.delta_f, slope * u, 0.0)
    else:
        mag = np.interp(np.abs(u), profile.offsets, profile.values, right=0.0)
        out = np.sign(u) * mag
    if np.isscalar(offset):
        return float(out)
    return out


def _coupling_matrix(link: Link, span_index: int, photon_factors: bool) -> np.ndarray:
    """W[l, i] such that dlnP_l/dz = sum_i W[l, i] P_i - 2 alpha_l."""
    f = link.f_centers
    profile = link.raman[span_index - 1]
    gain = evaluate_gain(profile, f[None, :] - f[:, None])  # C_R(f_i - f_l)
    if photon_factors:
        ratio = np.where(f[None, :] < f[:, None], f[:, None] / f[None, :], 1.0)
        gain = gain * ratio
    np.fill_diagonal(gain, 0.0)
    return gain


def solve_power_evolution(link: Link, span_index: int, launch_powers,
                          grid: Optional[GridSpec] = None,
                          photon_factors: bool = True) -> PowerEvolution:
    """Integrate the coupled SRS equations over one span.

    launch_powers are the per-channel powers in W at the span input,
    ordered like link.channels.  span_index is 1-based.  Setting
    photon_factors=False drops the f_l/f_i ratios, which turns the
    system into the antisymmetric form whose total power is conserved
    at alpha = 0 (test hook for the flat-comb analytic solution).
    """
    if grid is None:
        grid = GridSpec()
    span = link.spans[span_index - 1]
    launch = np.asarray(launch_powers, dtype=float)
    if launch.shape != (link.n_channels,):
        raise ValueError("launch_powers must have one entry per channel")
    if np.any(launch <= 0.0):
        raise ValueError("launch powers must be positive")

    w_mat = _coupling_matrix(link, span_index, photon_factors)
    alpha2 = 2.0 * link.alpha_array(span_index)

    def rhs(_z, lnp):
        return w_mat @ np.exp(lnp) - alpha2

    # ln-space tolerances: absolute error on ln P ~ relative error on P.
    tol = 0.01 * grid.rtol
    kwargs = {}
    if grid.max_step is not None:
        kwargs["max_step"] = grid.max_step
    sol = solve_ivp(rhs, (0.0, span.length), np.log(launch), method="RK45",
                    dense_output=True, rtol=tol, atol=tol, **kwargs)
    if not sol.success:
        raise SolverDivergenceError(
            f"span {span_index}: power-evolution integrator stopped at "
            f"z = {sol.t[-1]:.1f} m of {span.length:.1f} m ({sol.message})")

    n_pts = max(grid.min_points, math.ceil(span.length / grid.segment))
    z = np.linspace(0.0, span.length, n_pts)
    powers = np.exp(sol.sol(z))
    powers[:, 0] = launch
    return PowerEvolution(span_index=span_index, z=z, powers=powers)


def _effective_length(alpha0: float, z):
    """L_eff(z) = (1 - exp(-2 alpha0 z)) / (2 alpha0), -> z as alpha0 -> 0."""
    z = np.asarray(z, dtype=float)
    if alpha0 == 0.0:
        return z
    return -np.expm1(-2.0 * alpha0 * z) / (2.0 * alpha0)


def analytic_flat_solution(f_centers, launch_powers, alpha0: float,
                           c_r_max: float, delta_f_isrs: float, z):
    """Closed-form comb evolution for the flat-loss triangular-gain regime.

    Valid when every pairwise offset stays on the triangular ramp, the
    attenuation is the same flat alpha0 for all channels and the
    photon-conversion factors are approximated as 1.  For channel j,

        P_j(z) = P_j(0) e^{-2 alpha0 z} P_tot
                 e^{P_tot (C_Rmax/df) (f_N - f_j) L_eff(z)} /
                 sum_i P_i(0) e^{P_tot (C_Rmax/df) (f_N - f_i) L_eff(z)}

    Returns (n_ch,) for scalar z or (n_ch, nz) for a z array.
    """
    f = np.asarray(f_centers, dtype=float)
    p0 = np.asarray(launch_powers, dtype=float)
    scalar = np.isscalar(z)
    zv = np.atleast_1d(np.asarray(z, dtype=float))

    p_tot = p0.sum()
    c = p_tot * c_r_max / delta_f_isrs
    leff = _effective_length(alpha0, zv)  # (nz,)
    k = c * (f[-1] - f[:, None]) * leff[None, :]  # (n_ch, nz)
    k -= k.max(axis=0, keepdims=True)
    num = p0[:, None] * np.exp(k)
    out = np.exp(-2.0 * alpha0 * zv)[None, :] * p_tot * num / num.sum(axis=0, keepdims=True)
    return out[:, 0] if scalar else out


def analytic_uniform_solution(n_channels: int, p0: float, alpha0: float,
                              c_r_max: float, delta_f_isrs: float,
                              delta_f_ch: float, z):
    """Flat-regime evolution specialised to a uniform equally spaced comb.

    All channels launch with power p0 on an equidistant grid of spacing
    delta_f_ch.  The channel sum of the flat-comb solution collapses to
    a sinh ratio:

        P_j(z) = N p0 e^{-2 alpha0 z} e^{A (N + 1 - 2 j)}
                 sinh(A) / sinh(N A),
        A = (N p0 / 2) (C_Rmax/df_isrs) delta_f_ch L_eff(z)

    Everything is assembled in log space, so large A (heavy tilt) does
    not overflow.  Returns (n_ch,) for scalar z, else (n_ch, nz).
    """
    scalar = np.isscalar(z)
    zv = np.atleast_1d(np.asarray(z, dtype=float))
    n = n_channels

    a = 0.5 * n * p0 * (c_r_max / delta_f_isrs) * delta_f_ch * _effective_length(alpha0, zv)
    # ln(sinh(A)/sinh(NA)) = A - NA + ln(1 - e^{-2A}) - ln(1 - e^{-2NA})
    with np.errstate(divide="ignore", invalid="ignore"):
        ln_ratio = np.where(
            a > 0.0,
            a - n * a + np.log(-np.expm1(-2.0 * a)) - np.log(-np.expm1(-2.0 * n * a)),
            -math.log(n),
        )
    j = np.arange(1, n + 1, dtype=float)
    ln_p = (math.log(n * p0) - 2.0 * alpha0 * zv[None, :]
            + ln_ratio[None, :] + a[None, :] * (n + 1.0 - 2.0 * j[:, None]))
    out = np.exp(ln_p)
    return out[:, 0] if scalar else out


def perturbative_triple(n_channels: int, p0: float, alpha0: float,
                        c_r_max: float, delta_f_isrs: float,
                        delta_f_ch: float, j: int):
    """First-order (alpha0, alpha1, sigma) of channel j in the uniform comb.

    Linearising the uniform-comb solution in the Raman strength yields
    the three-parameter profile with

        alpha1 = -(N p0 / 4) (C_Rmax/df_isrs) (f_N + f_1 - 2 f_j)
        sigma  = 2 alpha0

    and f_N + f_1 - 2 f_j = delta_f_ch (N + 1 - 2 j).  Used as a fit
    seed and as a small-perturbation cross check; j is 1-based.
    """
    alpha1 = -0.25 * n_channels * p0 * (c_r_max / delta_f_isrs) \
        * delta_f_ch * (n_channels + 1.0 - 2.0 * j)
    return alpha0, alpha1, 2.0 * alpha0


def perturbative_profile(n_channels: int, p0: float, alpha0: float,
                         c_r_max: float, delta_f_isrs: float,
                         delta_f_ch: float, j: int, z):
    """Power of channel j under the perturbative three-parameter profile, W."""
    a0, a1, sigma = perturbative_triple(n_channels, p0, alpha0, c_r_max,
                                        delta_f_isrs, delta_f_ch, j)
    zv = np.asarray(z, dtype=float)
    return p0 * np.exp(-2.0 * a0 * zv + (2.0 * a1 / sigma) * np.expm1(-sigma * zv))
