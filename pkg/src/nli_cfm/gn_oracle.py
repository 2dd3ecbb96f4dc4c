"""Brute-force GN-integral reference for the closed-form engine.

Integrates the folded NLI islands of one channel under test with an
adaptive tensor-trapezoid rule, keeping the frequency dependence of
the phase-mismatch factor

    rho(f1, f2) = 4 pi^2 (f1 - f_CUT) (f2 - f_CUT)
                  (beta2 + pi beta3 (f1 + f2 - 2 f_c))

that the closed form freezes at the island center.  The span kernel is
e^{-4 alpha1/sigma} |zeta_M(rho)|^2 built from the same fitted power
profiles, so the comparison isolates the island closed form and the
dispersion freeze.  A deep mode replaces the Taylor kernel with direct
z-integration of the fitted profile,

    | int_0^L exp((-2 alpha0 + j rho) z + (2 alpha1/sigma)(e^{-sigma z} - 1)) dz |^2,

removing the Taylor truncation and the infinite-length approximation
as well.  Deliberately simple and slow; never used in the production
path.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .cfm_engine import NLI_PREFACTOR, _gain_array, _loss_array, choose_M, zeta_sq
from .errors import NumericError, QuadratureError
from .link_model import Link

logger = logging.getLogger(__name__)

__all__ = [
    "Island",
    "QuadSpec",
    "enumerate_islands",
    "count_mci_islands",
    "integrate_island_numeric",
    "nli_reference",
]


@dataclass(frozen=True)
class Island:
    """One rectangular island of the folded GN integral.

    (m_ch, n_ch, k_ch) are the channels covering f1, f2 and the third
    frequency f1 + f2 - f_CUT.  The folded enumeration puts f1 on the
    interferer (m_ch), f2 on the CUT (n_ch), and the third frequency
    back on the interferer (k_ch = m_ch), absorbing its half-bandwidth
    excursion into the rectangle.  SCI means all three sit on the CUT.
    """

    m_ch: int
    n_ch: int
    k_ch: int
    kind: str  # "SCI" | "XCI"
    f1_lo: float
    f1_hi: float
    f2_lo: float
    f2_hi: float

    @property
    def mch_index(self) -> int:
        return self.m_ch


@dataclass(frozen=True)
class QuadSpec:
    """Controls of the reference quadrature."""

    rtol: float = 1e-4
    min_points: int = 33
    max_points: int = 4097
    deep: bool = False
    deep_z_points: int = 4097
    max_island_spans: int = 512


def enumerate_islands(link: Link, cut: int) -> list[Island]:
    """Folded SCI/XCI islands of the CUT, one per non-pump channel."""
    cut_ch = None
    for ch in link.channels:
        if ch.index == cut:
            cut_ch = ch
    if cut_ch is None:
        raise ValueError(f"no channel with index {cut}")
    out = []
    for ch in link.channels:
        if ch.is_pump:
            continue
        out.append(Island(m_ch=ch.index, n_ch=cut, k_ch=ch.index,
                          kind="SCI" if ch.index == cut else "XCI",
                          f1_lo=ch.f_start, f1_hi=ch.f_end,
                          f2_lo=cut_ch.f_start, f2_hi=cut_ch.f_end))
    return out


def count_mci_islands(link: Link, cut: int) -> int:
    """Count candidate three-channel islands beyond the folded SCI/XCI set.

    A triple (m, n, k) contributes when the band of f1 + f2 - f_CUT
    with f1 in m and f2 in n overlaps channel k.  Triples with f2 on
    the CUT and k = m are the ones the folded enumeration integrates
    and are skipped.  Diagnostic only; O(N^3) in channel count.
    """
    chans = [ch for ch in link.channels if not ch.is_pump]
    f_cut = None
    for ch in link.channels:
        if ch.index == cut:
            f_cut = ch.f_center
    if f_cut is None:
        raise ValueError(f"no channel with index {cut}")
    n_mci = 0
    for m in chans:
        for n in chans:
            for k in chans:
                if n.index == cut and k.index == m.index:
                    continue
                if (m.f_start + n.f_start <= k.f_end + f_cut
                        and m.f_end + n.f_end >= k.f_start + f_cut):
                    n_mci += 1
    return n_mci


def _deep_kernel(rho: np.ndarray, fitted, length: float, nz: int) -> np.ndarray:
    """|int_0^L exp((-2 a0 + j rho) z + x (e^{-sigma z} - 1)) dz|^2 by
    composite Simpson, chunked so the (points, nz) phase array stays small."""
    if nz % 2 == 0:
        nz += 1
    z = np.linspace(0.0, length, nz)
    wts = np.full(nz, 2.0)
    wts[1::2] = 4.0
    wts[0] = wts[-1] = 1.0
    wts *= (z[1] - z[0]) / 3.0
    x = 2.0 * fitted.alpha1 / fitted.sigma
    base = -2.0 * fitted.alpha0 * z + x * np.expm1(-fitted.sigma * z)
    flat = rho.ravel()
    out = np.empty(flat.shape)
    blk = max(1, 2_000_000 // nz)
    for lo in range(0, flat.size, blk):
        hi = min(flat.size, lo + blk)
        phase = np.exp(base[None, :] + 1j * flat[lo:hi, None] * z[None, :])
        out[lo:hi] = np.abs(phase @ wts) ** 2
    return out.reshape(rho.shape)


def _island_pass(island: Island, span, fitted, f_cut: float, n: int,
                 quad: QuadSpec) -> float:
    f1 = np.linspace(island.f1_lo, island.f1_hi, n)
    f2 = np.linspace(island.f2_lo, island.f2_hi, n)
    x = 2.0 * fitted.alpha1 / fitted.sigma
    m_big = choose_M(fitted.alpha1, fitted.sigma)
    rows = np.empty(n)
    chunk = max(1, min(n, 262144 // n))
    for lo in range(0, n, chunk):
        hi = min(n, lo + chunk)
        rho = (4.0 * math.pi ** 2
               * (f1[lo:hi, None] - f_cut) * (f2[None, :] - f_cut)
               * (span.beta2 + math.pi * span.beta3
                  * (f1[lo:hi, None] + f2[None, :] - 2.0 * span.f_taylor_center)))
        if quad.deep:
            kern = _deep_kernel(rho, fitted, span.length, quad.deep_z_points)
        else:
            kern = math.exp(-2.0 * x) * zeta_sq(rho, fitted.alpha0,
                                                fitted.alpha1, fitted.sigma, m_big)
        rows[lo:hi] = np.trapezoid(kern, f2, axis=1)
    return float(np.trapezoid(rows, f1))


def integrate_island_numeric(island: Island, span, fitted, f_cut: float,
                             quad: QuadSpec = QuadSpec()) -> float:
    """One island of the span NLI integral, refined until two successive
    grids agree to quad.rtol.  Includes the e^{-4 alpha1/sigma} factor,
    matching the closed form's weights times island integrals."""
    n = quad.min_points
    prev = None
    while True:
        val = _island_pass(island, span, fitted, f_cut, n, quad)
        if prev is not None and abs(val - prev) <= quad.rtol * abs(val):
            return val
        nxt = 2 * (n - 1) + 1
        if nxt > quad.max_points:
            raise QuadratureError(
                f"{island.kind} island of interferer {island.mch_index} did not "
                f"reach rtol {quad.rtol:g} within {quad.max_points} points per axis")
        prev, n = val, nxt


def nli_reference(link: Link, fits: dict, loss_tables, cut: int,
                  quad: QuadSpec = QuadSpec(), amp_gains=None,
                  with_breakdown: bool = False):
    """Reference NLI PSD at the CUT center by numeric island integration.

    Same PSD ladders, fitted profiles and island bookkeeping as the
    closed form; only the kernel integral is numeric.  Guarded against
    runaway work via quad.max_island_spans.
    """
    islands = enumerate_islands(link, cut)
    work = len(islands) * link.n_spans
    if work > quad.max_island_spans:
        raise NumericError(
            f"reference integral spans {work} island-span pairs, over the guard "
            f"of {quad.max_island_spans}; shrink the comb or raise the guard")

    loss = _loss_array(loss_tables)
    gains = _gain_array(link, loss, amp_gains)
    ladder = gains / loss
    pre = np.ones_like(ladder)
    if link.n_spans > 1:
        pre[1:] = np.cumprod(ladder[:-1], axis=0)
    post = np.cumprod(ladder[::-1], axis=0)[::-1]
    g_in = link.launch_psd[None, :] * pre

    pos = {ch.index: i for i, ch in enumerate(link.channels)}
    cut_pos = pos[cut]
    f_cut = link.f_centers[cut_pos]

    rows = np.zeros_like(loss)
    span_totals = []
    for p, span in enumerate(link.spans):
        subtotal = 0.0
        for isl in islands:
            try:
                fp = fits[(p + 1, isl.m_ch)]
            except KeyError:
                raise ValueError(f"missing fitted profile for span {p + 1} "
                                 f"channel {isl.m_ch}") from None
            val = integrate_island_numeric(isl, span, fp, f_cut, quad)
            mpos = pos[isl.m_ch]
            two_minus_delta = 1.0 if isl.kind == "SCI" else 2.0
            contrib = (span.gamma ** 2 * g_in[p, cut_pos] * g_in[p, mpos] ** 2
                       * two_minus_delta * post[p, cut_pos] * val)
            rows[p, mpos] = NLI_PREFACTOR * contrib
            subtotal += contrib
        span_totals.append(subtotal)
    # span subtotals first, mirroring the closed form's accumulation
    total = NLI_PREFACTOR * math.fsum(span_totals)
    if with_breakdown:
        return total, rows
    return total
