"""Data model of a multi-span WDM link and its static validation.

Everything downstream works in SI units:

    frequency       Hz
    length          m
    attenuation     Np/m on the field, so power decays as exp(-2 alpha z)
    power           W
    PSD             W/Hz
    gamma           1/(W m)
    Raman gain C_R  1/(W m), odd in the pump-signal frequency offset
    beta2, beta3    s^2/m, s^3/m

Channels are kept sorted by center frequency and indexed 1..N in that
order.  Raman pumps ride along as ordinary comb entries flagged with
``is_pump``: they take part in the power-evolution solve but are never
a channel under test nor an interferer in the NLI sums.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.constants import c as C_LIGHT

# Power dB per neper of field attenuation: loss_dB = 2*alpha*L * 10/ln 10.
DB_PER_NEPER = 8.685889638065037

# Spans with less end-to-end loss than this leave a non-negligible NLI
# contribution at the far boundary that the closed form drops.
MIN_SPAN_LOSS_DB = 8.0

# |D| below this makes the widest integration islands too curved for the
# frozen-dispersion step, s/m^2 (2 ps/nm/km).
MIN_ABS_DISPERSION = 2.0e-6


@dataclass(frozen=True)
class Channel:
    """One entry of the WDM comb.

    index        1-based position in the frequency-sorted comb
    f_center     center frequency, Hz
    bandwidth    occupied bandwidth, Hz; equals the symbol rate under the
                 rectangular-PSD convention used throughout
    launch_psd   PSD at the launch point of span 1, W/Hz
    mod_format_phi  excess-kurtosis constant of the modulation format,
                 consumed only by correction-factor plugins
    is_pump      True for forward-Raman pumps (excluded from NLI sums)
    """

    index: int
    f_center: float
    bandwidth: float
    launch_psd: float
    mod_format_phi: float = 0.0
    is_pump: bool = False

    @property
    def f_start(self) -> float:
        return self.f_center - 0.5 * self.bandwidth

    @property
    def f_end(self) -> float:
        return self.f_center + 0.5 * self.bandwidth

    @property
    def launch_power(self) -> float:
        """Launch power in W, PSD times bandwidth."""
        return self.launch_psd * self.bandwidth


@dataclass(frozen=True, eq=False)
class RamanGainProfile:
    """Raman gain spectrum C_R(delta_f) of one span's fiber.

    The profile is odd: evaluate_gain() returns positive values where the
    channel at the lower frequency gains power.  ``triangular`` is the
    linear-ramp approximation with peak ``c_r_max`` at offset ``delta_f``
    and zero beyond; ``tabulated`` interpolates measured samples given on
    non-negative offsets (zero extrapolation past the last sample).
    """

    kind: str  # "triangular" | "tabulated"
    c_r_max: float = 0.0  # 1/(W m)
    delta_f: float = 15.0e12  # Hz
    offsets: Optional[np.ndarray] = None  # Hz, ascending, >= 0
    values: Optional[np.ndarray] = None  # 1/(W m)

    @classmethod
    def triangular(cls, c_r_max: float, delta_f: float) -> "RamanGainProfile":
        return cls(kind="triangular", c_r_max=c_r_max, delta_f=delta_f)

    @classmethod
    def tabulated(cls, offsets: Sequence[float], values: Sequence[float]) -> "RamanGainProfile":
        offs = np.asarray(offsets, dtype=float)
        vals = np.asarray(values, dtype=float)
        if offs.size == 0 or offs[0] > 0.0:
            # anchor C_R(0) = 0 so the interpolant is odd-consistent
            offs = np.concatenate(([0.0], offs))
            vals = np.concatenate(([0.0], vals))
        return cls(kind="tabulated", offsets=offs, values=vals)

    @classmethod
    def off(cls) -> "RamanGainProfile":
        """A zero profile: SRS disabled."""
        return cls.triangular(0.0, 15.0e12)


@dataclass(frozen=True, eq=False)
class Span:
    """One fiber span followed by a lumped amplifier.

    intrinsic_alpha maps channel index -> field attenuation in Np/m and
    may differ per channel (wideband loss tilt).  amp_gain maps channel
    index -> linear power gain of the amplifier at the span end.  With
    ``compensate_loss`` the amplifier gain is resolved at run time to the
    exact span loss of each channel and amp_gain may be left empty.
    """

    length: float  # m
    gamma: float  # 1/(W m)
    beta2: float  # s^2/m
    beta3: float  # s^3/m
    f_taylor_center: float  # Hz, expansion point of beta2/beta3
    intrinsic_alpha: Mapping[int, float]
    amp_gain: Mapping[int, float] = field(default_factory=dict)
    compensate_loss: bool = False


@dataclass(frozen=True, eq=False)
class Link:
    """A launch comb plus an ordered chain of spans.

    raman holds one gain profile per span.  cut_selection restricts which
    channels are evaluated as channel under test; None means every
    non-pump channel.
    """

    spans: tuple
    channels: tuple
    raman: tuple
    cut_selection: Optional[tuple] = None

    @property
    def n_spans(self) -> int:
        return len(self.spans)

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    @property
    def f_centers(self) -> np.ndarray:
        return np.array([ch.f_center for ch in self.channels])

    @property
    def bandwidths(self) -> np.ndarray:
        return np.array([ch.bandwidth for ch in self.channels])

    @property
    def launch_psd(self) -> np.ndarray:
        return np.array([ch.launch_psd for ch in self.channels])

    @property
    def launch_powers(self) -> np.ndarray:
        return np.array([ch.launch_power for ch in self.channels])

    @property
    def pump_mask(self) -> np.ndarray:
        return np.array([ch.is_pump for ch in self.channels], dtype=bool)

    def alpha_array(self, span_index: int) -> np.ndarray:
        """Per-channel field attenuation of one span, Np/m (1-based span)."""
        span = self.spans[span_index - 1]
        return np.array([span.intrinsic_alpha[ch.index] for ch in self.channels])

    def gain_array(self, span_index: int) -> np.ndarray:
        """Per-channel linear amplifier gain after one span (1-based)."""
        span = self.spans[span_index - 1]
        return np.array([span.amp_gain[ch.index] for ch in self.channels])

    def cut_indices(self) -> tuple:
        if self.cut_selection is not None:
            return tuple(self.cut_selection)
        return tuple(ch.index for ch in self.channels if not ch.is_pump)


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    code: str
    message: str
    where: str = ""

    def __str__(self) -> str:
        loc = f" [{self.where}]" if self.where else ""
        return f"{self.severity.upper()} {self.code}{loc}: {self.message}"


def local_dispersion(span: Span, f: float) -> float:
    """Dispersion parameter D at frequency f, s/m^2.

    Uses the local GVD beta2 + 2 pi beta3 (f - f_taylor_center) of the
    span's Taylor expansion.
    """
    beta2_local = span.beta2 + 2.0 * np.pi * span.beta3 * (f - span.f_taylor_center)
    return -2.0 * np.pi * f * f / C_LIGHT * beta2_local


def span_loss_db(span: Span, channel_index: int) -> float:
    """Intrinsic end-to-end power loss of one channel over one span, dB."""
    return span.intrinsic_alpha[channel_index] * span.length * DB_PER_NEPER


def _validate_raman(profile: RamanGainProfile, where: str, out: list) -> None:
    if profile.kind == "triangular":
        if profile.c_r_max < 0.0:
            out.append(Diagnostic("error", "raman-negative-peak",
                                  f"triangular peak gain {profile.c_r_max} < 0", where))
        if profile.delta_f <= 0.0:
            out.append(Diagnostic("error", "raman-bad-width",
                                  f"triangular ramp width {profile.delta_f} <= 0", where))
    elif profile.kind == "tabulated":
        offs, vals = profile.offsets, profile.values
        if offs is None or vals is None or len(offs) != len(vals) or len(offs) < 2:
            out.append(Diagnostic("error", "raman-bad-table",
                                  "tabulated profile needs matching offset/value arrays", where))
            return
        if offs[0] < 0.0 or np.any(np.diff(offs) <= 0.0):
            out.append(Diagnostic("error", "raman-bad-table",
                                  "tabulated offsets must be >= 0 and strictly ascending", where))
        if not np.all(np.isfinite(vals)):
            out.append(Diagnostic("error", "raman-bad-table",
                                  "tabulated gain values must be finite", where))
    else:
        out.append(Diagnostic("error", "raman-unknown-kind",
                              f"unknown Raman profile kind {profile.kind!r}", where))


def validate(link: Link) -> list:
    """Check a link against the model's hard and soft constraints.

    Returns a list of Diagnostic.  ERROR entries make any computation on
    the link meaningless; WARNING entries flag regimes in which the
    closed form degrades (residual boundary NLI on low-loss spans,
    near-zero dispersion) but do not stop the pipeline.

    The function is pure: validating the same link twice returns the
    same diagnostics.
    """
    out: list = []

    if link.n_channels == 0:
        out.append(Diagnostic("error", "empty-comb", "link has no channels"))
        return out
    if link.n_spans == 0:
        out.append(Diagnostic("error", "no-spans", "link has no spans"))
        return out

    for pos, ch in enumerate(link.channels):
        where = f"channels[{pos}]"
        if ch.index != pos + 1:
            out.append(Diagnostic("error", "bad-index",
                                  f"channel index {ch.index}, expected {pos + 1} "
                                  "(1-based, frequency-sorted)", where))
        if ch.bandwidth <= 0.0:
            out.append(Diagnostic("error", "bad-bandwidth",
                                  f"bandwidth {ch.bandwidth} Hz <= 0", where))
        if ch.launch_psd <= 0.0:
            out.append(Diagnostic("error", "bad-psd",
                                  f"launch PSD {ch.launch_psd} W/Hz <= 0", where))
        if ch.f_center <= 0.0:
            out.append(Diagnostic("error", "bad-frequency",
                                  f"center frequency {ch.f_center} Hz <= 0", where))

    for pos in range(1, link.n_channels):
        lo, hi = link.channels[pos - 1], link.channels[pos]
        where = f"channels[{pos}]"
        if hi.f_center <= lo.f_center:
            out.append(Diagnostic("error", "not-sorted",
                                  "channels must be strictly ascending in f_center", where))
        elif hi.f_start < lo.f_end - 1e-6:  # touching bands are fine
            out.append(Diagnostic("error", "overlap",
                                  f"band of channel {hi.index} overlaps channel {lo.index}",
                                  where))

    if len(link.raman) != link.n_spans:
        out.append(Diagnostic("error", "raman-count",
                              f"{len(link.raman)} Raman profiles for {link.n_spans} spans"))
    else:
        for p, profile in enumerate(link.raman):
            _validate_raman(profile, f"raman[{p}]", out)

    indices = {ch.index for ch in link.channels}
    for p, span in enumerate(link.spans):
        where = f"spans[{p}]"
        if span.length <= 0.0:
            out.append(Diagnostic("error", "bad-length",
                                  f"span length {span.length} m <= 0", where))
        if span.gamma < 0.0:
            out.append(Diagnostic("error", "bad-gamma",
                                  f"gamma {span.gamma} 1/(W m) < 0", where))
        elif span.gamma == 0.0:
            out.append(Diagnostic("warning", "zero-gamma",
                                  "gamma is zero, NLI will vanish on this span", where))
        if span.f_taylor_center <= 0.0:
            out.append(Diagnostic("error", "bad-taylor-center",
                                  "dispersion expansion frequency must be positive", where))

        missing = sorted(indices - set(span.intrinsic_alpha))
        if missing:
            out.append(Diagnostic("error", "missing-alpha",
                                  f"span {p + 1} lacks attenuation for channels {missing}",
                                  where))
        else:
            for ch in link.channels:
                a = span.intrinsic_alpha[ch.index]
                if a <= 0.0:
                    out.append(Diagnostic("error", "bad-alpha",
                                          f"alpha {a} Np/m <= 0 for channel {ch.index}", where))
            loss_db = min(span.intrinsic_alpha[ch.index] for ch in link.channels) \
                * span.length * DB_PER_NEPER
            if loss_db < MIN_SPAN_LOSS_DB and not any(
                    d.code == "bad-alpha" and d.where == where for d in out):
                out.append(Diagnostic("warning", "low-span-loss",
                                      f"span loss {loss_db:.2f} dB < {MIN_SPAN_LOSS_DB} dB; "
                                      "the dropped boundary term of the closed form is "
                                      "no longer negligible", where))

        if not span.compensate_loss:
            missing_g = sorted(indices - set(span.amp_gain))
            if missing_g:
                out.append(Diagnostic("error", "missing-gain",
                                      f"span {p + 1} lacks amplifier gain for channels "
                                      f"{missing_g}", where))
            else:
                for ch in link.channels:
                    g = span.amp_gain[ch.index]
                    if g <= 0.0:
                        out.append(Diagnostic("error", "bad-gain",
                                              f"non-positive gain {g} for channel {ch.index}",
                                              where))

        low_d = [ch.index for ch in link.channels
                 if not ch.is_pump and abs(local_dispersion(span, ch.f_center)) < MIN_ABS_DISPERSION]
        if low_d:
            out.append(Diagnostic("warning", "low-dispersion",
                                  f"|D| < 2 ps/(nm km) at channels {low_d}; island freezing "
                                  "and the self-channel term lose accuracy", where))

    if link.cut_selection is not None:
        by_index = {ch.index: ch for ch in link.channels}
        for idx in link.cut_selection:
            if idx not in by_index:
                out.append(Diagnostic("error", "bad-cut",
                                      f"cut selection names unknown channel {idx}"))
            elif by_index[idx].is_pump:
                out.append(Diagnostic("error", "cut-is-pump",
                                      f"channel {idx} is a pump and cannot be a CUT"))

    return out
