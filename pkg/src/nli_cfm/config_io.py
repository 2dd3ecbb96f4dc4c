"""Link configs in YAML and result writers (JSON, CSV).

A config names the comb once and the spans in order.  Channel entries
are either groups or single carriers; frequencies in Hz, powers in
dBm, span lengths in km, loss in dB/km, gamma in 1/(W km), dispersion
in ps/(nm km) and its slope in ps/(nm^2 km).  Indices are assigned
after sorting the expanded comb by center frequency, 1-based.

    channels:
      - count: 5
        start_hz: 193.1e12
        spacing_hz: 50.0e9
        bandwidth_hz: 40.0e9
        power_dbm: 0.0
      - center_hz: 193.45e12     # single carrier
        bandwidth_hz: 40.0e9
        power_dbm: 0.0
        pump: true               # excluded from NLI bookkeeping
    spans:
      - length_km: 80.0
        loss_db_per_km: 0.2      # scalar, per-index map, or list
        gamma_per_w_km: 1.2
        dispersion_ps_nm_km: 17.0
        dispersion_slope_ps_nm2_km: 0.067
        raman:
          shape: triangular
          peak_per_w_km: 0.4
          bandwidth_hz: 15.0e12
        amplifier:
          mode: compensate_loss  # or gain_db: 16.0
    cut: all                     # or a list of channel indices

Unknown keys anywhere raise ConfigError naming the offending path, so
typos fail loudly instead of silently falling back to defaults.
"""

from __future__ import annotations

import csv
import json
import math
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError
from .link_model import DB_PER_NEPER, Channel, Link, RamanGainProfile, Span

C_LIGHT = 299792458.0  # m/s

__all__ = [
    "dbm_to_watts",
    "watts_to_dbm",
    "db_to_linear",
    "load_link",
    "load_rho_factors",
    "report_to_dict",
    "write_json",
    "write_csv",
]


def dbm_to_watts(p_dbm: float) -> float:
    return 1e-3 * 10.0 ** (p_dbm / 10.0)


def watts_to_dbm(p_watts: float) -> float:
    if p_watts <= 0.0:
        return -math.inf
    return 10.0 * math.log10(p_watts / 1e-3)


def db_to_linear(g_db: float) -> float:
    return 10.0 ** (g_db / 10.0)


# ----------------------------------------------------------------------
# parsing helpers
# ----------------------------------------------------------------------

def _check_keys(mapping: dict, allowed: set, path: str) -> None:
    if not isinstance(mapping, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(mapping).__name__}")
    for key in mapping:
        if key not in allowed:
            raise ConfigError(f"{path}: unknown key '{key}'")


def _get(mapping: dict, key: str, path: str):
    if key not in mapping or mapping[key] is None:
        raise ConfigError(f"{path}: missing required key '{key}'")
    return mapping[key]


def _as_float(value, path: str) -> float:
    # YAML 1.1 reads "50.0e9" (no exponent sign) as a string; accept it
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            raise ConfigError(f"{path}: expected a number, got {value!r}") from None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    return float(value)


def _as_int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    return value


def _per_channel(value, n_channels: int, path: str) -> np.ndarray:
    """Resolve a scalar, list, or {index: value} map to a per-channel array."""
    if isinstance(value, (int, float, str)) and not isinstance(value, bool):
        return np.full(n_channels, _as_float(value, path))
    if isinstance(value, list):
        if len(value) != n_channels:
            raise ConfigError(f"{path}: list has {len(value)} entries for "
                              f"{n_channels} channels")
        return np.array([_as_float(v, f"{path}[{i}]") for i, v in enumerate(value)])
    if isinstance(value, dict):
        out = np.empty(n_channels)
        seen = set()
        for k, v in value.items():
            idx = _as_int(k, f"{path} key {k!r}")
            if not 1 <= idx <= n_channels:
                raise ConfigError(f"{path}: channel index {idx} out of range 1..{n_channels}")
            out[idx - 1] = _as_float(v, f"{path}[{idx}]")
            seen.add(idx)
        missing = set(range(1, n_channels + 1)) - seen
        if missing:
            raise ConfigError(f"{path}: no value for channel index {min(missing)}")
        return out
    raise ConfigError(f"{path}: expected a number, list, or index map")


_GROUP_KEYS = {"count", "start_hz", "spacing_hz", "bandwidth_hz", "power_dbm", "phi", "pump"}
_SINGLE_KEYS = {"center_hz", "bandwidth_hz", "power_dbm", "phi", "pump"}


def _expand_channels(raw, path: str = "channels") -> list[dict]:
    if not isinstance(raw, list) or not raw:
        raise ConfigError(f"{path}: expected a non-empty list")
    expanded = []
    for i, entry in enumerate(raw):
        where = f"{path}[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(f"{where}: expected a mapping")
        bw = _as_float(_get(entry, "bandwidth_hz", where), f"{where}.bandwidth_hz")
        p_dbm = _as_float(_get(entry, "power_dbm", where), f"{where}.power_dbm")
        phi = _as_float(entry.get("phi", 0.0), f"{where}.phi")
        pump = entry.get("pump", False)
        if not isinstance(pump, bool):
            raise ConfigError(f"{where}.pump: expected true/false")
        if "count" in entry:
            _check_keys(entry, _GROUP_KEYS, where)
            count = _as_int(_get(entry, "count", where), f"{where}.count")
            if count < 1:
                raise ConfigError(f"{where}.count: must be at least 1")
            start = _as_float(_get(entry, "start_hz", where), f"{where}.start_hz")
            spacing = _as_float(_get(entry, "spacing_hz", where), f"{where}.spacing_hz")
            for k in range(count):
                expanded.append(dict(f_center=start + k * spacing, bandwidth=bw,
                                     power=dbm_to_watts(p_dbm), phi=phi, pump=pump))
        else:
            _check_keys(entry, _SINGLE_KEYS, where)
            center = _as_float(_get(entry, "center_hz", where), f"{where}.center_hz")
            expanded.append(dict(f_center=center, bandwidth=bw,
                                 power=dbm_to_watts(p_dbm), phi=phi, pump=pump))
    expanded.sort(key=lambda c: c["f_center"])
    return expanded


_SPAN_KEYS = {"length_km", "loss_db_per_km", "gamma_per_w_km", "dispersion_ps_nm_km",
              "dispersion_slope_ps_nm2_km", "ref_frequency_hz", "raman", "amplifier"}
_RAMAN_KEYS = {"shape", "peak_per_w_km", "bandwidth_hz", "offsets_hz", "gain_per_w_km"}
_AMP_KEYS = {"gain_db", "mode"}


def _parse_raman(raw, path: str) -> RamanGainProfile:
    if raw is None:
        return RamanGainProfile.off()
    _check_keys(raw, _RAMAN_KEYS, path)
    shape = _get(raw, "shape", path)
    if shape == "triangular":
        peak = _as_float(_get(raw, "peak_per_w_km", path), f"{path}.peak_per_w_km")
        width = _as_float(_get(raw, "bandwidth_hz", path), f"{path}.bandwidth_hz")
        return RamanGainProfile.triangular(c_r_max=peak / 1000.0, delta_f=width)
    if shape == "tabulated":
        offsets = _get(raw, "offsets_hz", path)
        values = _get(raw, "gain_per_w_km", path)
        if not isinstance(offsets, list) or not isinstance(values, list):
            raise ConfigError(f"{path}: offsets_hz and gain_per_w_km must be lists")
        off = [_as_float(v, f"{path}.offsets_hz[{i}]") for i, v in enumerate(offsets)]
        val = [_as_float(v, f"{path}.gain_per_w_km[{i}]") / 1000.0
               for i, v in enumerate(values)]
        return RamanGainProfile.tabulated(offsets=off, values=val)
    raise ConfigError(f"{path}.shape: expected 'triangular' or 'tabulated', got {shape!r}")


def _parse_span(entry, comb: list[dict], f_ref_default: float, path: str):
    _check_keys(entry, _SPAN_KEYS, path)
    n = len(comb)
    length = 1000.0 * _as_float(_get(entry, "length_km", path), f"{path}.length_km")
    gamma = _as_float(_get(entry, "gamma_per_w_km", path), f"{path}.gamma_per_w_km") / 1000.0
    disp = _as_float(_get(entry, "dispersion_ps_nm_km", path),
                     f"{path}.dispersion_ps_nm_km") * 1e-6  # s/m^2
    slope = _as_float(entry.get("dispersion_slope_ps_nm2_km", 0.0),
                      f"{path}.dispersion_slope_ps_nm2_km") * 1e3  # s/m^3
    f_ref = entry.get("ref_frequency_hz")
    f_ref = f_ref_default if f_ref is None else _as_float(f_ref, f"{path}.ref_frequency_hz")
    if f_ref <= 0.0:
        raise ConfigError(f"{path}.ref_frequency_hz: must be positive")
    lam = C_LIGHT / f_ref
    beta2 = -disp * lam ** 2 / (2.0 * math.pi * C_LIGHT)
    beta3 = (lam ** 2 / (2.0 * math.pi * C_LIGHT)) ** 2 * (slope + 2.0 * disp / lam)

    loss = _per_channel(_get(entry, "loss_db_per_km", path), n, f"{path}.loss_db_per_km")
    alpha = {i + 1: loss[i] / (DB_PER_NEPER * 1000.0) for i in range(n)}

    amp = _get(entry, "amplifier", path)
    _check_keys(amp, _AMP_KEYS, f"{path}.amplifier")
    compensate = False
    gain: dict[int, float] = {}
    if amp.get("mode") == "compensate_loss":
        if "gain_db" in amp:
            raise ConfigError(f"{path}.amplifier: gain_db and mode are mutually exclusive")
        compensate = True
    elif "gain_db" in amp:
        g = _per_channel(amp["gain_db"], n, f"{path}.amplifier.gain_db")
        gain = {i + 1: db_to_linear(g[i]) for i in range(n)}
    else:
        raise ConfigError(f"{path}.amplifier: needs gain_db or mode: compensate_loss")

    span = Span(length=length, gamma=gamma, beta2=beta2, beta3=beta3,
                f_taylor_center=f_ref, intrinsic_alpha=alpha, amp_gain=gain,
                compensate_loss=compensate)
    return span, _parse_raman(entry.get("raman"), f"{path}.raman")


_TOP_KEYS = {"channels", "spans", "cut"}


def load_link(source) -> Link:
    """Build a Link from a YAML config (path, string of YAML, or stream)."""
    if isinstance(source, (str, Path)) and "\n" not in str(source):
        try:
            with open(source, "r", encoding="utf-8") as fh:
                raw = yaml.safe_load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse config: {exc}") from exc
    else:
        try:
            raw = yaml.safe_load(source)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse config: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    _check_keys(raw, _TOP_KEYS, "config")

    comb = _expand_channels(_get(raw, "channels", "config"))
    channels = tuple(Channel(index=i + 1, f_center=c["f_center"], bandwidth=c["bandwidth"],
                             launch_psd=c["power"] / c["bandwidth"], mod_format_phi=c["phi"],
                             is_pump=c["pump"]) for i, c in enumerate(comb))
    f_ref_default = float(np.mean([c["f_center"] for c in comb]))

    raw_spans = _get(raw, "spans", "config")
    if not isinstance(raw_spans, list) or not raw_spans:
        raise ConfigError("spans: expected a non-empty list")
    spans, ramans = [], []
    for i, entry in enumerate(raw_spans):
        span, raman = _parse_span(entry, comb, f_ref_default, f"spans[{i}]")
        spans.append(span)
        ramans.append(raman)

    cut_raw = raw.get("cut", "all")
    if cut_raw == "all" or cut_raw is None:
        cut_selection = None
    elif isinstance(cut_raw, list):
        cut_selection = tuple(_as_int(v, f"cut[{i}]") for i, v in enumerate(cut_raw))
    else:
        raise ConfigError("cut: expected 'all' or a list of channel indices")

    return Link(spans=tuple(spans), channels=channels, raman=tuple(ramans),
                cut_selection=cut_selection)


_RHO_KEYS = {"rho_cut", "rho_mch", "rho_coh"}


def load_rho_factors(path):
    """Constant correction factors from a small YAML/JSON mapping."""
    from .cfm_engine import CorrectionFactors

    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read rho file: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse rho file: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("rho file root must be a mapping")
    _check_keys(raw, _RHO_KEYS, "rho")
    return CorrectionFactors(
        rho_cut=_as_float(raw.get("rho_cut", 1.0), "rho.rho_cut"),
        rho_mch=_as_float(raw.get("rho_mch", 1.0), "rho.rho_mch"),
        rho_coh=_as_float(raw.get("rho_coh", 1.0), "rho.rho_coh"))


# ----------------------------------------------------------------------
# result writers
# ----------------------------------------------------------------------

def report_to_dict(report) -> dict:
    """Serializable view of an NliReport, insertion-ordered."""
    channels = []
    for e in report.entries:
        row = {
            "index": e.cut_index,
            "f_cut_hz": e.f_cut,
            "bandwidth_hz": e.bandwidth,
            "g_nli_w_per_hz": e.g_nli,
            "incoherent_w_per_hz": e.incoherent,
            "coherence_w_per_hz": e.coherence,
            "nli_power_w": e.nli_power,
            "nli_power_dbm": watts_to_dbm(e.nli_power),
        }
        if e.g_nli_oracle is not None:
            row["g_nli_oracle_w_per_hz"] = e.g_nli_oracle
            row["oracle_gap_db"] = 10.0 * math.log10(e.g_nli / e.g_nli_oracle)
        channels.append(row)
    return {
        "channels": channels,
        "timings_s": {"srs": report.timings.srs, "fit": report.timings.fit,
                      "cfm": report.timings.cfm, "oracle": report.timings.oracle},
        "metadata": dict(report.metadata),
    }


@contextmanager
def _open_out(target):
    if hasattr(target, "write"):
        yield target
    else:
        with open(target, "w", encoding="utf-8", newline="") as fh:
            yield fh


def write_json(report, target) -> None:
    """Full-precision JSON; key order follows insertion order."""
    with _open_out(target) as fh:
        json.dump(report_to_dict(report), fh, indent=2)
        fh.write("\n")


_DB_COLUMNS = {"nli_power_dbm", "oracle_gap_db"}


def _csv_cell(key: str, value):
    if key in _DB_COLUMNS:
        return round(value, 4)
    if isinstance(value, float):
        return repr(value)
    return value


def write_csv(report, target) -> None:
    """One row per CUT; dB columns rounded to 4 decimals, the rest full."""
    rows = report_to_dict(report)["channels"]
    if not rows:
        raise ValueError("nothing to write: report has no channel entries")
    header = list(rows[0].keys())
    with _open_out(target) as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_csv_cell(k, row[k]) for k in header])
