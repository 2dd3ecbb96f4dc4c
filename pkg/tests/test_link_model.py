import dataclasses

import numpy as np
import pytest

from nli_cfm import Channel, Link, RamanGainProfile, Span, local_dispersion, span_loss_db, validate
from nli_cfm.link_model import DB_PER_NEPER

from conftest import alpha_np_per_m, build_link


def codes(diags, severity=None):
    return [d.code for d in diags if severity is None or d.severity == severity]


def test_channel_derived_bounds_exact():
    ch = Channel(index=1, f_center=193.0e12, bandwidth=40e9, launch_psd=2.5e-14)
    assert ch.f_end - ch.f_start == ch.bandwidth
    assert ch.launch_power == 2.5e-14 * 40e9


def test_span_loss_db_long_span():
    # 2 alpha = 4.6e-5 Np/m over 100 km is about 20 dB
    link = build_link(loss_db_km=0.2, length_km=100.0)
    loss = span_loss_db(link.spans[0], 1)
    assert loss == pytest.approx(alpha_np_per_m(0.2) * 1e5 * DB_PER_NEPER)
    assert loss == pytest.approx(20.0, rel=1e-12)


def test_validate_clean_link():
    link = build_link(length_km=100.0)
    assert validate(link) == []


def test_validate_short_span_warns():
    link = build_link(length_km=10.0)  # 2 dB, under the 8 dB floor
    diags = validate(link)
    assert codes(diags, "warning") == ["low-span-loss"]
    assert codes(diags, "error") == []


def test_validate_overlapping_channels_error():
    a = Channel(index=1, f_center=193.0e12, bandwidth=40e9, launch_psd=1e-14)
    b = Channel(index=2, f_center=193.0e12, bandwidth=40e9, launch_psd=1e-14)
    base = build_link(n_ch=2)
    link = Link(spans=base.spans, channels=(a, b), raman=base.raman)
    assert "overlap" in codes(validate(link), "error") or \
           "not-sorted" in codes(validate(link), "error")


def test_validate_touching_bands_fine():
    link = build_link(n_ch=3, spacing=40e9, bw=40e9)  # null-to-null adjacent
    assert codes(validate(link), "error") == []


def test_validate_low_dispersion_warns():
    link = build_link(beta2=-1e-28, beta3=0.0)  # |D| well under 2 ps/(nm km)
    assert "low-dispersion" in codes(validate(link), "warning")


def test_validate_missing_alpha_error():
    base = build_link(n_ch=3)
    sp = dataclasses.replace(base.spans[0],
                             intrinsic_alpha={1: alpha_np_per_m(0.2), 2: alpha_np_per_m(0.2)})
    link = Link(spans=(sp,), channels=base.channels, raman=base.raman)
    assert "missing-alpha" in codes(validate(link), "error")


def test_validate_missing_gain_unless_compensating():
    base = build_link(n_ch=2, compensate=False)
    sp = dataclasses.replace(base.spans[0], amp_gain={1: 100.0})
    link = Link(spans=(sp,), channels=base.channels, raman=base.raman)
    assert "missing-gain" in codes(validate(link), "error")
    comp = dataclasses.replace(sp, amp_gain={}, compensate_loss=True)
    link2 = Link(spans=(comp,), channels=base.channels, raman=base.raman)
    assert "missing-gain" not in codes(validate(link2), "error")


def test_validate_raman_count_mismatch():
    base = build_link(n_spans=2)
    link = Link(spans=base.spans, channels=base.channels, raman=base.raman[:1])
    assert "raman-count" in codes(validate(link), "error")


def test_validate_bad_cut_and_pump_cut():
    link = build_link(n_ch=3, cut=(7,))
    assert "bad-cut" in codes(validate(link), "error")
    link2 = build_link(n_ch=3, pumps=(2,), cut=(2,))
    assert "cut-is-pump" in codes(validate(link2), "error")


def test_validate_is_idempotent():
    link = build_link(length_km=10.0, beta2=-1e-28)
    first = [str(d) for d in validate(link)]
    second = [str(d) for d in validate(link)]
    assert first == second and first


def test_cut_indices_skip_pumps():
    link = build_link(n_ch=4, pumps=(4,))
    assert link.cut_indices() == (1, 2, 3)
    assert link.pump_mask.tolist() == [False, False, False, True]


def test_local_dispersion_sign_and_scale():
    # D = -2 pi f^2 / c * (beta2 + 2 pi beta3 (f - f_c)): positive for
    # anomalous beta2 < 0, about 17 ps/(nm km) for standard fiber numbers
    link = build_link(beta2=-21.27e-27, beta3=0.0)
    f = link.spans[0].f_taylor_center
    d = local_dispersion(link.spans[0], f)
    assert d == pytest.approx(16.7e-6, rel=0.05)  # s/m^2; 16.7 ps/(nm km)


def test_raman_table_must_be_sorted_nonnegative():
    base = build_link(n_ch=2)
    bad = RamanGainProfile.tabulated(offsets=[5e12, 1e12], values=[1e-4, 2e-4])
    link = Link(spans=base.spans, channels=base.channels, raman=(bad,))
    assert "raman-bad-table" in codes(validate(link), "error")
    good = RamanGainProfile.tabulated(offsets=[1e12, 5e12], values=[1e-4, 2e-4])
    link2 = Link(spans=base.spans, channels=base.channels, raman=(good,))
    assert codes(validate(link2), "error") == []
