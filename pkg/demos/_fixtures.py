"""Shared link builder for the demo scripts."""

import numpy as np

from nli_cfm import Channel, Link, RamanGainProfile, Span
from nli_cfm.link_model import DB_PER_NEPER


def comb(n_ch=5, n_spans=1, spacing=50e9, bw=40e9, f0=193.0e12, power_dbm=0.0,
         loss_db_km=0.2, length_km=80.0, gamma=1.2e-3, beta2=-21.7e-27,
         beta3=0.14e-39, c_r_max_per_w_km=0.4, cut=None) -> Link:
    """Uniform equally spaced comb on identical loss-compensated spans."""
    power = 1e-3 * 10.0 ** (power_dbm / 10.0)
    channels = tuple(
        Channel(index=i + 1, f_center=f0 + i * spacing, bandwidth=bw,
                launch_psd=power / bw)
        for i in range(n_ch))
    alpha = {i + 1: loss_db_km / (DB_PER_NEPER * 1000.0) for i in range(n_ch)}
    spans = tuple(
        Span(length=length_km * 1e3, gamma=gamma, beta2=beta2, beta3=beta3,
             f_taylor_center=f0 + spacing * (n_ch - 1) / 2.0,
             intrinsic_alpha=alpha, amp_gain={}, compensate_loss=True)
        for _ in range(n_spans))
    if c_r_max_per_w_km:
        raman = RamanGainProfile.triangular(c_r_max=c_r_max_per_w_km / 1000.0,
                                            delta_f=15e12)
    else:
        raman = RamanGainProfile.off()
    return Link(spans=spans, channels=channels, raman=(raman,) * n_spans,
                cut_selection=cut)
