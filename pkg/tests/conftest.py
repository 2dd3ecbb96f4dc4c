import numpy as np
import pytest

from nli_cfm import Channel, Link, RamanGainProfile, Span

DB_PER_NEPER = 8.685889638065037


def alpha_np_per_m(loss_db_per_km: float) -> float:
    return loss_db_per_km / DB_PER_NEPER / 1000.0


def build_link(n_ch=5, n_spans=1, spacing=50e9, bw=40e9, f0=193.0e12,
               powers_w=None, power_dbm=0.0, loss_db_km=0.2, length_km=80.0,
               gamma=1.2e-3, beta2=-21.7e-27, beta3=0.14e-39,
               c_r_max_per_w_km=0.4, delta_f=15e12, compensate=True,
               gains_db=None, pumps=(), cut=None, f_taylor=None):
    """Uniform comb on identical spans; the workhorse test fixture."""
    if powers_w is None:
        powers_w = np.full(n_ch, 1e-3 * 10 ** (power_dbm / 10.0))
    channels = tuple(
        Channel(index=i + 1, f_center=f0 + i * spacing, bandwidth=bw,
                launch_psd=powers_w[i] / bw, is_pump=(i + 1) in pumps)
        for i in range(n_ch))
    alpha = {i + 1: alpha_np_per_m(loss_db_km) for i in range(n_ch)}
    if compensate:
        gain = {}
    else:
        if gains_db is None:
            gains_db = loss_db_km * length_km
        gain = {i + 1: 10 ** (gains_db / 10.0) for i in range(n_ch)}
    if f_taylor is None:
        f_taylor = f0 + spacing * (n_ch - 1) / 2.0
    spans = tuple(
        Span(length=length_km * 1e3, gamma=gamma, beta2=beta2, beta3=beta3,
             f_taylor_center=f_taylor, intrinsic_alpha=alpha, amp_gain=gain,
             compensate_loss=compensate)
        for _ in range(n_spans))
    if c_r_max_per_w_km:
        prof = RamanGainProfile.triangular(c_r_max=c_r_max_per_w_km / 1000.0,
                                           delta_f=delta_f)
    else:
        prof = RamanGainProfile.off()
    return Link(spans=spans, channels=channels, raman=(prof,) * n_spans,
                cut_selection=cut)


def prepare(link, settings=None, grid=None):
    """Solve and fit a link; returns (fits, loss) ready for the closed form."""
    from nli_cfm import FitSettings, GridSpec
    from nli_cfm.pipeline import fit_all_profiles, solve_link_evolutions

    evolutions, loss, _ = solve_link_evolutions(link, grid or GridSpec())
    fits = fit_all_profiles(link, evolutions, settings or FitSettings())
    return fits, loss


@pytest.fixture
def comb_link():
    return build_link


@pytest.fixture
def rng():
    return np.random.default_rng(20260817)
