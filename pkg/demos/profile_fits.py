"""How well three numbers describe a Raman-distorted power profile.

The closed-form NLI model never sees the solved power evolution
directly; each (span, channel) profile is condensed into a triple
(alpha0, alpha1, sigma) of the model

    P(z) = P0 exp(-2 alpha0 z + (2 alpha1 / sigma) (e^{-sigma z} - 1)).

alpha0 is the residual flat loss, alpha1 the SRS tilt and sigma the
rate at which that tilt saturates.  This script fits the triples for a
strongly tilted comb and reports how far the model strays from the
solved profile anywhere along the span.
"""

import numpy as np

from nli_cfm import fit_span_profiles, model_profile, solve_power_evolution

import _fixtures


def main():
    link = _fixtures.comb(n_ch=9, power_dbm=10.0, spacing=200e9,
                          c_r_max_per_w_km=0.7)
    ev = solve_power_evolution(link, 1, link.launch_powers)
    fits = fit_span_profiles(ev, link)
    intrinsic = link.alpha_array(1)

    print("ch   alpha0/alpha   2a1/sigma   sigma/2alpha   worst model err")
    for i, ch in enumerate(link.channels):
        f = fits[(1, ch.index)]
        z, p = ev.channel(i)
        model = model_profile(p[0], f.alpha0, f.alpha1, f.sigma, z)
        err = float(np.max(np.abs(model / p - 1.0)))
        print(f"{ch.index:2d}   {f.alpha0 / intrinsic[i]:12.4f}   "
              f"{2.0 * f.alpha1 / f.sigma:+9.4f}   "
              f"{f.sigma / (2.0 * f.alpha0):12.3f}   {100.0 * err:13.3f} %")

    print("\nalpha0 stays within a fraction of the intrinsic loss, the tilt")
    print("2 alpha1/sigma changes sign across the comb, and the model tracks")
    print("the solved profiles to well under a percent end to end.")


if __name__ == "__main__":
    main()
