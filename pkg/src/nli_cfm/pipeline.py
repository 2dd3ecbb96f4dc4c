"""End-to-end run orchestration: solve, fit, closed form, oracle.

Spans are solved in launch order, each span seeded with the previous
span's output powers times its amplifier gains (loss-compensating
amplifiers resolve to the just-computed span loss).  Fitting and the
per-CUT closed form are embarrassingly parallel and honor a thread
count; results are keyed, so the output is identical for any thread
count.

The fitted profiles and span losses can be cached to an .npz file.  A
normal run reuses the cache only when the link fingerprint matches;
freeze_profiles reuses it unconditionally, which pins the power
evolution while launch PSDs are rescaled (the cubic-scaling probe).
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .cfm_engine import CfmTables, CorrectionFactors, nli_cfm5
from .errors import ConfigError, LinkValidationError
from .gn_oracle import QuadSpec, nli_reference
from .link_model import Link, validate
from .profile_fitter import FitSettings, FittedProfile, fit_profile
from .srs_solver import GridSpec, solve_power_evolution

logger = logging.getLogger(__name__)

try:
    from importlib.metadata import version as _pkg_version
    VERSION = _pkg_version("nli-cfm")
except Exception:  # pragma: no cover - metadata missing in odd installs
    VERSION = "0.1.0"

__all__ = [
    "RunConfig",
    "StageTimings",
    "NliReport",
    "solve_link_evolutions",
    "fit_all_profiles",
    "link_fingerprint",
    "run_pipeline",
    "benchmark",
]


@dataclass
class StageTimings:
    srs: float = 0.0
    fit: float = 0.0
    cfm: float = 0.0
    oracle: float = 0.0


@dataclass
class RunConfig:
    """Everything a run needs besides the link itself."""

    fit: FitSettings = field(default_factory=FitSettings)
    grid: GridSpec = field(default_factory=GridSpec)
    quad: QuadSpec = field(default_factory=QuadSpec)
    rho: CorrectionFactors = field(default_factory=CorrectionFactors.identity)
    oracle: bool = False
    deep_oracle: bool = False
    threads: int = 1
    strict: bool = False
    freeze_profiles: bool = False
    cache_path: str | None = None


@dataclass
class NliReport:
    entries: list
    timings: StageTimings
    metadata: dict


def solve_link_evolutions(link: Link, grid: GridSpec = GridSpec()):
    """Solve every span in order, chaining launch powers through the
    amplifiers.  Returns (evolutions, loss, gains) with (Ns, Nc) tables."""
    launch = link.launch_powers.copy()
    evolutions = []
    loss_rows, gain_rows = [], []
    for p, span in enumerate(link.spans):
        ev = solve_power_evolution(link, p + 1, launch, grid=grid)
        evolutions.append(ev)
        s = ev.launch / ev.end_powers
        g = s.copy() if span.compensate_loss else link.gain_array(p + 1)
        loss_rows.append(s)
        gain_rows.append(g)
        launch = ev.end_powers * g
    return evolutions, np.vstack(loss_rows), np.vstack(gain_rows)


def fit_all_profiles(link: Link, evolutions, settings: FitSettings = FitSettings(),
                     threads: int = 1) -> dict:
    """Fit every (span, non-pump channel) profile; keyed results make the
    outcome independent of the thread count."""
    alpha_rows = {ev.span_index: link.alpha_array(ev.span_index) for ev in evolutions}
    tasks = []
    for ev in evolutions:
        for pos, ch in enumerate(link.channels):
            if ch.is_pump:
                continue
            tasks.append((ev.span_index, ch.index, ev.z, ev.powers[pos],
                          alpha_rows[ev.span_index][pos]))

    def one(task):
        sp, ci, z, p, a = task
        return fit_profile(z, p, a, settings, span_index=sp, channel_index=ci)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(one, tasks))
    else:
        results = [one(t) for t in tasks]
    return {(fp.span_index, fp.channel_index): fp for fp in results}


def link_fingerprint(link: Link, fit: FitSettings, grid: GridSpec) -> str:
    """Stable digest of everything the solver and fitter consume."""
    h = hashlib.sha256()
    for arr in (link.f_centers, link.bandwidths, link.launch_psd,
                link.pump_mask.astype(np.uint8)):
        h.update(np.ascontiguousarray(arr).tobytes())
    for p, span in enumerate(link.spans):
        h.update(np.array([span.length, span.gamma, span.beta2, span.beta3,
                           span.f_taylor_center]).tobytes())
        h.update(np.ascontiguousarray(link.alpha_array(p + 1)).tobytes())
        if span.compensate_loss:
            h.update(b"comp")
        else:
            h.update(np.ascontiguousarray(link.gain_array(p + 1)).tobytes())
    for prof in link.raman:
        h.update(prof.kind.encode())
        h.update(np.array([prof.c_r_max, prof.delta_f]).tobytes())
        if prof.offsets is not None:
            h.update(np.asarray(prof.offsets).tobytes())
            h.update(np.asarray(prof.values).tobytes())
    h.update(np.array([fit.m_c, fit.sigma_lo, fit.sigma_hi, fit.widen_lo,
                       fit.widen_hi, fit.gs_tol]).tobytes())
    h.update(np.array([grid.rtol, grid.atol, float(grid.min_points),
                       grid.segment, grid.max_step or -1.0]).tobytes())
    return h.hexdigest()


def _save_cache(path: str, fingerprint: str, link: Link, loss, gains, fits,
                evolutions, m_c: float) -> None:
    ns, nc = loss.shape
    a0 = np.zeros((ns, nc))
    a1 = np.zeros((ns, nc))
    sig = np.ones((ns, nc))
    cost = np.zeros((ns, nc))
    bnd = np.zeros((ns, nc), dtype=bool)
    pos = {ch.index: i for i, ch in enumerate(link.channels)}
    for (sp, ci), fp in fits.items():
        j = pos[ci]
        a0[sp - 1, j] = fp.alpha0
        a1[sp - 1, j] = fp.alpha1
        sig[sp - 1, j] = fp.sigma
        cost[sp - 1, j] = fp.cost
        bnd[sp - 1, j] = fp.hit_boundary
    payload = dict(meta=json.dumps({"fingerprint": fingerprint, "m_c": m_c}),
                   loss=loss, gains=gains, a0=a0, a1=a1, sigma=sig,
                   cost=cost, boundary=bnd)
    for ev in evolutions:
        payload[f"z_{ev.span_index}"] = ev.z
        payload[f"p_{ev.span_index}"] = ev.powers
    np.savez_compressed(path, **payload)


def _load_cache(path: str, link: Link):
    try:
        data = np.load(path, allow_pickle=False)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read profile cache: {exc}") from exc
    meta = json.loads(str(data["meta"]))
    loss = data["loss"]
    if loss.shape != (link.n_spans, link.n_channels):
        raise ConfigError("profile cache does not match the link geometry")
    fits = {}
    for p in range(link.n_spans):
        for j, ch in enumerate(link.channels):
            if ch.is_pump:
                continue
            fits[(p + 1, ch.index)] = FittedProfile(
                span_index=p + 1, channel_index=ch.index,
                alpha0=float(data["a0"][p, j]), alpha1=float(data["a1"][p, j]),
                sigma=float(data["sigma"][p, j]), cost=float(data["cost"][p, j]),
                m_c=float(meta["m_c"]), hit_boundary=bool(data["boundary"][p, j]))
    return {"fingerprint": meta["fingerprint"], "loss": loss,
            "gains": data["gains"], "fits": fits}


def run_pipeline(link: Link, config: RunConfig = RunConfig()) -> NliReport:
    """Validate, solve, fit, and evaluate the closed form for every CUT.

    Raises LinkValidationError on validation errors (warnings too when
    strict), and attaches oracle PSDs when config.oracle is set.
    """
    diags = validate(link)
    errors = [d for d in diags if d.severity == "error"]
    warns = [d for d in diags if d.severity == "warning"]
    if errors or (config.strict and warns):
        raise LinkValidationError(diags)
    for w in warns:
        logger.warning("%s", w)

    if config.freeze_profiles and not config.cache_path:
        raise ConfigError("freeze_profiles needs a cache path to freeze from")

    timings = StageTimings()
    fingerprint = link_fingerprint(link, config.fit, config.grid)
    cached = None
    if config.cache_path and os.path.exists(config.cache_path):
        cached = _load_cache(config.cache_path, link)
        if not config.freeze_profiles and cached["fingerprint"] != fingerprint:
            cached = None

    if cached is not None:
        loss, gains, fits = cached["loss"], cached["gains"], cached["fits"]
    else:
        t0 = time.perf_counter()
        evolutions, loss, gains = solve_link_evolutions(link, config.grid)
        timings.srs = time.perf_counter() - t0
        t0 = time.perf_counter()
        fits = fit_all_profiles(link, evolutions, config.fit, config.threads)
        timings.fit = time.perf_counter() - t0
        if config.cache_path:
            _save_cache(config.cache_path, fingerprint, link, loss, gains,
                        fits, evolutions, config.fit.m_c)

    t0 = time.perf_counter()
    tables = CfmTables(link, fits, loss, amp_gains=gains)
    cuts = link.cut_indices()

    def one_cut(ci):
        return nli_cfm5(link, fits, loss, ci, rho=config.rho, tables=tables)

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as ex:
            entries = list(ex.map(one_cut, cuts))
    else:
        entries = [one_cut(ci) for ci in cuts]
    timings.cfm = time.perf_counter() - t0

    if config.oracle:
        quad = replace(config.quad, deep=config.quad.deep or config.deep_oracle)
        t0 = time.perf_counter()
        for e in entries:
            e.g_nli_oracle = nli_reference(link, fits, loss, e.cut_index,
                                           quad=quad, amp_gains=gains)
        timings.oracle = time.perf_counter() - t0

    # thread count deliberately left out: reports must be byte-identical
    # for any parallelism level
    metadata = {
        "version": VERSION,
        "n_spans": link.n_spans,
        "n_channels": link.n_channels,
        "n_cuts": len(cuts),
        "oracle": bool(config.oracle),
        "deep_oracle": bool(config.deep_oracle),
        "cache_used": cached is not None,
    }
    return NliReport(entries=entries, timings=timings, metadata=metadata)


def benchmark(link: Link, config: RunConfig = RunConfig(), repetitions: int = 5,
              stage: str = "all") -> dict:
    """Median/min wall times over several repetitions, machine readable.

    stage "all" times full pipeline runs (cache disabled); "cfm-only"
    prepares profiles once and times only the closed-form evaluation
    over all CUTs, table construction included.
    """
    if repetitions < 3:
        raise ValueError("benchmark needs at least 3 repetitions")
    if stage not in ("all", "cfm-only"):
        raise ValueError("stage must be 'all' or 'cfm-only'")

    out = {"stage": stage, "repetitions": repetitions,
           "n_channels": link.n_channels, "n_spans": link.n_spans}
    if stage == "cfm-only":
        evolutions, loss, gains = solve_link_evolutions(link, config.grid)
        fits = fit_all_profiles(link, evolutions, config.fit, config.threads)
        cuts = link.cut_indices()
        times = []
        for _ in range(repetitions):
            t0 = time.perf_counter()
            tables = CfmTables(link, fits, loss, amp_gains=gains)
            for ci in cuts:
                nli_cfm5(link, fits, loss, ci, rho=config.rho, tables=tables)
            times.append(time.perf_counter() - t0)
        out["n_cuts"] = len(cuts)
        out["seconds_median"] = float(np.median(times))
        out["seconds_min"] = float(np.min(times))
        out["per_cut_seconds_median"] = out["seconds_median"] / max(1, len(cuts))
        return out

    cfg = replace(config, cache_path=None, freeze_profiles=False)
    times = []
    stage_rows = {"srs": [], "fit": [], "cfm": [], "oracle": []}
    for _ in range(repetitions):
        t0 = time.perf_counter()
        rep = run_pipeline(link, cfg)
        times.append(time.perf_counter() - t0)
        stage_rows["srs"].append(rep.timings.srs)
        stage_rows["fit"].append(rep.timings.fit)
        stage_rows["cfm"].append(rep.timings.cfm)
        stage_rows["oracle"].append(rep.timings.oracle)
    out["n_cuts"] = rep.metadata["n_cuts"]
    out["seconds_median"] = float(np.median(times))
    out["seconds_min"] = float(np.min(times))
    out["stage_seconds_median"] = {k: float(np.median(v)) for k, v in stage_rows.items()}
    return out
