import dataclasses
import io
import json
import math

import numpy as np
import pytest

from nli_cfm import (
    ConfigError,
    LinkValidationError,
    RunConfig,
    benchmark,
    db_to_linear,
    dbm_to_watts,
    load_link,
    load_rho_factors,
    nli_m1_legacy,
    report_to_dict,
    run_pipeline,
    watts_to_dbm,
    write_csv,
    write_json,
)
from nli_cfm import cli
from nli_cfm.config_io import C_LIGHT

from conftest import alpha_np_per_m, build_link, prepare

BASE_YAML = """\
channels:
  - count: 3
    start_hz: 193.0e12
    spacing_hz: 50.0e9
    bandwidth_hz: 40.0e9
    power_dbm: 0.0
spans:
  - length_km: 80.0
    loss_db_per_km: 0.2
    gamma_per_w_km: 1.2
    dispersion_ps_nm_km: 17.0
    dispersion_slope_ps_nm2_km: 0.067
    raman:
      shape: triangular
      peak_per_w_km: 0.4
      bandwidth_hz: 15.0e12
    amplifier:
      mode: compensate_loss
cut: all
"""


def write_config(tmp_path, text=BASE_YAML, name="link.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


# ----------------------------------------------------------------------
# config loading
# ----------------------------------------------------------------------

def test_unit_conversions():
    assert dbm_to_watts(0.0) == pytest.approx(1e-3, rel=1e-15)
    assert dbm_to_watts(30.0) == pytest.approx(1.0, rel=1e-15)
    assert watts_to_dbm(1e-3) == pytest.approx(0.0, abs=1e-12)
    assert watts_to_dbm(0.0) == float("-inf")
    assert db_to_linear(20.0) == pytest.approx(100.0, rel=1e-15)


def test_load_link_group_expansion_and_units():
    link = load_link(BASE_YAML)
    assert link.n_channels == 3 and link.n_spans == 1
    np.testing.assert_allclose(link.f_centers, [193.0e12, 193.05e12, 193.1e12])
    assert [ch.index for ch in link.channels] == [1, 2, 3]
    np.testing.assert_allclose(link.launch_psd, 1e-3 / 40e9, rtol=1e-15)

    span = link.spans[0]
    assert span.length == 80e3
    assert span.gamma == pytest.approx(1.2e-3, rel=1e-15)
    assert span.intrinsic_alpha[2] == pytest.approx(alpha_np_per_m(0.2), rel=1e-12)
    assert span.compensate_loss

    # dispersion converted against the reference wavelength
    lam = C_LIGHT / span.f_taylor_center
    d_si = 17.0e-6
    s_si = 0.067e3
    beta2 = -d_si * lam ** 2 / (2.0 * math.pi * C_LIGHT)
    beta3 = (lam ** 2 / (2.0 * math.pi * C_LIGHT)) ** 2 * (s_si + 2.0 * d_si / lam)
    assert span.beta2 == pytest.approx(beta2, rel=1e-12)
    assert span.beta3 == pytest.approx(beta3, rel=1e-12)
    # default expansion point is the mean comb frequency
    assert span.f_taylor_center == pytest.approx(193.05e12, rel=1e-15)

    prof = link.raman[0]
    assert prof.kind == "triangular"
    assert prof.c_r_max == pytest.approx(0.4e-3, rel=1e-15)
    assert prof.delta_f == 15.0e12


PUMP_YAML = """\
channels:
  - count: 3
    start_hz: 193.0e12
    spacing_hz: 50.0e9
    bandwidth_hz: 40.0e9
    power_dbm: 0.0
  - center_hz: 193.02e12
    bandwidth_hz: 6.0e9
    power_dbm: 10.0
    pump: true
spans:
  - length_km: 80.0
    loss_db_per_km: 0.2
    gamma_per_w_km: 1.2
    dispersion_ps_nm_km: 17.0
    dispersion_slope_ps_nm2_km: 0.067
    raman:
      shape: triangular
      peak_per_w_km: 0.4
      bandwidth_hz: 15.0e12
    amplifier:
      mode: compensate_loss
cut: [2, 3]
"""


def test_load_link_single_carrier_pump_and_sorting():
    link = load_link(PUMP_YAML)
    assert link.n_channels == 4
    # sorted by frequency: 193.0, 193.02 (pump), 193.05, 193.1
    np.testing.assert_allclose(link.f_centers,
                               [193.0e12, 193.02e12, 193.05e12, 193.1e12])
    assert [ch.is_pump for ch in link.channels] == [False, True, False, False]
    assert [ch.index for ch in link.channels] == [1, 2, 3, 4]
    # explicit selections come back verbatim; validation flags the pump
    from nli_cfm import validate
    assert link.cut_indices() == (2, 3)
    assert any(d.code == "cut-is-pump" for d in validate(link))
    auto = load_link(PUMP_YAML.replace("cut: [2, 3]", "cut: all"))
    assert auto.cut_indices() == (1, 3, 4)


def test_load_link_per_channel_loss_forms():
    as_list = BASE_YAML.replace("loss_db_per_km: 0.2",
                                "loss_db_per_km: [0.2, 0.21, 0.22]")
    link = load_link(as_list)
    assert link.spans[0].intrinsic_alpha[3] == pytest.approx(alpha_np_per_m(0.22))
    as_map = BASE_YAML.replace("loss_db_per_km: 0.2",
                               "loss_db_per_km: {1: 0.2, 2: 0.21, 3: 0.22}")
    link2 = load_link(as_map)
    assert link2.spans[0].intrinsic_alpha[2] == pytest.approx(alpha_np_per_m(0.21))


def test_load_link_accepts_stream():
    from_str = load_link(BASE_YAML)
    from_stream = load_link(io.StringIO(BASE_YAML))
    np.testing.assert_array_equal(from_str.f_centers, from_stream.f_centers)
    assert from_str.spans[0].beta2 == from_stream.spans[0].beta2


def test_load_link_unknown_keys_fail_loudly():
    with pytest.raises(ConfigError, match="chanels"):
        load_link(BASE_YAML.replace("channels:", "chanels:"))
    with pytest.raises(ConfigError, match="spans\\[0\\]"):
        load_link(BASE_YAML.replace("length_km", "lenght_km"))
    with pytest.raises(ConfigError, match="raman"):
        load_link(BASE_YAML.replace("shape: triangular", "shape: gaussian"))
    with pytest.raises(ConfigError):
        load_link(BASE_YAML.replace("mode: compensate_loss",
                                    "mode: compensate_loss\n          gain_db: 16.0"))
    with pytest.raises(ConfigError):
        load_link("just a scalar")


def test_load_rho_factors(tmp_path):
    path = tmp_path / "rho.yaml"
    path.write_text("rho_cut: 0.9\nrho_mch: 1.1\nrho_coh: 0.5\n")
    rho = load_rho_factors(str(path))
    assert (rho.rho_cut, rho.rho_mch, rho.rho_coh) == (0.9, 1.1, 0.5)
    bad = tmp_path / "bad.yaml"
    bad.write_text("rho_cut: 0.9\nrho_what: 1\n")
    with pytest.raises(ConfigError):
        load_rho_factors(str(bad))


# ----------------------------------------------------------------------
# pipeline
# ----------------------------------------------------------------------

def test_run_pipeline_basic_report():
    link = load_link(BASE_YAML)
    report = run_pipeline(link)
    assert [e.cut_index for e in report.entries] == [1, 2, 3]
    assert all(e.g_nli > 0.0 for e in report.entries)
    meta = report.metadata
    assert meta["n_channels"] == 3 and meta["n_spans"] == 1 and meta["n_cuts"] == 3
    assert meta["oracle"] is False and meta["cache_used"] is False
    assert "threads" not in meta  # results are parallelism independent
    assert report.timings.srs > 0.0 and report.timings.fit > 0.0
    assert report.timings.cfm > 0.0 and report.timings.oracle == 0.0


def test_run_pipeline_rejects_invalid_link():
    bad = BASE_YAML.replace("spacing_hz: 50.0e9", "spacing_hz: 30.0e9")  # overlap
    link = load_link(bad)
    with pytest.raises(LinkValidationError) as err:
        run_pipeline(link)
    assert any("overlap" in str(d) for d in err.value.diagnostics)


def test_run_pipeline_strict_promotes_warnings():
    link = load_link(BASE_YAML.replace("gamma_per_w_km: 1.2", "gamma_per_w_km: 0.0"))
    report = run_pipeline(link)  # warning only
    assert all(e.g_nli == 0.0 for e in report.entries)
    with pytest.raises(LinkValidationError):
        run_pipeline(link, RunConfig(strict=True))


def test_report_is_thread_count_invariant(tmp_path):
    link = build_link(n_ch=5, n_spans=2)
    d1 = report_to_dict(run_pipeline(link, RunConfig(threads=1)))
    d4 = report_to_dict(run_pipeline(link, RunConfig(threads=4)))
    assert d1["channels"] == d4["channels"]
    assert d1["metadata"] == d4["metadata"]

    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_csv(run_pipeline(link, RunConfig(threads=1)), str(a))
    write_csv(run_pipeline(link, RunConfig(threads=3)), str(b))
    assert a.read_bytes() == b.read_bytes()


def test_json_report_round_trip(tmp_path):
    link = load_link(BASE_YAML)
    report = run_pipeline(link)
    path = tmp_path / "report.json"
    write_json(report, str(path))
    back = json.loads(path.read_text())
    rows = back["channels"]
    assert len(rows) == 3
    for row, entry in zip(rows, report.entries):
        assert row["index"] == entry.cut_index
        assert row["g_nli_w_per_hz"] == entry.g_nli  # repr round trip is exact
        assert row["nli_power_w"] == entry.nli_power
    assert back["metadata"]["version"] == report.metadata["version"]


def test_csv_report_shape(tmp_path):
    link = load_link(BASE_YAML)
    report = run_pipeline(link)
    path = tmp_path / "report.csv"
    write_csv(report, str(path))
    lines = path.read_text().strip().splitlines()
    assert len(lines) == 4
    header = lines[0].split(",")
    assert "g_nli_w_per_hz" in header and "nli_power_dbm" in header
    assert "eval_seconds" not in header  # timings would break determinism
    dbm_col = header.index("nli_power_dbm")
    for line in lines[1:]:
        cell = line.split(",")[dbm_col]
        assert len(cell.rsplit(".", 1)[1]) <= 4  # rounded for readability


def test_cache_reuse_and_fingerprint(tmp_path):
    cache = str(tmp_path / "profiles.npz")
    link = load_link(BASE_YAML)
    first = run_pipeline(link, RunConfig(cache_path=cache))
    assert first.metadata["cache_used"] is False
    second = run_pipeline(link, RunConfig(cache_path=cache))
    assert second.metadata["cache_used"] is True
    for a, b in zip(first.entries, second.entries):
        assert a.g_nli == b.g_nli

    hotter = load_link(BASE_YAML.replace("power_dbm: 0.0", "power_dbm: 2.0"))
    third = run_pipeline(hotter, RunConfig(cache_path=cache))
    assert third.metadata["cache_used"] is False


def test_freeze_profiles_cubic_scaling(tmp_path):
    cache = str(tmp_path / "profiles.npz")
    link = build_link(n_ch=3, c_r_max_per_w_km=0.0)
    base = run_pipeline(link, RunConfig(cache_path=cache))

    doubled = dataclasses.replace(
        link, channels=tuple(dataclasses.replace(ch, launch_psd=2.0 * ch.launch_psd)
                             for ch in link.channels))
    frozen = run_pipeline(doubled, RunConfig(cache_path=cache, freeze_profiles=True))
    assert frozen.metadata["cache_used"] is True
    for a, b in zip(base.entries, frozen.entries):
        assert b.g_nli == 8.0 * a.g_nli

    with pytest.raises(ConfigError):
        run_pipeline(link, RunConfig(freeze_profiles=True))


def test_benchmark_contract():
    link = build_link(n_ch=2)
    with pytest.raises(ValueError):
        benchmark(link, repetitions=2)
    with pytest.raises(ValueError):
        benchmark(link, stage="ode-only")

    quick = benchmark(link, repetitions=3, stage="cfm-only")
    assert quick["stage"] == "cfm-only" and quick["n_cuts"] == 2
    assert 0.0 < quick["seconds_min"] <= quick["seconds_median"]
    assert quick["per_cut_seconds_median"] == quick["seconds_median"] / 2

    full = benchmark(link, repetitions=3, stage="all")
    assert set(full["stage_seconds_median"]) == {"srs", "fit", "cfm", "oracle"}
    assert full["seconds_median"] >= full["stage_seconds_median"]["srs"]


def test_pipeline_oracle_attachment():
    link = load_link(BASE_YAML)
    report = run_pipeline(link, RunConfig(oracle=True))
    assert report.metadata["oracle"] is True
    assert report.timings.oracle > 0.0
    d = report_to_dict(report)
    for row, entry in zip(d["channels"], report.entries):
        assert entry.g_nli_oracle is not None and entry.g_nli_oracle > 0.0
        gap = 10.0 * math.log10(entry.incoherent / entry.g_nli_oracle)
        assert abs(gap) < 0.5
        assert row["oracle_gap_db"] == pytest.approx(
            10.0 * math.log10(entry.g_nli / entry.g_nli_oracle), abs=1e-12)


def test_pipeline_matches_legacy_form_without_raman():
    link = build_link(n_ch=4, c_r_max_per_w_km=0.0)
    report = run_pipeline(link)
    fits, loss = prepare(link)
    for entry in report.entries:
        legacy = nli_m1_legacy(link, fits, loss, entry.cut_index)
        assert entry.g_nli == pytest.approx(legacy, rel=1e-9)


# ----------------------------------------------------------------------
# command line
# ----------------------------------------------------------------------

def test_cli_json_to_file(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "r.json"
    assert cli.main(["run", cfg, "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert len(data["channels"]) == 3


def test_cli_csv_by_extension(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "r.csv"
    assert cli.main(["run", cfg, "--out", str(out)]) == 0
    assert out.read_text().startswith("index,")


def test_cli_stdout_json(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert cli.main(["run", cfg]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["metadata"]["n_cuts"] == 3


def test_cli_validation_failure_exit_1(tmp_path, capsys):
    cfg = write_config(tmp_path, BASE_YAML.replace("spacing_hz: 50.0e9",
                                                   "spacing_hz: 30.0e9"))
    assert cli.main(["run", cfg]) == 1
    assert "overlap" in capsys.readouterr().err


def test_cli_io_and_parse_failures_exit_3(tmp_path, capsys):
    assert cli.main(["run", str(tmp_path / "missing.yaml")]) == 3
    bad = write_config(tmp_path, "channels: [\n", name="broken.yaml")
    assert cli.main(["run", bad]) == 3
    typo = write_config(tmp_path, BASE_YAML.replace("length_km", "lenght_km"),
                        name="typo.yaml")
    assert cli.main(["run", typo]) == 3
    capsys.readouterr()


def test_cli_numeric_failure_exit_2(tmp_path, capsys):
    cfg = write_config(tmp_path, BASE_YAML
                       .replace("dispersion_ps_nm_km: 17.0", "dispersion_ps_nm_km: 0.0")
                       .replace("dispersion_slope_ps_nm2_km: 0.067",
                                "dispersion_slope_ps_nm2_km: 0.0"))
    assert cli.main(["run", cfg]) == 2
    assert "numeric" in capsys.readouterr().err


def test_cli_flag_validation(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert cli.main(["run", cfg, "--threads", "0"]) == 3
    assert cli.main(["run", cfg, "--sigma-range", "5"]) == 3
    assert cli.main(["run", cfg, "--bench", "2"]) == 3
    assert cli.main(["run", cfg, "--freeze-profiles"]) == 3
    with pytest.raises(SystemExit) as exc:
        cli.main(["run", cfg, "--no-such-flag"])
    assert exc.value.code == 3
    with pytest.raises(SystemExit) as exc:
        cli.main(["--help"])
    assert exc.value.code == 0
    capsys.readouterr()


def test_cli_threads_do_not_change_bytes(tmp_path):
    cfg = write_config(tmp_path)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(["run", cfg, "--out", str(a), "--threads", "1"]) == 0
    assert cli.main(["run", cfg, "--out", str(b), "--threads", "4"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_cli_oracle_column(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "r.csv"
    assert cli.main(["run", cfg, "--oracle", "--out", str(out)]) == 0
    header = out.read_text().splitlines()[0]
    assert "g_nli_oracle_w_per_hz" in header and "oracle_gap_db" in header


def test_cli_rho_file_changes_result(tmp_path):
    cfg = write_config(tmp_path)
    rho = tmp_path / "rho.yaml"
    rho.write_text("rho_mch: 0.5\nrho_coh: 0.0\n")
    plain, scaled = tmp_path / "p.json", tmp_path / "s.json"
    assert cli.main(["run", cfg, "--out", str(plain)]) == 0
    assert cli.main(["run", cfg, "--rho", str(rho), "--out", str(scaled)]) == 0
    g0 = json.loads(plain.read_text())["channels"][0]["g_nli_w_per_hz"]
    g1 = json.loads(scaled.read_text())["channels"][0]["g_nli_w_per_hz"]
    assert g1 < g0


def test_cli_fit_flags_accepted(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "r.json"
    assert cli.main(["run", cfg, "--mc", "1.0", "--sigma-range", "0.8,5.0",
                     "--gs-tol", "1e-5", "--out", str(out)]) == 0


def test_cli_bench_json(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert cli.main(["run", cfg, "--bench", "3", "--stage", "cfm-only"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["stage"] == "cfm-only" and data["repetitions"] == 3


def test_cli_cache_roundtrip(tmp_path):
    cfg = write_config(tmp_path)
    cache = tmp_path / "prof.npz"
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert cli.main(["run", cfg, "--cache", str(cache), "--out", str(a)]) == 0
    assert cli.main(["run", cfg, "--cache", str(cache), "--freeze-profiles",
                     "--out", str(b)]) == 0
    da, db = json.loads(a.read_text()), json.loads(b.read_text())
    assert da["metadata"]["cache_used"] is False
    assert db["metadata"]["cache_used"] is True
    assert da["channels"] == db["channels"]
