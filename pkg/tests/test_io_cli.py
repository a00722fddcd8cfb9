import json
import math
from pathlib import Path

import numpy as np
import pytest

from circgp import io
from circgp.cli import main
from circgp.dataset import Dataset
from circgp.errors import ConfigurationError
from circgp.mcmc import Chain, McmcConfig

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
HEADER = "site_id,x_km,y_km,t,theta_rad\n"


def _write(path, text):
    path.write_text(text)
    return path


def test_load_small_dataset_and_wrap_at_ingestion(tmp_path):
    f = _write(tmp_path / "d.csv", HEADER + "s1,0,0,1,6.9\ns2,1.5,2,1,0.5\ns1,0,0,2,-1\n")
    d = io.load_dataset(f)
    assert len(d) == 3
    assert d.angles[0] == pytest.approx(6.9 - 2 * math.pi, abs=1e-15)
    assert d.angles[0] == pytest.approx(0.6168, abs=1e-4)
    assert d.angles[2] == pytest.approx(2 * math.pi - 1, abs=1e-15)
    assert d.site_id.tolist() == ["s1", "s2", "s1"]


def test_degrees_only_via_explicit_column(tmp_path):
    f = _write(tmp_path / "d.csv", "site_id,x_km,y_km,t,theta_deg\na,0,0,1,90\nb,1,1,1,450\n")
    d = io.load_dataset(f)
    assert d.angles == pytest.approx([math.pi / 2, math.pi / 2])


def test_missing_columns_listed(tmp_path):
    f = _write(tmp_path / "d.csv", "site_id,y_km,t\na,0,1\n")
    with pytest.raises(ConfigurationError) as err:
        io.load_dataset(f)
    assert "x_km" in str(err.value) and "theta_rad" in str(err.value)


def test_malformed_rows_report_line_numbers(tmp_path):
    f = _write(tmp_path / "d.csv", "# note\n" + HEADER + "a,0,0,1,0.1\nb,0,zero,1,0.2\n")
    with pytest.raises(ConfigurationError, match=r"d.csv:4"):
        io.load_dataset(f)
    f = _write(tmp_path / "e.csv", HEADER + "a,0,0,1,0.1\nb,0,0,1.5,0.2\n")
    with pytest.raises(ConfigurationError, match=r"e.csv:3: t must be"):
        io.load_dataset(f)
    f = _write(tmp_path / "g.csv", HEADER + "a,0,0,1\n")
    with pytest.raises(ConfigurationError, match=r"g.csv:2"):
        io.load_dataset(f)
    f = _write(tmp_path / "h.csv", HEADER + "a,0,0,1,nan\n")
    with pytest.raises(ConfigurationError, match=r"h.csv:2"):
        io.load_dataset(f)


def test_covariates_factors_and_levels(tmp_path):
    f = _write(tmp_path / "d.csv", "site_id,x_km,y_km,t,theta_rad,wave_height_m,sea_state\na,0,0,1,0.1,0.5,calm\nb,1,1,1,0.2,2.5,storm\n")
    d = io.load_dataset(f)
    assert d.covariates["wave_height_m"].tolist() == [0.5, 2.5]
    assert d.factors["sea_state"].tolist() == ["calm", "storm"]
    with pytest.raises(ConfigurationError, match="'storm'"):
        io.load_dataset(f, factor_levels={"sea_state": ("calm", "transition")})


def test_dataset_write_read_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    d = Dataset(np.column_stack([rng.uniform(0, 10, (5, 2)), np.arange(1, 6)]), rng.uniform(0, 6, 5), covariates={"h": rng.uniform(0, 3, 5)}, factors={"s": np.array(list("aabba"))})
    io.write_dataset(tmp_path / "d.csv", d, "abc")
    text = (tmp_path / "d.csv").read_text().splitlines()
    assert text[0].startswith("# circgp ") and "config_hash=abc" in text[0]
    back = io.load_dataset(tmp_path / "d.csv")
    assert np.array_equal(back.points, d.points) and np.array_equal(back.angles, d.angles)
    assert np.array_equal(back.covariates["h"], d.covariates["h"])


def test_run_config_parsing():
    cfg = io.load_run_config(CONFIGS / "fit_wn_low.toml")
    assert cfg.model == "WN" and cfg.seed == 1 and cfg.mcmc.iterations == 4000
    cfg = io.load_run_config(CONFIGS / "fit_pnr_wave_height.toml")
    assert cfg.factors == ("sea_state",) and cfg.covariates == ("wave_height_m",)
    for bad in [
        {"model": "XX", "priors": {"mu": "N(0,1)"}},
        {"model": "WN"},
        {"model": "WN", "priors": {"mu": "N(0,1)"}, "colour": 1},
        {"model": "WN", "priors": {"mu": "N(0,1)"}, "mcmc": {"chains": 2}},
        {"model": "WN", "priors": {"mu": "N(0,1)"}, "k_max": 0},
        {"model": "WN", "priors": {"mu": "Q(0,1)"}},
    ]:
        with pytest.raises(ConfigurationError):
            io.parse_run_config(bad)


def _chain(rng, latent_dtype=np.int64):
    mcmc = McmcConfig(40, 20, 2)
    params = {"mu": rng.uniform(0, 6, 10), "sigma2": rng.gamma(2, 1, 10) * 1e-7, "a": np.full(10, 1 / 3)}
    latent = rng.integers(-3, 4, (10, 4)).astype(latent_dtype) if latent_dtype == np.int64 else rng.uniform(0.1, 3, (10, 4))
    return Chain("WN", params, latent, ("mu",), {"mu": 0.3}, mcmc, 7, {"k_max": 3})


def test_chain_roundtrip_is_lossless(tmp_path):
    rng = np.random.default_rng(1)
    for dtype in (np.int64, float):
        c = _chain(rng, dtype)
        path = tmp_path / f"chain_{np.dtype(dtype).name}.csv"
        io.save_chain(path, c, "h1", save_latent=True)
        back = io.load_chain(path, expected_hash="h1")
        for k in c.names:
            assert np.array_equal(back[k], c[k])
        assert back.latent.dtype == c.latent.dtype and np.array_equal(back.latent, c.latent)
        assert back.circular == ("mu",) and back.info == {"k_max": 3} and back.seed == 7
    io.save_chain(tmp_path / "nolat.csv", c, "h1")
    assert io.load_chain(tmp_path / "nolat.csv").latent is None


def test_chain_reload_checks(tmp_path):
    c = _chain(np.random.default_rng(2))
    path = tmp_path / "chain.csv"
    io.save_chain(path, c, "h1")
    with pytest.raises(ConfigurationError, match="does not match"):
        io.load_chain(path, expected_hash="other")
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(ConfigurationError, match="draws"):
        io.load_chain(path)
    path.write_text("\n".join([lines[0].replace("h1", "h2")] + lines[1:]) + "\n")
    with pytest.raises(ConfigurationError, match="hash"):
        io.load_chain(path)


def _err(capsys):
    line = capsys.readouterr().err.strip().splitlines()[-1]
    return json.loads(line)


def test_cli_exit_codes_and_error_records(tmp_path, capsys):
    assert main(["fit", "--config", str(tmp_path / "none.toml"), "--data", "x", "--out", "y"]) == 2
    rec = _err(capsys)
    assert rec["status"] == "error" and rec["exit_code"] == 2 and rec["command"] == "fit"
    assert main(["nonsense"]) == 2
    capsys.readouterr()
    _write(tmp_path / "d.csv", HEADER + "a,0,0,1,0.1\na,0,0,1,0.2\nb,3,3,1,0.3\n")
    code = main(["predict", "--chain", str(tmp_path / "missing.csv"), "--data", str(tmp_path / "d.csv"), "--targets", str(tmp_path / "d.csv"), "--out", str(tmp_path / "p"), "--seed", "1"])
    assert code == 2 and _err(capsys)["command"] == "predict"


def test_cli_numerical_failure_exit_code(tmp_path, capsys, monkeypatch):
    import circgp.cli as cli
    from circgp.errors import NotPositiveDefiniteError

    def failing_fit(*args, **kwargs):
        raise NotPositiveDefiniteError(3)

    monkeypatch.setattr(cli, "fit_wn", failing_fit)
    _write(tmp_path / "d.csv", HEADER + "".join(f"s{i},{i},0,1,0.1\n" for i in range(6)))
    code = main(["fit", "--config", str(CONFIGS / "fit_wn_low.toml"), "--data", str(tmp_path / "d.csv"), "--out", str(tmp_path / "ch.csv"), "--iterations", "20"])
    assert code == 3
    rec = _err(capsys)
    assert rec["exit_code"] == 3 and rec["type"] == "NotPositiveDefiniteError"
    assert not (tmp_path / "ch.csv").exists()


def _pipeline(tmp_path, tag):
    d = tmp_path / tag
    d.mkdir()
    assert main(["simulate", "--config", str(CONFIGS / "truth_wn_low.toml"), "--out", str(d / "est.csv"), "--validation-out", str(d / "val.csv"), "--seed", "5"]) == 0
    assert main(["fit", "--config", str(CONFIGS / "fit_wn_low.toml"), "--data", str(d / "est.csv"), "--out", str(d / "chain.csv"), "--seed", "6", "--iterations", "300", "--burn-in", "100", "--save-latent"]) == 0
    assert main(["predict", "--chain", str(d / "chain.csv"), "--data", str(d / "est.csv"), "--targets", str(d / "val.csv"), "--out", str(d / "pred"), "--seed", "7"]) == 0
    assert main(["score", "--predictions", str(d / "pred_summary.csv"), "--draws", str(d / "pred_draws.csv"), "--holdout", str(d / "val.csv"), "--out", str(d / "score.csv")]) == 0
    return d


def test_cli_pipeline_is_bit_reproducible(tmp_path, capsys):
    a, b = _pipeline(tmp_path, "a"), _pipeline(tmp_path, "b")
    for name in ("est.csv", "val.csv", "chain.csv", "chain.latent.csv", "chain.csv.meta.json", "pred_draws.csv", "pred_summary.csv", "score.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    assert len(io.load_dataset(a / "est.csv")) == 170 and len(io.load_dataset(a / "val.csv")) == 70
    _, header, rows = io.read_csv(a / "score.csv")
    assert header == ["window", "crps", "ape", "n_targets"]
    assert [r[0] for _, r in rows] == ["all", "average", "pooled"]
    assert all(math.isfinite(float(r[1])) for _, r in rows)
    assert main(["summarize", "--chain", str(a / "chain.csv")]) == 0
    out = capsys.readouterr().out
    assert "sigma2" in out and "PE" in out


def test_cli_predict_requires_latents(tmp_path, capsys):
    d = tmp_path
    assert main(["simulate", "--config", str(CONFIGS / "truth_wn_low.toml"), "--out", str(d / "all.csv"), "--seed", "1"]) == 0
    assert len(io.load_dataset(d / "all.csv")) == 240
    assert main(["fit", "--config", str(CONFIGS / "fit_wn_low.toml"), "--data", str(d / "all.csv"), "--out", str(d / "chain.csv"), "--iterations", "20", "--burn-in", "10"]) == 0
    assert main(["predict", "--chain", str(d / "chain.csv"), "--data", str(d / "all.csv"), "--targets", str(d / "all.csv"), "--out", str(d / "p"), "--seed", "1"]) == 2
    assert "save-latent" in _err(capsys)["message"]


def test_cli_score_identical_predictions_gives_zero_ape(tmp_path):
    rows = "".join(f"s{i},{i},{i},{1 + i % 3},{0.3 * i}\n" for i in range(9))
    hold = _write(tmp_path / "hold.csv", "site_id,x_km,y_km,t,theta_rad,window\n" + "".join(r.rstrip() + f",w{i % 2}\n" for i, r in enumerate(rows.splitlines(True))))
    assert main(["score", "--predictions", str(hold), "--holdout", str(hold), "--window-column", "window", "--out", str(tmp_path / "s.csv")]) == 0
    _, header, out = io.read_csv(tmp_path / "s.csv")
    assert [r[0] for _, r in out] == ["w0", "w1", "average", "pooled"]
    assert all(float(r[2]) == 0.0 for _, r in out)


def test_cli_writes_only_declared_outputs(tmp_path):
    d = tmp_path / "run"
    d.mkdir()
    assert main(["simulate", "--config", str(CONFIGS / "truth_pn_low.toml"), "--out", str(d / "e.csv"), "--validation-out", str(d / "v.csv"), "--seed", "2"]) == 0
    assert sorted(p.name for p in d.iterdir()) == ["e.csv", "v.csv"]


def test_cli_fit_variant_from_config(tmp_path):
    rng = np.random.default_rng(3)
    lines = ["site_id,x_km,y_km,t,theta_rad,wave_height_m,sea_state"]
    for t in (1, 2, 3):
        for s in range(6):
            lines.append(f"s{s},{s % 3},{s // 3},{t},{rng.uniform(0, 6):.6f},{rng.uniform(0.2, 4):.4f},{'calm' if s % 2 else 'storm'}")
    _write(tmp_path / "d.csv", "\n".join(lines) + "\n")
    assert main(["fit", "--config", str(CONFIGS / "fit_pnr_wave_height.toml"), "--data", str(tmp_path / "d.csv"), "--out", str(tmp_path / "c.csv"), "--seed", "1", "--iterations", "60", "--burn-in", "30", "--save-latent"]) == 0
    chain = io.load_chain(tmp_path / "c.csv")
    assert chain.model == "PNR" and "eta1[storm:wave_height_m]" in chain.names
    assert main(["predict", "--chain", str(tmp_path / "c.csv"), "--data", str(tmp_path / "d.csv"), "--targets", str(tmp_path / "d.csv"), "--out", str(tmp_path / "p"), "--seed", "2"]) == 0
    _, header, rows = io.read_csv(tmp_path / "p_summary.csv")
    assert len(rows) == 18 and "mean_direction" in header
