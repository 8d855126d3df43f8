import json
from importlib.resources import files

import numpy as np
import pytest
from scipy.signal import find_peaks

from mollowkit import synthetic as syn
from mollowkit.cli import main
from mollowkit.params import DriveParams
from mollowkit.spectra import sideband_positions
from mollowkit.tables import read_table, write_table

REFERENCE_INI = str(files("mollowkit") / "data" / "reference.ini")


def _err_line(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def _ini(tmp_path, text, name="s.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _series_csv(path, data):
    cols = {"x": data.x, "y": data.y}
    if data.y_err is not None:
        cols["y_err"] = data.y_err
    write_table(path, cols)
    return str(path)


def test_spectrum_writes_table_and_sidecar(tmp_path):
    out = tmp_path / "spec.csv"
    assert main(["spectrum", "--config", REFERENCE_INI, "--out", str(out)]) == 0
    cols, comments = read_table(out)
    assert list(cols) == ["offset_GHz", "intensity"]
    assert any("cyclic" in c for c in comments)
    lines = (tmp_path / "spec.coeffs.jsonl").read_text().splitlines()
    modes = [json.loads(l)["mode"] for l in lines]
    assert modes == ["standard", "literal"]
    assert json.loads(lines[0])["n_inf"] == pytest.approx(0.3939, abs=1e-4)


def test_spectrum_sidebands_from_output(tmp_path):
    out = tmp_path / "spec.csv"
    main(["spectrum", "--config", REFERENCE_INI, "--span", "10", "--points", "2001", "--out", str(out)])
    cols, _ = read_table(out)
    f, s = cols["offset_GHz"], cols["intensity"]
    # sidebands are shoulders here, located by the curvature minima
    curv = np.gradient(np.gradient(s, f), f)
    idx, _ = find_peaks(-curv)
    side = sorted(f[idx][np.abs(f[idx]) > 1.0], key=abs)[:2]
    assert sorted(side) == pytest.approx([-3.62, 3.62], abs=0.02)
    res = tmp_path / "fit.json"
    assert main(["fit", "spectrum", "--config", REFERENCE_INI, "--data", str(out), "--out", str(res)]) == 0
    assert json.loads(res.read_text())["params"]["rabi"] == pytest.approx(4.0, rel=2e-3)


def test_literal_and_standard_outputs_differ_near_zero(tmp_path):
    a, b = tmp_path / "s.csv", tmp_path / "l.csv"
    main(["spectrum", "--config", REFERENCE_INI, "--mode", "standard", "--out", str(a)])
    main(["spectrum", "--config", REFERENCE_INI, "--mode", "literal", "--out", str(b)])
    sa, sb = read_table(a)[0], read_table(b)[0]
    zero = np.argmin(np.abs(sa["offset_GHz"]))
    assert abs(sa["intensity"][zero] / sb["intensity"][zero] - 1) > 0.01


def test_missing_t2_names_field(tmp_path, capsys):
    cfg = _ini(tmp_path, "[emitter]\nt1_ps = 56.8\n")
    assert main(["spectrum", "--config", cfg, "--out", str(tmp_path / "x.csv")]) == 1
    err = _err_line(capsys)
    assert err["exit_code"] == 1 and "t2_ps" in err["message"]


def test_bad_usage_exits_1(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["spectrum"])
    assert exc.value.code == 1


def test_domain_error_exits_2(tmp_path, capsys):
    cfg = _ini(tmp_path, "[emitter]\nt1_ps = 56.8\nt2_ps = 103.5\n[drive]\nn_bar = 0.02\n")
    assert main(["g2", "--config", cfg, "--raw", "--out", str(tmp_path / "g.csv")]) == 2
    assert _err_line(capsys)["error"] == "UnderdampedDomain"
    # the continued model covers the same drive
    assert main(["g2", "--config", cfg, "--model", "continued", "--out", str(tmp_path / "g.csv")]) == 0


@pytest.mark.parametrize("cmd", ["g2", "g1", "cascade"])
def test_correlation_commands(tmp_path, cmd):
    raw, ins = tmp_path / "raw.csv", tmp_path / "ins.csv"
    assert main([cmd, "--config", REFERENCE_INI, "--raw", "--out", str(raw)]) == 0
    assert main([cmd, "--config", REFERENCE_INI, "--instrumented", "--out", str(ins)]) == 0
    r, i = read_table(raw)[0], read_table(ins)[0]
    assert list(r) == ["tau_ps", "value"]
    zero = np.argmin(np.abs(r["tau_ps"]))
    if cmd == "g2":
        assert r["value"][zero] == pytest.approx(0.0, abs=1e-9)
        # n_bar 2.4, IRF 40 ps, signal:background 50
        assert 0.1 < i["value"][zero] < 0.15
    elif cmd == "g1":
        assert r["value"][zero] == pytest.approx(1.0)
        assert i["value"][zero] < 1.0
    else:
        assert np.max(r["value"]) > 1.3
        assert np.max(i["value"]) < np.max(r["value"])


def test_g2_models_agree(tmp_path):
    outs = {}
    for model in ("closed", "continued", "oracle"):
        p = tmp_path / f"{model}.csv"
        assert main(["g2", "--config", REFERENCE_INI, "--model", model, "--max-tau", "300",
                     "--step", "2", "--out", str(p)]) == 0
        outs[model] = read_table(p)[0]["value"]
    assert np.max(np.abs(outs["closed"] - outs["oracle"])) < 1e-5
    assert np.max(np.abs(outs["closed"] - outs["continued"])) < 1e-12


@pytest.mark.parametrize("kind", ["saturation", "lifetime", "g2", "visibility", "cascade"])
def test_fit_round_trip_through_csv(tmp_path, kind):
    data = {
        "saturation": syn.saturation_data(seed=1),
        "lifetime": syn.lifetime_data(seed=1),
        "g2": syn.g2_data(seed=1),
        "visibility": syn.visibility_data(seed=1),
        "cascade": syn.cascade_data(seed=1),
    }[kind]
    csv = _series_csv(tmp_path / "d.csv", data)
    out = tmp_path / "fit.json"
    extra = ["--irf", "40"] if kind in ("lifetime", "g2") else []
    assert main(["fit", kind, "--config", REFERENCE_INI, "--data", csv, "--out", str(out)] + extra) == 0
    res = json.loads(out.read_text())
    assert res["kind"] == kind and res["converged"]
    truth = {"saturation": ("s_sat", 2.716), "lifetime": ("t1", 56.8), "g2": ("rabi", 4.0),
             "visibility": ("t2", 103.5), "cascade": ("tau_rise", 57.8)}[kind]
    name, value = truth
    assert abs(res["params"][name] - value) < 3 * res["std_errors"][name]


def test_fit_bundled_saturation_sample(tmp_path, capsys):
    data = str(files("mollowkit") / "data" / "saturation_sample.csv")
    assert main(["fit", "saturation", "--data", data]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["params"]["s_sat"] == pytest.approx(2.716, abs=0.02)
    assert res["params"]["plateau"] == pytest.approx(81.49, rel=0.01)


def test_fit_malformed_csv_exits_1(tmp_path, capsys):
    bad = _ini(tmp_path, "x,y\n1,2\n3,oops\n", "bad.csv")
    assert main(["fit", "saturation", "--data", bad]) == 1
    assert "bad.csv:3" in _err_line(capsys)["message"]


def test_fit_not_converged_exits_3(tmp_path, capsys):
    # pure noise; this draw leaves the optimizer stalled far from a stationary point
    rng = np.random.default_rng(8)
    x = np.arange(-500, 500, 8.0)
    write_table(tmp_path / "noise.csv", {"x": x, "y": rng.uniform(0, 1, x.size)})
    out = tmp_path / "fit.json"
    code = main(["fit", "lifetime", "--irf", "40", "--data", str(tmp_path / "noise.csv"), "--out", str(out)])
    assert code == 3
    assert json.loads(out.read_text())["converged"] is False
    assert _err_line(capsys)["exit_code"] == 3


@pytest.mark.parametrize("suffix", [".bin", ".csv"])
def test_mc_then_correlate(tmp_path, capsys, suffix):
    tags = tmp_path / f"tags{suffix}"
    args = ["mc", "--config", REFERENCE_INI, "--duration", "0.2", "--seed", "4", "--tags", str(tags)]
    assert main(args) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["rate_mhz"] == pytest.approx(0.3939 / 56.8e-6, rel=0.01)
    out = tmp_path / "g2.csv"
    assert main(["correlate", "--tags", str(tags), "--bin", "8", "--max-tau", "400", "--out", str(out)]) == 0
    cols = read_table(out)[0]
    assert list(cols) == ["tau_ps", "value", "value_err"]
    assert cols["value"][np.argmin(np.abs(cols["tau_ps"]))] < 0.1
    # same seed, same file
    again = tmp_path / f"again{suffix}"
    main(["mc", "--config", REFERENCE_INI, "--duration", "0.2", "--seed", "4", "--tags", str(again)])
    assert again.read_bytes() == tags.read_bytes()


def test_correlate_two_files_and_bad_input(tmp_path, capsys):
    a, b = tmp_path / "a.bin", tmp_path / "b.bin"
    main(["mc", "--duration", "0.05", "--seed", "1", "--tags", str(a)])
    main(["mc", "--duration", "0.05", "--seed", "2", "--tags", str(b)])
    out = tmp_path / "x.csv"
    assert main(["correlate", "--tags", str(a), str(b), "--bin", "20", "--max-tau", "400", "--out", str(out)]) == 0
    assert np.allclose(read_table(out)[0]["value"], 1.0, atol=0.1)
    (tmp_path / "junk.bin").write_bytes(b"\x00\x01garbage")
    assert main(["correlate", "--tags", str(tmp_path / "junk.bin"), "--out", str(out)]) == 1


def test_reproduce_fig4a(tmp_path):
    assert main(["reproduce", "fig4a", "--out", str(tmp_path)]) == 0
    cols = read_table(tmp_path / "fig4a.csv")[0]
    assert list(cols) == ["detuning_GHz", "lower_GHz", "upper_GHz", "rayleigh_GHz"]
    for d, lo, hi, ray in zip(*cols.values()):
        ref = sideband_positions(DriveParams.from_ghz(4.0, d))
        assert (lo, hi, ray) == pytest.approx(ref, abs=1e-9)
    row = lambda d: np.argmin(np.abs(cols["detuning_GHz"] - d))
    i, j = row(5.3), row(-6.6)
    assert (cols["lower_GHz"][i], cols["upper_GHz"][i]) == pytest.approx((-1.34, 11.94), abs=0.005)
    assert (cols["lower_GHz"][j], cols["upper_GHz"][j]) == pytest.approx((-14.32, 1.12), abs=0.005)


def test_reproduce_fig2_plateau(tmp_path):
    assert main(["reproduce", "fig2", "--out", str(tmp_path)]) == 0
    cols = read_table(tmp_path / "fig2.csv")[0]
    assert list(cols) == ["n_bar", "total_MHz", "qd_MHz"]
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    plateau = manifest["curves"][0]["parameters"]["plateau_mhz"]
    assert plateau == pytest.approx(81.49, abs=0.05)
    assert plateau * 0.99 < cols["qd_MHz"][-1] < plateau
    assert np.all(np.diff(cols["total_MHz"]) > 0)


@pytest.mark.parametrize("fig", ["fig2", "fig3a", "fig3d", "fig4a", "fig4b", "figS2"])
def test_reproduce_is_deterministic(tmp_path, fig):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["reproduce", fig, "--out", str(a), "--seed", "5"]) == 0
    assert main(["reproduce", fig, "--out", str(b), "--seed", "5"]) == 0
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    for name in names:
        if name == "manifest.json":
            ma, mb = (json.loads((d / name).read_text()) for d in (a, b))
            ma.pop("created"), mb.pop("created")
            assert ma == mb
            assert all("provenance" in c for c in ma["curves"])
        else:
            assert (a / name).read_bytes() == (b / name).read_bytes()
            read_table(a / name)


def test_reproduce_unknown_figure(tmp_path, capsys):
    assert main(["reproduce", "fig9", "--out", str(tmp_path)]) == 1
    assert "fig9" in _err_line(capsys)["message"]
