import csv
import json

import pytest

from wellglm.cli import main
from wellglm.dataset import load_wells
from wellglm.glm import loads_model


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def workdir(tmp_path):
    assert run("simulate", "--out-dir", tmp_path, "--rows", 300, "--seed", 3) == 0
    assert run("clean", "--out-dir", tmp_path) == 0
    return tmp_path


def read_table(path):
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def test_simulate_outputs(tmp_path):
    assert run("simulate", "--out-dir", tmp_path, "--wells", 3, "--rows", 50) == 0
    wells = load_wells(tmp_path / "wells.csv")
    assert [w.well_id for w in wells] == ["KA01/KP01", "KA02/KP02", "KA03/KP03"]
    truth = json.loads((tmp_path / "truth.json").read_text())
    assert truth["header"]["command"] == "simulate"
    assert len(truth["wells"]) == 3


def test_clean_summary(tmp_path):
    text = "well,day,fluid_prod,gas_prod,THERMOCOUPLE 1,THERMOCOUPLE 2\n"
    rows = [f"W,{d},{d % 7},{d % 5},{300 + d % 11},{400 + (d * 7) % 13}" for d in range(60)]
    rows[5] = "W,5,1,1,950,400"
    rows[6] = "W,6,1,1,,400"
    src = tmp_path / "raw.csv"
    src.write_text(text + "\n".join(rows) + "\n")
    assert run("clean", "--input", src, "--out-dir", tmp_path, "--outlier-alpha", 0.01) == 0
    summary = json.loads((tmp_path / "cleaning_summary.json").read_text())
    (well,) = summary["wells"]
    assert well["cells_capped"] == 1
    assert well["rows_missing_temperature"] == 1
    assert well["rows_dropped"] == 1 + well["outliers_flagged"]
    assert summary["totals"]["cells_capped"] == 1
    (cleaned,) = load_wells(tmp_path / "cleaned.csv")
    assert cleaned.temps.max() <= 700.0
    flagged = read_table(tmp_path / "outliers.csv")
    assert len(flagged) == well["outliers_flagged"]


def test_fit_compare_cardinality(workdir):
    assert run("fit", "--out-dir", workdir) == 0
    models = sorted((workdir / "models").glob("*.json"))
    assert len(models) == 16
    assert run("compare", "--out-dir", workdir) == 0
    rows = read_table(workdir / "comparison.csv")
    assert len(rows) == 16
    assert list(rows[0]) == ["well", "response", "model", "rsquare", "rase", "aae", "freq"]
    fluid = [r for r in rows if r["response"] == "fluid" and r["well"] == "KA01/KP01"]
    gas = [r for r in rows if r["response"] == "gas" and r["well"] == "KA01/KP01"]
    assert int(fluid[0]["freq"]) > int(gas[0]["freq"])


def test_grid_selection_flags(workdir):
    assert run("fit", "--out-dir", workdir, "--family", "poisson", "--degree", "2", "--response", "gas") == 0
    models = sorted((workdir / "models").glob("*.json"))
    assert len(models) == 2
    assert all("__gas__Poisson-2DG" in m.name for m in models)


def test_effects_top_k(workdir):
    assert run("fit", "--out-dir", workdir, "--degree", "2", "--family", "poisson") == 0
    assert run("effects", "--out-dir", workdir, "--top-k", 5) == 0
    for path in (workdir / "effects").glob("*.csv"):
        rows = read_table(path)
        assert len(rows) == 5
        lw = [float(r["log_worth"]) for r in rows]
        assert lw == sorted(lw, reverse=True)
    assert "Source" in (workdir / "effects.txt").read_text()


def test_residuals_conserve_freq(workdir):
    assert run("fit", "--out-dir", workdir) == 0
    assert run("residuals", "--out-dir", workdir, "--bins", 12, "--window", "10:20") == 0
    for report in (workdir / "residuals").glob("*_report.json"):
        body = json.loads(report.read_text())
        hist = read_table(str(report).replace("_report.json", "_histogram.csv"))
        assert len(hist) == 12
        assert sum(int(r["count"]) for r in hist) == body["n"]
        model = loads_model((workdir / "models" / report.name.replace("_report.json", ".json")).read_text())
        assert body["n"] == model.n_obs
    series = read_table(workdir / "residuals" / "KA01_KP01__fluid__series.csv")
    assert len(series) == 11
    assert list(series[0]) == ["day", "actual", "Normal-1DG", "Normal-2DG", "Poisson-1DG", "Poisson-2DG"]


def test_predict_files(workdir):
    assert run("fit", "--out-dir", workdir, "--family", "poisson", "--degree", "1") == 0
    assert run("predict", "--out-dir", workdir) == 0
    files = sorted((workdir / "predictions").glob("*.csv"))
    assert len(files) == 4
    rows = read_table(files[0])
    assert len(rows) == 300 and all(float(r["predicted"]) > 0 for r in rows)


def test_holdout_fit_records_training_window(workdir):
    assert run("fit", "--out-dir", workdir, "--holdout-fraction", 0.2, "--family", "normal", "--degree", "1") == 0
    model = loads_model(next((workdir / "models").glob("*fluid*.json")).read_text())
    assert model.n_obs == 240
    assert model.meta["train_last_day"] == 239
    assert run("compare", "--out-dir", workdir, "--family", "normal", "--degree", "1") == 0
    rows = read_table(workdir / "comparison.csv")
    assert {int(r["freq"]) for r in rows if r["response"] == "fluid"} == {240}


def test_every_output_has_header(workdir):
    assert run("fit", "--out-dir", workdir) == 0
    assert run("report", "--out-dir", workdir) == 0
    for path in workdir.rglob("*"):
        if path.is_file():
            text = path.read_text()
            if path.suffix == ".json":
                header = json.loads(text)["header"]
                assert {"format_version", "command", "config_digest"} <= set(header)
            else:
                assert text.startswith("# wellglm format_version=1 command=")


def test_config_file_and_flag_precedence(workdir, capsys):
    cfg = workdir / "cfg.json"
    cfg.write_text(json.dumps({"family": "normal", "degree": "1", "response": "fluid"}))
    assert run("fit", "--out-dir", workdir, "--config", cfg) == 0
    assert len(list((workdir / "models").glob("*.json"))) == 2
    assert run("fit", "--out-dir", workdir / "b", "--input", workdir / "cleaned.csv", "--config", cfg, "--family", "poisson") == 0
    assert all("Poisson" in p.name for p in (workdir / "b" / "models").glob("*.json"))


def test_schema_flags(tmp_path):
    src = tmp_path / "raw.tsv"
    lines = ["id\tt\toil\tTC_a\tTC_b"] + [f"X\t{d}\t{d % 4 + 1}\t{300 + d % 9}\t{200 + d % 5}" for d in range(40)]
    src.write_text("\n".join(lines) + "\n")
    args = ["--well-col", "id", "--day-col", "t", "--fluid-col", "oil", "--gas-col", "", "--temp-prefix", "TC_"]
    assert run("fit", "--input", src, "--out-dir", tmp_path, "--response", "fluid", *args) == 0
    assert len(list((tmp_path / "models").glob("*.json"))) == 4


@pytest.mark.parametrize(
    "argv, code, tag",
    [
        (["fit"], 2, "CONFIG_ERROR"),
        (["clean", "--outlier-alpha", "2"], 2, "CONFIG_ERROR"),
        (["compare"], 2, "CONFIG_ERROR"),
    ],
)
def test_error_exit_codes(tmp_path, capsys, argv, code, tag):
    assert run(*argv, "--out-dir", tmp_path) == code
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith(f"error code={tag} ")


def test_data_error_exit_code(tmp_path, capsys):
    src = tmp_path / "bad.csv"
    src.write_text("well,day,fluid_prod,gas_prod\nW,1,1,1\n")
    assert run("fit", "--input", src, "--out-dir", tmp_path) == 3
    assert "kind=SchemaError" in capsys.readouterr().err


def test_numerical_error_exit_code(tmp_path, capsys):
    src = tmp_path / "zero.csv"
    src.write_text("well,day,fluid_prod,gas_prod,THERMOCOUPLE 1\n" + "".join(f"W,{d},0,0,{300 + d}\n" for d in range(10)))
    assert run("fit", "--input", src, "--out-dir", tmp_path, "--family", "poisson") == 4
    assert "code=NUMERICAL_ERROR kind=DivergenceError" in capsys.readouterr().err
