"""Command-line pipeline: simulate, clean, fit, predict, compare, effects, residuals.

Stages communicate only through files in ``--out-dir``:

    wells.csv, truth.json            simulate
    cleaned.csv, cleaning_summary.json, outliers.csv
                                     clean
    models/*.json                    fit
    predictions/*.csv                predict
    comparison.txt, comparison.csv   compare
    effects/*.csv, effects.txt       effects
    residuals/*                      residuals

Settings come from built-in defaults, then a JSON ``--config`` file, then
command-line flags, each overriding the last.  Errors print one line
``error code=<CODE> kind=<Class>: <message>`` to stderr and exit with 2
(configuration), 3 (data) or 4 (numerical).
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .dataset import (
    CleaningConfig,
    Schema,
    WellSeries,
    cap_temperatures,
    complete_rows,
    drop_incomplete_rows,
    holdout_split,
    load_wells,
    write_wells,
)
from .errors import ConfigError, DataError, WellGLMError
from .features import FeatureSpec, expand
from .glm import NORMAL, POISSON, FittedModel, dumps_model, fit, loads_model, predict, wald_effects
from .metrics import build_comparison, model_name
from .outliers import flag_outliers, mahalanobis
from .residuals import residual_report, scatter_data, series_data
from .simulate import SimSpec, simulate_well, spec_to_dict

FORMAT_VERSION = 1

FAMILY_FLAGS = {"normal": NORMAL, "poisson": POISSON}

DEFAULTS: dict[str, Any] = {
    "input": None,
    "out_dir": ".",
    "models": None,
    "response": "both",
    "family": "both",
    "degree": "both",
    "temp_cap": 700.0,
    "outlier_alpha": 0.001,
    "drop_missing": True,
    "screen_responses": False,
    "top_k": 20,
    "seed": 0,
    "wells": 2,
    "rows": 1500,
    "thermocouples": 4,
    "truth_family": "poisson",
    "truth_degree": 2,
    "gas_missing_rate": 0.05,
    "holdout_fraction": 0.0,
    "bins": 20,
    "window": None,
    "well_col": "well",
    "day_col": "day",
    "fluid_col": "fluid_prod",
    "gas_col": "gas_prod",
    "temp_cols": None,
    "temp_prefix": "THERMOCOUPLE",
}

# Settings that name files; they are left out of the config digest so the
# same analysis run in two directories yields identical bytes.
PATH_KEYS = {"input", "out_dir", "models", "config"}


@dataclass
class RunConfig:
    command: str
    settings: dict[str, Any] = field(default_factory=dict)

    def __getattr__(self, name: str) -> Any:
        try:
            return self.settings[name]
        except KeyError:
            raise AttributeError(name) from None

    @property
    def out_dir(self) -> Path:
        return Path(self.settings["out_dir"])

    @property
    def models_dir(self) -> Path:
        return Path(self.settings["models"]) if self.settings.get("models") else self.out_dir / "models"

    @property
    def schema(self) -> Schema:
        temps = self.settings.get("temp_cols")
        if isinstance(temps, str):
            temps = [t.strip() for t in temps.split(",") if t.strip()]
        return Schema(
            well=self.well_col,
            day=self.day_col,
            fluid=self.fluid_col or None,
            gas=self.gas_col or None,
            temps=tuple(temps or ()),
            temp_prefix=self.temp_prefix,
        )

    @property
    def cleaning(self) -> CleaningConfig:
        return CleaningConfig(float(self.temp_cap), float(self.outlier_alpha), bool(self.drop_missing))

    @property
    def responses(self) -> list[str]:
        return ["fluid", "gas"] if self.response == "both" else [self.response]

    @property
    def grid(self) -> list[tuple[str, int]]:
        families = ["normal", "poisson"] if self.family == "both" else [self.family]
        degrees = [1, 2] if str(self.degree) == "both" else [int(self.degree)]
        grid = [(FAMILY_FLAGS[f], d) for f in families for d in degrees]
        if not grid:
            raise ConfigError("model grid is empty")
        return grid

    def input_path(self, default_name: str) -> Path:
        path = Path(self.input) if self.input else self.out_dir / default_name
        if not path.exists():
            raise ConfigError(f"input file {str(path)!r} does not exist")
        return path

    def validate(self) -> "RunConfig":
        choices = {"response": ("fluid", "gas", "both"), "family": ("normal", "poisson", "both")}
        for key, allowed in choices.items():
            if self.settings[key] not in allowed:
                raise ConfigError(f"{key} must be one of {allowed}, got {self.settings[key]!r}")
        if str(self.degree) not in ("1", "2", "both"):
            raise ConfigError(f"degree must be 1, 2 or both, got {self.degree!r}")
        if self.truth_family not in FAMILY_FLAGS or int(self.truth_degree) not in (1, 2):
            raise ConfigError("truth family/degree out of range")
        if int(self.top_k) < 1:
            raise ConfigError("top_k must be >= 1")
        if int(self.bins) < 1:
            raise ConfigError("bins must be >= 1")
        self.cleaning  # noqa: B018  (validates cap and alpha)
        self.grid  # noqa: B018
        return self

    def digest(self, inputs: Sequence[Path] = ()) -> str:
        params = {k: v for k, v in sorted(self.settings.items()) if k not in PATH_KEYS}
        h = hashlib.sha256()
        h.update(json.dumps({"command": self.command, "params": params}, sort_keys=True, default=str).encode())
        for path in inputs:
            h.update(hashlib.sha256(Path(path).read_bytes()).digest())
        return h.hexdigest()[:16]


# -- file helpers ------------------------------------------------------------


def _header(cfg: RunConfig, inputs: Sequence[Path] = ()) -> dict[str, Any]:
    return {
        "generator": "wellglm",
        "format_version": FORMAT_VERSION,
        "command": cfg.command,
        "config_digest": cfg.digest(inputs),
    }


def _header_line(cfg: RunConfig, inputs: Sequence[Path] = ()) -> str:
    h = _header(cfg, inputs)
    return f"{h['generator']} format_version={h['format_version']} command={h['command']} config_digest={h['config_digest']}"


def _write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def _write_json(path: Path, header: dict, body: dict) -> Path:
    return _write_text(path, json.dumps({"header": header, **body}, indent=1) + "\n")


def _fmt(x: float) -> str:
    x = float(x)
    return "" if np.isnan(x) else repr(x)


def _write_table(path: Path, header_line: str, columns: Sequence[str], rows) -> Path:
    buf = io.StringIO()
    buf.write(f"# {header_line}\n")
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(v if isinstance(v, str) else _fmt(v) if isinstance(v, float) else str(v) for v in row) + "\n")
    return _write_text(path, buf.getvalue())


def _slug(text: str) -> str:
    return "".join(c if c.isalnum() or c in "-_" else "_" for c in text)


def _model_stem(well: str, response: str, model: str) -> str:
    return f"{_slug(well)}__{response}__{model}"


def _load_models(cfg: RunConfig) -> list[tuple[Path, FittedModel]]:
    d = cfg.models_dir
    if not d.is_dir():
        raise ConfigError(f"models directory {str(d)!r} does not exist")
    wanted = {model_name(f, deg) for f, deg in cfg.grid}
    out = []
    for path in sorted(d.glob("*.json")):
        model = loads_model(path.read_text(encoding="utf-8"))
        meta = model.meta
        if meta.get("response") not in cfg.responses or meta.get("model") not in wanted:
            continue
        out.append((path, model))
    if not out:
        raise ConfigError(f"no model documents matching the selection in {str(d)!r}")
    return out


def _training_rows(series: WellSeries, model: FittedModel) -> WellSeries:
    response = model.meta["response"]
    rows = drop_incomplete_rows(series, response)
    last = model.meta.get("train_last_day")
    if last is not None:
        rows = rows.take(rows.day <= int(last))
    return rows


def _wells_by_id(path: Path, cfg: RunConfig) -> dict[str, WellSeries]:
    return {w.well_id: w for w in load_wells(path, cfg.schema)}


def _well_for(wells: dict[str, WellSeries], model: FittedModel) -> WellSeries:
    well_id = model.meta.get("well")
    if well_id not in wells:
        raise DataError(f"model refers to well {well_id!r}, which is not in the input data")
    return wells[well_id]


# -- commands ----------------------------------------------------------------


def cmd_simulate(cfg: RunConfig) -> list[Path]:
    wells, truths = [], []
    for i in range(int(cfg.wells)):
        spec = SimSpec(
            seed=int(cfg.seed) * 1000 + i,
            n_rows=int(cfg.rows),
            p=int(cfg.thermocouples),
            true_family=FAMILY_FLAGS[cfg.truth_family],
            true_degree=int(cfg.truth_degree),
            gas_missing_rate=float(cfg.gas_missing_rate),
            well_id=f"KA{i + 1:02d}/KP{i + 1:02d}",
        )
        series, truth = simulate_well(spec)
        wells.append(series)
        truths.append({"spec": spec_to_dict(spec), "truth": truth.to_dict()})
    buf = io.StringIO()
    write_wells(wells, buf, [_header_line(cfg)])
    data = _write_text(cfg.out_dir / "wells.csv", buf.getvalue())
    truth = _write_json(cfg.out_dir / "truth.json", _header(cfg), {"wells": truths})
    return [data, truth]


def cmd_clean(cfg: RunConfig) -> list[Path]:
    src = cfg.input_path("wells.csv")
    clean = cfg.cleaning
    wells = load_wells(src, cfg.schema)
    kept, summary, flagged_rows = [], [], []
    for w in wells:
        capped, n_capped = cap_temperatures(w, clean.temp_cap)
        complete = complete_rows(capped)
        data = capped.temps[complete]
        if cfg.screen_responses:
            resp = np.column_stack([capped.fluid_prod, capped.gas_prod])[complete]
            ok = np.all(np.isfinite(resp), axis=1)
            data, idx = np.column_stack([data, resp])[ok], np.flatnonzero(complete)[ok]
        else:
            idx = np.flatnonzero(complete)
        outlier = np.zeros(capped.n, dtype=bool)
        regularized = False
        cutoff = float("nan")
        if data.shape[0] > data.shape[1]:
            screen = flag_outliers(mahalanobis(data, list(capped.temp_labels)), clean.outlier_alpha)
            outlier[idx[screen.flags]] = True
            regularized = screen.regularized
            cutoff = screen.cutoff
            for i, d in zip(idx[screen.flags], screen.distances[screen.flags]):
                flagged_rows.append((w.well_id, int(capped.day[i]), float(d), cutoff))
        keep = ~outlier
        if clean.drop_missing:
            keep &= complete
        result = capped.take(keep)
        if result.n == 0:
            raise DataError(f"well {w.well_id}: cleaning removed every row")
        kept.append(result)
        summary.append(
            {
                "well": w.well_id,
                "rows_in": w.n,
                "cells_capped": n_capped,
                "rows_missing_temperature": int((~complete).sum()),
                "outliers_flagged": int(outlier.sum()),
                "rows_dropped": int(w.n - result.n),
                "rows_out": result.n,
                "rows_missing_fluid": int((~np.isfinite(result.fluid_prod)).sum()),
                "rows_missing_gas": int((~np.isfinite(result.gas_prod)).sum()),
                "outlier_cutoff": None if np.isnan(cutoff) else cutoff,
                "covariance_regularized": regularized,
            }
        )
    line = _header_line(cfg, [src])
    buf = io.StringIO()
    write_wells(kept, buf, [line])
    out = [_write_text(cfg.out_dir / "cleaned.csv", buf.getvalue())]
    totals = {
        k: sum(s[k] for s in summary) for k in ("cells_capped", "outliers_flagged", "rows_dropped")
    }
    body = {
        "temp_cap": clean.temp_cap,
        "outlier_alpha": clean.outlier_alpha,
        "screened_columns": "temperatures+responses" if cfg.screen_responses else "temperatures",
        "totals": totals,
        "wells": summary,
    }
    out.append(_write_json(cfg.out_dir / "cleaning_summary.json", _header(cfg, [src]), body))
    out.append(_write_table(cfg.out_dir / "outliers.csv", line, ["well", "day", "distance", "cutoff"], flagged_rows))
    return out


def cmd_fit(cfg: RunConfig) -> list[Path]:
    src = cfg.input_path("cleaned.csv")
    wells = load_wells(src, cfg.schema)
    header = _header(cfg, [src])
    out = []
    for w in wells:
        for response in cfg.responses:
            rows = drop_incomplete_rows(w, response)
            train, _ = holdout_split(rows, float(cfg.holdout_fraction))
            y = train.response(response)
            for family, degree in cfg.grid:
                spec = FeatureSpec.fitted(train.temps, train.temp_labels, degree)
                model = fit(expand(train.temps, spec), y, family)
                name = model_name(family, degree)
                model = replace(
                    model,
                    meta={
                        "well": w.well_id,
                        "response": response,
                        "model": name,
                        "train_first_day": int(train.day[0]),
                        "train_last_day": int(train.day[-1]),
                    },
                )
                path = cfg.models_dir / f"{_model_stem(w.well_id, response, name)}.json"
                out.append(_write_text(path, dumps_model(model, header)))
    return out


def cmd_predict(cfg: RunConfig) -> list[Path]:
    src = cfg.input_path("cleaned.csv")
    wells = _wells_by_id(src, cfg)
    out = []
    for path, model in _load_models(cfg):
        w = _well_for(wells, model)
        ok = complete_rows(w)
        rows = w.take(ok)
        yhat = predict(model, rows.temps)
        y = rows.response(model.meta["response"])
        line = _header_line(cfg, [src, path])
        table = [(rows.well_id, int(d), float(a), float(p)) for d, a, p in zip(rows.day, y, yhat)]
        target = cfg.out_dir / "predictions" / f"{path.stem}.csv"
        out.append(_write_table(target, line, ["well", "day", "actual", "predicted"], table))
    return out


def _fits(cfg: RunConfig, src: Path):
    wells = _wells_by_id(src, cfg)
    for path, model in _load_models(cfg):
        rows = _training_rows(_well_for(wells, model), model)
        y = rows.response(model.meta["response"])
        yield path, model, rows, y, predict(model, rows.temps)


def cmd_compare(cfg: RunConfig) -> list[Path]:
    src = cfg.input_path("cleaned.csv")
    entries, inputs = [], [src]
    for path, model, _, y, yhat in _fits(cfg, src):
        entries.append((model.meta["well"], model.meta["response"], model.meta["model"], y, yhat))
        inputs.append(path)
    table = build_comparison(entries)
    line = _header_line(cfg, inputs)
    return [
        _write_text(cfg.out_dir / "comparison.txt", f"# {line}\n" + table.to_text()),
        _write_text(cfg.out_dir / "comparison.csv", f"# {line}\n" + table.to_csv()),
    ]


def cmd_effects(cfg: RunConfig) -> list[Path]:
    top_k = int(cfg.top_k)
    models = _load_models(cfg)
    line = _header_line(cfg, [p for p, _ in models])
    out, text = [], [f"# {line}"]
    for path, model in models:
        ranked = [e for e in wald_effects(model) if e.status != "degenerate"][:top_k]
        rows = [
            (i + 1, e.label, float(e.estimate), float(e.std_error), float(e.p_value), float(e.log_worth), e.status)
            for i, e in enumerate(ranked)
        ]
        cols = ["rank", "term", "estimate", "std_error", "p_value", "log_worth", "status"]
        out.append(_write_table(cfg.out_dir / "effects" / f"{path.stem}.csv", line, cols, rows))
        meta = model.meta
        text.append(f"Effect Summary {meta['well']} {meta['response']} {meta['model']} (top {top_k})")
        text.append(f"{'Source':<40}{'LogWorth':>12}{'PValue':>14}")
        for e in ranked:
            text.append(f"{e.label:<40}{e.log_worth:>12.3f}{e.p_value:>14.5g}")
        text.append("")
    out.append(_write_text(cfg.out_dir / "effects.txt", "\n".join(text)))
    return out


def _parse_window(window) -> tuple[int, int] | None:
    if window in (None, ""):
        return None
    if isinstance(window, str):
        try:
            lo, hi = (int(v) for v in window.split(":"))
        except ValueError:
            raise ConfigError(f"window must look like START:END, got {window!r}") from None
        return lo, hi
    lo, hi = window
    return int(lo), int(hi)


def cmd_residuals(cfg: RunConfig) -> list[Path]:
    src = cfg.input_path("cleaned.csv")
    window = _parse_window(cfg.window)
    out = []
    series: dict[tuple[str, str], dict[str, Any]] = {}
    for path, model, rows, y, yhat in _fits(cfg, src):
        line = _header_line(cfg, [src, path])
        rep = residual_report(y, yhat, int(cfg.bins))
        sc = scatter_data(y, yhat)
        base = cfg.out_dir / "residuals" / path.stem
        body = {
            "well": model.meta["well"],
            "response": model.meta["response"],
            "model": model.meta["model"],
            "n": rep.n,
            "location_mu": rep.location_mu,
            "dispersion_sigma": rep.dispersion_sigma,
            "se_mu": rep.se_mu,
            "se_sigma": rep.se_sigma,
            "sigma_estimator": "mle",
            "identity_line": list(sc.identity_line),
        }
        out.append(_write_json(Path(f"{base}_report.json"), _header(cfg, [src, path]), body))
        bins = [(b.left, b.right, b.count, b.density) for b in rep.histogram]
        out.append(
            _write_table(Path(f"{base}_histogram.csv"), line, ["bin_left", "bin_right", "count", "normal_density"], bins)
        )
        out.append(
            _write_table(Path(f"{base}_scatter.csv"), line, ["predicted", "actual"], [tuple(map(float, r)) for r in sc.pairs])
        )
        key = (model.meta["well"], model.meta["response"])
        entry = series.setdefault(key, {"day": rows.day, "y": y, "models": {}, "inputs": [src]})
        if np.array_equal(entry["day"], rows.day):
            entry["models"][model.meta["model"]] = yhat
            entry["inputs"].append(path)
    for (well, response), entry in sorted(series.items()):
        names, table = series_data(entry["day"], entry["y"], entry["models"], window)
        rows = [(int(r[0]), *map(float, r[1:])) for r in table]
        target = cfg.out_dir / "residuals" / f"{_slug(well)}__{response}__series.csv"
        out.append(_write_table(target, _header_line(cfg, entry["inputs"]), names, rows))
    return out


def cmd_report(cfg: RunConfig) -> list[Path]:
    out = []
    for fn in (cmd_compare, cmd_effects, cmd_residuals):
        out += fn(cfg)
    return out


COMMANDS = {
    "simulate": cmd_simulate,
    "clean": cmd_clean,
    "fit": cmd_fit,
    "predict": cmd_predict,
    "compare": cmd_compare,
    "effects": cmd_effects,
    "residuals": cmd_residuals,
    "report": cmd_report,
}


# -- argument handling -------------------------------------------------------


def _common_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    p.add_argument("--config", help="JSON file with settings (overridden by flags)")
    p.add_argument("--input", help="input data file")
    p.add_argument("--out-dir", dest="out_dir", help="directory for outputs (default: current)")
    p.add_argument("--models", help="model document directory (default: OUT_DIR/models)")
    p.add_argument("--response", choices=["fluid", "gas", "both"])
    p.add_argument("--family", choices=["normal", "poisson", "both"])
    p.add_argument("--degree", choices=["1", "2", "both"])
    p.add_argument("--temp-cap", dest="temp_cap", type=float)
    p.add_argument("--outlier-alpha", dest="outlier_alpha", type=float)
    p.add_argument("--top-k", dest="top_k", type=int)
    p.add_argument("--seed", type=int)
    schema = p.add_argument_group("input schema")
    schema.add_argument("--well-col", dest="well_col")
    schema.add_argument("--day-col", dest="day_col")
    schema.add_argument("--fluid-col", dest="fluid_col")
    schema.add_argument("--gas-col", dest="gas_col")
    schema.add_argument("--temp-cols", dest="temp_cols", help="comma-separated thermocouple columns")
    schema.add_argument("--temp-prefix", dest="temp_prefix")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="wellglm", description="GLM production forecasting from thermocouple data")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", parents=[common], help="generate synthetic wells")
    sp.add_argument("--wells", type=int, default=argparse.SUPPRESS)
    sp.add_argument("--rows", type=int, default=argparse.SUPPRESS)
    sp.add_argument("--thermocouples", type=int, default=argparse.SUPPRESS)
    sp.add_argument("--truth-family", dest="truth_family", choices=["normal", "poisson"], default=argparse.SUPPRESS)
    sp.add_argument("--truth-degree", dest="truth_degree", type=int, choices=[1, 2], default=argparse.SUPPRESS)
    sp.add_argument("--gas-missing-rate", dest="gas_missing_rate", type=float, default=argparse.SUPPRESS)

    sp = sub.add_parser("clean", parents=[common], help="cap temperatures and screen outliers")
    sp.add_argument("--screen-responses", dest="screen_responses", action="store_true", default=argparse.SUPPRESS)
    sp.add_argument("--keep-missing", dest="drop_missing", action="store_false", default=argparse.SUPPRESS)

    sp = sub.add_parser("fit", parents=[common], help="fit the model grid")
    sp.add_argument("--holdout-fraction", dest="holdout_fraction", type=float, default=argparse.SUPPRESS)

    sub.add_parser("predict", parents=[common], help="per-row predictions for each model")
    sub.add_parser("compare", parents=[common], help="measures-of-fit comparison table")
    sub.add_parser("effects", parents=[common], help="LogWorth effect summaries")
    for name in ("residuals", "report"):
        sp = sub.add_parser(name, parents=[common], help="residual diagnostics" if name == "residuals" else "compare + effects + residuals")
        sp.add_argument("--bins", type=int, default=argparse.SUPPRESS)
        sp.add_argument("--window", default=argparse.SUPPRESS, help="day range START:END for the series table")
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    flags = vars(args).copy()
    command = flags.pop("command")
    settings = dict(DEFAULTS)
    config_path = flags.pop("config", None)
    if config_path:
        try:
            with open(config_path, encoding="utf-8") as fh:
                from_file = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file {config_path!r} does not exist") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {config_path!r}: {exc}") from None
        if not isinstance(from_file, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = sorted(set(from_file) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        settings.update(from_file)
    settings.update(flags)
    return RunConfig(command, settings).validate()


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args)
        written = COMMANDS[cfg.command](cfg)
    except WellGLMError as exc:
        print(f"error code={exc.code} kind={type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error code={ConfigError.code} kind={type(exc).__name__}: {exc}", file=sys.stderr)
        return ConfigError.exit_code
    for path in written:
        print(os.fspath(path))
    return 0


if __name__ == "__main__":
    sys.exit(main())
