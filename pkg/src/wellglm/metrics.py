"""Measures of fit and the per-well model comparison table."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ShapeError, UndefinedVarianceError, WellGLMError

MODEL_ORDER = ("Normal-1DG", "Normal-2DG", "Poisson-1DG", "Poisson-2DG")
RESPONSE_ORDER = ("fluid", "gas")

# Row captions in the comparison text layout, keyed by (response, model).
_CAPTION_RESPONSE = {"fluid": "Fluid", "gas": "GAS"}
_CAPTION_MODEL = {
    "Normal-1DG": "GLM OLS 1DG",
    "Normal-2DG": "GLM OLS 2DG Poly",
    "Poisson-1DG": "GLM Poisson 1DG",
    "Poisson-2DG": "GLM Poisson 2DG Poly",
}
_BLOCK_TITLE = {"fluid": "Measures of Fit for Fluid Prod", "gas": "Measures of Fit for GAS PRODUCTION"}


def model_name(family: str, degree: int) -> str:
    fam = {"normal_identity": "Normal", "normal": "Normal", "poisson_log": "Poisson", "poisson": "Poisson"}[family]
    return f"{fam}-{degree}DG"


def _pair(y, yhat) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=float).reshape(-1)
    yhat = np.asarray(yhat, dtype=float).reshape(-1)
    if y.shape != yhat.shape:
        raise ShapeError(f"length mismatch: {y.shape[0]} observations vs {yhat.shape[0]} predictions")
    return y, yhat


def rsquare(y, yhat) -> float:
    y, yhat = _pair(y, yhat)
    if y.shape[0] < 2:
        raise UndefinedVarianceError("R-square needs at least 2 observations")
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst == 0.0:
        raise UndefinedVarianceError("response is constant; R-square is undefined")
    return 1.0 - float(np.sum((y - yhat) ** 2)) / sst


def rase(y, yhat) -> float:
    """Root average squared error."""
    y, yhat = _pair(y, yhat)
    if y.shape[0] == 0:
        raise ShapeError("no observations")
    return math.sqrt(float(np.sum((y - yhat) ** 2)) / y.shape[0])


def aae(y, yhat) -> float:
    """Average absolute error."""
    y, yhat = _pair(y, yhat)
    if y.shape[0] == 0:
        raise ShapeError("no observations")
    return float(np.sum(np.abs(y - yhat))) / y.shape[0]


@dataclass(frozen=True)
class FitMeasures:
    rsquare: float
    rase: float
    aae: float
    freq: int

    @classmethod
    def compute(cls, y, yhat) -> "FitMeasures":
        """All three measures; a measure that cannot be computed is NaN."""
        y, yhat = _pair(y, yhat)
        values = []
        for fn in (rsquare, rase, aae):
            try:
                values.append(fn(y, yhat))
            except WellGLMError:
                values.append(math.nan)
        return cls(*values, freq=int(y.shape[0]))


@dataclass(frozen=True)
class ComparisonRow:
    well_id: str
    response: str
    model: str
    measures: FitMeasures


@dataclass(frozen=True)
class ComparisonTable:
    rows: tuple[ComparisonRow, ...]

    def get(self, well_id: str, response: str, model: str) -> FitMeasures:
        for r in self.rows:
            if (r.well_id, r.response, r.model) == (well_id, response, model):
                return r.measures
        raise KeyError((well_id, response, model))

    @property
    def wells(self) -> list[str]:
        seen: list[str] = []
        for r in self.rows:
            if r.well_id not in seen:
                seen.append(r.well_id)
        return seen

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["well", "response", "model", "rsquare", "rase", "aae", "freq"])
        for r in self.rows:
            m = r.measures
            writer.writerow([r.well_id, r.response, r.model, _num(m.rsquare), _num(m.rase), _num(m.aae), m.freq])
        return buf.getvalue()

    def to_text(self) -> str:
        out = []
        for well in self.wells:
            out.append(f'Model Comparison ("{well}")')
            for response in RESPONSE_ORDER:
                rows = [r for r in self.rows if r.well_id == well and r.response == response]
                if not rows:
                    continue
                out.append(_BLOCK_TITLE[response])
                out.append(f"{'Predictor':<34}{'RSquare':>10}{'RASE':>12}{'AAE':>12}{'Freq':>8}")
                for r in rows:
                    m = r.measures
                    caption = f"{_CAPTION_RESPONSE[r.response]} {_CAPTION_MODEL.get(r.model, r.model)}"
                    out.append(
                        f"{caption:<34}{_fixed(m.rsquare, 4):>10}{_sig(m.rase):>12}{_sig(m.aae):>12}{m.freq:>8}"
                    )
            out.append("")
        return "\n".join(out)


def _num(x: float) -> str:
    return "NA" if math.isnan(x) else repr(float(x))


def _fixed(x: float, digits: int) -> str:
    return "NA" if math.isnan(x) else f"{x:.{digits}f}"


def _sig(x: float) -> str:
    if math.isnan(x):
        return "NA"
    # Five significant digits, never scientific, mirroring 9.5844 / 5941.5.
    if x == 0:
        return "0"
    digits = max(0, 4 - int(math.floor(math.log10(abs(x)))))
    return f"{x:.{digits}f}"


def build_comparison(fits: Iterable[tuple[str, str, str, Sequence[float], Sequence[float]]]) -> ComparisonTable:
    """Compute measures for each ``(well, response, model, y, yhat)`` entry.

    Rows are ordered by first appearance of the well, then fluid before gas,
    then the fixed model order.  Duplicate keys are rejected.
    """
    rows = {}
    wells: list[str] = []
    for well, response, model, y, yhat in fits:
        key = (well, response, model)
        if key in rows:
            raise ValueError(f"duplicate comparison entry {key}")
        if well not in wells:
            wells.append(well)
        rows[key] = ComparisonRow(well, response, model, FitMeasures.compute(y, yhat))

    def order(key):
        well, response, model = key
        return (
            wells.index(well),
            RESPONSE_ORDER.index(response) if response in RESPONSE_ORDER else len(RESPONSE_ORDER),
            MODEL_ORDER.index(model) if model in MODEL_ORDER else len(MODEL_ORDER),
            model,
        )

    return ComparisonTable(tuple(rows[k] for k in sorted(rows, key=order)))
