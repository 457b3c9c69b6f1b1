"""Polynomial regression bases over thermocouple temperatures.

Degree 1 is intercept plus raw main effects.  Degree 2 adds every
two-way interaction and every square, each built from centered values
``x_j - mu_j``; main effects stay uncentered.  Column order is fixed:
intercept, mains, interactions in lexicographic ``(j, k)`` order, squares.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyDatasetError, ShapeError, ValidationError

INTERCEPT = "intercept"
MAIN = "main"
INTERACTION = "interaction"
SQUARE = "square"


@dataclass(frozen=True, order=True)
class Term:
    kind: str
    j: int = -1
    k: int = -1

    @classmethod
    def intercept(cls) -> "Term":
        return cls(INTERCEPT)

    @classmethod
    def main(cls, j: int) -> "Term":
        return cls(MAIN, j)

    @classmethod
    def interaction(cls, j: int, k: int) -> "Term":
        if not j < k:
            raise ValueError(f"interaction needs j < k, got ({j}, {k})")
        return cls(INTERACTION, j, k)

    @classmethod
    def square(cls, j: int) -> "Term":
        return cls(SQUARE, j)

    def to_list(self) -> list:
        if self.kind == INTERCEPT:
            return [INTERCEPT]
        if self.kind == INTERACTION:
            return [INTERACTION, self.j, self.k]
        return [self.kind, self.j]

    @classmethod
    def from_list(cls, data: Sequence) -> "Term":
        kind = data[0]
        if kind == INTERCEPT:
            return cls.intercept()
        if kind == MAIN:
            return cls.main(int(data[1]))
        if kind == SQUARE:
            return cls.square(int(data[1]))
        if kind == INTERACTION:
            return cls.interaction(int(data[1]), int(data[2]))
        raise ValidationError(f"unknown term kind {kind!r}")


def term_label(term: Term, labels: Sequence[str]) -> str:
    """Human-readable name, e.g. ``"THERMOCOUPLE 8*THERMOCOUPLE 12"``."""
    if term.kind == INTERCEPT:
        return "Intercept"
    if term.kind == MAIN:
        return labels[term.j]
    if term.kind == INTERACTION:
        return f"{labels[term.j]}*{labels[term.k]}"
    return f"{labels[term.j]}*{labels[term.j]}"


def column_terms(p: int, degree: int) -> list[Term]:
    terms = [Term.intercept()] + [Term.main(j) for j in range(p)]
    if degree == 2:
        terms += [Term.interaction(j, k) for j in range(p) for k in range(j + 1, p)]
        terms += [Term.square(j) for j in range(p)]
    return terms


def n_columns(p: int, degree: int) -> int:
    if degree == 1:
        return 1 + p
    return 1 + 2 * p + p * (p - 1) // 2


@dataclass(frozen=True)
class FeatureSpec:
    degree: int
    predictor_labels: tuple[str, ...]
    centering_means: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.degree not in (1, 2):
            raise ValidationError(f"degree must be 1 or 2, got {self.degree}")
        object.__setattr__(self, "predictor_labels", tuple(self.predictor_labels))
        if self.degree == 2:
            if self.centering_means is None:
                raise ValidationError("degree-2 feature spec requires centering means")
            means = tuple(float(m) for m in self.centering_means)
            if len(means) != len(self.predictor_labels):
                raise ValidationError(
                    f"{len(means)} centering means for {len(self.predictor_labels)} predictors"
                )
            object.__setattr__(self, "centering_means", means)
        elif self.centering_means is not None:
            raise ValidationError("degree-1 feature spec must not carry centering means")

    @property
    def intercept(self) -> bool:
        return True

    @property
    def p(self) -> int:
        return len(self.predictor_labels)

    @property
    def terms(self) -> list[Term]:
        return column_terms(self.p, self.degree)

    @property
    def labels(self) -> list[str]:
        return [term_label(t, self.predictor_labels) for t in self.terms]

    @classmethod
    def fitted(cls, temps: np.ndarray, labels: Sequence[str], degree: int) -> "FeatureSpec":
        """Spec for ``degree`` with centering means taken from ``temps``."""
        means = tuple(compute_centering_means(temps)) if degree == 2 else None
        return cls(degree, tuple(labels), means)


@dataclass(frozen=True)
class DesignMatrix:
    values: np.ndarray
    column_terms: tuple[Term, ...]
    column_labels: tuple[str, ...]
    spec: FeatureSpec | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def compute_centering_means(temps: np.ndarray) -> np.ndarray:
    temps = np.asarray(temps, dtype=float)
    if temps.ndim == 1:
        temps = temps.reshape(-1, 1)
    if temps.shape[0] == 0:
        raise EmptyDatasetError("cannot compute centering means of an empty matrix")
    return temps.mean(axis=0)


def expand(temps: np.ndarray, spec: FeatureSpec) -> DesignMatrix:
    """Materialize the regression basis described by ``spec``."""
    x = np.asarray(temps, dtype=float)
    if x.ndim == 1 and spec.p == 1:
        x = x.reshape(-1, 1)
    if x.ndim != 2 or x.shape[1] != spec.p:
        raise ShapeError(f"expected {spec.p} predictor columns, got shape {x.shape}")
    n, p = x.shape
    terms = spec.terms
    out = np.empty((n, len(terms)))
    out[:, 0] = 1.0
    out[:, 1 : 1 + p] = x
    if spec.degree == 2:
        c = x - np.asarray(spec.centering_means)
        col = 1 + p
        for j in range(p):
            for k in range(j + 1, p):
                out[:, col] = c[:, j] * c[:, k]
                col += 1
        out[:, col : col + p] = c * c
    labels = tuple(term_label(t, spec.predictor_labels) for t in terms)
    return DesignMatrix(out, tuple(terms), labels, spec)
