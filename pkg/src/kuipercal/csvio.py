"""CSV ingestion and emission.

Comma-separated, UTF-8, header in the first row. Numbers are written with 17
significant digits so that doubles survive a round trip bit for bit.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .dataset import BERNOULLI, NOMINAL, ORDINAL, Population, ValidationError, build_population


class CsvError(ValidationError):
    pass


def fmt(x: float) -> str:
    return format(float(x), ".17g")


@dataclass
class Table:
    path: str
    header: list[str]
    rows: list[list[str]]
    line_numbers: list[int]

    def has(self, name: str) -> bool:
        return name in self.header

    def column_text(self, name: str) -> list[str]:
        j = self.header.index(name)
        return [r[j] for r in self.rows]

    def column(self, name: str) -> np.ndarray:
        j = self.header.index(name)
        out = np.empty(len(self.rows))
        for i, (row, line) in enumerate(zip(self.rows, self.line_numbers)):
            try:
                out[i] = float(row[j])
            except ValueError:
                raise CsvError(
                    f"{self.path}:{line}: column {name!r}: cannot parse {row[j]!r} as a number"
                ) from None
        return out


def read_table(path: str) -> Table:
    """Read a CSV file; raises ``OSError`` for I/O problems, :class:`CsvError` for malformed content."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvError(f"{path}: file is empty; expected a header row") from None
        except csv.Error as exc:
            raise CsvError(f"{path}:1: {exc}") from None
        header = [h.strip() for h in header]
        if len(set(header)) != len(header):
            raise CsvError(f"{path}:1: duplicate column names in header")
        rows, lines = [], []
        try:
            for row in reader:
                if not row or (len(row) == 1 and not row[0].strip()):
                    continue
                if len(row) != len(header):
                    raise CsvError(
                        f"{path}:{reader.line_num}: expected {len(header)} fields, got {len(row)}"
                    )
                rows.append([c.strip() for c in row])
                lines.append(reader.line_num)
        except csv.Error as exc:
            raise CsvError(f"{path}:{reader.line_num}: {exc}") from None
    if not rows:
        raise CsvError(f"{path}: no data rows")
    return Table(path, header, rows, lines)


@dataclass
class InputSchema:
    score_column: str = "score"
    response_column: str = "response"
    weight_column: str | None = None
    nominal_columns: frozenset[str] = field(default_factory=frozenset)

    def covariate_columns(self, table: Table) -> list[str]:
        reserved = {self.score_column, self.response_column, self.weight_column}
        return [h for h in table.header if h not in reserved]

    def check(self, table: Table, need_response: bool = True) -> None:
        required = [self.score_column]
        if need_response:
            required.append(self.response_column)
        if self.weight_column is not None:
            required.append(self.weight_column)
        for name in required:
            if not table.has(name):
                raise CsvError(f"{table.path}: missing column {name!r}")
        unknown = set(self.nominal_columns) - set(self.covariate_columns(table))
        if unknown:
            raise CsvError(
                f"{table.path}: nominal columns {sorted(unknown)} are not covariate columns"
            )


def covariate_matrix(table: Table, schema: InputSchema) -> tuple[np.ndarray, list[str], list[str], dict]:
    """Covariates as floats; nominal columns holding text are coded by sorted label."""
    names = schema.covariate_columns(table)
    kinds, cols, codes = [], [], {}
    for name in names:
        if name in schema.nominal_columns:
            kinds.append(NOMINAL)
            text = table.column_text(name)
            try:
                cols.append(np.array([float(t) for t in text]))
            except ValueError:
                labels = sorted(set(text))
                lookup = {lab: i for i, lab in enumerate(labels)}
                cols.append(np.array([lookup[t] for t in text], dtype=float))
                codes[name] = labels
        else:
            kinds.append(ORDINAL)
            cols.append(table.column(name))
    x = np.column_stack(cols) if cols else np.zeros((len(table.rows), 0))
    return x, names, kinds, codes


def load_population(table: Table, schema: InputSchema, mode: str = BERNOULLI):
    """Build a population from ``table``; returns ``(population, nominal_codes)``."""
    schema.check(table)
    scores = table.column(schema.score_column)
    responses = table.column(schema.response_column)
    weights = None if schema.weight_column is None else table.column(schema.weight_column)
    x, names, kinds, codes = covariate_matrix(table, schema)
    try:
        pop = build_population(scores, responses, weights, x, kinds, mode, names)
    except ValidationError as exc:
        raise ValidationError(f"{table.path}: {exc}") from None
    return pop, codes


def write_rows(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def write_population(path: str, pop: Population) -> None:
    """Serialize in score order: score, response, weight, then covariate columns."""
    header = ["score", "response", "weight", *pop.covariate_names]
    rows = (
        [float(s), float(r), float(w), *map(float, x)]
        for s, r, w, x in zip(pop.scores, pop.responses, pop.weights, pop.covariates)
    )
    write_rows(path, header, rows)
