"""Tabular datasets: CSV and ARFF I/O, dummy encoding, splitting and scaling."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

MISSING = ("", "?")


class ParseError(ValueError):
    pass


class EncodingError(ValueError):
    pass


@dataclass(frozen=True)
class Column:
    name: str
    kind: str = "numeric"  # numeric | nominal | dummy
    categories: tuple[str, ...] = ()
    source: Optional[str] = None  # for dummy columns: the nominal attribute they expand
    category: Optional[str] = None


@dataclass
class Dataset:
    """Column-oriented table. Numeric columns are float arrays (NaN = missing);
    nominal columns are object arrays of str (None = missing)."""

    columns: list[Column]
    values: list[np.ndarray]
    relation: str = "data"
    target: Optional[np.ndarray] = None
    target_column: Optional[Column] = None
    is_test: Optional[np.ndarray] = None
    scale_min: Optional[np.ndarray] = None
    scale_max: Optional[np.ndarray] = None

    @property
    def n_rows(self) -> int:
        if self.values:
            return len(self.values[0])
        return 0 if self.target is None else len(self.target)

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def column(self, name: str) -> np.ndarray:
        return self.values[self.names.index(name)]

    def matrix(self) -> np.ndarray:
        if any(c.kind == "nominal" for c in self.columns):
            raise EncodingError("nominal columns present; dummy_encode first")
        if not self.values:
            return np.zeros((self.n_rows, 0))
        return np.column_stack([v.astype(np.float64) for v in self.values])

    def _rows(self, test: bool) -> np.ndarray:
        if self.is_test is None:
            return np.ones(self.n_rows, bool) if not test else np.zeros(self.n_rows, bool)
        return self.is_test if test else ~self.is_test

    def train_matrix(self) -> np.ndarray:
        return self.matrix()[self._rows(False)]

    def test_matrix(self) -> np.ndarray:
        return self.matrix()[self._rows(True)]

    def train_target(self) -> Optional[np.ndarray]:
        return None if self.target is None else self.target[self._rows(False)]

    def test_target(self) -> Optional[np.ndarray]:
        return None if self.target is None else self.target[self._rows(True)]


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def _typed_column(name: str, raw: Sequence[str]) -> tuple[Column, np.ndarray]:
    present = [s for s in raw if s.strip() not in MISSING]
    if all(_is_number(s) for s in present):
        vals = np.array([float(s) if s.strip() not in MISSING else np.nan for s in raw])
        return Column(name), vals
    vals = np.array([s if s.strip() not in MISSING else None for s in raw], dtype=object)
    cats = tuple(sorted({s for s in vals if s is not None}))
    return Column(name, "nominal", cats), vals


def parse_csv(data, has_header: bool = True, delimiter: str = ",") -> Dataset:
    """Read a rectangular CSV table; non-numeric columns become nominal."""
    text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
    rows = list(csv.reader(io.StringIO(text), delimiter=delimiter))
    numbered = [(i + 1, r) for i, r in enumerate(rows) if r]
    if not numbered:
        raise ParseError("empty CSV input")
    if has_header:
        header = numbered[0][1]
        numbered = numbered[1:]
    else:
        header = [f"V{j + 1}" for j in range(len(numbered[0][1]))]
    for line, row in numbered:
        if len(row) != len(header):
            raise ParseError(f"line {line}: expected {len(header)} fields, found {len(row)}")
    columns, values = [], []
    for j, name in enumerate(header):
        col, vals = _typed_column(name, [r[j] for _, r in numbered])
        columns.append(col)
        values.append(vals)
    return Dataset(columns, values)


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "?"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(ds: Dataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = list(ds.values)
    names = ds.names
    if ds.target is not None:
        cols.append(ds.target)
        names = names + [ds.target_column.name]
    w.writerow(names)
    for i in range(ds.n_rows):
        w.writerow(["" if _fmt(c[i]) == "?" else _fmt(c[i]) for c in cols])
    return buf.getvalue()


def _split_arff_values(line: str, lineno: int) -> list[str]:
    try:
        return [v.strip() for v in next(csv.reader([line], quotechar="'", skipinitialspace=True))]
    except (csv.Error, StopIteration) as exc:
        raise ParseError(f"line {lineno}: {exc}") from None


def _arff_name(token: str) -> str:
    token = token.strip()
    if len(token) >= 2 and token[0] == token[-1] and token[0] in "'\"":
        return token[1:-1]
    return token


def parse_arff(data) -> Dataset:
    """Dense ARFF subset: numeric/real/integer and nominal attributes, '?' missing."""
    text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
    relation, attrs, rows = "data", [], []
    in_data = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        low = line.lower()
        if not in_data:
            if low.startswith("@relation"):
                relation = _arff_name(line[len("@relation"):])
            elif low.startswith("@attribute"):
                rest = line[len("@attribute"):].strip()
                if rest[0] in "'\"":
                    end = rest.index(rest[0], 1)
                    name, typ = rest[1:end], rest[end + 1:].strip()
                else:
                    name, _, typ = rest.partition(" ") if " " in rest else rest.partition("\t")
                    typ = typ.strip()
                if typ.startswith("{"):
                    if not typ.endswith("}"):
                        raise ParseError(f"line {lineno}: unterminated nominal set")
                    cats = tuple(_arff_name(c) for c in _split_arff_values(typ[1:-1], lineno) if c)
                    attrs.append(Column(name, "nominal", cats))
                elif typ.lower() in ("numeric", "real", "integer"):
                    attrs.append(Column(name))
                else:
                    raise ParseError(f"line {lineno}: unknown attribute type {typ!r} for {name!r}")
            elif low.startswith("@data"):
                in_data = True
            else:
                raise ParseError(f"line {lineno}: unexpected header line {line!r}")
            continue
        vals = _split_arff_values(line, lineno)
        if len(vals) != len(attrs):
            raise ParseError(f"line {lineno}: expected {len(attrs)} values, found {len(vals)}")
        rows.append((lineno, vals))
    if not attrs:
        raise ParseError("no @attribute declarations")
    values = []
    for j, col in enumerate(attrs):
        if col.kind == "numeric":
            out = np.empty(len(rows))
            for i, (lineno, r) in enumerate(rows):
                s = r[j]
                if s == "?":
                    out[i] = np.nan
                elif _is_number(s):
                    out[i] = float(s)
                else:
                    raise ParseError(f"line {lineno}: non-numeric value {s!r} for {col.name!r}")
        else:
            out = np.array([None if r[j] == "?" else _arff_name(r[j]) for _, r in rows], dtype=object)
        values.append(out)
    return Dataset(attrs, values, relation=relation)


def _arff_quote(s: str) -> str:
    return f"'{s}'" if any(ch in s for ch in " ,{}'%\t") else s


def write_arff(ds: Dataset) -> str:
    lines = [f"@relation {_arff_quote(ds.relation)}", ""]
    cols, vals = list(ds.columns), list(ds.values)
    if ds.target is not None:
        tc = ds.target_column
        cols.append(tc)
        vals.append(ds.target if tc.kind != "nominal" else
                    np.array([tc.categories[int(t)] for t in ds.target], dtype=object))
    for c in cols:
        typ = "{" + ",".join(_arff_quote(x) for x in c.categories) + "}" if c.kind == "nominal" else "numeric"
        lines.append(f"@attribute {_arff_quote(c.name)} {typ}")
    lines += ["", "@data"]
    for i in range(len(vals[0]) if vals else 0):
        lines.append(",".join(_arff_quote(_fmt(v[i])) if c.kind == "nominal" else _fmt(v[i])
                              for c, v in zip(cols, vals)))
    return "\n".join(lines) + "\n"


def set_target(ds: Dataset, name: Optional[str] = None) -> Dataset:
    """Move a column (default: the last) out of the features into ``target``.

    Nominal targets become integer class ids in declared category order.
    """
    names = ds.names
    j = len(names) - 1 if name is None else names.index(name)
    col, vals = ds.columns[j], ds.values[j]
    if col.kind == "nominal":
        index = {c: i for i, c in enumerate(col.categories)}
        target = np.array([index.get(v, -1) for v in vals], dtype=np.int64)
    else:
        target = vals.astype(np.float64)
    return replace(ds, columns=ds.columns[:j] + ds.columns[j + 1:],
                   values=ds.values[:j] + ds.values[j + 1:], target=target, target_column=col)


def split(ds: Dataset, test_fraction: float, seed: int) -> Dataset:
    """Seeded shuffle, then the first ``round(n * test_fraction)`` rows go to test."""
    if not 0.0 <= test_fraction < 1.0:
        raise ValueError(f"test_fraction must lie in [0, 1), got {test_fraction}")
    n = ds.n_rows
    order = np.random.Generator(np.random.PCG64(seed)).permutation(n)
    is_test = np.zeros(n, bool)
    is_test[order[: int(round(n * test_fraction))]] = True
    return replace(ds, is_test=is_test)


def impute_missing(ds: Dataset) -> Dataset:
    """Numeric gaps get the training-split mean; nominal gaps the training-split mode."""
    train = ds._rows(False)
    values = []
    for col, v in zip(ds.columns, ds.values):
        if col.kind == "nominal":
            seen = [x for x in v[train] if x is not None]
            if any(x is None for x in v):
                fill = max(sorted(set(seen)), key=seen.count) if seen else col.categories[0]
                v = np.array([fill if x is None else x for x in v], dtype=object)
        else:
            miss = np.isnan(v)
            if miss.any():
                ok = train & ~miss
                v = np.where(miss, v[ok].mean() if ok.any() else 0.0, v)
        values.append(v)
    return replace(ds, values=values)


def dummy_encode(ds: Dataset, categories: Optional[dict] = None) -> Dataset:
    """Expand each nominal column with c categories into c indicator columns.

    ``categories`` may fix the category list per column (e.g. from training
    data); a value outside that list raises :class:`EncodingError`.
    """
    categories = categories or {}
    columns, values = [], []
    for col, v in zip(ds.columns, ds.values):
        if col.kind != "nominal":
            columns.append(col)
            values.append(v)
            continue
        cats = tuple(categories.get(col.name, col.categories))
        index = {c: i for i, c in enumerate(cats)}
        codes = np.empty(len(v), dtype=np.int64)
        for i, x in enumerate(v):
            if x not in index:
                raise EncodingError(f"column {col.name!r}: unseen category {x!r}")
            codes[i] = index[x]
        for i, c in enumerate(cats):
            columns.append(Column(f"{col.name}={c}", "dummy", source=col.name, category=c))
            values.append((codes == i).astype(np.float64))
    return replace(ds, columns=columns, values=values)


def minmax_scale(ds: Dataset) -> Dataset:
    """Scale every column to [0, 1] with training-split min/max.

    Constant columns map to 0. Test values outside the training range are clamped.
    """
    X = ds.matrix()
    train = X[ds._rows(False)]
    lo, hi = train.min(axis=0), train.max(axis=0)
    span = hi - lo
    safe = np.where(span > 0, span, 1.0)
    Z = np.where(span > 0, (X - lo) / safe, 0.0)
    Z = np.clip(Z, 0.0, 1.0)
    return replace(ds, values=[Z[:, j] for j in range(Z.shape[1])], scale_min=lo, scale_max=hi)


def unscale(ds: Dataset, Z) -> np.ndarray:
    """Invert :func:`minmax_scale` (exact on non-constant columns)."""
    return np.asarray(Z) * (ds.scale_max - ds.scale_min) + ds.scale_min


def prepare(ds: Dataset, target: Optional[str] = None, test_fraction: float = 0.2,
            seed: int = 0, has_target: bool = True) -> Dataset:
    """split -> impute -> dummy-encode -> scale, the standard tabular path.

    A dataset that already carries a split keeps it.
    """
    if has_target and ds.target is None:
        ds = set_target(ds, target)
    if ds.is_test is None:
        ds = split(ds, test_fraction, seed)
    ds = impute_missing(ds)
    ds = dummy_encode(ds)
    return minmax_scale(ds)
