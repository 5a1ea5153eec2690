"""Unbalanced country-year panel container and long-format CSV ingestion.

The dataset is immutable: every transform returns a new object. Years are
kept on a dense integer axis so that lagging and differencing are plain
column shifts. Missing cells are NaN.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "PanelError",
    "PanelDataset",
    "SeriesTransform",
    "CrossSectionAverageSet",
    "load_long_csv",
    "write_long_csv",
    "load_country_csv",
    "apply_transform",
    "cross_section_averages",
    "restrict",
]

MISSING_TOKENS = {"", "NA"}


class PanelError(ValueError):
    """Raised for malformed panel input or ill-posed panel operations."""


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class PanelDataset:
    """Country-year panel with named variables.

    countries are ordered identifiers, years a consecutive integer range,
    and each variable a (n_countries, n_years) float array with NaN for
    cells that are not observed. Within every country, the observed years
    of each variable must form one contiguous run.
    """

    countries: tuple[str, ...]
    years: np.ndarray
    values: Mapping[str, np.ndarray]

    def __post_init__(self) -> None:
        countries = tuple(str(c) for c in self.countries)
        if len(countries) == 0:
            raise PanelError("panel needs at least one country")
        if len(set(countries)) != len(countries):
            raise PanelError("duplicate country identifiers")
        years = np.asarray(self.years, dtype=np.int64)
        if years.ndim != 1 or years.size == 0:
            raise PanelError("years must be a non-empty 1-d integer array")
        if not np.array_equal(years, np.arange(years[0], years[-1] + 1)):
            raise PanelError("years must be consecutive integers")
        if not self.values:
            raise PanelError("panel needs at least one variable")
        vals: dict[str, np.ndarray] = {}
        for name, arr in self.values.items():
            a = np.asarray(arr, dtype=float)
            if a.shape != (len(countries), years.size):
                raise PanelError(
                    f"variable {name!r} has shape {a.shape}, expected "
                    f"{(len(countries), years.size)}"
                )
            _check_contiguous(name, countries, years, a)
            vals[name] = _freeze(a.copy())
        object.__setattr__(self, "countries", countries)
        object.__setattr__(self, "years", _freeze(years))
        object.__setattr__(self, "values", MappingProxyType(vals))

    # -- basic introspection ------------------------------------------------

    @property
    def n_countries(self) -> int:
        return len(self.countries)

    @property
    def n_years(self) -> int:
        return int(self.years.size)

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(self.values.keys())

    def country_index(self, country: str) -> int:
        try:
            return self.countries.index(country)
        except ValueError:
            raise PanelError(f"unknown country {country!r}") from None

    def observed_span(self, var: str, country: str) -> tuple[int, int] | None:
        """First and last observed year of `var` for `country`, or None."""
        a = self.values[var][self.country_index(country)]
        idx = np.flatnonzero(~np.isnan(a))
        if idx.size == 0:
            return None
        return int(self.years[idx[0]]), int(self.years[idx[-1]])

    def counts(self, var: str) -> np.ndarray:
        """Observed-year count per country for `var`."""
        if var not in self.values:
            raise PanelError(f"unknown variable {var!r}")
        return (~np.isnan(self.values[var])).sum(axis=1)

    def with_variable(self, name: str, arr: np.ndarray) -> "PanelDataset":
        """Return a copy with one extra variable (name must be new)."""
        if name in self.values:
            raise PanelError(f"variable {name!r} already present")
        vals = dict(self.values)
        vals[name] = np.asarray(arr, dtype=float)
        return PanelDataset(self.countries, self.years, vals)

    def equals(self, other: "PanelDataset") -> bool:
        if self.countries != other.countries:
            return False
        if not np.array_equal(self.years, other.years):
            return False
        if set(self.values) != set(other.values):
            return False
        return all(
            np.array_equal(self.values[v], other.values[v], equal_nan=True)
            for v in self.values
        )


def _check_contiguous(
    name: str, countries: Sequence[str], years: np.ndarray, a: np.ndarray
) -> None:
    # Gaps inside a country's observed run make lags ill-defined, so they
    # are rejected outright instead of being imputed.
    obs = ~np.isnan(a)
    for i, row in enumerate(obs):
        idx = np.flatnonzero(row)
        if idx.size and idx[-1] - idx[0] + 1 != idx.size:
            gap_year = int(years[idx[0] + np.flatnonzero(~row[idx[0] : idx[-1] + 1])[0]])
            raise PanelError(
                f"variable {name!r}, country {countries[i]!r}: year run is not "
                f"contiguous (first gap at {gap_year})"
            )


@dataclass(frozen=True)
class SeriesTransform:
    """Derive a new series from an existing one.

    kind is "lag" (order k >= 1), "diff" (first difference) or "log".
    """

    kind: str
    source: str
    target: str
    k: int = 1

    def __post_init__(self) -> None:
        if self.kind not in ("lag", "diff", "log"):
            raise PanelError(f"unknown transform kind {self.kind!r}")
        if self.kind == "lag" and self.k < 1:
            raise PanelError("lag order must be >= 1")


def apply_transform(panel: PanelDataset, t: SeriesTransform) -> PanelDataset:
    """Add the derived series `t.target` to a copy of `panel`.

    Lagged values are defined only where the source is observed k years
    earlier, so each country loses its first k years (first year for a
    difference). The input panel is never mutated.
    """
    if t.source not in panel.values:
        raise PanelError(f"unknown source variable {t.source!r}")
    if t.target in panel.values:
        raise PanelError(f"target variable {t.target!r} already present")
    src = panel.values[t.source]
    if t.kind == "lag":
        out = np.full_like(src, np.nan)
        out[:, t.k :] = src[:, : -t.k]
    elif t.kind == "diff":
        out = np.full_like(src, np.nan)
        out[:, 1:] = src[:, 1:] - src[:, :-1]
    else:  # log
        with np.errstate(invalid="ignore", divide="ignore"):
            bad = np.nanmin(src) <= 0 if np.any(~np.isnan(src)) else False
            if bad:
                raise PanelError(
                    f"log transform of {t.source!r}: non-positive values present"
                )
            out = np.log(src)
    return panel.with_variable(t.target, out)


@dataclass(frozen=True)
class CrossSectionAverageSet:
    """Per-year simple averages over the countries observed in that year.

    means[var][j] is the unweighted mean at years[j]; counts[var][j] the
    number of contributing countries. Years where nothing is observed get
    NaN and count 0.
    """

    years: np.ndarray
    means: Mapping[str, np.ndarray]
    counts: Mapping[str, np.ndarray]

    def __post_init__(self) -> None:
        object.__setattr__(self, "years", _freeze(np.asarray(self.years, dtype=np.int64)))
        object.__setattr__(
            self, "means", MappingProxyType({k: _freeze(v) for k, v in self.means.items()})
        )
        object.__setattr__(
            self, "counts", MappingProxyType({k: _freeze(v) for k, v in self.counts.items()})
        )


def cross_section_averages(
    panel: PanelDataset, variables: Sequence[str]
) -> CrossSectionAverageSet:
    """Simple per-year cross-country means of the named variables.

    Every country observed at year t contributes, regardless of whether it
    later survives an estimation subsample restriction.
    """
    means: dict[str, np.ndarray] = {}
    counts: dict[str, np.ndarray] = {}
    for var in variables:
        if var not in panel.values:
            raise PanelError(f"unknown variable {var!r}")
        a = panel.values[var]
        obs = ~np.isnan(a)
        cnt = obs.sum(axis=0)
        with np.errstate(invalid="ignore"):
            s = np.where(obs, a, 0.0).sum(axis=0)
            m = np.where(cnt > 0, s / np.maximum(cnt, 1), np.nan)
        means[var] = m.astype(float)
        counts[var] = cnt.astype(np.int64)
    return CrossSectionAverageSet(panel.years.copy(), means, counts)


def restrict(
    panel: PanelDataset,
    var: str,
    min_T: int | None = None,
    balanced_window: tuple[int, int] | None = None,
) -> PanelDataset:
    """Drop countries by an observation rule on the designated variable.

    min_T drops countries with fewer observed years of `var`. balanced_window
    (year0, year1) keeps only countries observed on every year of the window.
    Years are not trimmed; the surviving countries keep their full series.
    The operation is idempotent.
    """
    if (min_T is None) == (balanced_window is None):
        raise PanelError("give exactly one of min_T or balanced_window")
    if var not in panel.values:
        raise PanelError(f"unknown variable {var!r}")
    a = panel.values[var]
    if min_T is not None:
        keep = (~np.isnan(a)).sum(axis=1) >= int(min_T)
    else:
        y0, y1 = balanced_window
        if y1 < y0:
            raise PanelError("balanced_window must satisfy year0 <= year1")
        sel = (panel.years >= y0) & (panel.years <= y1)
        if sel.sum() != y1 - y0 + 1:
            raise PanelError(
                f"balanced_window [{y0}, {y1}] is outside the panel's year range"
            )
        keep = (~np.isnan(a[:, sel])).all(axis=1)
    n_drop = int((~keep).sum())
    if not keep.any():
        raise PanelError(
            f"restriction on {var!r} dropped all {n_drop} countries"
        )
    if n_drop == 0:
        return panel
    countries = tuple(c for c, k in zip(panel.countries, keep) if k)
    vals = {name: arr[keep] for name, arr in panel.values.items()}
    return PanelDataset(countries, panel.years, vals)


# -- long-format CSV -------------------------------------------------------


def load_long_csv(
    path,
    country_col: str = "country",
    year_col: str = "year",
) -> PanelDataset:
    """Read a panel from `country,year,<var1>,<var2>,...` CSV.

    One row per (country, year). Empty fields and "NA" are missing. Rows
    with an unparseable year or value are reported with their line number;
    duplicate (country, year) rows and within-country year gaps are errors.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PanelError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if country_col not in header or year_col not in header:
            raise PanelError(
                f"{path}: header must contain {country_col!r} and {year_col!r}, "
                f"got {header}"
            )
        ci = header.index(country_col)
        yi = header.index(year_col)
        variables = [h for j, h in enumerate(header) if j not in (ci, yi)]
        if not variables:
            raise PanelError(f"{path}: no variable columns in header")

        cells: dict[tuple[str, int], list[float]] = {}
        countries_in_order: list[str] = []
        seen: set[str] = set()
        for lineno, row in enumerate(reader, start=2):
            if not row or all(f.strip() == "" for f in row):
                continue
            if len(row) != len(header):
                raise PanelError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}"
                )
            country = row[ci].strip()
            if country == "":
                raise PanelError(f"{path}:{lineno}: empty country field")
            try:
                year = int(row[yi].strip())
            except ValueError:
                raise PanelError(
                    f"{path}:{lineno}: year {row[yi]!r} is not an integer"
                ) from None
            key = (country, year)
            if key in cells:
                raise PanelError(
                    f"{path}:{lineno}: duplicate row for ({country}, {year})"
                )
            parsed: list[float] = []
            for j, h in enumerate(header):
                if j in (ci, yi):
                    continue
                tok = row[j].strip()
                if tok in MISSING_TOKENS:
                    parsed.append(math.nan)
                    continue
                try:
                    parsed.append(float(tok))
                except ValueError:
                    raise PanelError(
                        f"{path}:{lineno}: value {tok!r} in column {h!r} "
                        "is not a number"
                    ) from None
            cells[key] = parsed
            if country not in seen:
                seen.add(country)
                countries_in_order.append(country)

    if not cells:
        raise PanelError(f"{path}: no data rows")
    yrs = [y for (_, y) in cells]
    years = np.arange(min(yrs), max(yrs) + 1)
    cidx = {c: i for i, c in enumerate(countries_in_order)}
    arrays = {
        v: np.full((len(countries_in_order), years.size), np.nan)
        for v in variables
    }
    for (country, year), parsed in cells.items():
        i = cidx[country]
        j = year - years[0]
        for v, x in zip(variables, parsed):
            arrays[v][i, j] = x
    return PanelDataset(tuple(countries_in_order), years, arrays)


def write_long_csv(panel: PanelDataset, path) -> None:
    """Write the panel in the same long format load_long_csv reads.

    Rows where every variable is missing are omitted; values are written
    with full float precision so a reload reproduces the dataset exactly.
    """
    variables = list(panel.variables)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["country", "year"] + variables)
        for i, country in enumerate(panel.countries):
            for j, year in enumerate(panel.years):
                row_vals = [panel.values[v][i, j] for v in variables]
                if all(math.isnan(x) for x in row_vals):
                    continue
                writer.writerow(
                    [country, int(year)]
                    + ["" if math.isnan(x) else format(x, ".17g") for x in row_vals]
                )


def load_country_csv(path, country_col: str = "country") -> dict[str, dict[str, float]]:
    """Read a cross-country table `country,<z1>,<z2>,...` keyed by country.

    Used for time-invariant covariates. Missing tokens are NaN. Returns
    {country: {column: value}}.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise PanelError(f"{path}: empty file") from None
        if country_col not in header:
            raise PanelError(f"{path}: header must contain {country_col!r}")
        ci = header.index(country_col)
        cols = [h for j, h in enumerate(header) if j != ci]
        out: dict[str, dict[str, float]] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(f.strip() == "" for f in row):
                continue
            if len(row) != len(header):
                raise PanelError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}"
                )
            country = row[ci].strip()
            if country in out:
                raise PanelError(f"{path}:{lineno}: duplicate country {country!r}")
            rec: dict[str, float] = {}
            for j, h in enumerate(header):
                if j == ci:
                    continue
                tok = row[j].strip()
                if tok in MISSING_TOKENS:
                    rec[h] = math.nan
                else:
                    try:
                        rec[h] = float(tok)
                    except ValueError:
                        raise PanelError(
                            f"{path}:{lineno}: value {tok!r} in column {h!r} "
                            "is not a number"
                        ) from None
            out[country] = rec
    if not out:
        raise PanelError(f"{path}: no data rows")
    return out
