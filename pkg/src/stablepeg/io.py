"""Config files, CSV series and report files.

Config files are plain ``key = value`` lines with dotted prefixes::

    spec.design = Crypto
    spec.total_supply = 100
    economy.r_c.family = linear
    economy.r_c.alpha = 0.5
    grid.theta_min = 0.5
    grid.theta_max = 3

``#`` starts a comment. Numbers written to CSV use 17 significant digits so
they read back bit-identical.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from datetime import date
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .core_model import DEFAULTS, Design, EconomyFunctions, StablecoinSpec, economy_problems, make_economy
from .equilibrium import Zone, ZoneReport
from .errors import NonPositivePrice, ParseError, StablePegError, ValidationError
from .stats import Band, CausalityReport, DeviationReport, Point, PriceSeries, Target, VSeries

REQUIRED = ("spec.design", "spec.total_supply", "grid.theta_min", "grid.theta_max")
SECTIONS = ("spec", "economy", "grid", "dynamics", "analysis")
DEFAULT_BANDS: dict[str, Band] = {"FRAX": Band(0.9933, 1.0033)}


def fmt(x: float | None) -> str:
    """17-significant-digit text that parses back to the same float."""
    if x is None:
        return ""
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(float(x), ".17g")


def _parse_float(text: str) -> float | None:
    return None if text == "" else float(text)


# -- config ------------------------------------------------------------------


@dataclass(frozen=True)
class GridConfig:
    theta_min: float
    theta_max: float
    points: int = 101

    def thetas(self, points: int | None = None) -> np.ndarray:
        return np.linspace(self.theta_min, self.theta_max, points or self.points)


@dataclass(frozen=True)
class DynamicsConfig:
    N: int = 20
    max_iter: int = 1000
    seed: int | None = None


@dataclass(frozen=True)
class AnalysisConfig:
    lag: int = 1
    alpha: float = 0.1


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    spec: StablecoinSpec
    economy: EconomyFunctions
    economy_params: Mapping[str, Any]
    grid: GridConfig
    dynamics: DynamicsConfig = DynamicsConfig()
    analysis: AnalysisConfig = AnalysisConfig()


def _coerce(text: str) -> Any:
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def parse_kv(text: str, source: str = "<config>") -> dict[str, Any]:
    out: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError("expected 'key = value'", f"{source}:{lineno}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key or not value:
            raise ParseError("empty key or value", f"{source}:{lineno}")
        if key in out:
            raise ParseError(f"duplicate key {key!r}", f"{source}:{lineno}")
        out[key] = _coerce(value)
    return out


def bundled_configs() -> list[str]:
    root = resources.files("stablepeg") / "configs"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".cfg"))


def resolve_config(name_or_path: str | Path) -> tuple[str, str]:
    """(name, text) for a file path or the name of a bundled config."""
    path = Path(name_or_path)
    if path.is_file():
        return path.stem, path.read_text()
    name = path.name[:-4] if path.name.endswith(".cfg") else path.name
    res = resources.files("stablepeg") / "configs" / f"{name}.cfg"
    if res.is_file():
        return name, res.read_text()
    raise ParseError(f"no config file or bundled config named {str(name_or_path)!r}", "--config")


def config_from_mapping(kv: Mapping[str, Any], name: str = "config") -> ScenarioConfig:
    missing = [k for k in REQUIRED if k not in kv]
    if missing:
        raise ParseError(f"missing required field(s): {', '.join(missing)}", missing[0])
    problems: list[str] = []
    economy: dict[str, dict[str, Any]] = {}
    for key, value in kv.items():
        parts = key.split(".")
        if parts[0] not in SECTIONS:
            problems.append(f"{key}: unknown section {parts[0]!r}")
        elif parts[0] == "economy":
            if len(parts) != 3 or parts[1] not in DEFAULTS:
                problems.append(f"{key}: expected economy.<{'|'.join(DEFAULTS)}>.<param>")
            else:
                economy.setdefault(parts[1], {})[parts[2]] = value

    def num(key, default=None, kind=float):
        if key not in kv:
            return default
        try:
            return kind(kv[key])
        except (TypeError, ValueError):
            problems.append(f"{key}: expected {kind.__name__}, got {kv[key]!r}")
            return default

    total = num("spec.total_supply")
    reserve = num("spec.fiat_reserve")
    grid = GridConfig(num("grid.theta_min"), num("grid.theta_max"), num("grid.points", 101, int))
    if grid.points is not None and grid.points < 2:
        problems.append("grid.points: must be >= 2")
    seed = num("dynamics.seed", None, int)
    dyn = DynamicsConfig(num("dynamics.n", 20, int), num("dynamics.max_iter", 1000, int), seed)
    if dyn.N is not None and dyn.N < 1:
        problems.append("dynamics.n: must be >= 1")
    if dyn.max_iter is not None and dyn.max_iter < 1:
        problems.append("dynamics.max_iter: must be >= 1")
    ana = AnalysisConfig(num("analysis.lag", 1, int), num("analysis.alpha", 0.1))
    if ana.lag is not None and ana.lag < 1:
        problems.append("analysis.lag: must be >= 1")

    spec = econ = None
    try:
        spec = StablecoinSpec(Design.parse(kv["spec.design"]), total, reserve)
    except (StablePegError, TypeError) as exc:
        problems.append(f"spec: {exc}")
    if None not in (total, grid.theta_min, grid.theta_max):
        try:
            econ = make_economy(economy, total, grid.theta_min, grid.theta_max)
            problems += [f"{type(e).__name__}: {e}" for e in economy_problems(econ)]
        except StablePegError as exc:
            problems.append(f"{type(exc).__name__}: {exc}")
    if problems:
        raise ValidationError(problems)
    return ScenarioConfig(name, spec, econ, econ.params, grid, dyn, ana)


def load_config(path: str | Path) -> ScenarioConfig:
    name, text = resolve_config(path)
    return config_from_mapping(parse_kv(text, str(path)), name)


# -- series ------------------------------------------------------------------


def _parse_date(text: str, where: str) -> date:
    try:
        return date.fromisoformat(text.strip())
    except ValueError:
        raise ParseError(f"bad ISO date {text!r}", where) from None


def load_series(path: str | Path, schema: tuple[str, str] | None = None, target: Target | None = None) -> PriceSeries | VSeries:
    """Read a ``date,price`` or ``date,v`` CSV.

    Rows are sorted by date and a repeated date keeps its last row. The value
    column picks the type: ``v`` gives a VSeries, anything else a PriceSeries.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError("empty file", str(path)) from None
        if schema is None:
            if len(header) < 2:
                raise ParseError("expected a date column and a value column", f"{path}:1")
            schema = (header[0], header[1])
        date_col, value_col = schema
        for col in schema:
            if col not in header:
                raise ParseError(f"missing column {col!r}", f"{path}:1")
        di, vi = header.index(date_col), header.index(value_col)
        rows: dict[date, float] = {}
        for lineno, row in enumerate(reader, 2):
            if not row or all(not c.strip() for c in row):
                continue
            where = f"{path}:{lineno}"
            if len(row) <= max(di, vi):
                raise ParseError("too few columns", where)
            d = _parse_date(row[di], where)
            try:
                value = float(row[vi])
            except ValueError:
                raise ParseError(f"bad number {row[vi]!r}", where) from None
            if not math.isfinite(value):
                raise ParseError(f"non-finite value {row[vi]!r}", where)
            if value_col != "v" and value <= 0:
                raise NonPositivePrice(f"{where}: price {value} <= 0")
            if value_col == "v" and value < 0:
                raise ParseError(f"negative v {value}", where)
            rows[d] = value  # later rows win
    dates = sorted(rows)
    values = [rows[d] for d in dates]
    if value_col == "v":
        return VSeries(dates, values)
    return PriceSeries(dates, values, target or Point())


def _stem(path: Path) -> str:
    stem = path.stem
    for suffix in ("_price", "_prices", "_v"):
        if stem.endswith(suffix):
            return stem[: -len(suffix)]
    return stem


@dataclass
class DataBundle:
    prices: dict[str, PriceSeries] = field(default_factory=dict)
    v: dict[str, VSeries] = field(default_factory=dict)


def _header(path: Path) -> list[str]:
    with path.open(newline="") as fh:
        return [h.strip() for h in next(csv.reader(fh), [])]


def load_bundle(price_dir: str | Path, v_dir: str | Path | None = None, bands: Mapping[str, Band] | None = None) -> DataBundle:
    """Every CSV under the given directories, sorted into price and v series by header.

    Labels are file stems without a trailing ``_price`` or ``_v``.
    """
    bands = dict(DEFAULT_BANDS if bands is None else bands)
    bundle = DataBundle()
    dirs = [Path(price_dir)] + ([Path(v_dir)] if v_dir is not None and Path(v_dir) != Path(price_dir) else [])
    for d in dirs:
        if not d.is_dir():
            raise ParseError("not a directory", str(d))
        for path in sorted(d.glob("*.csv")):
            header = _header(path)
            name = _stem(path)
            if "v" in header:
                bundle.v[name] = load_series(path, ("date", "v"))
            elif "price" in header:
                bundle.prices[name] = load_series(path, ("date", "price"), bands.get(name))
            else:
                raise ParseError("header needs a 'price' or 'v' column", f"{path}:1")
    return bundle


# -- reports -----------------------------------------------------------------


ZONE_COLUMNS = ["design", "theta", "zone", "theta_bar", "theta_under", "theta_circ", "theta_star"]


def zone_rows(report: ZoneReport) -> list[list[str]]:
    thresholds = [fmt(report.theta_bar), fmt(report.theta_under), fmt(report.theta_circ), fmt(report.theta_star)]
    return [[report.design.value, fmt(t), z.value, *thresholds] for t, z in report.grid]


def write_zone_csv(path: str | Path, reports: ZoneReport | Sequence[ZoneReport]) -> None:
    if isinstance(reports, ZoneReport):
        reports = [reports]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ZONE_COLUMNS)
        for r in reports:
            w.writerows(zone_rows(r))


def read_zone_csv(path: str | Path) -> list[ZoneReport]:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ZONE_COLUMNS:
            raise ParseError(f"expected columns {ZONE_COLUMNS}", f"{path}:1")
        groups: dict[tuple, list] = {}
        for row in reader:
            key = (row["design"], row["theta_bar"], row["theta_under"], row["theta_circ"], row["theta_star"])
            groups.setdefault(key, []).append((float(row["theta"]), Zone(row["zone"])))
    return [
        ZoneReport(Design.parse(d), _parse_float(b), _parse_float(u), _parse_float(c), _parse_float(s), tuple(grid))
        for (d, b, u, c, s), grid in groups.items()
    ]


def zone_report_to_json(report: ZoneReport) -> str:
    return json.dumps({
        "design": report.design.value,
        "theta_bar": report.theta_bar, "theta_under": report.theta_under,
        "theta_circ": report.theta_circ, "theta_star": report.theta_star,
        "grid": [[t, z.value] for t, z in report.grid],
    }, indent=2)


def zone_report_from_json(text: str) -> ZoneReport:
    d = json.loads(text)
    return ZoneReport(Design.parse(d["design"]), d["theta_bar"], d["theta_under"], d["theta_circ"], d["theta_star"],
                      tuple((float(t), Zone(z)) for t, z in d["grid"]))


def write_rows(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) if isinstance(x, float) else x for x in row])


def write_path_csv(path: str | Path, rows) -> None:
    write_rows(path, ["step", "theta", "M", "Q", "price", "r_c"],
               ([r.step, float(r.theta), float(r.M), float(r.Q), float(r.price), float(r.r_c)] for r in rows))


def write_correlation_csv(path: str | Path, reports: Mapping[str, CausalityReport]) -> None:
    write_rows(path, ["name", "rho", "rho_p", "F", "F_p", "lag", "n"],
               ([n, r.pearson_rho, r.pearson_p, r.granger_F, r.granger_p, r.lag, r.n_used] for n, r in reports.items()))


def write_deviation_csv(path: str | Path, reports: Mapping[str, DeviationReport], ranks: Mapping[str, int],
                        downward_ranks: Mapping[str, int]) -> None:
    write_rows(path, ["name", "deviation", "downward_deviation", "rank", "downward_rank"],
               ([n, r.deviation, r.downward_deviation, ranks[n], downward_ranks[n]] for n, r in reports.items()))


def write_json(path: str | Path, payload: Any) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
