"""Efficiency and fairness measures over per-vehicle and per-step logs.

Covers the four-notion fairness quartet (equality of delays, worst-case delay,
total travel time, average delay), horizontal equity between arterial- and
feeder-originating vehicles, macroscopic fundamental diagram binning, and
cross-seed Welch significance markers.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from corridorsim.microsim import ExitRecord, StepRecord


def gini(values) -> float:
    """Gini coefficient via the sorted form, equivalent to the mean absolute
    pairwise difference divided by twice the mean."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError("gini of an empty sample is undefined")
    if np.any(x < 0):
        raise ValueError("gini requires non-negative values")
    total = x.sum()
    if total == 0:
        return 0.0
    xs = np.sort(x)
    n = xs.size
    i = np.arange(1, n + 1)
    return float(((2 * i - n - 1) * xs).sum() / (n * total))


@dataclass(frozen=True)
class Quartet:
    gini: float
    max_delay: float
    total_travel_time_h: float
    avg_delay: float


def fairness_quartet(records: list[ExitRecord]) -> Quartet:
    """Fairness measures over a delay ledger: equality, worst case, system
    total, and mean outcome."""
    if not records:
        raise ValueError("empty delay ledger")
    delays = np.array([r.delay_s for r in records], dtype=float)
    travel = np.array([r.exit_time - r.entry_time for r in records], dtype=float)
    return Quartet(
        gini=gini(delays),
        max_delay=float(delays.max()),
        total_travel_time_h=float(travel.sum() / 3600.0),
        avg_delay=float(delays.mean()),
    )


@dataclass(frozen=True)
class ClassEquity:
    count: int
    gini: float
    max_delay: float
    total_delay_h: float
    avg_delay: float
    median_delay: float
    gini_per_km: float
    max_per_km: float
    avg_per_km: float
    median_per_km: float


_EMPTY_CLASS = ClassEquity(0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


def horizontal_equity(records: list[ExitRecord]) -> dict[str, ClassEquity]:
    """Per-origin-class fairness: raw delays and delays per travelled km.

    Vehicles from internal-origin links are excluded and reported under the
    ``internal`` key count. Both median and mean are emitted per class.
    """
    out: dict[str, ClassEquity] = {}
    for cls in ("arterial", "feeder"):
        subset = [r for r in records if r.origin_class == cls]
        if not subset:
            out[cls] = _EMPTY_CLASS
            continue
        delays = np.array([r.delay_s for r in subset], dtype=float)
        per_km = np.array(
            [r.delay_s / (r.distance_m / 1000.0) for r in subset], dtype=float
        )
        out[cls] = ClassEquity(
            count=len(subset),
            gini=gini(delays),
            max_delay=float(delays.max()),
            total_delay_h=float(delays.sum() / 3600.0),
            avg_delay=float(delays.mean()),
            median_delay=float(np.median(delays)),
            gini_per_km=gini(per_km),
            max_per_km=float(per_km.max()),
            avg_per_km=float(per_km.mean()),
            median_per_km=float(np.median(per_km)),
        )
    internal = sum(1 for r in records if r.origin_class == "internal")
    out["internal"] = ClassEquity(internal, *[0.0] * 9)
    return out


@dataclass(frozen=True)
class MfdBin:
    window_start: int
    flow: float     # veh/h
    density: float  # mean vehicles present
    speed: float    # mean network speed over vehicles present, m/s


def mfd(steps: list[StepRecord], window: int = 300) -> list[MfdBin]:
    """Flow / density / speed aggregated over fixed windows tiling the horizon."""
    if window <= 0:
        raise ValueError("window must be positive")
    bins: list[MfdBin] = []
    for start in range(0, len(steps), window):
        chunk = steps[start:start + window]
        if not chunk:
            break
        exits = sum(s.exited_now for s in chunk)
        density = sum(s.vehicles_present for s in chunk) / len(chunk)
        present_total = sum(s.vehicles_present for s in chunk)
        speed_total = sum(s.speed_sum for s in chunk)
        speed = speed_total / present_total if present_total > 0 else 0.0
        bins.append(MfdBin(
            window_start=chunk[0].clock,
            flow=exits * (3600.0 / window),
            density=density,
            speed=speed,
        ))
    return bins


def significance(baseline: list[float], samples: list[float]) -> str:
    """Welch two-sample marker vs. the baseline: sign by direction of the mean
    difference, count of symbols by p-threshold (1% / 2% / 5%)."""
    if len(baseline) < 2 or len(samples) < 2:
        raise ValueError("need at least 2 seeds per controller")
    a = np.asarray(baseline, dtype=float)
    b = np.asarray(samples, dtype=float)
    if a.shape == b.shape and np.allclose(a, b):
        return ""
    if a.std() == 0 and b.std() == 0:
        return "" if a.mean() == b.mean() else ("+" * 3 if b.mean() > a.mean() else "-" * 3)
    _, p = stats.ttest_ind(b, a, equal_var=False)
    if np.isnan(p) or p >= 0.05:
        return ""
    symbol = "+" if b.mean() > a.mean() else "-"
    if p < 0.01:
        return symbol * 3
    if p < 0.02:
        return symbol * 2
    return symbol


def welch_p(baseline: list[float], samples: list[float]) -> float:
    a = np.asarray(baseline, dtype=float)
    b = np.asarray(samples, dtype=float)
    _, p = stats.ttest_ind(b, a, equal_var=False)
    return float(p)


# -- per-run summaries and benchmark tables -----------------------------------


@dataclass(frozen=True)
class RunMetrics:
    controller: str
    seed: int
    throughput: int
    flow: float
    speed: float
    density: float
    gini: float
    max_delay: float
    total_travel_time_h: float
    avg_delay: float
    gini_arterial: float
    gini_feeder: float
    md_arterial: float
    md_feeder: float
    avg_arterial: float
    avg_feeder: float
    censored: int


def summarize_run(result, mfd_window: int = 300, warmup: int = 0) -> RunMetrics:
    records = [v for v in result.vehicles if v.entry_time >= warmup]
    steps = [s for s in result.steps if s.clock >= warmup]
    bins = mfd(steps, mfd_window)
    quartet = fairness_quartet(records)
    equity = horizontal_equity(records)
    return RunMetrics(
        controller=result.controller,
        seed=result.seed,
        throughput=sum(1 for v in records if not v.censored),
        flow=float(np.mean([b.flow for b in bins])) if bins else 0.0,
        speed=float(np.mean([b.speed for b in bins])) if bins else 0.0,
        density=float(np.mean([b.density for b in bins])) if bins else 0.0,
        gini=quartet.gini,
        max_delay=quartet.max_delay,
        total_travel_time_h=quartet.total_travel_time_h,
        avg_delay=quartet.avg_delay,
        gini_arterial=equity["arterial"].gini,
        gini_feeder=equity["feeder"].gini,
        md_arterial=equity["arterial"].median_delay,
        md_feeder=equity["feeder"].median_delay,
        avg_arterial=equity["arterial"].avg_delay,
        avg_feeder=equity["feeder"].avg_delay,
        censored=sum(1 for v in records if v.censored),
    )


_EFFICIENCY_COLS = ("flow", "speed", "density", "throughput")
_EQUITY_COLS = ("gini", "max_delay", "total_travel_time_h", "avg_delay")
_HORIZONTAL_COLS = ("md_arterial", "md_feeder", "gini_arterial", "gini_feeder")


def _table(per_controller: dict[str, list[RunMetrics]], baseline: str,
           columns: tuple[str, ...]) -> list[dict]:
    rows = []
    base = per_controller.get(baseline, [])
    for controller, runs in per_controller.items():
        row: dict = {"controller": controller}
        for col in columns:
            values = [float(getattr(r, col)) for r in runs]
            row[f"{col}_mean"] = float(np.mean(values))
            row[f"{col}_std"] = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
            marker = ""
            if controller != baseline and len(base) >= 2 and len(values) >= 2:
                marker = significance([float(getattr(r, col)) for r in base], values)
            row[f"{col}_sig"] = marker
        rows.append(row)
    return rows


def _write_table(rows: list[dict], path: Path) -> None:
    if not rows:
        return
    keys = list(rows[0].keys())
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(keys)
        for row in rows:
            w.writerow([
                f"{v:.4f}" if isinstance(v, float) else v
                for v in (row[k] for k in keys)
            ])


def write_benchmark_tables(results, controllers, seeds, baseline, out_dir: Path,
                           mfd_window: int = 300, warmup: int = 0) -> None:
    out_dir = Path(out_dir)
    per_controller: dict[str, list[RunMetrics]] = {c: [] for c in controllers}
    for c in controllers:
        for s in seeds:
            per_controller[c].append(summarize_run(results[(c, s)], mfd_window, warmup))

    with open(out_dir / "seed_metrics.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        fields = list(RunMetrics.__dataclass_fields__)
        w.writerow(fields)
        for c in controllers:
            for m in per_controller[c]:
                w.writerow([
                    f"{v:.4f}" if isinstance(v, float) else v
                    for v in (getattr(m, k) for k in fields)
                ])

    _write_table(_table(per_controller, baseline, _EFFICIENCY_COLS),
                 out_dir / "table_efficiency.csv")
    _write_table(_table(per_controller, baseline, _EQUITY_COLS),
                 out_dir / "table_equity.csv")
    _write_table(_table(per_controller, baseline, _HORIZONTAL_COLS),
                 out_dir / "table_horizontal.csv")

    with open(out_dir / "mfd.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["controller", "seed", "window_start", "flow", "density", "speed"])
        for c in controllers:
            for s in seeds:
                steps = [x for x in results[(c, s)].steps if x.clock >= warmup]
                for b in mfd(steps, mfd_window):
                    w.writerow([c, s, b.window_start, f"{b.flow:.4f}",
                                f"{b.density:.4f}", f"{b.speed:.4f}"])
