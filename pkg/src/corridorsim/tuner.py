"""Black-box controller calibration: minimize mean average delay across seeds.

A seeded random search is the default; an optional surrogate strategy fits a
small Gaussian-process regressor with an expected-improvement acquisition and
falls back to random sampling whenever the fit degenerates. Every trial is
evaluated on the identical seed list (common random numbers).
"""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ParamDim:
    name: str
    lo: float
    hi: float
    scale: str = "linear"  # "linear" | "log"
    integer: bool = False

    def __post_init__(self):
        if not (self.lo < self.hi):
            raise ValueError(f"{self.name}: lo must be below hi")
        if self.scale not in ("linear", "log"):
            raise ValueError(f"{self.name}: unknown scale '{self.scale}'")
        if self.scale == "log" and self.lo <= 0:
            raise ValueError(f"{self.name}: log scale needs positive bounds")

    def to_unit(self, value: float) -> float:
        if self.scale == "log":
            return (math.log10(value) - math.log10(self.lo)) / (
                math.log10(self.hi) - math.log10(self.lo))
        return (value - self.lo) / (self.hi - self.lo)

    def from_unit(self, u: float) -> float:
        if self.scale == "log":
            value = 10 ** (math.log10(self.lo) + u * (math.log10(self.hi) - math.log10(self.lo)))
        else:
            value = self.lo + u * (self.hi - self.lo)
        if self.integer:
            value = int(round(value))
            value = min(int(self.hi), max(int(math.ceil(self.lo)), value))
        return value


@dataclass
class TrialRecord:
    trial: int
    params: dict
    objective: float
    seeds: tuple[int, ...]
    wall_time: float
    failed: bool = False


def _validate_space(space, controller: str) -> None:
    from corridorsim.controllers import controller_params_schema

    schema = controller_params_schema()
    if controller not in schema:
        raise ValueError(f"controller '{controller}' has no tunable parameters")
    known = schema[controller]
    for dim in space:
        if dim.name not in known:
            raise ValueError(
                f"parameter '{dim.name}' not in {controller} table "
                f"(known: {sorted(known)})"
            )


def simulation_objective(scenario, controller: str, seeds, horizon=None):
    """Objective: mean average delay over the seed list for given parameters."""
    from corridorsim.metrics import summarize_run
    from corridorsim.runner import run_single

    def evaluate(params: dict) -> float:
        values = []
        for seed in seeds:
            result = run_single(scenario, controller, seed, horizon, overrides=params)
            values.append(summarize_run(result, scenario.mfd_window, scenario.warmup).avg_delay)
        return float(np.mean(values))

    return evaluate


def optimize(
    space,
    scenario=None,
    controller: str = "scosca",
    seeds=(1,),
    budget: int = 20,
    strategy: str = "random",
    tuner_seed: int = 0,
    objective=None,
    horizon=None,
) -> tuple[TrialRecord, list[TrialRecord]]:
    """Minimize the objective over the parameter space within a trial budget.

    Deterministic given (space, seeds, budget, strategy, tuner_seed). A trial
    whose evaluation raises is recorded as failed with +inf objective and the
    search continues.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if not seeds:
        raise ValueError("seeds must be nonempty")
    if strategy not in ("random", "surrogate"):
        raise ValueError(f"unknown strategy '{strategy}'")
    space = list(space)
    if objective is None:
        if scenario is None:
            raise ValueError("need a scenario or an objective callable")
        _validate_space(space, controller)
        objective = simulation_objective(scenario, controller, seeds, horizon)

    rng = np.random.default_rng(tuner_seed)
    history: list[TrialRecord] = []
    x_unit: list[np.ndarray] = []
    y: list[float] = []
    n_init = max(4, 2 * len(space))

    for trial in range(budget):
        if strategy == "surrogate" and trial >= n_init:
            u = _propose_ei(rng, np.array(x_unit), np.array(y), len(space))
        else:
            u = rng.random(len(space))
        params = {dim.name: dim.from_unit(float(u[i])) for i, dim in enumerate(space)}
        start = time.perf_counter()
        failed = False
        try:
            value = float(objective(params))
            if not math.isfinite(value):
                failed = True
                value = math.inf
        except Exception as e:  # noqa: BLE001 - a failed trial must not kill the search
            logger.warning("trial %d failed: %s", trial, e)
            failed = True
            value = math.inf
        history.append(TrialRecord(
            trial=trial,
            params=params,
            objective=value,
            seeds=tuple(seeds),
            wall_time=time.perf_counter() - start,
            failed=failed,
        ))
        if not failed:
            x_unit.append(u)
            y.append(value)

    best = min(history, key=lambda t: (t.objective, t.trial))
    return best, history


def _propose_ei(rng: np.random.Generator, x: np.ndarray, y: np.ndarray,
                dim: int, n_candidates: int = 256) -> np.ndarray:
    """Expected-improvement proposal from an RBF-kernel GP; random on failure."""
    candidates = rng.random((n_candidates, dim))
    if len(y) < 3 or float(np.std(y)) == 0.0:
        return candidates[0]
    try:
        y_mean, y_std = float(np.mean(y)), float(np.std(y))
        yn = (y - y_mean) / y_std
        d2 = ((x[:, None, :] - x[None, :, :]) ** 2).sum(-1)
        positive = d2[d2 > 0]
        ls2 = float(np.median(positive)) if positive.size else 1.0
        ls2 = max(ls2, 1e-6)
        k = np.exp(-d2 / (2 * ls2))
        k[np.diag_indices_from(k)] += 1e-6
        chol = np.linalg.cholesky(k)
        alpha = np.linalg.solve(chol.T, np.linalg.solve(chol, yn))

        d2c = ((candidates[:, None, :] - x[None, :, :]) ** 2).sum(-1)
        kc = np.exp(-d2c / (2 * ls2))
        mu = kc @ alpha
        v = np.linalg.solve(chol, kc.T)
        var = np.clip(1.0 - (v ** 2).sum(0), 1e-12, None)
        sigma = np.sqrt(var)

        best = float(yn.min())
        z = (best - mu) / sigma
        phi = np.exp(-0.5 * z ** 2) / math.sqrt(2 * math.pi)
        cdf = 0.5 * (1 + np.vectorize(math.erf)(z / math.sqrt(2)))
        ei = (best - mu) * cdf + sigma * phi
        return candidates[int(np.argmax(ei))]
    except np.linalg.LinAlgError:
        return candidates[0]


def write_history_csv(history: list[TrialRecord], path: Path) -> None:
    if not history:
        return
    names = sorted(history[0].params)
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["trial", *names, "objective", "failed", "wall_time_s"])
        for t in history:
            w.writerow([
                t.trial,
                *[t.params[n] for n in names],
                "inf" if math.isinf(t.objective) else f"{t.objective:.6f}",
                int(t.failed),
                f"{t.wall_time:.3f}",
            ])
