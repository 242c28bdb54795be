"""Repeated-run campaigns: configuration, execution, persistence and statistics.

A campaign runs every requested method ``repetitions`` times on one
benchmark. Repetition ``r`` uses seed ``seed + r`` and all surrogate-based
methods of that repetition start from the same initial design. Output layout::

    <output>/config.json             resolved configuration
    <output>/runs/<method>_<r>.json  one RunRecord per run
    <output>/journal.jsonl           one line per run, sorted by method and repetition
    <output>/summary.csv             final-value statistics per method
    <output>/convergence_<method>.csv  mean/min/max incumbent per iteration

Files contain no timings, so rerunning a configuration reproduces them byte
for byte.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .benchmarks import BENCHMARKS, get_benchmark, load_oracle_cache
from .ego import RunRecord, run_categorywise_ego, run_mixed_ego, run_penalized_ga
from .infill import GAConfig
from .space import lhs_initial_doe
from .training import TrainerConfig

METHODS = ("CS", "HoHS", "HeHS", "CW", "GA")
DISPERSION_NOTE = "dispersion = 100 * sample standard deviation / |mean| of final values (percent)"


class ConfigError(ValueError):
    """Invalid campaign configuration."""


@dataclass
class CampaignConfig:
    """Campaign settings; unset budgets fall back to the benchmark defaults."""

    benchmark: str
    methods: list = field(default_factory=lambda: list(METHODS))
    repetitions: int = 10
    seed: int = 0
    n_initial: int | None = None
    n_infill: int | None = None
    ga_population: int | None = None
    ga_generations: int | None = None
    trainer: dict = field(default_factory=dict)
    infill_ga: dict = field(default_factory=dict)
    output: str | None = None
    jobs: int = 1

    def __post_init__(self):
        if self.benchmark not in BENCHMARKS:
            raise ConfigError(f"unknown benchmark {self.benchmark!r}; choose from {sorted(BENCHMARKS)}")
        if isinstance(self.methods, str):
            self.methods = [m for m in self.methods.split(",") if m]
        lookup = {m.lower(): m for m in METHODS}
        try:
            self.methods = [lookup[str(m).lower()] for m in self.methods]
        except KeyError as exc:
            raise ConfigError(f"unknown method {exc.args[0]!r}; choose from {list(METHODS)}") from None
        if not self.methods:
            raise ConfigError("no methods selected")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be at least 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")
        defaults = get_benchmark(self.benchmark).defaults
        for key in ("n_initial", "n_infill", "ga_population", "ga_generations"):
            if getattr(self, key) is None:
                setattr(self, key, defaults[key])
            if int(getattr(self, key)) < 1:
                raise ConfigError(f"{key} must be positive")
        try:
            self.trainer_config()
            self.infill_ga_config()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    def trainer_config(self) -> TrainerConfig:
        return TrainerConfig(**self.trainer)

    def infill_ga_config(self) -> GAConfig:
        return GAConfig(**self.infill_ga)

    @classmethod
    def from_dict(cls, d: dict) -> "CampaignConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        if "benchmark" not in d:
            raise ConfigError("configuration needs a 'benchmark'")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path: str | Path) -> "CampaignConfig":
        try:
            d = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read configuration {path}: {exc}") from None
        if not isinstance(d, dict):
            raise ConfigError("configuration must be a JSON object")
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        return asdict(self)


def doe_hash(X, Z) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(X, dtype=np.float64).tobytes())
    h.update(np.ascontiguousarray(Z, dtype=np.int64).tobytes())
    return h.hexdigest()[:16]


def run_single(config: CampaignConfig, method: str, rep: int) -> RunRecord:
    """One repetition of one method."""
    problem = get_benchmark(config.benchmark)
    seed = config.seed + rep
    if method == "GA":
        return run_penalized_ga(problem, config.ga_population, config.ga_generations, seed)
    doe = lhs_initial_doe(problem.space, config.n_initial, seed)
    trainer, ga = config.trainer_config(), config.infill_ga_config()
    if method == "CW":
        return run_categorywise_ego(problem, config.n_initial, config.n_infill, seed, trainer, ga, doe=doe)
    return run_mixed_ego(problem, method, config.n_initial, config.n_infill, seed, trainer, ga, doe=doe)


def _task(args):
    config_dict, method, rep = args
    return method, rep, run_single(CampaignConfig(**config_dict), method, rep).to_dict()


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True, allow_nan=True)


def run_campaign(config: CampaignConfig, output: str | Path | None = None) -> dict[str, list[RunRecord]]:
    """Run all methods and repetitions, write the output directory, return the records."""
    out = Path(output or config.output or f"runs/{config.benchmark}")
    (out / "runs").mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(_dump(config.to_dict()) + "\n")
    tasks = [(config.to_dict(), m, r) for m in config.methods for r in range(config.repetitions)]
    if config.jobs > 1:
        with ProcessPoolExecutor(config.jobs) as pool:
            results = list(pool.map(_task, tasks))
    else:
        results = [_task(t) for t in tasks]
    for method, rep, rec in results:
        (out / "runs" / f"{method}_{rep:03d}.json").write_text(_dump(rec) + "\n")
    summarize(out)
    return _group([(m, RunRecord.from_dict(d)) for m, _, d in results])


def _group(pairs) -> dict[str, list[RunRecord]]:
    groups: dict[str, list[RunRecord]] = {}
    for method, rec in pairs:
        groups.setdefault(method, []).append(rec)
    return groups


def load_records(run_dir: str | Path) -> dict[str, list[RunRecord]]:
    """Records of a campaign directory grouped by method, in repetition order."""
    files = sorted((Path(run_dir) / "runs").glob("*.json"))
    if not files:
        raise FileNotFoundError(f"no run records under {run_dir}/runs")
    return _group((f.stem.rsplit("_", 1)[0], RunRecord.from_dict(json.loads(f.read_text()))) for f in files)


def final_statistics(records: list[RunRecord], oracle=None) -> dict:
    """Mean, spread and success counts of the final feasible values."""
    finals = np.array([r.best["value"] if r.best else np.inf for r in records])
    ok = np.isfinite(finals)
    vals = finals[ok]
    mean = float(vals.mean()) if len(vals) else float("nan")
    std = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
    stats = {
        "runs": len(records),
        "failed": sum(r.failure is not None for r in records),
        "feasible": int(ok.sum()),
        "mean": mean,
        "std": std,
        "min": float(vals.min()) if len(vals) else float("nan"),
        "max": float(vals.max()) if len(vals) else float("nan"),
        "dispersion_pct": 100.0 * std / abs(mean) if len(vals) and mean != 0 else float("nan"),
    }
    if oracle is not None:
        stats["correct_category"] = sum(bool(r.best and r.best["category"] == oracle.category) for r in records)
    return stats


def convergence_table(records: list[RunRecord]) -> np.ndarray:
    """Rows ``(k, mean, min, max)`` of the incumbent after ``k`` infill evaluations.

    Raises ``ValueError`` when the runs do not share the same budget. Failed
    runs, whose histories are truncated, are left out.
    """
    done = [r for r in records if r.failure is None]
    if not done:
        raise ValueError("no completed runs to aggregate")
    budgets = {(r.n_initial, r.n_evaluations) for r in done}
    if len(budgets) > 1:
        raise ValueError(f"runs have different budgets {sorted(budgets)}; refusing to aggregate")
    T = np.array([r.trajectory() for r in done])
    k = np.arange(T.shape[1])
    return np.column_stack([k, T.mean(axis=0), T.min(axis=0), T.max(axis=0)])


def export_convergence(records: list[RunRecord], path: str | Path) -> None:
    table = convergence_table(records)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["evaluation", "mean", "min", "max"])
    for k, *vals in table:
        w.writerow([int(k)] + [repr(float(v)) for v in vals])
    Path(path).write_text(buf.getvalue())


SUMMARY_FIELDS = ("method", "runs", "failed", "feasible", "mean", "std", "min", "max",
                  "dispersion_pct", "correct_category")


def summarize(run_dir: str | Path) -> str:
    """Rewrite ``summary.csv``, convergence files and journal from the run records.

    Returns the summary as text.
    """
    run_dir = Path(run_dir)
    groups = load_records(run_dir)
    first = next(iter(groups.values()))[0]
    oracle = load_oracle_cache().get(first.problem)
    buf = io.StringIO()
    buf.write(f"# {DISPERSION_NOTE}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_FIELDS)
    for method, recs in groups.items():
        s = final_statistics(recs, oracle)
        w.writerow([method] + [_fmt(s.get(k, "")) for k in SUMMARY_FIELDS[1:]])
        try:
            export_convergence(recs, run_dir / f"convergence_{method}.csv")
        except ValueError:
            pass
    (run_dir / "summary.csv").write_text(buf.getvalue())
    lines = []
    for method, recs in groups.items():
        for rec in recs:
            lines.append(json.dumps({
                "method": method,
                "seed": rec.seed,
                "doe_hash": doe_hash(rec.X[:rec.n_initial], rec.Z[:rec.n_initial]),
                "evaluations": rec.n_evaluations,
                "best": rec.best["value"] if rec.best else None,
                "category": rec.best["category"] if rec.best else None,
                "failure": rec.failure,
            }, sort_keys=True))
    (run_dir / "journal.jsonl").write_text("\n".join(lines) + "\n")
    return buf.getvalue()


def _fmt(v):
    return f"{v:.6g}" if isinstance(v, float) else v


def any_failed(groups: dict[str, list[RunRecord]]) -> bool:
    return any(r.failure is not None for recs in groups.values() for r in recs)
