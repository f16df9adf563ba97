"""Replication engine for the central limit behaviour of ``sqrt(n) (N_hat - N)``."""

from __future__ import annotations

import csv
import hashlib
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from scipy import stats

from .covariance import covariance_from_data, gamma_sigma_closed_form, oracle_covariance
from .errors import NumericalGuardError, ValidationError
from .estimator import EstimateConfig, _check_t, estimate_from_data, prepare
from .models import Kind, LevyModel, levy_tail, sample_increments

__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "run_experiment",
    "summarize",
    "ks_statistic",
    "coverage",
    "replication_seed",
    "config_hash",
]

# tolerances attached to the report; fixed by desk-scale runs, not by theory
CALIBRATION_NOTE = "empirical desk-scale calibration"
ORACLE_SAMPLES = 10**5
ORACLE_H = 1e-3


def replication_seed(master_seed: int, k: int) -> int:
    """64-bit seed for replication ``k``; distinct streams for distinct ``k``."""
    ss = np.random.SeedSequence(int(master_seed) & (2**64 - 1), spawn_key=(0, int(k)))
    lo, hi = ss.generate_state(2, np.uint32)
    return int(lo) | (int(hi) << 32)


def _oracle_seed(master_seed: int) -> int:
    ss = np.random.SeedSequence(int(master_seed) & (2**64 - 1), spawn_key=(1,))
    lo, hi = ss.generate_state(2, np.uint32)
    return int(lo) | (int(hi) << 32)


@dataclass
class ExperimentConfig:
    model: LevyModel
    n: int
    delta: float
    replications: int
    t_grid: Sequence[float]
    estimate_config: EstimateConfig = field(default_factory=EstimateConfig)
    master_seed: int = 20120103
    ci_level: float = 0.95

    def __post_init__(self):
        self.t_grid = [float(t) for t in np.atleast_1d(np.asarray(self.t_grid, dtype=float))]
        self.validate()

    def validate(self) -> None:
        if not isinstance(self.model, LevyModel):
            raise ValidationError("model must be a LevyModel")
        if not isinstance(self.n, (int, np.integer)) or self.n < 2:
            raise ValidationError("n must be an integer >= 2")
        if not self.delta > 0:
            raise ValidationError("delta must be positive")
        if not isinstance(self.replications, (int, np.integer)) or self.replications < 2:
            raise ValidationError("replications must be an integer >= 2")
        if not 0 < self.ci_level < 1:
            raise ValidationError("ci_level must lie in (0, 1)")
        if not isinstance(self.master_seed, (int, np.integer)):
            raise ValidationError("master_seed must be an integer")
        self.estimate_config.validate()
        if self.estimate_config.delta != self.delta:
            raise ValidationError("estimate delta must equal the experiment delta")
        t = _check_t(self.t_grid)
        if np.any(np.abs(t) < self.estimate_config.zeta):
            raise ValidationError(f"all |t| must be >= zeta = {self.estimate_config.zeta}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "model": self.model.to_dict(),
            "n": int(self.n),
            "delta": float(self.delta),
            "replications": int(self.replications),
            "t_grid": list(self.t_grid),
            "estimate": self.estimate_config.to_dict(),
            "master_seed": int(self.master_seed),
            "ci_level": float(self.ci_level),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ExperimentConfig":
        known = {"model", "n", "delta", "replications", "t_grid", "estimate", "master_seed",
                 "ci_level"}
        extra = set(d) - known
        if extra:
            raise ValidationError(f"unknown experiment fields: {sorted(extra)}")
        missing = {"model", "n", "replications", "t_grid"} - set(d)
        if missing:
            raise ValidationError(f"missing experiment fields: {sorted(missing)}")
        delta = float(d.get("delta", 1.0))
        est = dict(d.get("estimate", {}))
        est.setdefault("delta", delta)
        return cls(
            model=LevyModel.from_dict(d["model"]),
            n=d["n"],
            delta=delta,
            replications=d["replications"],
            t_grid=d["t_grid"],
            estimate_config=EstimateConfig.from_dict(est),
            master_seed=d.get("master_seed", 20120103),
            ci_level=d.get("ci_level", 0.95),
        )


def config_hash(config: ExperimentConfig) -> str:
    text = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


# --------------------------------------------------------------------------
# statistics


def ks_statistic(sample, cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    """Kolmogorov distance between the empirical law of ``sample`` and ``cdf``."""
    x = np.sort(np.asarray(sample, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise ValidationError("ks_statistic needs a nonempty sample")
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(np.abs(i / n - f)), np.max(np.abs((i - 1) / n - f))))


def coverage(n_hat, sigma_hat, true_n, n: int, level: float) -> float:
    """Fraction of ``|N_hat - N| <= z sqrt(sigma_hat / n)`` over replications."""
    if not 0 < level < 1:
        raise ValidationError("level must lie in (0, 1)")
    n_hat = np.asarray(n_hat, dtype=float)
    sig = np.maximum(np.asarray(sigma_hat, dtype=float), 0.0)
    z = stats.norm.ppf(0.5 * (1.0 + level))
    hit = np.abs(n_hat - true_n) <= z * np.sqrt(sig / n)
    return float(np.mean(hit)) if hit.size else 0.0


# --------------------------------------------------------------------------
# report


@dataclass
class ExperimentReport:
    records: list[dict[str, Any]]
    sup_stat_samples: np.ndarray
    config_hash: str
    seeds: list[int]
    n_hat: np.ndarray          # (R, T)
    sigma_hat: np.ndarray      # (R, T) plug-in diagonal
    statistics: np.ndarray     # (R, T) sqrt(n)(N_hat - N)
    calibration: str = CALIBRATION_NOTE

    def record(self, t: float) -> dict[str, Any]:
        for r in self.records:
            if r["t"] == t:
                return r
        raise KeyError(t)

    def to_dict(self) -> dict[str, Any]:
        return {
            "records": self.records,
            "sup_stat_samples": [float(v) for v in self.sup_stat_samples],
            "config_hash": self.config_hash,
            "calibration": self.calibration,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["replication", "seed", "t", "n_hat", "stat", "sigma_hat"])
        t_grid = [r["t"] for r in self.records]
        for k, seed in enumerate(self.seeds):
            for j, t in enumerate(t_grid):
                w.writerow([k, seed, repr(t), repr(float(self.n_hat[k, j])),
                            repr(float(self.statistics[k, j])),
                            repr(float(self.sigma_hat[k, j]))])
        return buf.getvalue()


def _replicate(payload: tuple[dict[str, Any], int]) -> tuple[np.ndarray, np.ndarray]:
    cfg_dict, k = payload
    cfg = ExperimentConfig.from_dict(cfg_dict)
    seed = replication_seed(cfg.master_seed, k)
    try:
        x = sample_increments(cfg.model, int(cfg.n), cfg.delta, seed)
        _, t, data, kernel = prepare(x, cfg.estimate_config, cfg.t_grid)
        res = estimate_from_data(data, kernel, t, cfg.estimate_config)
        cov = covariance_from_data(data, kernel, t, x, cfg.delta)
    except (ValidationError, NumericalGuardError) as exc:
        raise type(exc)(f"replication {k} (seed {seed}) failed: {exc}") from exc
    return res.n_hat, np.diag(cov.sigma).copy()


def _reference_variance(cfg: ExperimentConfig, t: np.ndarray, plugin_mean: np.ndarray):
    """Best available limit variance per ``t``: closed form, then oracle, then plug-in."""
    out = np.empty(t.size)
    source = [""] * t.size
    m = cfg.model
    todo = []
    for j, tj in enumerate(t):
        if (m.kind is Kind.GAMMA and tj > 0 and m.alpha * cfg.delta < 0.5):
            out[j] = gamma_sigma_closed_form(m.alpha, cfg.delta, tj, m.lam)
            source[j] = "closed_form"
        else:
            todo.append(j)
    if todo:
        try:
            orc = oracle_covariance(m, cfg.estimate_config, t[todo], ORACLE_SAMPLES, ORACLE_H,
                                    seed=_oracle_seed(cfg.master_seed))
            diag = np.diag(orc.sigma)
            for i, j in enumerate(todo):
                out[j] = diag[i]
                source[j] = "oracle"
        except (ValidationError, NumericalGuardError):
            for j in todo:
                out[j] = plugin_mean[j]
                source[j] = "plugin_mean"
    return out, source


def summarize(config: ExperimentConfig, n_hat: np.ndarray, sig: np.ndarray):
    """Per-t records from ``(R, T)`` arrays of estimates and plug-in variances.

    Every entry is a symmetric function of the rows, so the order of
    replications does not matter.
    """
    t = _check_t(config.t_grid)
    true_n = np.array([float(levy_tail(config.model, tj)) for tj in t])
    stat = np.sqrt(config.n) * (n_hat - true_n)
    ref, source = _reference_variance(config, t, sig.mean(axis=0))
    records = []
    for j, tj in enumerate(t):
        s = np.sort(stat[:, j])
        sd = np.sqrt(ref[j]) if ref[j] > 0 else 0.0
        if sd > 0:
            ks = ks_statistic(s, lambda v, sd=sd: stats.norm.cdf(v, scale=sd))
        else:
            ks = 1.0
        records.append({
            "t": float(tj),
            "true_N": float(true_n[j]),
            "mean_stat": float(np.mean(s)),
            "var_stat": float(np.var(s, ddof=1)),
            "ks_vs_normal": float(ks),
            "coverage": coverage(n_hat[:, j], sig[:, j], true_n[j], config.n, config.ci_level),
            "reference_variance": float(ref[j]),
            "reference_source": source[j],
            "plugin_variance_mean": float(np.mean(sig[:, j])),
        })
    return records, stat


def run_experiment(config: ExperimentConfig, workers: int = 1) -> ExperimentReport:
    """Run ``R`` replications and aggregate. The report does not depend on ``workers``."""
    config.validate()
    cfg_dict = config.to_dict()
    r = int(config.replications)
    payloads = [(cfg_dict, k) for k in range(r)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_replicate, payloads, chunksize=max(1, r // (4 * workers))))
    else:
        results = [_replicate(p) for p in payloads]

    n_hat = np.vstack([a for a, _ in results])
    sig = np.vstack([b for _, b in results])
    records, stat = summarize(config, n_hat, sig)
    sup = np.max(np.abs(stat), axis=1)
    return ExperimentReport(records, sup, config_hash(config),
                            [replication_seed(config.master_seed, k) for k in range(r)],
                            n_hat, sig, stat)
