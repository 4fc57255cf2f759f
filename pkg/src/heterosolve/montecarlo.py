"""Monte-Carlo experiment harness with deterministic seeding, the
condition-number rejection rule, and fixed CSV schemas.

Seeding: trial k of a series draws from a Philox stream keyed by
(master_seed XOR k) in the low 64 bits and a per-series salt in the high
64 bits, so cells never share streams and trials are reproducible under
any parallel schedule.  A rejected draw (kappa(A^T A) above the
threshold) is redrawn from the same stream; each trial may use at most
100 draws, so a series of T trials stays within the 100*T draw budget.

CSV schemas (values at 17 significant digits):
    exp1.csv: mu,m,rho_apc_mean,rho_apc_se,rho_hbm_mean,rho_hbm_se,rejections
    exp2.csv: m,n,rho_apc_mean,rho_apc_se,rho_hbm_mean,rho_hbm_se,rejections
    exp3.csv: n,c_mean,c_se
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import numkernel
from .errors import BadSizes, ExcessiveRejection, SingularDraw
from .rates_bounds import rate_apc, rate_hbm
from .serialize import write_csv
from .system import build_machines, build_S, draw_gaussian, partition_even, rng_from_seed

_MASK64 = (1 << 64) - 1
MAX_DRAWS_PER_TRIAL = 100

DEFAULT_MASTER_SEED = 20240817
DEFAULT_KAPPA_REJECT = 1e7

EXPERIMENTS = ("exp1", "exp2", "exp3")


def _divisors_ge2(n: int) -> tuple[int, ...]:
    return tuple(m for m in range(2, n + 1) if n % m == 0)


@dataclass(frozen=True)
class ExperimentConfig:
    """Shared configuration record; fields are interpreted per experiment.

    exp1 uses n, m_list, means (one series per mu), stddev, trials.
    exp2 uses m_list, n_grid (default: multiples of m from 2m to n_max),
    a single mean, stddev, trials.  exp3 uses n_grid (default 2..200) and
    trials; draws are standard normal.
    """

    experiment: str
    n: int | None = None
    n_grid: tuple[int, ...] | None = None
    n_max: int = 200
    m_list: tuple[int, ...] = ()
    means: tuple[float, ...] = (0.0, 1.0)
    stddev: float = 1.0
    trials: int = 300
    kappa_reject_threshold: float = DEFAULT_KAPPA_REJECT
    master_seed: int = DEFAULT_MASTER_SEED

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n_grid"] = None if self.n_grid is None else list(self.n_grid)
        d["m_list"] = list(self.m_list)
        d["means"] = list(self.means)
        return d


def default_config(experiment: str, master_seed: int = DEFAULT_MASTER_SEED,
                   trials: int | None = None) -> ExperimentConfig:
    experiment = experiment.lower()
    if experiment == "exp1":
        return ExperimentConfig(
            experiment="exp1",
            n=120,
            m_list=_divisors_ge2(120),
            means=(0.0, 1.0),
            trials=trials if trials is not None else 300,
            master_seed=master_seed,
        )
    if experiment == "exp2":
        return ExperimentConfig(
            experiment="exp2",
            m_list=(10, 20),
            means=(1.0,),
            trials=trials if trials is not None else 300,
            master_seed=master_seed,
        )
    if experiment == "exp3":
        return ExperimentConfig(
            experiment="exp3",
            n_grid=tuple(range(2, 201)),
            trials=trials if trials is not None else 100,
            master_seed=master_seed,
        )
    raise ValueError(f"unknown experiment {experiment!r}")


def config_from_dict(doc: dict) -> ExperimentConfig:
    cfg = default_config(doc["experiment"], doc.get("master_seed", DEFAULT_MASTER_SEED))
    merged = cfg.to_dict()
    for key, value in doc.items():
        if key not in merged:
            raise BadSizes(f"unknown config key {key!r}")
        merged[key] = value
    for key in ("n_grid", "m_list", "means"):
        if merged[key] is not None:
            merged[key] = tuple(merged[key])
    return ExperimentConfig(**merged)


@dataclass(frozen=True)
class ExperimentResult:
    experiment: str
    columns: tuple[str, ...]
    rows: list[tuple]
    config: dict

    def column(self, name: str) -> np.ndarray:
        j = self.columns.index(name)
        return np.array([row[j] for row in self.rows], dtype=float)

    def select(self, **filters) -> "ExperimentResult":
        idx = [self.columns.index(k) for k in filters]
        keep = [
            row
            for row in self.rows
            if all(row[j] == v for j, v in zip(idx, filters.values()))
        ]
        return ExperimentResult(self.experiment, self.columns, keep, self.config)

    def write_csv(self, path) -> None:
        write_csv(path, self.columns, self.rows)


def _stream(master_seed: int, trial: int, salt: int):
    key = ((salt & _MASK64) << 64) | ((master_seed ^ trial) & _MASK64)
    return rng_from_seed(key)


def _mean_se(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    se = float(arr.std(ddof=1) / np.sqrt(arr.size)) if arr.size > 1 else 0.0
    return mean, se


def _draw_accepted(rng, n: int, mean: float, stddev: float, threshold: float):
    """Draw systems until kappa(A^T A) passes the rejection rule.  Returns
    (ata_spectrum, system, rejections)."""
    rejections = 0
    for _ in range(MAX_DRAWS_PER_TRIAL):
        try:
            sys = draw_gaussian(rng, n, mean, stddev)
        except SingularDraw:
            rejections += 1
            continue
        spec = numkernel.symmetric_spectrum(sys.a.T @ sys.a)
        lam_min = float(spec[-1])
        if lam_min <= 0.0 or float(spec[0]) / lam_min > threshold:
            rejections += 1
            continue
        return spec, sys, rejections
    raise ExcessiveRejection(
        f"more than {MAX_DRAWS_PER_TRIAL} draws rejected for one trial (n={n})"
    )


def _rho_apc_for_partitions(sys, m_list) -> list[float]:
    out = []
    for m in m_list:
        machines = build_machines(sys, partition_even(sys, m))
        spec = numkernel.symmetric_spectrum(build_S(machines))
        out.append(rate_apc(float(spec[0]) / float(spec[-1])))
    return out


# --- module-level workers (picklable for process pools) -------------------


def _exp1_trial(args) -> tuple[float, list[float], int]:
    n, mean, stddev, m_list, threshold, master_seed, mu_idx, trial = args
    rng = _stream(master_seed, trial, (1 << 32) | mu_idx)
    ata_spec, sys, rejections = _draw_accepted(rng, n, mean, stddev, threshold)
    rho_hbm = rate_hbm(float(ata_spec[0]) / float(ata_spec[-1]))
    return rho_hbm, _rho_apc_for_partitions(sys, m_list), rejections


def _exp2_cell(args) -> tuple[list[float], list[float], int]:
    m, n, mean, stddev, threshold, master_seed, trials = args
    hbms, apcs = [], []
    rejections = 0
    for trial in range(trials):
        rng = _stream(master_seed, trial, (2 << 48) | (m << 24) | n)
        ata_spec, sys, rej = _draw_accepted(rng, n, mean, stddev, threshold)
        rejections += rej
        hbms.append(rate_hbm(float(ata_spec[0]) / float(ata_spec[-1])))
        apcs.append(_rho_apc_for_partitions(sys, [m])[0])
    return apcs, hbms, rejections


def _exp3_cell(args) -> list[float]:
    n, master_seed, trials = args
    values = []
    for trial in range(trials):
        rng = _stream(master_seed, trial, (3 << 32) | n)
        v = rng.normal(0.0, 1.0, size=(n, n))
        norms = np.sqrt(np.sum(v * v, axis=1))
        unit = v / norms[:, None]
        gram = np.abs(unit @ unit.T)
        np.fill_diagonal(gram, 0.0)
        values.append(float(np.max(gram)))
    return values


def _map(worker, tasks, jobs: int):
    if jobs <= 1:
        return [worker(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, tasks))


# --- experiments ------------------------------------------------------------


def run_experiment1(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    """Closed-form rho_apc(m) and rho_hbm over i.i.d. Gaussian draws at
    fixed n, one series per mean."""
    n = cfg.n or 120
    m_list = cfg.m_list or _divisors_ge2(n)
    for m in m_list:
        if n % m != 0:
            raise BadSizes(f"m={m} does not divide n={n}")
    rows = []
    for mu_idx, mean in enumerate(cfg.means):
        tasks = [
            (n, mean, cfg.stddev, tuple(m_list), cfg.kappa_reject_threshold,
             cfg.master_seed, mu_idx, k)
            for k in range(cfg.trials)
        ]
        results = _map(_exp1_trial, tasks, jobs)
        hbm = [r[0] for r in results]
        rejections = sum(r[2] for r in results)
        hbm_mean, hbm_se = _mean_se(hbm)
        for j, m in enumerate(m_list):
            apc_mean, apc_se = _mean_se([r[1][j] for r in results])
            rows.append((mean, m, apc_mean, apc_se, hbm_mean, hbm_se, rejections))
    return ExperimentResult(
        experiment="exp1",
        columns=("mu", "m", "rho_apc_mean", "rho_apc_se",
                 "rho_hbm_mean", "rho_hbm_se", "rejections"),
        rows=rows,
        config=cfg.to_dict(),
    )


def _exp2_grid(cfg: ExperimentConfig, m: int) -> list[int]:
    if cfg.n_grid is not None:
        grid = list(cfg.n_grid)
        for n in grid:
            if n % m != 0:
                raise BadSizes(f"n={n} in grid is not a multiple of m={m}")
        return grid
    return list(range(2 * m, cfg.n_max + 1, m))


def run_experiment2(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    """rho_apc and rho_hbm versus n at fixed machine counts."""
    mean = cfg.means[0] if cfg.means else 1.0
    rows = []
    tasks = []
    keys = []
    for m in cfg.m_list or (10, 20):
        for n in _exp2_grid(cfg, m):
            tasks.append((m, n, mean, cfg.stddev, cfg.kappa_reject_threshold,
                          cfg.master_seed, cfg.trials))
            keys.append((m, n))
    results = _map(_exp2_cell, tasks, jobs)
    for (m, n), (apcs, hbms, rejections) in zip(keys, results):
        apc_mean, apc_se = _mean_se(apcs)
        hbm_mean, hbm_se = _mean_se(hbms)
        rows.append((m, n, apc_mean, apc_se, hbm_mean, hbm_se, rejections))
    return ExperimentResult(
        experiment="exp2",
        columns=("m", "n", "rho_apc_mean", "rho_apc_se",
                 "rho_hbm_mean", "rho_hbm_se", "rejections"),
        rows=rows,
        config=cfg.to_dict(),
    )


def run_experiment3(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    """Mean of C = max_{i<j} |<v_i, v_j>| over normalized standard Gaussian
    vectors, versus the dimension n."""
    grid = list(cfg.n_grid or range(2, 201))
    tasks = [(n, cfg.master_seed, cfg.trials) for n in grid]
    results = _map(_exp3_cell, tasks, jobs)
    rows = []
    for n, values in zip(grid, results):
        c_mean, c_se = _mean_se(values)
        rows.append((n, c_mean, c_se))
    return ExperimentResult(
        experiment="exp3",
        columns=("n", "c_mean", "c_se"),
        rows=rows,
        config=cfg.to_dict(),
    )


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    if cfg.experiment == "exp1":
        return run_experiment1(cfg, jobs)
    if cfg.experiment == "exp2":
        return run_experiment2(cfg, jobs)
    if cfg.experiment == "exp3":
        return run_experiment3(cfg, jobs)
    raise ValueError(f"unknown experiment {cfg.experiment!r}")
