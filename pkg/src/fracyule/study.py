"""Simulation study: simulate sojourns over a parameter grid, re-estimate, record.

Each ``(nu, lam, replicate)`` cell owns a sub-stream keyed by its grid
position, simulates ``max(n_list)`` sojourns once and fits the leading
``n`` of them for every ``n`` in ``n_list``.  Rows are sorted by key, so the
report does not depend on how cells were scheduled.
"""

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .distributions import FypParams
from .estimation import DEFAULT_KAPPAS, estimate_fractional_moments, estimate_log_moments
from .exceptions import FypError
from .sampling import RandomStream, simulate_log_sojourns

__all__ = ["StudyConfig", "StudyRow", "STUDY_COLUMNS", "STUDY_STREAM_ID", "run_study", "DEFAULT_NU_GRID"]

STUDY_COLUMNS = ("nu_true", "lambda_true", "n", "replicate", "nu_hat", "lambda_hat", "converged", "wall_time")

STUDY_STREAM_ID = 7

DEFAULT_NU_GRID = tuple(round(0.1 * m, 1) for m in range(1, 11))

_METHODS = ("log_moment", "fractional_moment")


@dataclass(frozen=True)
class StudyConfig:
    nu_grid: tuple
    lambda_grid: tuple
    n_list: tuple
    replicates: int
    seed: int
    method: str = "log_moment"
    kappa1: float = DEFAULT_KAPPAS[0]
    kappa2: float = DEFAULT_KAPPAS[1]

    def __post_init__(self):
        if not self.nu_grid or not self.lambda_grid or not self.n_list:
            raise ValueError("nu_grid, lambda_grid and n_list must be non-empty")
        for nu in self.nu_grid:
            FypParams(nu, 1.0)
        for lam in self.lambda_grid:
            FypParams(1.0, lam)
        if any(b <= a for a, b in zip(self.n_list, self.n_list[1:])) or self.n_list[0] < 2:
            raise ValueError(f"n_list must be strictly increasing with n >= 2, got {self.n_list}")
        if int(self.replicates) != self.replicates or self.replicates < 1:
            raise ValueError(f"replicates must be an integer >= 1, got {self.replicates}")
        if self.method not in _METHODS:
            raise ValueError(f"method must be one of {_METHODS}, got {self.method!r}")


@dataclass(frozen=True)
class StudyRow:
    nu_true: float
    lambda_true: float
    n: int
    replicate: int
    nu_hat: float
    lambda_hat: float
    converged: bool
    wall_time: float = None

    @property
    def key(self):
        return (self.nu_true, self.lambda_true, self.n, self.replicate)


def _fit(config, log_t):
    if config.method == "log_moment":
        return estimate_log_moments(None, log_durations=log_t)
    return estimate_fractional_moments(None, config.kappa1, config.kappa2, log_durations=log_t)


def _run_cell(config, i_nu, i_lam, rep, timing):
    nu, lam = config.nu_grid[i_nu], config.lambda_grid[i_lam]
    stream = RandomStream(config.seed, STUDY_STREAM_ID, (i_nu, i_lam, rep))
    log_t = simulate_log_sojourns(stream, FypParams(nu, lam), max(config.n_list))
    rows = []
    for n in config.n_list:
        start = time.perf_counter()
        try:
            res = _fit(config, log_t[:n])
            nu_hat, lam_hat, ok = res.nu_hat, res.lambda_hat, res.converged
        except (FypError, ValueError):
            nu_hat, lam_hat, ok = math.nan, math.nan, False
        wall = time.perf_counter() - start if timing else None
        rows.append(StudyRow(nu, lam, n, rep, nu_hat, lam_hat, ok, wall))
    return rows


def _run_cell_args(args):
    return _run_cell(*args)


def run_study(config, workers=1, timing=False):
    """Run every cell of ``config`` and return the rows sorted by key.

    ``timing`` records per-fit wall time; it is off by default so repeated
    runs give identical reports.
    """
    tasks = [
        (config, i_nu, i_lam, rep, timing)
        for i_nu in range(len(config.nu_grid))
        for i_lam in range(len(config.lambda_grid))
        for rep in range(config.replicates)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_cell_args, tasks))
    else:
        chunks = [_run_cell(*task) for task in tasks]
    rows = [row for chunk in chunks for row in chunk]
    return sorted(rows, key=lambda r: r.key)
