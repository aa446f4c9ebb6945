"""
Experiment sweeps over model, noise and memory-depth grids.

Every cell is a pure function of its parameters and seed. Cells run on a
thread pool and are merged back in grid order; a failing cell is recorded
with ``status="failed"`` and never stops the sweep.
"""
from __future__ import annotations

import itertools
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, List, Sequence, Tuple

from .analysis import compare_spectra, dist_dataset, match_spectra, prediction_errors
from .embedding import ThresholdConfig, denoise_dataset, effective_env_dim, fit, natural_rank
from .logger import get_logger
from .models import FiniteEnvConfig, SpinBosonConfig, channel_spectrum, simulate_experiment

logger = get_logger(__name__)

# Default grids of the published experiments
TABLE1_GRID = {"d_E": [2, 3, 4, 5, 6], "sigma": [1e-1, 1e-2, 1e-3], "T": [150, 200]}
MEMORY_DEPTH_GRID = {"K": [5, 10, 25, 50, 75, 100], "sigma": [0.0, 1e-3, 1e-2, 1e-1]}
SPECTRUM_SIGMAS = [0.0, 1e-2]
DENOISING_GRID = {"d_E": [2, 3, 4, 5, 6], "sigma": [1e-3, 1e-2, 1e-1]}
SPIN_BOSON_GRID = {"gamma": [0.05, 0.1, 0.2, 0.4], "K": [100, 300, 500, 800]}

CellParams = Dict[str, Any]
CellResult = Tuple[Dict[str, Any], List[Dict[str, Any]]]


@dataclass
class SweepCell:
    params: CellParams
    seed: int
    status: str = "ok"
    results: Dict[str, Any] = field(default_factory=dict)
    details: List[Dict[str, Any]] = field(default_factory=list)
    runtime_s: float = 0.0
    error: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass
class SweepReport:
    name: str
    grid_columns: List[str]
    result_columns: List[str]
    cells: List[SweepCell] = field(default_factory=list)

    @property
    def columns(self) -> List[str]:
        return self.grid_columns + ["seed", "status"] + self.result_columns + ["runtime_s", "error"]

    def rows(self) -> List[Dict[str, Any]]:
        out = []
        for cell in self.cells:
            row: Dict[str, Any] = {c: cell.params.get(c, "") for c in self.grid_columns}
            row["seed"] = cell.seed
            row["status"] = cell.status
            for c in self.result_columns:
                row[c] = cell.results.get(c, "")
            row["runtime_s"] = round(cell.runtime_s, 3)
            row["error"] = cell.error
            out.append(row)
        return out

    def detail_rows(self) -> List[Dict[str, Any]]:
        out = []
        for cell in self.cells:
            for detail in cell.details:
                row: Dict[str, Any] = {c: cell.params.get(c, "") for c in self.grid_columns}
                row["seed"] = cell.seed
                row.update(detail)
                out.append(row)
        return out

    def failed(self) -> List[SweepCell]:
        return [c for c in self.cells if not c.ok]

    def by_params(self, **params: Any) -> List[SweepCell]:
        return [
            c for c in self.cells
            if all(c.params.get(k) == v for k, v in params.items())
        ]


def _run_cell(
    worker: Callable[[CellParams, int], CellResult],
    params: CellParams,
    seed: int,
) -> SweepCell:
    cell = SweepCell(params=dict(params), seed=int(seed))
    start = time.perf_counter()
    try:
        cell.results, cell.details = worker(params, seed)
    except Exception as exc:
        cell.status = "failed"
        cell.error = str(exc)
        logger.warning(f"Cell {params} seed={seed} failed: {exc}")
    cell.runtime_s = time.perf_counter() - start
    return cell


def run_sweep(
    name: str,
    grid: Dict[str, Sequence[Any]],
    seeds: Sequence[int],
    result_columns: List[str],
    worker: Callable[[CellParams, int], CellResult],
    workers: int = 1,
) -> SweepReport:
    """Evaluate ``worker`` on the cartesian product of ``grid`` and ``seeds``."""
    if not grid or any(len(v) == 0 for v in grid.values()):
        raise ValueError(f"Sweep '{name}' has an empty grid")
    if not seeds:
        raise ValueError(f"Sweep '{name}' has no seeds")
    if workers < 1:
        raise ValueError("workers must be at least 1")

    columns = list(grid)
    tasks: List[Tuple[CellParams, int]] = [
        (dict(zip(columns, values)), int(seed))
        for values in itertools.product(*(grid[c] for c in columns))
        for seed in seeds
    ]
    logger.info(f"Sweep '{name}': {len(tasks)} cells on {workers} worker(s)")

    if workers == 1:
        cells = [_run_cell(worker, p, s) for p, s in tasks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            # map() yields in submission order
            cells = list(pool.map(lambda task: _run_cell(worker, *task), tasks))

    report = SweepReport(name=name, grid_columns=columns, result_columns=result_columns, cells=cells)
    n_failed = len(report.failed())
    if n_failed:
        logger.warning(f"Sweep '{name}': {n_failed} of {len(cells)} cells failed")
    else:
        logger.info(f"Sweep '{name}' finished")
    return report


def _grid(overrides: Dict[str, Any] | None, default: Dict[str, Sequence[Any]]) -> Dict[str, List[Any]]:
    grid = {k: list(v) for k, v in default.items()}
    for key, values in (overrides or {}).items():
        if key not in grid:
            raise ValueError(f"Unknown grid column '{key}'; expected one of {list(grid)}")
        grid[key] = list(values)
    return grid


def sweep_finite_env(
    seeds: Sequence[int],
    grid: Dict[str, Iterable[Any]] | None = None,
    *,
    L: int = 4,
    tau: float = 0.2,
    K: int = 75,
    workers: int = 1,
) -> SweepReport:
    """Reconstructed rank and effective environment dimension per (d_E, sigma, T)."""

    def worker(p: CellParams, seed: int) -> CellResult:
        cfg = FiniteEnvConfig(d_E=int(p["d_E"]), tau=tau, generator_seed=seed)
        data = simulate_experiment(cfg, L, int(p["T"]), float(p["sigma"]), seed)
        model = fit(data.train_noisy, K, ThresholdConfig(sigma=float(p["sigma"])))
        match = match_spectra(model.eigenvalues, channel_spectrum(cfg))
        return {
            "r": model.r,
            "d_E_eff": effective_env_dim(model.r, cfg.d),
            "natural_rank": natural_rank(cfg.d, cfg.d_E),
            "max_eig_distance": match.max_distance,
        }, []

    return run_sweep(
        "table1",
        _grid(grid, TABLE1_GRID),
        seeds,
        ["r", "d_E_eff", "natural_rank", "max_eig_distance"],
        worker,
        workers,
    )


def sweep_memory_depth(
    seeds: Sequence[int],
    grid: Dict[str, Iterable[Any]] | None = None,
    *,
    d_E: int = 3,
    T: int = 200,
    L: int = 4,
    tau: float = 0.2,
    workers: int = 1,
) -> SweepReport:
    """Prediction error against the clean and the noisy test trajectory per (K, sigma)."""

    def worker(p: CellParams, seed: int) -> CellResult:
        sigma = float(p["sigma"])
        cfg = FiniteEnvConfig(d_E=d_E, tau=tau, generator_seed=seed)
        data = simulate_experiment(cfg, L, T, sigma, seed)
        model = fit(data.train_noisy, int(p["K"]), ThresholdConfig(sigma=sigma))
        clean, noisy = prediction_errors(model, data.test_noisy, data.test_clean, data.test_noisy)
        return {"r": model.r, "dist_clean": clean, "dist_noisy": noisy}, []

    return run_sweep(
        "fig3b",
        _grid(grid, MEMORY_DEPTH_GRID),
        seeds,
        ["r", "dist_clean", "dist_noisy"],
        worker,
        workers,
    )


def sweep_spectra(
    seeds: Sequence[int],
    sigmas: Sequence[float] = tuple(SPECTRUM_SIGMAS),
    *,
    d_E: int = 4,
    T: int = 200,
    L: int = 4,
    tau: float = 0.2,
    K: int = 75,
    workers: int = 1,
) -> SweepReport:
    """Reconstructed eigenvalues against exp(tau L); overlay rows kept as cell details."""

    def worker(p: CellParams, seed: int) -> CellResult:
        sigma = float(p["sigma"])
        cfg = FiniteEnvConfig(d_E=d_E, tau=tau, generator_seed=seed)
        data = simulate_experiment(cfg, L, T, sigma, seed)
        model = fit(data.train_noisy, K, ThresholdConfig(sigma=sigma))
        reference = channel_spectrum(cfg)
        summary = match_spectra(model.eigenvalues, reference).summary()
        summary["r"] = model.r
        return summary, compare_spectra(model, reference)

    return run_sweep(
        "fig3c",
        {"sigma": list(sigmas)},
        seeds,
        ["r", "matched", "max_distance", "mean_distance", "unmatched_reference"],
        worker,
        workers,
    )


def sweep_denoising(
    seeds: Sequence[int],
    grid: Dict[str, Iterable[Any]] | None = None,
    *,
    T: int = 200,
    L: int = 4,
    tau: float = 0.2,
    K: int = 75,
    workers: int = 1,
) -> SweepReport:
    """Distance to the clean data before and after Hankel denoising per (d_E, sigma)."""

    def worker(p: CellParams, seed: int) -> CellResult:
        sigma = float(p["sigma"])
        cfg = FiniteEnvConfig(d_E=int(p["d_E"]), tau=tau, generator_seed=seed)
        data = simulate_experiment(cfg, L, T, sigma, seed)
        eta, denoised = denoise_dataset(data.train_noisy, K, ThresholdConfig(sigma=sigma))
        before = dist_dataset(data.train_noisy, data.train_clean)
        after = dist_dataset(denoised, data.train_clean)
        return {
            "eta": eta,
            "dist_noisy": before,
            "dist_denoised": after,
            "improved": int(after < before),
        }, []

    return run_sweep(
        "fig3d",
        _grid(grid, DENOISING_GRID),
        seeds,
        ["eta", "dist_noisy", "dist_denoised", "improved"],
        worker,
        workers,
    )


def sweep_spin_boson_gamma(
    seeds: Sequence[int],
    grid: Dict[str, Iterable[Any]] | None = None,
    *,
    L: int = 4,
    T: int = 1000,
    tau: float = 0.15,
    sigma_threshold: float = 1e-6,
    Delta: float = 0.5,
    g: float = 0.5,
    n_levels: int = 8,
    workers: int = 1,
) -> SweepReport:
    """Rank and prediction error on noiseless pseudomode data per (gamma, K)."""

    def worker(p: CellParams, seed: int) -> CellResult:
        cfg = SpinBosonConfig(
            Delta=Delta, g=g, gamma=float(p["gamma"]), tau=tau, n_levels=n_levels
        )
        data = simulate_experiment(cfg, L, T, 0.0, seed)
        model = fit(data.train_clean, int(p["K"]), ThresholdConfig(sigma=sigma_threshold))
        (clean,) = prediction_errors(model, data.test_clean, data.test_clean)
        return {
            "r": model.r,
            "d_E_eff": effective_env_dim(model.r, 2),
            "dist_clean": clean,
        }, []

    return run_sweep(
        "fig5",
        _grid(grid, SPIN_BOSON_GRID),
        seeds,
        ["r", "d_E_eff", "dist_clean"],
        worker,
        workers,
    )
