"""
Trajectory distances, spectrum matching and memory-depth selection.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np
import scipy.optimize

from .embedding import DmdVariant, EmbeddingModel, ThresholdConfig, fit, predict_trajectory
from .logger import get_logger
from .models import TrajectoryDataset

logger = get_logger(__name__)


def _state_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Trace norms of ``a[..., :, :] - b[..., :, :]`` along the leading axes."""
    return np.sum(np.linalg.svd(a - b, compute_uv=False), axis=-1)


def dist_test(t1: np.ndarray, t2: np.ndarray, K: int) -> float:
    """Mean trace distance over steps ``K .. T-1``."""
    a = np.asarray(t1, dtype=complex)
    b = np.asarray(t2, dtype=complex)
    if a.shape != b.shape:
        raise ValueError(f"Trajectory shapes differ: {a.shape} vs {b.shape}")
    T = a.shape[0]
    if T <= K:
        raise ValueError(f"Trajectory length T={T} must exceed K={K}")
    return float(np.mean(_state_distances(a[K:], b[K:])))


def dist_dataset(s1: TrajectoryDataset, s2: TrajectoryDataset) -> float:
    """Mean trace distance over every paired state of two datasets."""
    a, b = s1.trajectories, s2.trajectories
    if a.shape != b.shape:
        raise ValueError(f"Dataset shapes differ: {a.shape} vs {b.shape}")
    return float(np.mean(_state_distances(a, b)))


@dataclass
class SpectrumMatch:
    pairs: List[Tuple[int, int]]
    distances: np.ndarray
    unmatched_recovered: List[int] = field(default_factory=list)
    unmatched_reference: List[int] = field(default_factory=list)

    @property
    def max_distance(self) -> float:
        return float(np.max(self.distances)) if self.distances.size else 0.0

    @property
    def mean_distance(self) -> float:
        return float(np.mean(self.distances)) if self.distances.size else 0.0

    @property
    def total_cost(self) -> float:
        return float(np.sum(self.distances))

    def summary(self) -> Dict[str, float | int]:
        return {
            "matched": len(self.pairs),
            "max_distance": self.max_distance,
            "mean_distance": self.mean_distance,
            "unmatched_recovered": len(self.unmatched_recovered),
            "unmatched_reference": len(self.unmatched_reference),
        }


def match_spectra(
    recovered: Sequence[complex] | np.ndarray,
    reference: Sequence[complex] | np.ndarray,
) -> SpectrumMatch:
    """Minimal-total-distance pairing of two eigenvalue lists."""
    rec = np.asarray(recovered, dtype=complex).reshape(-1)
    ref = np.asarray(reference, dtype=complex).reshape(-1)
    if rec.size == 0 or ref.size == 0:
        return SpectrumMatch(
            pairs=[],
            distances=np.zeros(0),
            unmatched_recovered=list(range(rec.size)),
            unmatched_reference=list(range(ref.size)),
        )
    cost = np.abs(rec[:, None] - ref[None, :])
    rows, cols = scipy.optimize.linear_sum_assignment(cost)
    pairs = [(int(i), int(j)) for i, j in zip(rows, cols)]
    return SpectrumMatch(
        pairs=pairs,
        distances=cost[rows, cols],
        unmatched_recovered=sorted(set(range(rec.size)) - set(int(i) for i in rows)),
        unmatched_reference=sorted(set(range(ref.size)) - set(int(j) for j in cols)),
    )


def compare_spectra(
    model: EmbeddingModel,
    reference: np.ndarray,
) -> List[Dict[str, object]]:
    """
    Overlay rows for the reconstructed and channel eigenvalues: one row per
    eigenvalue, matched partners on the same row.
    """
    match = match_spectra(model.eigenvalues, reference)
    rows: List[Dict[str, object]] = []
    for (i, j), dist in zip(match.pairs, match.distances):
        lam, ref = model.eigenvalues[i], reference[j]
        rows.append({
            "source": "matched",
            "recovered_re": float(lam.real), "recovered_im": float(lam.imag),
            "reference_re": float(ref.real), "reference_im": float(ref.imag),
            "distance": float(dist),
        })
    for i in match.unmatched_recovered:
        lam = model.eigenvalues[i]
        rows.append({
            "source": "recovered",
            "recovered_re": float(lam.real), "recovered_im": float(lam.imag),
            "reference_re": "", "reference_im": "", "distance": "",
        })
    for j in match.unmatched_reference:
        ref = reference[j]
        rows.append({
            "source": "reference",
            "recovered_re": "", "recovered_im": "",
            "reference_re": float(ref.real), "reference_im": float(ref.imag),
            "distance": "",
        })
    return rows


def prediction_errors(
    model: EmbeddingModel,
    test: TrajectoryDataset,
    *references: TrajectoryDataset,
    project: bool = False,
) -> List[float]:
    """
    Predict every trajectory of ``test`` from its first K states and return
    the mean D_test against each reference (averaged over trajectories).
    """
    K = model.K
    if test.T <= K:
        raise ValueError(f"Test trajectory length T={test.T} must exceed K={K}")
    errors = np.zeros(len(references))
    for l in range(test.L):
        pred = predict_trajectory(model, test.trajectories[l, :K], test.T - K, project=project)
        full = np.concatenate([test.trajectories[l, :K], pred])
        for idx, ref in enumerate(references):
            errors[idx] += dist_test(full, ref.trajectories[l], K)
    return [float(e / test.L) for e in errors]


@dataclass
class MemoryDepthSelection:
    best_K: int
    scores: Dict[int, float]
    failures: Dict[int, str] = field(default_factory=dict)


def select_memory_depth(
    dataset: TrajectoryDataset,
    test_noisy: TrajectoryDataset,
    K_grid: Sequence[int],
    cfg: ThresholdConfig = ThresholdConfig(),
    *,
    variant: DmdVariant = "projected",
) -> MemoryDepthSelection:
    """Pick K minimizing D_test(prediction, noisy test trajectory)."""
    if not K_grid:
        raise ValueError("K grid is empty")
    scores: Dict[int, float] = {}
    failures: Dict[int, str] = {}
    for K in sorted(set(int(k) for k in K_grid)):
        try:
            model = fit(dataset, K, cfg, variant=variant)
            scores[K] = prediction_errors(model, test_noisy, test_noisy)[0]
            logger.debug(f"K={K}: r={model.r}, D_test={scores[K]:.4e}")
        except ValueError as exc:
            failures[K] = str(exc)
            logger.warning(f"K={K} skipped: {exc}")
    if not scores:
        raise ValueError("No memory depth in the grid produced a usable fit")
    best = min(scores, key=lambda k: (scores[k], k))
    logger.info(f"Selected memory depth K={best} (D_test={scores[best]:.4e})")
    return MemoryDepthSelection(best_K=best, scores=scores, failures=failures)
