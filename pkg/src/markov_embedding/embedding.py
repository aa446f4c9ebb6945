"""
Markovian embedding reconstruction.

Pipeline
--------
1. stack vectorized states into block-Hankel matrices H, X, Y (per trajectory,
   then side by side)
2. estimate the embedding rank from the singular values of H with the optimal
   hard threshold for complex Gaussian noise
3. project X and Y on the leading left singular subspace of H
4. reduced (projected) DMD gives eigenvalues, decoding map D and encoding map E
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from .errors import DegenerateSpectrumError, NoSignalError
from .logger import get_logger
from .models import TrajectoryDataset
from .qcore import pinv, project_to_density

logger = get_logger(__name__)

MAX_EIGVEC_CONDITION = 1e12
ED_TOL = 1e-8

DmdVariant = Literal["projected", "literal"]
Trajectories = Union[TrajectoryDataset, Sequence[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ThresholdConfig:
    sigma: float = 0.0
    floor: float = 1e-12

    def __post_init__(self) -> None:
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if self.floor <= 0:
            raise ValueError("floor must be positive")


@dataclass(frozen=True)
class HankelSet:
    K: int
    d: int
    H: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    column_provenance: np.ndarray
    shift_provenance: np.ndarray
    trajectory_lengths: Tuple[int, ...]
    tau: float = 1.0


@dataclass(frozen=True)
class EmbeddingModel:
    r: int
    K: int
    d: int
    eigenvalues: np.ndarray
    E: np.ndarray
    D: np.ndarray
    singular_values: np.ndarray
    threshold: ThresholdConfig = field(default_factory=ThresholdConfig)
    tau: float = 1.0

    @property
    def decoder(self) -> np.ndarray:
        """Bottom block-row of D: decodes the newest state of the window."""
        return self.D[-self.d * self.d:, :]

    @property
    def effective_env_dim(self) -> int:
        return effective_env_dim(self.r, self.d)

    def encode(self, history: np.ndarray) -> np.ndarray:
        return self.E @ _window_vector(history, self.K, self.d)

    def continuous_rates(self, tau: Optional[float] = None) -> np.ndarray:
        """log(lambda_i) / tau, reported as a diagnostic only."""
        step = self.tau if tau is None else tau
        with np.errstate(divide="ignore"):
            return np.log(self.eigenvalues.astype(complex)) / step

    def ed_deviation(self) -> float:
        return float(np.max(np.abs(self.E @ self.D - np.eye(self.r))))


# ---------------------------------------------------------------------------
# Hankel matrices
# ---------------------------------------------------------------------------


def _as_trajectory_list(data: Trajectories) -> List[np.ndarray]:
    if isinstance(data, TrajectoryDataset):
        return [data.trajectories[l] for l in range(data.L)]
    if isinstance(data, np.ndarray) and data.ndim == 4:
        return [data[l] for l in range(data.shape[0])]
    return [np.asarray(t, dtype=complex) for t in data]


def build_hankel(trajectory: np.ndarray, K: int) -> np.ndarray:
    """
    Column j stacks vec(rho(j)), ..., vec(rho(j+K-1)), oldest on top.
    Shape ``(K d^2, T - K + 1)``.
    """
    traj = np.asarray(trajectory, dtype=complex)
    if traj.ndim != 3 or traj.shape[1] != traj.shape[2]:
        raise ValueError(f"Trajectory must have shape (T, d, d); got {traj.shape}")
    T, d = traj.shape[0], traj.shape[1]
    if K < 1:
        raise ValueError("Memory depth K must be at least 1")
    if T <= K:
        raise ValueError(f"Trajectory length T={T} must exceed memory depth K={K}")
    vecs = traj.reshape(T, d * d)
    n_cols = T - K + 1
    return np.concatenate([vecs[k:k + n_cols].T for k in range(K)], axis=0)


def build_shifted_and_stack(data: Trajectories, K: int, tau: float = 1.0) -> HankelSet:
    trajectories = _as_trajectory_list(data)
    if not trajectories:
        raise ValueError("Dataset is empty")
    if isinstance(data, TrajectoryDataset):
        tau = data.tau

    h_blocks, x_blocks, y_blocks = [], [], []
    h_prov, xy_prov = [], []
    for idx, traj in enumerate(trajectories):
        h = build_hankel(traj, K)
        h_blocks.append(h)
        x_blocks.append(h[:, :-1])
        y_blocks.append(h[:, 1:])
        h_prov.append(np.full(h.shape[1], idx))
        xy_prov.append(np.full(h.shape[1] - 1, idx))

    d = trajectories[0].shape[1]
    return HankelSet(
        K=K,
        d=d,
        H=np.hstack(h_blocks),
        X=np.hstack(x_blocks),
        Y=np.hstack(y_blocks),
        column_provenance=np.concatenate(h_prov),
        shift_provenance=np.concatenate(xy_prov),
        trajectory_lengths=tuple(int(t.shape[0]) for t in trajectories),
        tau=float(tau),
    )


# ---------------------------------------------------------------------------
# Rank selection
# ---------------------------------------------------------------------------


def gavish_donoho_factor(beta: float) -> float:
    """f(beta) of the optimal hard threshold for an unknown-rank matrix."""
    return math.sqrt(
        2.0 * (beta + 1.0)
        + 8.0 * beta / ((beta + 1.0) + math.sqrt(beta * beta + 14.0 * beta + 1.0))
    )


def noise_threshold(m: int, n: int, sigma: float) -> float:
    """
    sigma * sqrt(2) * sqrt(n) * f(m/n) with the aspect ratio folded into
    (0, 1] so the threshold is symmetric under transposition.
    """
    if m < 1 or n < 1:
        raise ValueError("Matrix dimensions must be positive")
    short, long_ = (m, n) if m <= n else (n, m)
    beta = short / long_
    return sigma * math.sqrt(2.0) * math.sqrt(long_) * gavish_donoho_factor(beta)


def singular_value_threshold(
    singular_values: np.ndarray, m: int, n: int, cfg: ThresholdConfig
) -> float:
    s = np.asarray(singular_values, dtype=float)
    if cfg.sigma == 0.0:
        return cfg.floor * (float(s[0]) if s.size else 0.0)
    return noise_threshold(m, n, cfg.sigma)


def optimal_rank(
    singular_values: Sequence[float] | np.ndarray,
    m: int,
    n: int,
    cfg: ThresholdConfig,
) -> int:
    """Number of singular values at or above the noise threshold."""
    s = np.asarray(singular_values, dtype=float)
    if s.size == 0:
        return 0
    threshold = singular_value_threshold(s, m, n, cfg)
    if cfg.sigma == 0.0 and threshold == 0.0:
        return int(np.sum(s > 0.0))
    return int(np.sum(s >= threshold))


# ---------------------------------------------------------------------------
# Denoising
# ---------------------------------------------------------------------------


def _reassemble(
    H_den: np.ndarray,
    hs: HankelSet,
    project: bool,
) -> np.ndarray:
    d2 = hs.d * hs.d
    trajectories = []
    start = 0
    for T in hs.trajectory_lengths:
        n_cols = T - hs.K + 1
        block = H_den[:, start:start + n_cols]
        start += n_cols
        states = np.empty((T, d2), dtype=complex)
        # first block-row covers rho(0..T-K), the last column covers the rest
        states[:n_cols] = block[:d2, :].T
        if hs.K > 1:
            states[n_cols:] = block[d2:, -1].reshape(hs.K - 1, d2)
        states = states.reshape(T, hs.d, hs.d)
        if project:
            states = np.stack([project_to_density(s) for s in states])
        trajectories.append(states)
    return np.stack(trajectories)


def denoise(
    hs: HankelSet,
    eta: int,
    *,
    project: bool = False,
    template: Optional[TrajectoryDataset] = None,
) -> Tuple[np.ndarray, TrajectoryDataset]:
    """Rank-``eta`` truncation of H, split back into trajectories."""
    m, n = hs.H.shape
    if not 1 <= eta <= min(m, n):
        raise ValueError(f"eta={eta} outside the valid range [1, {min(m, n)}]")

    if eta == min(m, n):
        H_den = hs.H.copy()
    else:
        U, S, Vh = scipy.linalg.svd(hs.H, full_matrices=False)
        H_den = (U[:, :eta] * S[:eta]) @ Vh[:eta, :]

    if len(set(hs.trajectory_lengths)) != 1:
        raise ValueError("Denoised trajectories must share one length to form a dataset")
    states = _reassemble(H_den, hs, project)

    if template is not None:
        dataset = template.copy()
        dataset.trajectories = states
        dataset.metadata["denoised_rank"] = int(eta)
    else:
        dataset = TrajectoryDataset(
            d=hs.d, tau=hs.tau, trajectories=states, metadata={"denoised_rank": int(eta)}
        )
    return H_den, dataset


def denoise_dataset(
    dataset: TrajectoryDataset,
    K: int,
    cfg: ThresholdConfig,
    *,
    project: bool = False,
) -> Tuple[int, TrajectoryDataset]:
    hs = build_shifted_and_stack(dataset, K)
    s = scipy.linalg.svdvals(hs.H)
    m, n = hs.H.shape
    eta = optimal_rank(s, m, n, cfg)
    if eta == 0:
        raise NoSignalError(singular_value_threshold(s, m, n, cfg), float(s[0]))
    logger.info(f"Denoising with rank {eta} of {min(m, n)}")
    _, denoised = denoise(hs, eta, project=project, template=dataset)
    return eta, denoised


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------


def _spectral_order(eigenvalues: np.ndarray) -> np.ndarray:
    """Descending modulus; ties broken by descending phase in (-pi, pi]."""
    modulus = np.round(np.abs(eigenvalues), 12)
    phase = np.angle(eigenvalues)
    phase = np.where(phase <= -np.pi, np.pi, phase)
    return np.lexsort((-phase, -modulus))


def _check_eigenvectors(W: np.ndarray, eigenvalues: np.ndarray) -> None:
    cond = float(np.linalg.cond(W))
    logger.debug(f"Eigenvector matrix condition number {cond:.3e}")
    if not np.isfinite(cond) or cond > MAX_EIGVEC_CONDITION:
        # eigenvalue pair whose eigenvectors are most nearly parallel
        cols = W / np.linalg.norm(W, axis=0, keepdims=True)
        overlap = np.abs(cols.conj().T @ cols)
        np.fill_diagonal(overlap, 0.0)
        i, j = np.unravel_index(int(np.argmax(overlap)), overlap.shape)
        center = eigenvalues[i]
        spread = max(abs(eigenvalues[i] - eigenvalues[j]), 1e-12) * 10
        cluster = eigenvalues[np.abs(eigenvalues - center) <= spread]
        raise DegenerateSpectrumError(cluster, cond)


def _projected_dmd(
    Xd: np.ndarray, Yd: np.ndarray, r: int
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    Ux, Sx, Vxh = scipy.linalg.svd(Xd, full_matrices=False)
    rank_x = int(np.sum(Sx > Sx[0] * max(Xd.shape) * np.finfo(float).eps)) if Sx.size else 0
    if rank_x < r:
        logger.warning(
            f"Projected X has numerical rank {rank_x} < {r}; reducing the embedding rank"
        )
        r = rank_x
    Ux = Ux[:, :r]
    Sx = Sx[:r]
    Vx = Vxh[:r, :].conj().T
    A_tilde = (Ux.conj().T @ Yd @ Vx) / Sx[None, :]
    eigenvalues, W = scipy.linalg.eig(A_tilde)
    _check_eigenvectors(W, eigenvalues)
    order = _spectral_order(eigenvalues)
    eigenvalues, W = eigenvalues[order], W[:, order]
    D = Ux @ W
    E = scipy.linalg.solve(W, Ux.conj().T)
    return eigenvalues, E, D, r


def _literal_dmd(
    Xd: np.ndarray, Yd: np.ndarray, r: int
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    M_bar = Yd @ pinv(Xd)
    eigenvalues, left, right = scipy.linalg.eig(M_bar, left=True, right=True)
    # the r largest-modulus eigenvalues are the nonzero part of the spectrum
    order = _spectral_order(eigenvalues)[:r]
    eigenvalues, left, right = eigenvalues[order], left[:, order], right[:, order]
    _check_eigenvectors(right, eigenvalues)
    # rows of E are left eigenvectors scaled so that E D = I
    E = scipy.linalg.solve(left.conj().T @ right, left.conj().T)
    return eigenvalues, E, right, r


def fit(
    dataset: Trajectories,
    K: int,
    cfg: ThresholdConfig = ThresholdConfig(),
    *,
    variant: DmdVariant = "projected",
) -> EmbeddingModel:
    """Reconstruct the minimal Markovian embedding from trajectories."""
    hs = build_shifted_and_stack(dataset, K)
    m, n = hs.H.shape
    U, S, _ = scipy.linalg.svd(hs.H, full_matrices=False)
    r = optimal_rank(S, m, n, cfg)
    threshold = singular_value_threshold(S, m, n, cfg)
    logger.debug(f"H is {m}x{n}; threshold {threshold:.3e}; top singular values {S[:8]}")
    if r == 0:
        raise NoSignalError(threshold, float(S[0]))
    logger.info(f"Estimated embedding rank r={r} (K={K}, H {m}x{n})")

    P = U[:, :r]
    Xd = P @ (P.conj().T @ hs.X)
    Yd = P @ (P.conj().T @ hs.Y)

    if variant == "projected":
        eigenvalues, E, D, r = _projected_dmd(Xd, Yd, r)
    elif variant == "literal":
        eigenvalues, E, D, r = _literal_dmd(Xd, Yd, r)
    else:
        raise ValueError(f"Unknown DMD variant: {variant!r}")

    model = EmbeddingModel(
        r=r,
        K=K,
        d=hs.d,
        eigenvalues=eigenvalues,
        E=E,
        D=D,
        singular_values=S,
        threshold=cfg,
        tau=hs.tau,
    )
    dev = model.ed_deviation()
    if dev > ED_TOL:
        logger.warning(f"|ED - I| = {dev:.3e} exceeds {ED_TOL:g}")
    return model


# ---------------------------------------------------------------------------
# Prediction
# ---------------------------------------------------------------------------


def _window_vector(history: np.ndarray, K: int, d: int) -> np.ndarray:
    hist = np.asarray(history, dtype=complex)
    if hist.shape != (K, d, d):
        raise ValueError(f"History must hold K={K} states of shape ({d}, {d}); got {hist.shape}")
    return hist.reshape(K * d * d)


def predict(
    model: EmbeddingModel,
    history: np.ndarray,
    n: int,
    *,
    project: bool = False,
) -> np.ndarray:
    """State ``n`` steps after the newest history entry."""
    if n < 1:
        raise ValueError("n must be at least 1")
    s = model.encode(history)
    vec = model.decoder @ (model.eigenvalues ** n * s)
    state = vec.reshape(model.d, model.d)
    return project_to_density(state) if project else state


def predict_trajectory(
    model: EmbeddingModel,
    history: np.ndarray,
    n_steps: int,
    *,
    project: bool = False,
) -> np.ndarray:
    """States ``1 .. n_steps`` ahead, shape ``(n_steps, d, d)``."""
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    s = model.encode(history)
    powers = model.eigenvalues[None, :] ** np.arange(1, n_steps + 1)[:, None]
    states = ((powers * s[None, :]) @ model.decoder.T).reshape(n_steps, model.d, model.d)
    if project:
        states = np.stack([project_to_density(x) for x in states])
    return states


def effective_env_dim(r: int, d: int) -> int:
    """ceil(sqrt(r / d^2)) in exact integer arithmetic."""
    if r < 0 or d < 1:
        raise ValueError("r must be non-negative and d positive")
    e = math.isqrt(r // (d * d))
    while e * e * d * d < r:
        e += 1
    return e


def natural_rank(d: int, d_E: int) -> int:
    return d * d * d_E * d_E
