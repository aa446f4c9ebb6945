"""
Ground-truth simulators for the three physical models and noise injection.

Models
------
- finite environment: random GKSL generator on system (x) d_E-level environment
- damped Jaynes-Cummings: atom (x) truncated bosonic mode, coherent initial mode
- spin-boson: atom (x) one damped pseudomode reproducing a Lorentzian bath

All simulators build the one-step propagator once and then advance every
initial state with matrix products.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.integrate
import scipy.linalg
import scipy.special
import scipy.stats

from .errors import DegenerateStationaryStateError, NonPhysicalStateError, TruncationError
from .logger import get_logger
from .qcore import (
    PAULI_X,
    PAULI_Z,
    SIGMA_PLUS,
    density_matrix_errors,
    devectorize,
    gell_mann_basis,
    ket_to_density,
    lindblad_superoperator,
    matrix_exponential,
    partial_trace_env_many,
    partial_trace_sys,
    sample_pure_state,
)

logger = get_logger(__name__)

STATIONARY_TOL = 1e-9
DEFAULT_MASS = 0.95
DEFAULT_TRUNCATION_TOL = 1e-3

# divisors (n^2 - 1)^2 and n^2 - 1 of the rate matrix, n = d * d_E
RATE_NORMS = ("total", "per-element")


# ---------------------------------------------------------------------------
# Model records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FiniteEnvConfig:
    d_E: int
    tau: float = 0.2
    d: int = 2
    a_unit: float = 1.0
    a_diss: float = 0.1
    generator_seed: int = 0
    rate_norm: str = "total"

    kind = "finite"

    def to_metadata(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "d": self.d,
            "d_E": self.d_E,
            "tau": self.tau,
            "a_unit": self.a_unit,
            "a_diss": self.a_diss,
            "rate_norm": self.rate_norm,
            "generator_seed": self.generator_seed,
        }


@dataclass(frozen=True)
class JcConfig:
    gamma: float = 0.05
    g: float = 2.5
    alpha: complex = 1.1
    tau: float = 0.03
    n_levels: int = 0  # 0 means: pick from the 95% probability-mass rule

    kind = "jc"
    d = 2

    def resolved_levels(self, mass: float = DEFAULT_MASS) -> int:
        if self.n_levels > 0:
            return self.n_levels
        return truncation_level(self.alpha, mass)

    def to_metadata(self) -> Dict[str, Any]:
        alpha = complex(self.alpha)
        return {
            "kind": self.kind,
            "d": self.d,
            "gamma": self.gamma,
            "g": self.g,
            "alpha": [alpha.real, alpha.imag],
            "tau": self.tau,
            "n_levels": self.resolved_levels(),
        }


@dataclass(frozen=True)
class SpinBosonConfig:
    Delta: float = 0.5
    g: float = 0.5
    gamma: float = 0.05
    omega0: float = 1.0
    tau: float = 0.15
    n_levels: int = 8
    # re-simulate with 2 * n_levels and raise past convergence_tol
    check_convergence: bool = False
    convergence_tol: float = DEFAULT_TRUNCATION_TOL

    kind = "spin-boson"
    d = 2

    @property
    def pseudomode_frequency(self) -> float:
        return math.sqrt(self.omega0 ** 2 - self.gamma ** 2 / 4.0)

    def to_metadata(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "d": self.d,
            "Delta": self.Delta,
            "g": self.g,
            "gamma": self.gamma,
            "omega0": self.omega0,
            "tau": self.tau,
            "n_levels": self.n_levels,
        }


ModelConfig = Union[FiniteEnvConfig, JcConfig, SpinBosonConfig]


def model_config_from_metadata(meta: Dict[str, Any]) -> ModelConfig:
    """Rebuild a model record from the ``model`` block of a dataset file."""
    kind = meta.get("kind")
    if kind == "finite":
        return FiniteEnvConfig(
            d_E=int(meta["d_E"]),
            tau=float(meta["tau"]),
            d=int(meta.get("d", 2)),
            a_unit=float(meta.get("a_unit", 1.0)),
            a_diss=float(meta.get("a_diss", 0.1)),
            generator_seed=int(meta.get("generator_seed", 0)),
            rate_norm=str(meta.get("rate_norm", "total")),
        )
    if kind == "jc":
        alpha = meta.get("alpha", 0.0)
        if isinstance(alpha, (list, tuple)):
            alpha = complex(alpha[0], alpha[1])
        return JcConfig(
            gamma=float(meta["gamma"]),
            g=float(meta["g"]),
            alpha=complex(alpha),
            tau=float(meta["tau"]),
            n_levels=int(meta.get("n_levels", 0)),
        )
    if kind == "spin-boson":
        return SpinBosonConfig(
            Delta=float(meta["Delta"]),
            g=float(meta["g"]),
            gamma=float(meta["gamma"]),
            omega0=float(meta.get("omega0", 1.0)),
            tau=float(meta["tau"]),
            n_levels=int(meta.get("n_levels", 8)),
        )
    raise ValueError(f"Unknown model kind in metadata: {kind!r}")


# ---------------------------------------------------------------------------
# Datasets
# ---------------------------------------------------------------------------


@dataclass
class TrajectoryDataset:
    """
    ``trajectories`` has shape ``(L, T, d, d)``; trajectory ``l`` holds the
    states at times ``0 .. T-1``.
    """

    d: int
    tau: float
    trajectories: np.ndarray
    noise_sigma: float = 0.0
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.trajectories = np.asarray(self.trajectories, dtype=complex)
        if self.trajectories.ndim != 4 or self.trajectories.shape[2:] != (self.d, self.d):
            raise ValueError(
                f"Trajectories must have shape (L, T, {self.d}, {self.d}); "
                f"got {self.trajectories.shape}"
            )

    @property
    def L(self) -> int:
        return int(self.trajectories.shape[0])

    @property
    def T(self) -> int:
        return int(self.trajectories.shape[1])

    def copy(self) -> "TrajectoryDataset":
        return replace(
            self,
            trajectories=self.trajectories.copy(),
            metadata=dict(self.metadata),
        )

    def subset(self, indices: Sequence[int]) -> "TrajectoryDataset":
        return replace(
            self,
            trajectories=self.trajectories[list(indices)].copy(),
            metadata=dict(self.metadata),
        )

    def physical_errors(self, tol: float = 1e-8) -> List[str]:
        """Density-matrix violations, prefixed with ``(trajectory, step)``."""
        problems: List[str] = []
        for l in range(self.L):
            for k in range(self.T):
                for msg in density_matrix_errors(self.trajectories[l, k], tol):
                    problems.append(f"({l}, {k}): {msg}")
        return problems


# ---------------------------------------------------------------------------
# Finite environment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GkslGenerator:
    d: int
    d_E: int
    H: np.ndarray
    gamma: np.ndarray
    basis: np.ndarray
    a_unit: float = 1.0
    a_diss: float = 0.1

    @property
    def dim(self) -> int:
        return self.d * self.d_E


def _complex_gaussian(rng: np.random.Generator, shape: Tuple[int, ...]) -> np.ndarray:
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_gksl(
    d: int,
    d_E: int,
    a_unit: float = 1.0,
    a_diss: float = 0.1,
    rng: Optional[np.random.Generator] = None,
    rate_norm: str = "total",
) -> GkslGenerator:
    """
    H = (A + A^+) / 2 and gamma = BB^+ / c with standard complex Gaussian A, B.

    ``rate_norm="per-element"`` uses c = n^2 - 1, so E[gamma] = 2 I and the
    dissipator is close to a depolarizing map at rate 2 * a_diss * n.
    ``"total"`` uses c = (n^2 - 1)^2, giving relaxation rates near 2 * a_diss / n.
    """
    if d < 2 or d_E < 2:
        raise ValueError("random_gksl requires d >= 2 and d_E >= 2")
    if rate_norm not in RATE_NORMS:
        raise ValueError(f"rate_norm must be one of {', '.join(RATE_NORMS)}: {rate_norm!r}")
    rng = rng if rng is not None else np.random.default_rng()
    n = d * d_E
    count = n * n - 1

    a = _complex_gaussian(rng, (n, n))
    hamiltonian = 0.5 * (a + a.conj().T)

    b = _complex_gaussian(rng, (count, count))
    scale = count * count if rate_norm == "total" else count
    gamma = (b @ b.conj().T) / scale

    return GkslGenerator(
        d=d,
        d_E=d_E,
        H=hamiltonian,
        gamma=gamma,
        basis=gell_mann_basis(n),
        a_unit=float(a_unit),
        a_diss=float(a_diss),
    )


def gksl_superoperator(gen: GkslGenerator) -> np.ndarray:
    """
    Vectorized generator of the random finite-environment model.

    The rate matrix is diagonalized, gamma = V diag(mu) V^+, so the double sum
    over basis pairs collapses to jump operators J_k = sqrt(mu_k) sum_i V_ik F_i.
    """
    mu, vecs = np.linalg.eigh(0.5 * (gen.gamma + gen.gamma.conj().T))
    mu = np.clip(mu, 0.0, None)
    weights = vecs * np.sqrt(gen.a_diss * mu)[None, :]
    jumps = np.einsum("ik,iab->kab", weights, gen.basis)
    return lindblad_superoperator(gen.a_unit * gen.H, jumps)


def propagator(L_vec: np.ndarray, tau: float) -> np.ndarray:
    if tau < 0:
        raise ValueError("tau must be non-negative")
    return matrix_exponential(tau * np.asarray(L_vec, dtype=complex))


def stationary_state(L_vec: np.ndarray, d_total: int) -> np.ndarray:
    """Fixed point L[rho] = 0 of a vectorized generator."""
    L_vec = np.asarray(L_vec, dtype=complex)
    if L_vec.shape != (d_total * d_total, d_total * d_total):
        raise ValueError(
            f"Generator must be {d_total ** 2}x{d_total ** 2}; got {L_vec.shape}"
        )
    w, v = scipy.linalg.eig(L_vec)
    near_zero = int(np.sum(np.abs(w) < STATIONARY_TOL))
    if near_zero > 1:
        raise DegenerateStationaryStateError(near_zero)

    idx = int(np.argmin(np.abs(w)))
    rho = devectorize(v[:, idx], d_total)
    rho = 0.5 * (rho + rho.conj().T)
    tr = np.trace(rho).real
    if abs(tr) < 1e-14:
        raise NonPhysicalStateError("Stationary candidate has vanishing trace")
    rho = rho / tr

    min_eig = float(np.min(np.linalg.eigvalsh(rho)))
    if min_eig < -1e-8:
        raise NonPhysicalStateError(
            f"Stationary candidate is not positive semi-definite (min eigenvalue {min_eig:.3e})"
        )

    residual = float(np.linalg.norm(L_vec @ rho.reshape(-1)))
    scale = float(np.linalg.norm(L_vec))
    if residual > 1e-8 * max(scale, 1.0):
        logger.warning(f"Stationary state residual {residual:.3e} (|L|={scale:.3e})")
    else:
        logger.debug(f"Stationary state residual {residual:.3e}")
    return rho


def _evolve(
    phi: np.ndarray,
    initial_states: np.ndarray,
    T: int,
    d: int,
    d_E: int,
) -> np.ndarray:
    """
    Advance joint states ``(n, D, D)`` through ``T-1`` steps of ``phi`` and
    return the reduced system trajectories ``(n, T, d, d)``.
    """
    n_traj = initial_states.shape[0]
    dim = d * d_E
    cols = initial_states.reshape(n_traj, dim * dim).T
    joint = np.empty((T, dim * dim, n_traj), dtype=complex)
    joint[0] = cols
    for k in range(1, T):
        joint[k] = phi @ joint[k - 1]
    joint = joint.transpose(2, 0, 1).reshape(n_traj, T, dim, dim)
    return partial_trace_env_many(joint, d, d_E)


def simulate_finite_env(
    gen: GkslGenerator,
    psi: np.ndarray,
    T: int,
    tau: float,
) -> np.ndarray:
    """System trajectory ``(T, d, d)`` from ``|psi><psi| (x) Tr_S rho_st``."""
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (gen.d,):
        raise ValueError(f"Initial state must have dimension {gen.d}")
    L_vec = gksl_superoperator(gen)
    env = partial_trace_sys(stationary_state(L_vec, gen.dim), gen.d, gen.d_E)
    rho0 = np.kron(ket_to_density(psi), env)[None]
    return _evolve(propagator(L_vec, tau), rho0, T, gen.d, gen.d_E)[0]


# ---------------------------------------------------------------------------
# Damped Jaynes-Cummings
# ---------------------------------------------------------------------------


def annihilation(n_levels: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n_levels, dtype=float)), k=1).astype(complex)


def coherent_state(alpha: complex, n_levels: int) -> np.ndarray:
    if n_levels < 1:
        raise ValueError("n_levels must be at least 1")
    alpha = complex(alpha)
    n = np.arange(n_levels)
    log_fact = scipy.special.gammaln(n + 1)
    if alpha == 0:
        amps = np.zeros(n_levels, dtype=complex)
        amps[0] = 1.0
        return amps
    amps = np.exp(-abs(alpha) ** 2 / 2 + n * np.log(abs(alpha)) - 0.5 * log_fact)
    amps = amps * np.exp(1j * n * np.angle(alpha))
    return amps / np.linalg.norm(amps)


def truncation_level(alpha: complex, mass: float = DEFAULT_MASS) -> int:
    """Smallest n such that the first n Fock levels carry ``mass`` of |alpha>."""
    if not 0.0 < mass < 1.0:
        raise ValueError("mass must lie strictly between 0 and 1")
    mean = abs(complex(alpha)) ** 2
    if mean == 0.0:
        return 1
    n = 1
    while scipy.stats.poisson.cdf(n - 1, mean) < mass:
        n += 1
    return n


def jc_superoperator(cfg: JcConfig) -> np.ndarray:
    n = cfg.resolved_levels()
    if cfg.n_levels == 0:
        logger.warning(
            f"Automatic Fock truncation keeps {n} levels ({DEFAULT_MASS:.0%} of the coherent "
            f"state); doubling it can still move <sigma_x> well above 1e-3 over long runs. "
            f"Set n_levels explicitly and check with truncation_error()"
        )
    a = annihilation(n)
    eye_s = np.eye(2, dtype=complex)
    eye_m = np.eye(n, dtype=complex)
    hamiltonian = (
        np.kron(eye_s, a.conj().T @ a)
        + 0.5 * np.kron(PAULI_Z, eye_m)
        + 0.5 * cfg.g * (np.kron(SIGMA_PLUS, a) + np.kron(SIGMA_PLUS.T, a.conj().T))
    )
    jumps = [math.sqrt(cfg.gamma) * np.kron(eye_s, a)] if cfg.gamma > 0 else []
    return lindblad_superoperator(hamiltonian, jumps)


def simulate_jc(cfg: JcConfig, psi: np.ndarray, T: int) -> np.ndarray:
    n = cfg.resolved_levels()
    mode = ket_to_density(coherent_state(cfg.alpha, n))
    rho0 = np.kron(ket_to_density(psi), mode)[None]
    phi = propagator(jc_superoperator(cfg), cfg.tau)
    return _evolve(phi, rho0, T, 2, n)[0]


# ---------------------------------------------------------------------------
# Spin-boson via a single pseudomode
# ---------------------------------------------------------------------------


def _check_underdamped(cfg: SpinBosonConfig) -> None:
    if cfg.gamma <= 0:
        raise ValueError("Spin-boson gamma must be positive")
    if cfg.omega0 <= cfg.gamma / 2:
        raise ValueError(
            f"Overdamped bath (omega0={cfg.omega0} <= gamma/2={cfg.gamma / 2}); "
            f"the pseudomode mapping needs an underdamped spectral density"
        )


def spectral_density(cfg: SpinBosonConfig, omega: np.ndarray | float) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    return (cfg.gamma * cfg.g ** 2 * omega) / (
        (omega ** 2 - cfg.omega0 ** 2) ** 2 + cfg.gamma ** 2 * omega ** 2
    )


def _omega_cutoff(cfg: SpinBosonConfig) -> float:
    # J decays as omega^-3; beyond this cutoff the tail is negligible
    return 200.0 * max(cfg.omega0, cfg.gamma)


def bath_correlation(cfg: SpinBosonConfig, times: Sequence[float] | np.ndarray) -> np.ndarray:
    """Zero-temperature C(t) = (1/pi) int_0^inf J(w) exp(-i w t) dw by quadrature."""
    _check_underdamped(cfg)
    w_max = _omega_cutoff(cfg)

    def density(w: float) -> float:
        return float(spectral_density(cfg, w)) / math.pi

    out = np.empty(len(times), dtype=complex)
    for i, t in enumerate(np.asarray(times, dtype=float)):
        if t == 0.0:
            re, _ = scipy.integrate.quad(density, 0.0, w_max, points=[cfg.omega0], limit=500)
            out[i] = re
            continue
        re, _ = scipy.integrate.quad(density, 0.0, w_max, weight="cos", wvar=t, limit=2000)
        im, _ = scipy.integrate.quad(density, 0.0, w_max, weight="sin", wvar=t, limit=2000)
        out[i] = re - 1j * im
    return out


def pseudomode_coupling(cfg: SpinBosonConfig) -> float:
    """lambda with lambda**2 = C(0)."""
    return math.sqrt(float(bath_correlation(cfg, [0.0])[0].real))


def pseudomode_correlation(
    cfg: SpinBosonConfig,
    times: Sequence[float] | np.ndarray,
    coupling: Optional[float] = None,
) -> np.ndarray:
    lam = pseudomode_coupling(cfg) if coupling is None else coupling
    t = np.asarray(times, dtype=float)
    return lam ** 2 * np.exp(-1j * cfg.pseudomode_frequency * t - 0.5 * cfg.gamma * t)


def spin_boson_pseudomode(cfg: SpinBosonConfig) -> np.ndarray:
    _check_underdamped(cfg)
    n = cfg.n_levels
    a = annihilation(n)
    eye_s = np.eye(2, dtype=complex)
    eye_m = np.eye(n, dtype=complex)
    lam = pseudomode_coupling(cfg)
    hamiltonian = (
        0.5 * np.kron(PAULI_Z, eye_m)
        + 0.5 * cfg.Delta * np.kron(PAULI_X, eye_m)
        + cfg.pseudomode_frequency * np.kron(eye_s, a.conj().T @ a)
        + lam * np.kron(PAULI_Z, a + a.conj().T)
    )
    jumps = [math.sqrt(cfg.gamma) * np.kron(eye_s, a)]
    logger.debug(
        f"Pseudomode: Omega={cfg.pseudomode_frequency:.6g}, lambda={lam:.6g}, levels={n}"
    )
    return lindblad_superoperator(hamiltonian, jumps)


def _vacuum(n_levels: int) -> np.ndarray:
    vac = np.zeros((n_levels, n_levels), dtype=complex)
    vac[0, 0] = 1.0
    return vac


def simulate_spin_boson(cfg: SpinBosonConfig, psi: np.ndarray, T: int) -> np.ndarray:
    rho0 = np.kron(ket_to_density(psi), _vacuum(cfg.n_levels))[None]
    phi = propagator(spin_boson_pseudomode(cfg), cfg.tau)
    return _evolve(phi, rho0, T, 2, cfg.n_levels)[0]


def truncation_error(cfg: Union[JcConfig, SpinBosonConfig], psi: np.ndarray, T: int) -> float:
    """
    Largest trace distance between the system trajectories simulated with the
    configured number of mode levels and with twice as many.
    """
    if isinstance(cfg, JcConfig):
        levels = cfg.resolved_levels()
        coarse = simulate_jc(replace(cfg, n_levels=levels), psi, T)
        fine = simulate_jc(replace(cfg, n_levels=2 * levels), psi, T)
    elif isinstance(cfg, SpinBosonConfig):
        levels = cfg.n_levels
        coarse = simulate_spin_boson(cfg, psi, T)
        fine = simulate_spin_boson(replace(cfg, n_levels=2 * levels), psi, T)
    else:
        raise TypeError(f"Model {type(cfg).__name__} has no mode truncation")
    deviation = float(np.max(np.sum(np.linalg.svd(coarse - fine, compute_uv=False), axis=-1)))
    logger.debug(f"Truncation {levels} -> {2 * levels} levels: max deviation {deviation:.3e}")
    return deviation


def check_truncation(cfg: SpinBosonConfig, psi: np.ndarray, T: int) -> float:
    """Raise :class:`TruncationError` when doubling the pseudomode levels moves the trajectory."""
    deviation = truncation_error(cfg, psi, T)
    if deviation > cfg.convergence_tol:
        raise TruncationError(cfg.n_levels, deviation, cfg.convergence_tol)
    logger.info(
        f"Pseudomode truncation at {cfg.n_levels} levels converged (deviation {deviation:.2e})"
    )
    return deviation


# ---------------------------------------------------------------------------
# Dispatch helpers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PreparedModel:
    """Propagator and initial environment state shared by all trajectories."""

    d: int
    d_env: int
    tau: float
    L_vec: np.ndarray
    phi: np.ndarray
    env_state: np.ndarray


def model_superoperator(cfg: ModelConfig) -> Tuple[np.ndarray, int, int]:
    """(L_vec, d, d_env) for any model record."""
    if isinstance(cfg, FiniteEnvConfig):
        gen = random_gksl(
            cfg.d,
            cfg.d_E,
            cfg.a_unit,
            cfg.a_diss,
            np.random.default_rng(cfg.generator_seed),
            rate_norm=cfg.rate_norm,
        )
        return gksl_superoperator(gen), cfg.d, cfg.d_E
    if isinstance(cfg, JcConfig):
        return jc_superoperator(cfg), 2, cfg.resolved_levels()
    if isinstance(cfg, SpinBosonConfig):
        return spin_boson_pseudomode(cfg), 2, cfg.n_levels
    raise TypeError(f"Unsupported model config: {type(cfg).__name__}")


def prepare_model(cfg: ModelConfig) -> PreparedModel:
    L_vec, d, d_env = model_superoperator(cfg)
    if isinstance(cfg, FiniteEnvConfig):
        env = partial_trace_sys(stationary_state(L_vec, d * d_env), d, d_env)
    elif isinstance(cfg, JcConfig):
        env = ket_to_density(coherent_state(cfg.alpha, d_env))
    else:
        env = _vacuum(d_env)
    return PreparedModel(
        d=d,
        d_env=d_env,
        tau=cfg.tau,
        L_vec=L_vec,
        phi=propagator(L_vec, cfg.tau),
        env_state=env,
    )


def channel_spectrum(cfg: ModelConfig) -> np.ndarray:
    """Eigenvalues of exp(tau L) sorted by descending modulus."""
    L_vec, _, _ = model_superoperator(cfg)
    eigs = scipy.linalg.eigvals(propagator(L_vec, cfg.tau))
    return eigs[np.argsort(-np.abs(eigs), kind="stable")]


def generate_dataset(
    cfg: ModelConfig,
    L: int,
    T: int,
    rng: np.random.Generator,
) -> Tuple[TrajectoryDataset, TrajectoryDataset]:
    """
    Simulate ``L + 1`` clean trajectories from fresh Haar-random initial
    states; the last one is returned separately as the test trajectory.
    """
    if L < 1:
        raise ValueError("L must be at least 1")
    if T < 2:
        raise ValueError("T must be at least 2")

    prepared = prepare_model(cfg)
    d = prepared.d
    psis = [sample_pure_state(d, rng) for _ in range(L + 1)]
    if isinstance(cfg, SpinBosonConfig) and cfg.check_convergence:
        check_truncation(cfg, psis[0], T)
    initial = np.stack([np.kron(ket_to_density(p), prepared.env_state) for p in psis])
    trajectories = _evolve(prepared.phi, initial, T, d, prepared.d_env)

    meta = cfg.to_metadata()
    train = TrajectoryDataset(d=d, tau=cfg.tau, trajectories=trajectories[:L], metadata=dict(meta))
    test = TrajectoryDataset(d=d, tau=cfg.tau, trajectories=trajectories[L:], metadata=dict(meta))
    logger.info(
        f"Simulated {L} + 1 trajectories of {T} steps ({meta['kind']}, d_env={prepared.d_env})"
    )
    return train, test


def add_noise(ds: TrajectoryDataset, sigma: float, rng: np.random.Generator) -> TrajectoryDataset:
    """I.i.d. N(0, sigma^2) on the real and imaginary part of every entry."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    noisy = ds.copy()
    noisy.noise_sigma = float(sigma)
    if sigma == 0:
        return noisy
    shape = ds.trajectories.shape
    noisy.trajectories = ds.trajectories + sigma * _complex_gaussian(rng, shape)
    return noisy


@dataclass(frozen=True)
class ExperimentData:
    train_clean: TrajectoryDataset
    train_noisy: TrajectoryDataset
    test_clean: TrajectoryDataset
    test_noisy: TrajectoryDataset


def simulate_experiment(
    cfg: ModelConfig,
    L: int,
    T: int,
    sigma: float,
    seed: int,
) -> ExperimentData:
    """
    Clean and noisy train/test sets from one seed. Initial states, train noise
    and test noise use independent child streams of ``SeedSequence(seed)``.
    """
    states_seq, train_seq, test_seq = np.random.SeedSequence(seed).spawn(3)
    train, test = generate_dataset(cfg, L, T, np.random.default_rng(states_seq))
    for ds in (train, test):
        ds.metadata["seed"] = int(seed)
    return ExperimentData(
        train_clean=train,
        train_noisy=add_noise(train, sigma, np.random.default_rng(train_seq)),
        test_clean=test,
        test_noisy=add_noise(test, sigma, np.random.default_rng(test_seq)),
    )
