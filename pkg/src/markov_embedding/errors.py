"""
Exception types raised by the reconstruction pipeline.

All of them derive from ``ValueError`` so callers that only care about
"bad input or unusable data" can catch a single type.
"""
from __future__ import annotations

from typing import Sequence


class EmbeddingError(ValueError):
    """Base class for domain errors."""


class DegenerateStationaryStateError(EmbeddingError):
    def __init__(self, count: int) -> None:
        self.count = int(count)
        super().__init__(
            f"Generator has a degenerate null space: {self.count} eigenvalues "
            f"with |lambda| below the stationarity tolerance"
        )


class NonPhysicalStateError(EmbeddingError):
    """A state that must be a density matrix is not one."""


class NoSignalError(EmbeddingError):
    def __init__(self, threshold: float, largest: float) -> None:
        self.threshold = float(threshold)
        self.largest = float(largest)
        super().__init__(
            f"no signal above noise threshold (threshold={self.threshold:.3e}, "
            f"largest singular value={self.largest:.3e})"
        )


class DegenerateSpectrumError(EmbeddingError):
    def __init__(self, cluster: Sequence[complex], condition: float) -> None:
        self.cluster = [complex(z) for z in cluster]
        self.condition = float(condition)
        shown = ", ".join(f"{z.real:.6g}{z.imag:+.6g}j" for z in self.cluster)
        super().__init__(
            f"Eigenvector matrix is numerically singular (cond={self.condition:.3e}); "
            f"offending eigenvalue cluster: [{shown}]"
        )


class FileFormatError(EmbeddingError):
    """Dataset or model file does not match the declared format."""


class TruncationError(EmbeddingError):
    def __init__(self, n_levels: int, deviation: float, tol: float) -> None:
        self.n_levels = int(n_levels)
        self.deviation = float(deviation)
        self.tol = float(tol)
        super().__init__(
            f"Mode truncation at {self.n_levels} levels has not converged: doubling it "
            f"moves the system state by {self.deviation:.3e} in trace norm (tolerance {self.tol:.1e})"
        )
