"""
markov-embedding

Reconstruction of minimal Markovian embeddings for non-Markovian open
quantum dynamics from (noisy) density-matrix trajectories.
"""

__all__ = [
    "__version__",
    "analysis",
    "config",
    "embedding",
    "models",
    "qcore",
    "storage",
    "sweeps",
]

__version__ = "0.1.0"
