"""Input coercion shared by the estimator classes."""

from __future__ import annotations

import numpy as np

from .ising import IsingInstance, QuboInstance, qubo_to_ising
from .wireless import ChannelAssignmentInstance


def check_ising(X) -> IsingInstance:
    """Accept an Ising model, a QUBO, or their JSON dict forms."""
    if isinstance(X, IsingInstance):
        return X
    if isinstance(X, QuboInstance):
        return qubo_to_ising(X)
    if isinstance(X, dict) and ("fields" in X or "couplings" in X):
        return IsingInstance.from_dict(X)
    raise TypeError(f"expected an IsingInstance or QuboInstance, got {type(X).__name__}")


def check_instance(X) -> ChannelAssignmentInstance:
    if isinstance(X, ChannelAssignmentInstance):
        return X
    if isinstance(X, dict) and "num_users" in X:
        return ChannelAssignmentInstance.from_dict(X)
    raise TypeError(f"expected a ChannelAssignmentInstance, got {type(X).__name__}")


def check_assignment(X, inst: ChannelAssignmentInstance) -> np.ndarray:
    X = np.asarray(X, dtype=np.int64)
    if X.shape != (inst.num_users, inst.num_channels):
        raise ValueError(f"assignment of shape {X.shape}, expected {(inst.num_users, inst.num_channels)}")
    if np.any((X != 0) & (X != 1)):
        raise ValueError("assignment matrix must be binary")
    return X
