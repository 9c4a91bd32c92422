import numpy as np
import pytest

from macrospin import Direction, PureState, SpinJ, coherent_state


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.linalg.eigvalsh(a - b)).sum())


def coherent_superposition(j: SpinJ, d1: Direction, d2: Direction) -> PureState:
    v = coherent_state(j, d1).amplitudes + coherent_state(j, d2).amplitudes
    return PureState(j, v / np.linalg.norm(v))
