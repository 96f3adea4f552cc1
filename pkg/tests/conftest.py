import numpy as np
import pytest

# builtin sets that are complete for each (d, n) shape
SINGLE = {
    2: ["qubit-hvdl", "qubit-pauli6", "qubit-nonorth:0.2:0.2", "qubit-nonorth:0.785398:0.5", "qudit-gellmann:2", "qudit-pairs:2"],
    3: ["qutrit-paper9", "qudit-gellmann:3", "qudit-pairs:3"],
}


def builtin_ids(d, n):
    if n == 1:
        return list(SINGLE[d])
    return [f"product:{a}x{b}" for a in SINGLE[d] for b in SINGLE[d]]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_hermitian(rng, dim, scale=1.0):
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return scale * (a + a.conj().T) / 2
