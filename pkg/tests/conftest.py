import numpy as np
import pytest

from dgmg.hierarchy import build_hierarchy
from dgmg.mesh import build_initial_mesh, classify_edges, refine_uniform
from dgmg.space import DgSpace

ZETA = (1.0, 0.0)


@pytest.fixture(scope="session")
def square_stack():
    """Unit square, 3 levels, beta = 1e-2: the workhorse fixture."""
    return build_hierarchy("unit_square", 3, beta=1e-2, seed=0)


@pytest.fixture(scope="session")
def square_stack_beta4():
    return build_hierarchy("unit_square", 3, beta=1e-4, seed=0)


@pytest.fixture(scope="session")
def lshaped_stack():
    return build_hierarchy("l_shaped", 2, beta=1e-2, seed=0)


@pytest.fixture(scope="session")
def square_meshes():
    """Classified unit-square meshes, levels 0..5 (no operators)."""
    meshes = [classify_edges(build_initial_mesh("unit_square"), ZETA)]
    for _ in range(5):
        meshes.append(classify_edges(refine_uniform(meshes[-1]), ZETA))
    return meshes


@pytest.fixture(scope="session")
def square_spaces(square_meshes):
    return [DgSpace(m) for m in square_meshes]


def rng_for(*key):
    return np.random.default_rng(list(key))
