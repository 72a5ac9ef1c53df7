import pytest

import rdstab as r


@pytest.fixture(scope="session")
def grid200():
    return r.make_grid(1.0, 200)


@pytest.fixture(scope="session")
def exp1_kernel(grid200):
    return r.kernel_table(grid200, 6.0, 1.0)


@pytest.fixture(scope="session")
def exp2_kernel(grid200):
    return r.kernel_table(grid200, 15.0, 1.0)


@pytest.fixture(scope="session")
def exp1_tset(exp1_kernel):
    return r.build_transform(exp1_kernel, 1)


@pytest.fixture(scope="session")
def exp2_tset(exp2_kernel):
    return r.build_transform(exp2_kernel, 2)


@pytest.fixture(scope="session")
def fine_builds():
    """1000-node kernels and transforms for both experiment parameter sets."""
    g = r.make_grid(1.0, 1000)
    k6 = r.kernel_table(g, 6.0, 1.0)
    k15 = r.kernel_table(g, 15.0, 1.0)
    return {
        "grid": g,
        "k6": k6,
        "k15": k15,
        "t6": r.build_transform(k6, 1),
        "t15": r.build_transform(k15, 2),
    }
