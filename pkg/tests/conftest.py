import pytest

from unrollreg import (
    NoiseModel,
    add_poisson_noise,
    build_parallel_radon,
    make_leaveout_split,
    make_phantom,
    operator_norm_sq,
    synthesize_clean,
)


@pytest.fixture(scope="session")
def desk_op():
    """Desk-scale operator used across the suite: 64x64 image, 91 rays x 60 angles."""
    return build_parallel_radon(64, 64, 91, 60)


@pytest.fixture(scope="session")
def desk_tau(desk_op):
    return 1.0 / operator_norm_sq(desk_op, iterations=200, seed=3)


@pytest.fixture(scope="session")
def desk_phantom():
    return make_phantom("shepp_logan", 64, 64)


@pytest.fixture(scope="session")
def desk_clean(desk_op, desk_phantom):
    return synthesize_clean(desk_op, desk_phantom)


@pytest.fixture(scope="session")
def desk_noisy(desk_clean):
    return add_poisson_noise(desk_clean, NoiseModel(1e6, seed=0))


@pytest.fixture(scope="session")
def desk_split(desk_op):
    return make_leaveout_split(desk_op.rows, 0.01, seed=0)


@pytest.fixture(scope="session")
def small_op():
    """A 16x16-image operator small enough for dense oracles."""
    return build_parallel_radon(16, 16, 23, 12)
