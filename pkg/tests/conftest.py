import pytest

from structsgd import Family, ProblemSpec, SyntheticSpec, gen_synthetic


@pytest.fixture(scope="session")
def desk_dataset():
    """Full-size logistic instance reused by the slow statistical tests."""
    spec = SyntheticSpec(n=10_000, d=20, family=Family.LOGISTIC, seed=20240811)
    return gen_synthetic(spec)


@pytest.fixture(scope="session")
def small_logistic():
    spec = SyntheticSpec(n=1_000, d=10, family=Family.LOGISTIC, seed=7)
    ds = gen_synthetic(spec)
    return ProblemSpec(family=Family.LOGISTIC, data=ds, reg_strength=5.0)
