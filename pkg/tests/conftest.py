import math

import pytest

from torus_ricci.curvature import GridSpec, certify
from torus_ricci.metric_total import build_total_metric
from torus_ricci.orbit_space import WeightedDisk, subtorus_lattice
from torus_ricci.profile import MetricParams, build_profile
from torus_ricci.quadrangle import assemble_polygon, solve_gauss_bonnet

DISK_53 = WeightedDisk(3, ((1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 0), (0, 1, 1)))


@pytest.fixture(scope="session")
def defaults():
    return MetricParams()


@pytest.fixture(scope="session")
def principal_profile():
    return build_profile(MetricParams(branch="principal"))


@pytest.fixture(scope="session")
def shifted_profile():
    return build_profile(MetricParams(branch="shifted", k2=30.0))


@pytest.fixture(scope="session")
def gb_shifted():
    res = solve_gauss_bonnet(MetricParams(branch="shifted"))
    assert res.feasible
    return res


@pytest.fixture(scope="session")
def polygon5(gb_shifted):
    return assemble_polygon(gb_shifted.quadrangle, 5)


@pytest.fixture(scope="session")
def total_metric(polygon5):
    return build_total_metric(polygon5)


@pytest.fixture(scope="session")
def disk53():
    return DISK_53


@pytest.fixture(scope="session")
def kernel53():
    return subtorus_lattice(DISK_53).integer_kernel_basis


@pytest.fixture(scope="session")
def certification(total_metric, kernel53):
    return certify(total_metric, kernel53, GridSpec())


def close(a, b, tol):
    return abs(a - b) <= tol or math.isclose(a, b, abs_tol=tol)
