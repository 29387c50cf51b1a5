import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from entroflow.heatflow import (FlowConfig, kernel_density, legendre_density, solve_flow,
                                trig_density)
from entroflow.space import circle, cone_full_line, cone_half_line, sphere_zonal

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# lines collected by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[0][2:])):
            terminalreporter.write_line(line)


CIRCLE_TIMES = np.geomspace(0.01, 2.0, 81)
SPHERE_TIMES = np.geomspace(0.02, 2.0, 81)
CONE_TIMES = np.geomspace(0.05, 0.5, 41)


@pytest.fixture(scope="session")
def circle_space():
    return circle(2 * math.pi, 256)


@pytest.fixture(scope="session")
def circle_flow(circle_space):
    rho0 = trig_density(circle_space, [0.7, 0.2], [0.0, 0.1])
    return solve_flow(circle_space, rho0, CIRCLE_TIMES, FlowConfig("spectral", modes=254))


@pytest.fixture(scope="session")
def circle_partner_flow(circle_space):
    rho0 = trig_density(circle_space, [-0.5], [0.3])
    return solve_flow(circle_space, rho0, CIRCLE_TIMES, FlowConfig("spectral", modes=254))


@pytest.fixture(scope="session")
def sphere_space():
    return sphere_zonal(2, 500)


@pytest.fixture(scope="session")
def sphere_flow(sphere_space):
    rho0 = legendre_density(sphere_space, [0.6, 0.3])
    return solve_flow(sphere_space, rho0, SPHERE_TIMES, FlowConfig("spectral"))


@pytest.fixture(scope="session")
def sphere_partner_flow(sphere_space):
    rho0 = legendre_density(sphere_space, [-0.5, 0.2])
    return solve_flow(sphere_space, rho0, SPHERE_TIMES, FlowConfig("spectral"))


@pytest.fixture(scope="session")
def cone_space():
    return cone_half_line(2, 2001, 10.0)


@pytest.fixture(scope="session")
def cone_flow(cone_space):
    return solve_flow(cone_space, kernel_density(cone_space), CONE_TIMES, FlowConfig("spectral"))


@pytest.fixture(scope="session")
def line_space():
    return cone_full_line(1, 2001, 10.0)
