import numpy as np
import pytest

from cthrv.model import ModelParams
from cthrv.simulate import (BENCHMARK_S0, BENCHMARK_V0, benchmark_lead_spec,
                            generate_lead_profile, simulate_follower)
from cthrv.trajectory import Trajectory

THETA_TRUE = ModelParams(0.08, 0.12, 1.5)

# one line per acceptance criterion, filled by tests/test_acceptance.py
ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def theta_true():
    return THETA_TRUE


@pytest.fixture(scope="session")
def benchmark_lead():
    return generate_lead_profile(benchmark_lead_spec())


@pytest.fixture(scope="session")
def benchmark_traj(benchmark_lead):
    return simulate_follower(THETA_TRUE, benchmark_lead, BENCHMARK_V0, BENCHMARK_S0, 0.1)


def add_noise(traj, seed, gap_std=0.1, speed_std=0.05):
    rng = np.random.default_rng(seed)
    return Trajectory(
        traj.dt,
        traj.v + rng.normal(0.0, speed_std, traj.n),
        traj.s + rng.normal(0.0, gap_std, traj.n),
        traj.v_l,
        t0=traj.t0,
    )


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
