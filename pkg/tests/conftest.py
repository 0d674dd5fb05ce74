import os
import sys

import numpy as np
import pytest

# Add the project root directory to the Python path
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, project_root)

from app.physics.system_model import build_space, control_hamiltonians, error_generators  # noqa: E402
from app.schemas.quantum_schema import Operator  # noqa: E402
from app.schemas.zeno_schema import ErrorModel, FieldConfig  # noqa: E402

RB60F_TIMINGS = [
    3.9763, 6.4748, 4.2274, 3.6259, 2.8717, 3.6281, 7.2263, 6.4260, 4.8070,
    5.0394, 6.5242, 4.8890, 4.2400, 7.3834, 4.8653, 5.4799, 4.5341, 4.3099,
    6.2959, 3.7346, 6.5293, 6.8586, 6.0749, 5.1213, 4.6806, 3.4985, 3.9909,
    4.6701, 4.5168, 6.4702, 4.7787, 5.3476, 3.4567, 3.8009,
]

CONFIG_PATH = os.path.join(project_root, "config", "rb60f_config.json")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-size optimization runs (deselect with -m 'not slow')")


@pytest.fixture(autouse=True)
def setup_test_env():
    """Setup test environment variables"""
    os.environ['ZENO_LOG_LEVEL'] = 'WARNING'
    os.environ['ZENO_N_JOBS'] = '1'
    os.environ.pop('ZENO_CONFIG', None)

    yield

    for var in ['ZENO_LOG_LEVEL', 'ZENO_N_JOBS']:
        if var in os.environ:
            del os.environ[var]


@pytest.fixture(scope="session")
def rb60f_config_path():
    return CONFIG_PATH


@pytest.fixture(scope="session")
def rb60f_timings():
    return list(RB60F_TIMINGS)


@pytest.fixture(scope="session")
def rb60f_space():
    return build_space(3, "1/2")


@pytest.fixture(scope="session")
def rb60f_fields():
    return FieldConfig.rb60f_values()


@pytest.fixture(scope="session")
def rb60f_hamiltonians(rb60f_space, rb60f_fields):
    return control_hamiltonians(rb60f_space, rb60f_fields)


@pytest.fixture(scope="session")
def rb60f_errors(rb60f_space):
    return error_generators(rb60f_space)


def random_hermitian(rng, dim, norm=1.0):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    h = (a + a.conj().T) / 2
    return norm * h / np.linalg.norm(h, 2)


@pytest.fixture(scope="session")
def toy_problem():
    """Four-level space (L=1/2, S=1/2), one random error, random H_a and H_b."""
    space = build_space("1/2", "1/2", n_errors=1)
    rng = np.random.default_rng(2024)
    label = space.basis_label
    ha = Operator(matrix=random_hermitian(rng, 4), basis=label, name="H_a")
    hb = Operator(matrix=random_hermitian(rng, 4), basis=label, name="H_b")
    error = Operator(matrix=random_hermitian(rng, 4), basis=label, name="E1")
    errors = ErrorModel(generators=[error], amplitudes=[0.0], correlation_time=1000.0)
    return space, ha, hb, errors


@pytest.fixture(scope="session")
def two_multiplet_problem():
    """Six-level p manifold (J=3/2 and J=1/2, code in J=1/2), random H_a and H_b, the mag_z error."""
    space = build_space(1, "1/2", n_errors=1)
    rng = np.random.default_rng(606)
    label = space.basis_label
    ha = Operator(matrix=random_hermitian(rng, 6), basis=label, name="H_a")
    hb = Operator(matrix=random_hermitian(rng, 6), basis=label, name="H_b")
    mag_z = error_generators(space).generators[2]
    errors = ErrorModel(generators=[mag_z], amplitudes=[0.0], correlation_time=1e7)
    return space, ha, hb, errors
