import numpy as np
import pytest

from qbl import ModelParams, build_hamiltonian, make_generator


@pytest.fixture(scope="session")
def params():
    return ModelParams()


@pytest.fixture(scope="session")
def ham(params):
    return build_hamiltonian(params)


@pytest.fixture(scope="session")
def gen_probe(params):
    # probe on, sink off
    return make_generator(params.with_region(1.0, 0.0))


@pytest.fixture(scope="session")
def gen_full(params):
    return make_generator(params)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def protocol(params):
    """The default three-region run, shared by the slower tests."""
    from qbl import run_protocol

    return run_protocol(params, keep_states=True)


_CRITERIA = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """Record one acceptance criterion verdict and assert it."""
    store = request.config.stash.setdefault(_CRITERIA, {})

    def record(number: int, title: str, ok: bool, detail: str):
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        store[number] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(_CRITERIA, {})
    if store:
        terminalreporter.section("acceptance criteria")
        for k in sorted(store):
            terminalreporter.write_line(store[k])
