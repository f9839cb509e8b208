import numpy as np
import pytest

from stitchkit import PoseSampling, SceneSpec, generate_pair

STILL = PoseSampling(baseline=(0.0, 0.0), max_yaw_deg=0.0)


@pytest.fixture(scope="session")
def identity_sample():
    """Reference and target rendered from the same camera."""
    return generate_pair(SceneSpec(layout="single_plane"), (0.99, 1.0), seed=5, size=(64, 48), sampling=STILL)


@pytest.fixture(scope="session")
def two_plane_sample():
    return generate_pair(SceneSpec(layout="two_plane"), (0.4, 0.6), seed=11, size=(128, 96))


@pytest.fixture(scope="session")
def plane_sample():
    return generate_pair(SceneSpec(layout="single_plane"), (0.4, 0.6), seed=11, size=(128, 96))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_VERDICTS = pytest.StashKey[list]()


@pytest.fixture
def verdict(request, capsys):
    """Record and print one pass/fail line per acceptance criterion."""
    lines = request.config.stash.setdefault(_VERDICTS, [])

    def emit(number, ok, detail):
        line = f"ACCEPTANCE {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        lines.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
