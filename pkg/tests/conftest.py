import numpy as np
import pytest
from hypothesis import settings

from hodge_spectra.meshes import circle, disk_in_torus, sphere_ico, torus2, torus3

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture(scope="session")
def t2_8():
    return torus2(8)


@pytest.fixture(scope="session")
def t2_disk():
    return disk_in_torus(16)


@pytest.fixture(scope="session")
def sphere1():
    return sphere_ico(1)


@pytest.fixture(scope="session")
def t3_3():
    return torus3(3)


@pytest.fixture(scope="session")
def circle16():
    return circle(16)




def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
