import pytest

from triarray.cli import resolve_engine
from triarray.workload import builtin_vgg16


@pytest.fixture(scope="session")
def flagship():
    """The shipped 7-core x 24-slice instance at 150 MHz."""
    return resolve_engine("pn7_pm24")


@pytest.fixture(scope="session")
def vgg16():
    return builtin_vgg16()
