import pytest
from hypothesis import settings

from procfuzz.mutator import Generator, GenConfig
from procfuzz.selection import SELECTED

settings.register_profile("procfuzz", deadline=None, max_examples=100)
settings.load_profile("procfuzz")


@pytest.fixture(scope="session")
def gen():
    return Generator(GenConfig.for_selection(SELECTED))
