from importlib import resources
from pathlib import Path

import pytest

from interprompt.corpus import load_dataset
from interprompt.prompts import PromptTemplate

DATA = Path(__file__).parent / "data"


def fixture_path() -> Path:
    return Path(str(resources.files("interprompt") / "data" / "irf_fixture.csv"))


@pytest.fixture(scope="session")
def fixture_csv() -> Path:
    return fixture_path()


@pytest.fixture(scope="session")
def fixture_posts(fixture_csv):
    return load_dataset(fixture_csv)


@pytest.fixture
def template() -> PromptTemplate:
    return PromptTemplate()
