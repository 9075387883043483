import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from bgshift.background import BackgroundSetConfig, StubBackend, build_background_set  # noqa: E402
from bgshift.fixtures import synthetic_corpus, write_corpus  # noqa: E402


@pytest.fixture(scope="session")
def corpus():
    """The 20-image synthetic corpus as (AnnotatedImage, masks) pairs."""
    return synthetic_corpus(20, seed=11)


@pytest.fixture(scope="session")
def fixture_dir(tmp_path_factory, corpus):
    out = tmp_path_factory.mktemp("fixture")
    write_corpus(out, corpus, seed=11)
    return out


@pytest.fixture(scope="session")
def bg_pool(tmp_path_factory):
    out = tmp_path_factory.mktemp("bg")
    cfg = BackgroundSetConfig(str(out), {"Seasonal": 2, "Sky": 2, "NaturalLandscape": 2},
                              seeds_per_prompt=1, seed=5, width=128, height=128)
    return build_background_set(cfg, StubBackend()).records


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number, status, title, detail in sorted(results):
        terminalreporter.write_line(f"criterion {number:>2}: {status}  {title}  ({detail})")
