import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from biaslens.keyword_index import select_keywords  # noqa: E402
from biaslens.log_model import build_dataset  # noqa: E402
from biaslens.synth import SynthConfig, generate_dataset, simulate  # noqa: E402

SMALL_CONFIG = {
    "seed": 3,
    "n_users": 3000,
    "n_articles": {"politics": 200, "society": 400},
    "vocabulary_size": 60,
    "base_click_prob": 0.06,
    "planted_biases": [{"keyword": "mother", "value": "female", "multiplier": 3.0}],
}

# criterion name -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def small_config(**overrides) -> SynthConfig:
    return SynthConfig.from_dict({**SMALL_CONFIG, **overrides})


@pytest.fixture(scope="session")
def small_sim():
    return simulate(small_config())


@pytest.fixture(scope="session")
def society(small_sim):
    ds = build_dataset(small_sim.events, small_sim.articles, "society")
    return ds, select_keywords(ds.catalog, top_n=40)


@pytest.fixture(scope="session")
def small_files(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth_small")
    generate_dataset(small_config(), out)
    return out


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, (ok, detail) in ACCEPTANCE.items():
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
