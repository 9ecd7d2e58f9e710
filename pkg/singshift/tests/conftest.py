# ==============================================================================
# conftest.py  –  Shared fixtures
#   Keeps log files out of test runs and provides the micro experiment preset.
# ==============================================================================

import os
import sys
from pathlib import Path

os.environ.setdefault("SINGSHIFT_LOG_TO_FILE", "false")

import pytest  # noqa: E402

PROJECT_ROOT = Path(__file__).resolve().parents[2]
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from singshift.score.synthetic_corpus import generate_synthetic_dataset  # noqa: E402
from singshift.trainer.config import preset  # noqa: E402
from singshift.trainer.corpus import build_corpus  # noqa: E402


def pytest_collection_modifyitems(config, items):
    if os.getenv("SINGSHIFT_RUN_SLOW", "0") == "1":
        return
    skip_slow = pytest.mark.skip(reason="set SINGSHIFT_RUN_SLOW=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


# ------------------------------------------------------------------------------
# Fixtures
# ------------------------------------------------------------------------------
@pytest.fixture(scope="session")
def micro_exp():
    return preset("micro")


@pytest.fixture(scope="session")
def micro_utterances(micro_exp):
    return generate_synthetic_dataset(micro_exp.data, micro_exp.data.seed, micro_exp.dsp)


@pytest.fixture(scope="session")
def micro_corpus(micro_exp, micro_utterances):
    return build_corpus(micro_utterances, micro_exp)
