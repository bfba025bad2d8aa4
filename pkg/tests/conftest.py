"""
Pytest configuration and fixtures for the sinc adaptation tests
"""

import pytest
import os
import sys
import tempfile
import shutil
from pathlib import Path

import numpy as np

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from corpus.generator import ClassPrototype, CorpusSpec, SpeakerSpec
from filterbank.filterbank_init import InitScheme
from nnet.model import build_model, toy_spec


def pytest_addoption(parser):
    parser.addoption("--run-slow", action="store_true", default=False,
                     help="Run full-pipeline experiments")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-pipeline experiment, needs --run-slow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-slow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(scope="session")
def project_dir():
    """Repository root"""
    return str(project_root)


@pytest.fixture(scope="session")
def configs_dir(project_dir):
    """Bundled JSON configs"""
    return os.path.join(project_dir, "data", "configs")


@pytest.fixture(scope="function")
def test_dir():
    """Create temporary test directory"""
    test_dir = tempfile.mkdtemp(prefix="sincadapt_test_")
    yield test_dir
    shutil.rmtree(test_dir, ignore_errors=True)


@pytest.fixture(scope="function")
def rng():
    """Seeded random generator"""
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_spec():
    """Toy topology with short frames: 8 filters, L=33, two 6-wide convs, 3 classes"""
    return toy_spec(n_filters=8, filter_length=33, width=6, n_classes=3, input_samples=400)


@pytest.fixture(scope="function")
def small_model(small_spec):
    """Freshly built small model"""
    return build_model(small_spec, InitScheme.mel(), seed=5)


@pytest.fixture(scope="session")
def tiny_corpus_spec():
    """Three-class corpus with 400-sample frames (2 base, 2 target speakers)"""
    prototypes = (
        ClassPrototype((500.0, 2000.0), (0.4, 0.3)),
        ClassPrototype((900.0, 2600.0), (0.4, 0.3)),
        ClassPrototype((1300.0, 3200.0), (0.4, 0.3)),
    )
    speakers = (
        SpeakerSpec("base0", 0.98, 1.0, "base"),
        SpeakerSpec("base1", 1.02, 0.8, "base"),
        SpeakerSpec("target0", 1.25, 1.0, "target"),
        SpeakerSpec("target1", 1.25, 0.9, "target"),
    )
    return CorpusSpec(n_classes=3, prototypes=prototypes, speakers=speakers,
                      utterances_per_speaker=4, duration_s=0.05, snr_db=30.0, seed=21,
                      win_s=0.025, hop_s=0.005, heldout_utterances=1, adapt_utterances=2)
