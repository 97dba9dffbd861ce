import numpy as np
import pytest

from storyqg.corpus import build_silver, filter_hcd
from storyqg.fixtures import build_fixture_corpus
from storyqg.model import ModelConfig, Vocabulary

# small dims shared by the unit tests; acceptance uses its own config
TINY = ModelConfig(embed_dim=12, hidden_dim=12, attn_dim=12, layers=1, heads=2,
                   max_decode_len=10)


@pytest.fixture(scope="session")
def fixture_corpus():
    return build_silver(filter_hcd(build_fixture_corpus()))


@pytest.fixture(scope="session")
def train_corpus(fixture_corpus):
    return fixture_corpus.select_split("train")


@pytest.fixture(scope="session")
def vocab(train_corpus):
    return Vocabulary.from_corpus(train_corpus)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
