import os

# single-threaded BLAS keeps float summation order (and so every metric) reproducible
for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(var, "1")

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from ldsgm.corpus import SyntheticSpec, build_vocab, encode_batch, generate_synthetic  # noqa: E402
from ldsgm.encoder import EncoderConfig  # noqa: E402

TINY = EncoderConfig(layers=1, d_w=16, heads=2, d_ff=32, d_e=8, gcn_layers=2, d_h=16, dropout=0.0, max_arg_len=16)


@pytest.fixture
def tiny_config():
    return TINY


@pytest.fixture(scope="session")
def small_corpus():
    spec = SyntheticSpec(branching=(2, 3, 2), n_train=48, n_valid=16, n_test=16, seed=3)
    h, train, valid, test = generate_synthetic(spec)
    return h, train, valid, test, build_vocab(train)


@pytest.fixture
def small_batch(small_corpus):
    h, train, _, _, vocab = small_corpus
    return encode_batch(train[:6], vocab, h, TINY.max_arg_len)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# filled by the acceptance tests, echoed once the run is over
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
