import io
import warnings

import numpy as np
import pytest

import raterfit as rf
from raterfit import dataset as ds

SMALL_LONG = "item,rater,rating\n1,1,3\n1,2,4\n2,1,2\n2,2,2\n3,1,2\n3,2,2\n"
SMALL_WIDE = "item,1,2\n1,3,4\n2,2,2\n3,2,2\n"
SMALL_GROUPED = "1,2,n\n3,4,1\n2,2,2\n"
PARTIAL_LONG = SMALL_LONG + "4,1,3\n5,1,3\n6,2,4\n"
PARTIAL_WIDE = "item,1,2\n1,3,4\n2,2,2\n3,2,2\n4,3,NA\n5,3,NA\n6,NA,4\n"

# Modal classes printed for the anaesthesia example.
PUBLISHED_Z = (1, 3, 2, 2, 2, 2, 1, 3, 2, 2, 4, 2, 1, 2, 1, 1, 1, 1, 2, 2, 2, 2, 2, 2, 1, 1, 2, 1, 1, 1, 1, 3, 1,
           2, 2, 3, 2, 2, 3, 1, 1, 1, 2, 1, 2)


def text(s):
    return io.StringIO(s)


@pytest.fixture(scope="session")
def anesthesia():
    return ds.bundled("anesthesia")


@pytest.fixture(scope="session")
def caries():
    return ds.bundled("caries")


@pytest.fixture(scope="session")
def anesthesia_mcmc(anesthesia):
    """Default-settings MCMC fit with seed 1, shared across modules."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return rf.fit(anesthesia, "dawid_skene", "mcmc", seed=1)


@pytest.fixture(scope="session")
def anesthesia_map(anesthesia):
    return rf.fit(anesthesia, "dawid_skene", "optim")


def random_ds_params(rng, K, J, conc=1.0):
    return rf.DsParams(rng.dirichlet(np.full(K, conc)), rng.dirichlet(np.full(K, conc), size=(J, K)))


def random_long(rng, I, J, K, max_per_pair=2, p_missing=0.3):
    """Random long dataset where every item has at least one rating."""
    rows = []
    for i in range(I):
        got = False
        for j in range(J):
            n = rng.integers(0, max_per_pair + 1) if rng.random() > p_missing else 0
            for _ in range(n):
                rows.append((i, j, int(rng.integers(K))))
                got = True
        if not got:
            rows.append((i, int(rng.integers(J)), int(rng.integers(K))))
    a = np.array(rows)
    return rf.LongRatings(
        n_categories=K, rater_labels=tuple(str(j + 1) for j in range(J)),
        item=a[:, 0], rater=a[:, 1], rating=a[:, 2], item_labels=tuple(str(i + 1) for i in range(I)),
    )


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
