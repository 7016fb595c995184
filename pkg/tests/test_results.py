import json
import os
import warnings

import numpy as np
import pytest

import raterfit as rf
from raterfit import dataset as ds
from raterfit import results as R
from raterfit.cli import summary_text
from raterfit.errors import ArchiveError, UnsupportedError

from conftest import SMALL_LONG, random_long, text


@pytest.fixture(scope="module")
def small_mcmc():
    d = random_long(np.random.default_rng(2), 12, 3, 3)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return rf.fit(d, config=rf.SamplerConfig(chains=2, warmup=100, draws=60), seed=3), d


def test_mcmc_archive_round_trip(small_mcmc, tmp_path):
    res, d = small_mcmc
    path = tmp_path / "fit.json"
    rf.save(res, path)
    back = rf.load(path, d)
    np.testing.assert_array_equal(back.draws.values, res.draws.values)
    np.testing.assert_array_equal(back.class_probs, res.class_probs)
    assert back.diagnostics.to_dict() == res.diagnostics.to_dict()
    assert summary_text(back) == summary_text(res)
    assert R.to_json(back) == R.to_json(res)


def test_map_archive_round_trip(anesthesia_map, anesthesia, tmp_path):
    path = tmp_path / "map.json"
    rf.save(anesthesia_map, path)
    back = rf.load(path, anesthesia)
    np.testing.assert_array_equal(back.mode, anesthesia_map.mode)
    assert summary_text(back) == summary_text(anesthesia_map)
    assert back.optim == anesthesia_map.optim


def test_archive_text_is_deterministic(small_mcmc):
    res, _ = small_mcmc
    a = R.to_json(res)
    assert a == R.to_json(res)
    doc = json.loads(a)
    assert doc["format"] == R.ARCHIVE_FORMAT and doc["version"] == R.ARCHIVE_VERSION
    assert "time" not in a.lower()


def test_fingerprint_mismatch_refused(small_mcmc, tmp_path):
    res, _ = small_mcmc
    path = tmp_path / "fit.json"
    rf.save(res, path)
    other = ds.parse_long(text(SMALL_LONG))
    with pytest.raises(ArchiveError, match="does not match"):
        rf.load(path, other)


@pytest.mark.parametrize(
    "mangle",
    [
        lambda s: s[: len(s) // 2],
        lambda s: s.replace('"raterfit-fit"', '"other"'),
        lambda s: s.replace('"version": 1', '"version": 99'),
        lambda s: json.dumps({**json.loads(s), "names": ["x"]}),
        lambda s: json.dumps({**json.loads(s), "method": "vi"}),
    ],
)
def test_corrupt_archives(small_mcmc, tmp_path, mangle):
    res, _ = small_mcmc
    path = tmp_path / "bad.json"
    path.write_text(mangle(R.to_json(res)))
    with pytest.raises(ArchiveError):
        rf.load(path)


def test_bad_array_block(small_mcmc, tmp_path):
    res, _ = small_mcmc
    doc = json.loads(R.to_json(res))
    doc["draws"]["shape"] = [1, 1, 1]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(ArchiveError):
        rf.load(path)
    doc = json.loads(R.to_json(res))
    doc["class_probabilities"]["data"] = "!!!"
    path.write_text(json.dumps(doc))
    with pytest.raises(ArchiveError):
        rf.load(path)


def test_missing_and_binary_files(tmp_path):
    with pytest.raises(ArchiveError):
        rf.load(tmp_path / "nope.json")
    p = tmp_path / "bin.json"
    p.write_bytes(b"\xff\xfe\x00garbage")
    with pytest.raises(ArchiveError):
        rf.load(p)


def test_atomic_write_leaves_no_temp_files(tmp_path):
    R.write_atomic(tmp_path / "a.txt", "hello")
    assert (tmp_path / "a.txt").read_text() == "hello"
    assert os.listdir(tmp_path) == ["a.txt"]


def test_params_property(anesthesia_map, small_mcmc):
    assert isinstance(anesthesia_map.params, rf.DsParams)
    with pytest.raises(UnsupportedError):
        small_mcmc[0].params


def test_fit_rejects_unknown_method(anesthesia):
    with pytest.raises(ValueError):
        rf.fit(anesthesia, method="vi")


def test_optim_warnings_collected(anesthesia):
    d = ds.with_categories(anesthesia, 5)
    with pytest.warns(UserWarning):
        res = rf.fit(d, method="optim")
    assert any("off-diagonal" in w for w in res.warnings)


def test_mcmc_k5_is_silent_about_offdiagonal(anesthesia):
    d = ds.with_categories(anesthesia, 5)
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        rf.fit(d, config=rf.SamplerConfig(chains=1, warmup=50, draws=20), seed=1)
    assert not any("off-diagonal" in str(w.message) for w in rec)


def test_label_switch_warning():
    spec = rf.resolve_spec("dawid_skene", 2, 1)
    theta = np.array([[[0.3, 0.7], [0.2, 0.8]]])
    assert R._label_switch_warning(spec, theta)
    assert not R._label_switch_warning(spec, np.array([[[0.7, 0.3], [0.2, 0.8]]]))


def test_homogeneous_fit_labels(anesthesia):
    res = rf.fit(anesthesia, "homogeneous", "optim")
    assert res.spec.J == 1 and res.n_items == 45
    assert res.class_probs.shape == (45, 4)


def test_progress_callback():
    # pure-noise ratings make EM crawl, so it runs past 100 iterations
    d = random_long(np.random.default_rng(0), 60, 3, 3)
    seen = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = rf.fit(d, method="optim", tol=1e-300, max_iter=250, progress=lambda c, m: seen.append(m))
    assert res.optim["iterations"] > 100
    assert [m.split(":")[0] for m in seen] == [f"iteration {100 * (k + 1)}" for k in range(res.optim["iterations"] // 100)]
