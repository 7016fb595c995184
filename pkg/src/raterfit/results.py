"""Fit orchestration and the on-disk fit archive."""

from __future__ import annotations

import base64
import json
import os
import tempfile
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from raterfit import __version__
from raterfit.dataset import RatingDataset, fingerprint
from raterfit.errors import ArchiveError, UnsupportedError
from raterfit.likelihood import Layout, prepare_dataset
from raterfit.mcmc import Diagnostics, PosteriorDraws, SamplerConfig, sample
from raterfit.model import ModelSpec, canonical_variant, resolve_spec
from raterfit.optimize import map_fit
from raterfit.posterior import item_labels, rao_blackwell

ARCHIVE_FORMAT = "raterfit-fit"
ARCHIVE_VERSION = 1
METHODS = ("mcmc", "optim")

MODEL_TITLES = {
    "dawid_skene": "Bayesian Dawid and Skene Model",
    "class_conditional": "Bayesian Class conditional Dawid and Skene Model",
    "hierarchical": "Bayesian Hierarchical Dawid and Skene Model",
    "homogeneous": "Bayesian Homogeneous Dawid and Skene Model",
}


@dataclass(eq=False)
class FitResult:
    """Outcome of :func:`fit`: draws or a mode, plus class probabilities.

    ``method`` is ``"mcmc"`` or ``"optim"``.  ``mode`` and draw rows are
    flat constrained vectors ordered like ``names``.
    """

    method: str
    spec: ModelSpec
    names: list
    class_probs: np.ndarray
    item_labels: tuple
    rater_labels: tuple
    draws: PosteriorDraws | None = None
    mode: np.ndarray | None = None
    diagnostics: Diagnostics | None = None
    settings: dict = field(default_factory=dict)
    optim: dict = field(default_factory=dict)
    fingerprint: str = ""
    data_format: str = "long"
    warnings: list = field(default_factory=list)

    @cached_property
    def layout(self) -> Layout:
        return Layout(self.spec)

    @property
    def params(self):
        """The mode as a parameter object (optimisation fits only)."""
        if self.mode is None:
            raise UnsupportedError("MCMC fits have no single parameter point; use point_estimate")
        return self.layout.unpack(self.mode)

    @property
    def n_items(self) -> int:
        return len(self.item_labels)


def _label_switch_warning(spec: ModelSpec, theta_mean: np.ndarray) -> list[str]:
    K = spec.K
    diag = theta_mean[:, np.arange(K), np.arange(K)]
    if np.any(diag < 1.0 / K):
        j, k = np.argwhere(diag < 1.0 / K)[0]
        return [
            f"theta[{j + 1},{k + 1},{k + 1}] has mean {diag[j, k]:.3f} < 1/K; "
            "the class labels may have switched"
        ]
    return []


def fit(
    dataset: RatingDataset,
    model: str = "dawid_skene",
    method: str = "mcmc",
    *,
    prior: dict | None = None,
    config: SamplerConfig | None = None,
    tol: float | None = None,
    max_iter: int = 1000,
    init_strategy: str = "from-majority-vote",
    seed=None,
    progress=None,
) -> FitResult:
    """Fit one of the four models by MCMC or optimisation.

    ``prior`` holds hyper-parameter overrides (see ``resolve_spec``).  For
    MCMC, ``seed`` fills in ``config.seed`` when the config has none.
    """
    variant = canonical_variant(model)
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    spec = resolve_spec(variant, dataset.n_categories, dataset.n_raters, prior)
    data = prepare_dataset(spec, dataset)
    layout = Layout(spec)
    notes: list[str] = []
    result = dict(
        spec=spec, names=list(layout.names), item_labels=item_labels(dataset),
        rater_labels=tuple(dataset.rater_labels), fingerprint=fingerprint(dataset),
        data_format=dataset.format,
    )
    if method == "mcmc":
        config = config or SamplerConfig()
        if config.seed is None and seed is not None:
            config = SamplerConfig(**{**config.__dict__, "seed": seed})
        draws, diag = sample(spec, data, config, progress=progress)
        values = draws.flat()
        notes += diag.warnings
        notes += _label_switch_warning(spec, layout.error_matrices(values).mean(axis=0))
        cp = rao_blackwell(spec, values, data)
        out = FitResult(method, class_probs=cp, draws=draws, diagnostics=diag, settings=config.to_dict(), **result)
    else:
        cb = None
        if progress is not None and variant != "hierarchical":
            def cb(it, lp):
                if it % 100 == 0:
                    progress(0, f"iteration {it}: log posterior {lp:.6f}")
        kw = {"callback": cb} if cb else {}
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = map_fit(spec, data, tol=tol, max_iter=max_iter, init_strategy=init_strategy, seed=seed, **kw)
        mode = layout.pack(res.params)
        notes += res.warnings
        notes += _label_switch_warning(spec, res.params.error_matrices)
        cp = rao_blackwell(spec, mode, data)
        settings = {"tol": tol, "max_iter": max_iter, "init_strategy": init_strategy, "seed": seed}
        optim = {
            "algorithm": res.method, "log_posterior": float(res.log_posterior),
            "converged": bool(res.converged), "iterations": int(res.iterations),
        }
        out = FitResult(method, class_probs=cp, mode=mode, settings=settings, optim=optim, **result)
    out.warnings = notes
    for w in notes:
        warnings.warn(w, stacklevel=2)
    return out


# --------------------------------------------------------------------------
# archive


def _pack_array(a) -> dict:
    a = np.ascontiguousarray(a, dtype="<f8")
    return {"dtype": "<f8", "shape": list(a.shape), "data": base64.b64encode(a.tobytes()).decode("ascii")}


def _unpack_array(d) -> np.ndarray:
    if d.get("dtype") != "<f8":
        raise ArchiveError(f"unsupported array dtype {d.get('dtype')!r}")
    raw = base64.b64decode(d["data"], validate=True)
    shape = tuple(int(s) for s in d["shape"])
    a = np.frombuffer(raw, dtype="<f8")
    if a.size != int(np.prod(shape)):
        raise ArchiveError("array block size does not match its shape")
    return a.reshape(shape).astype(float)


def to_json(result: FitResult) -> str:
    """Deterministic JSON text of a fit (no timestamps, sorted keys)."""
    doc = {
        "format": ARCHIVE_FORMAT,
        "version": ARCHIVE_VERSION,
        "raterfit": __version__,
        "method": result.method,
        "spec": result.spec.to_dict(),
        "settings": result.settings,
        "optim": result.optim,
        "data": {
            "fingerprint": result.fingerprint,
            "format": result.data_format,
            "items": list(result.item_labels),
            "raters": list(result.rater_labels),
        },
        "names": list(result.names),
        "class_probabilities": _pack_array(result.class_probs),
        "warnings": list(result.warnings),
    }
    if result.draws is not None:
        doc["draws"] = _pack_array(result.draws.values)
        doc["diagnostics"] = result.diagnostics.to_dict()
    if result.mode is not None:
        doc["mode"] = [float(x) for x in result.mode]
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def from_json(text: str) -> FitResult:
    try:
        doc = json.loads(text)
        if doc.get("format") != ARCHIVE_FORMAT:
            raise ArchiveError("not a raterfit fit archive")
        if doc.get("version") != ARCHIVE_VERSION:
            raise ArchiveError(f"unsupported archive version {doc.get('version')!r}")
        spec = ModelSpec.from_dict(doc["spec"])
        names = list(doc["names"])
        if names != Layout(spec).names:
            raise ArchiveError("parameter names do not match the stored model")
        data = doc["data"]
        cp = _unpack_array(doc["class_probabilities"])
        draws = diag = mode = None
        if doc["method"] == "mcmc":
            values = _unpack_array(doc["draws"])
            if values.ndim != 3 or values.shape[2] != len(names):
                raise ArchiveError("draw block has the wrong shape")
            draws = PosteriorDraws(values, names)
            diag = Diagnostics.from_dict(doc["diagnostics"])
        elif doc["method"] == "optim":
            mode = np.array(doc["mode"], dtype=float)
            if mode.shape != (len(names),):
                raise ArchiveError("mode vector has the wrong length")
        else:
            raise ArchiveError(f"unknown fit method {doc['method']!r}")
        if cp.shape != (len(data["items"]), spec.K):
            raise ArchiveError("class-probability block has the wrong shape")
        return FitResult(
            doc["method"], spec, names, cp, tuple(data["items"]), tuple(data["raters"]),
            draws=draws, mode=mode, diagnostics=diag, settings=doc["settings"], optim=doc["optim"],
            fingerprint=data["fingerprint"], data_format=data["format"], warnings=list(doc["warnings"]),
        )
    except ArchiveError:
        raise
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ArchiveError(f"corrupt fit archive: {exc}") from exc


def write_atomic(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=d)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save(result: FitResult, path) -> None:
    write_atomic(path, to_json(result))


def load(path, dataset: RatingDataset | None = None) -> FitResult:
    """Read an archive; with ``dataset``, refuse it unless the fingerprints match."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ArchiveError(f"cannot read archive: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise ArchiveError(f"corrupt fit archive: {exc}") from exc
    result = from_json(text)
    if dataset is not None and fingerprint(dataset) != result.fingerprint:
        raise ArchiveError("the dataset does not match the one this fit was made from")
    return result
