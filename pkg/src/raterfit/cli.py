"""Command-line interface.

Exit codes:

    0  success
    2  input could not be parsed (data, parameter or design files)
    3  unsupported conversion
    4  numerical failure while fitting
    5  bad flags or arguments
    6  corrupt, unreadable or mismatched fit archive
    7  requested output is not available for optimisation fits

Every output file is written to a temporary name and renamed into place,
so a failing command never leaves a partial file behind.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import warnings

import numpy as np

from raterfit import __version__
from raterfit import dataset as ds
from raterfit import posterior
from raterfit.errors import (
    ArchiveError,
    DomainError,
    NumericalError,
    ParseError,
    RaterError,
    ShapeError,
    StateError,
    UnsupportedError,
)
from raterfit.likelihood import PARAM_TYPES
from raterfit.mcmc import SamplerConfig
from raterfit.model import canonical_variant
from raterfit.results import MODEL_TITLES, FitResult, fit, load, save, write_atomic

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_CONVERT = 3
EXIT_NUMERIC = 4
EXIT_FLAGS = 5
EXIT_ARCHIVE = 6
EXIT_NOT_AVAILABLE = 7

EXTRACT_WHAT = ("pi", "theta", "p", "z", "class-probs", "draws", "intervals", "waic")
PLOT_KINDS = ("raters", "prevalence", "latent-class")
SUMMARY_ROWS = 8


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_FLAGS, f"{self.prog}: error: {message}\n")


# --------------------------------------------------------------------------
# helpers


def _num(x) -> str:
    return repr(float(x))


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _emit(text: str, out) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        write_atomic(out, text)


def _say(args, msg):
    if not args.quiet:
        print(msg, file=sys.stderr)


def _read_data(path, fmt, categories=None, missing="NA"):
    opts = {"missing": missing}
    if categories is not None:
        opts["n_categories"] = categories
    try:
        return ds.read(path, fmt, **opts)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror or exc}", EXIT_PARSE) from exc
    except (ParseError, DomainError, ShapeError) as exc:
        raise CliError(str(exc), EXIT_PARSE) from exc
    except UnsupportedError as exc:
        raise CliError(str(exc), EXIT_CONVERT) from exc


def _load(path, dataset=None) -> FitResult:
    try:
        return load(path, dataset)
    except ArchiveError as exc:
        raise CliError(str(exc), EXIT_ARCHIVE) from exc


def _mcmc_only(fit_result, what):
    if fit_result.method != "mcmc":
        raise CliError(f"{what} is not available for optimisation fits", EXIT_NOT_AVAILABLE)


# --------------------------------------------------------------------------
# convert


def cmd_convert(args) -> int:
    data = _read_data(args.input, args.from_format, args.categories, args.missing)
    try:
        out = ds.convert(data, args.to_format)
    except UnsupportedError as exc:
        raise CliError(str(exc), EXIT_CONVERT) from exc
    _emit(ds.to_csv_string(out, missing=args.missing), args.out)
    return EXIT_OK


# --------------------------------------------------------------------------
# fit


def _read_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc.strerror or exc}", EXIT_FLAGS) from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"config {path} is not valid JSON: {exc}", EXIT_FLAGS) from exc
    if not isinstance(cfg, dict):
        raise CliError("config file must hold a JSON object", EXIT_FLAGS)
    return cfg


def read_beta_file(path, K: int, J: int) -> np.ndarray:
    """K x K matrix, or J stacked K x K blocks (J*K rows), as headerless CSV."""
    try:
        beta = np.loadtxt(path, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot read beta file {path}: {exc}", EXIT_FLAGS) from exc
    if beta.shape == (K, K):
        return beta
    if beta.shape == (J * K, K):
        return beta.reshape(J, K, K)
    raise CliError(f"beta file must have {K} columns and {K} or {J * K} rows, got shape {beta.shape}", EXIT_FLAGS)


_CONFIG_KEYS = {
    "model", "method", "data_format", "chains", "warmup", "draws", "seed", "target_accept", "max_leapfrog",
    "jobs", "alpha", "beta", "N", "p", "beta1", "beta2", "tol", "max_iter", "init",
}


def _setting(args, cfg, name, default=None):
    v = getattr(args, name, None)
    return v if v is not None else cfg.get(name, default)


def cmd_fit(args) -> int:
    out = args.out
    if out == "-":
        raise CliError("fit writes an archive file; --out cannot be stdout", EXIT_FLAGS)
    if out is None:
        out = os.path.splitext(os.path.basename(args.data))[0] + ".fit.json"
    cfg = _read_config(args.config) if args.config else {}
    unknown = set(cfg) - _CONFIG_KEYS
    if unknown:
        raise CliError(f"unknown config keys: {', '.join(sorted(unknown))}", EXIT_FLAGS)
    model = _setting(args, cfg, "model", "dawid-skene")
    try:
        variant = canonical_variant(model)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_FLAGS) from exc
    method = _setting(args, cfg, "method", "mcmc")
    if method not in ("mcmc", "optim"):
        raise CliError(f"--method must be mcmc or optim, got {method!r}", EXIT_FLAGS)
    data = _read_data(args.data, _setting(args, cfg, "data_format", "long"), args.categories, args.missing)

    prior = {k: cfg[k] for k in ("alpha", "beta", "N", "p", "beta1", "beta2") if k in cfg}
    if args.alpha is not None:
        prior["alpha"] = args.alpha if len(args.alpha) > 1 else args.alpha[0]
    if args.prior_n is not None:
        prior["N"] = args.prior_n
    if args.prior_p is not None:
        prior["p"] = args.prior_p
    if args.beta_file is not None:
        J = 1 if variant == "homogeneous" else data.n_raters
        prior["beta"] = read_beta_file(args.beta_file, data.n_categories, J)

    seed = _setting(args, cfg, "seed")
    try:
        config = SamplerConfig(
            chains=_setting(args, cfg, "chains", 4),
            warmup=_setting(args, cfg, "warmup", 1000),
            draws=_setting(args, cfg, "draws", 1000),
            seed=seed,
            target_accept=_setting(args, cfg, "target_accept", 0.8),
            max_leapfrog=_setting(args, cfg, "max_leapfrog", 1024),
            n_jobs=_setting(args, cfg, "jobs", 1),
        )
    except (TypeError, ValueError) as exc:
        raise CliError(str(exc), EXIT_FLAGS) from exc

    def progress(chain, msg):
        _say(args, f"chain {chain}: {msg}" if chain else msg)

    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            result = fit(
                data, variant, method, prior=prior or None, config=config,
                tol=_setting(args, cfg, "tol"), max_iter=_setting(args, cfg, "max_iter", 1000),
                init_strategy=_setting(args, cfg, "init", "from-majority-vote"), seed=seed, progress=progress,
            )
    except NumericalError as exc:
        raise CliError(f"numerical failure: {exc}", EXIT_NUMERIC) from exc
    except (ValueError, DomainError, ShapeError) as exc:
        raise CliError(str(exc), EXIT_FLAGS) from exc
    for w in result.warnings:
        _say(args, f"warning: {w}")
    save(result, out)
    _say(args, f"wrote {out}")
    return EXIT_OK


# --------------------------------------------------------------------------
# summary


def _f2(x) -> str:
    x = float(x)
    if np.isnan(x):
        return "NaN"
    if np.isinf(x):
        return "Inf" if x > 0 else "-Inf"
    return f"{x:.2f}"


def _table(header, rows) -> list[str]:
    """Left-aligned first column, right-aligned others."""
    cols = [header] + rows
    widths = [max(len(r[c]) for r in cols) for c in range(len(header))]
    out = []
    for r in cols:
        cells = [r[0].ljust(widths[0])] + [r[c].rjust(widths[c]) for c in range(1, len(r))]
        out.append(" ".join(cells).rstrip())
    return out


def _prior_lines(result: FitResult) -> list[str]:
    custom = result.spec.custom
    keys = {
        "dawid_skene": {"alpha": {"alpha"}, "beta": {"beta", "N", "p"}},
        "homogeneous": {"alpha": {"alpha"}, "beta": {"beta", "N", "p"}},
        "class_conditional": {"alpha": {"alpha"}, "beta_1": {"beta1", "N", "p"}, "beta_2": {"beta2", "N", "p"}},
        "hierarchical": {"alpha": {"alpha"}},
    }[result.spec.variant]
    return [f"{name}: {'custom' if custom & src else 'default'}" for name, src in keys.items()]


def summary_text(result: FitResult) -> str:
    """Plain-text report; numbers fixed at two decimals."""
    spec = result.spec
    mcmc = result.method == "mcmc"
    blocks = "/".join(name for name, _ in result.layout.blocks)
    lines = ["Model:", MODEL_TITLES[spec.variant], "", "Prior parameters:", ""]
    lines += _prior_lines(result)
    lines += ["", f"Fitting method: {'MCMC' if mcmc else 'Optimisation'}", ""]

    names = list(result.names)
    if mcmc:
        values = result.draws.flat()
        mean = values.mean(axis=0)
        lo, hi = np.quantile(values, [0.05, 0.95], axis=0, method="linear")
        diag = result.diagnostics
        header = ["", "mean", "5%", "95%", "Rhat", "ESS"]
        rows = [
            [n, _f2(mean[i]), _f2(lo[i]), _f2(hi[i]), _f2(diag.rhat[i]), _f2(diag.ess[i])]
            for i, n in enumerate(names[:SUMMARY_ROWS])
        ]
        lines.append(f"{blocks} samples:")
    else:
        header = ["", "mode"]
        rows = [[n, _f2(result.mode[i])] for i, n in enumerate(names[:SUMMARY_ROWS])]
        lines.append(f"{blocks} estimates:")
    lines += _table(header, rows)
    if len(names) > SUMMARY_ROWS:
        lines.append(f"# ... with {len(names) - SUMMARY_ROWS} more rows")

    cp = result.class_probs
    z = np.argmax(cp, axis=1) + 1
    header = ["", "MAP"] + [f"Pr(z = {k + 1})" for k in range(spec.K)]
    rows = [
        [f"z[{label}]", str(z[i])] + [_f2(v) for v in cp[i]]
        for i, label in enumerate(result.item_labels[:SUMMARY_ROWS])
    ]
    lines += ["", "z:"] + _table(header, rows)
    if cp.shape[0] > SUMMARY_ROWS:
        lines.append(f"# ... with {cp.shape[0] - SUMMARY_ROWS} more items")
    if not mcmc and not result.optim.get("converged", True):
        lines += ["", "Note: the optimiser did not report convergence."]
    if result.warnings:
        lines += ["", "Warnings:"] + [f"- {w}" for w in result.warnings]
    return "\n".join(lines) + "\n"


def cmd_summary(args) -> int:
    _emit(summary_text(_load(args.archive)), args.out)
    return EXIT_OK


# --------------------------------------------------------------------------
# extract


def _estimate_rows(result, which):
    try:
        est = posterior.point_estimate(result, which)
    except UnsupportedError as exc:
        raise CliError(str(exc), EXIT_FLAGS) from exc
    if est.note:
        print(f"note: {est.note}", file=sys.stderr)
    return est


def extract_payload(result: FitResult, what: str, level: float = 0.9, data=None):
    """``(header, rows, json_object)`` for one extract target."""
    if what in ("pi", "theta", "p"):
        est = _estimate_rows(result, what)
        rows = [[n, _num(v)] for n, v in zip(est.names, est.value)]
        col = "mean" if result.method == "mcmc" else "mode"
        return ["parameter", col], rows, {n: float(v) for n, v in zip(est.names, est.value)}
    if what == "z":
        z = posterior.point_estimate(result, "z").value
        rows = [[label, int(v)] for label, v in zip(result.item_labels, z)]
        return ["item", "z"], rows, {"items": list(result.item_labels), "z": [int(v) for v in z]}
    if what == "class-probs":
        cp = result.class_probs
        z = np.argmax(cp, axis=1) + 1
        header = ["item"] + [f"Pr(z={k + 1})" for k in range(cp.shape[1])] + ["MAP"]
        rows = [[label, *(_num(v) for v in cp[i]), int(z[i])] for i, label in enumerate(result.item_labels)]
        return header, rows, {"items": list(result.item_labels), "probabilities": cp.tolist(), "MAP": z.tolist()}
    if what == "draws":
        _mcmc_only(result, "draws")
        v = result.draws.values
        rows = [
            [c + 1, s + 1, *(_num(x) for x in v[c, s])] for c in range(v.shape[0]) for s in range(v.shape[1])
        ]
        return ["chain", "iteration", *result.names], rows, {
            "names": list(result.names), "draws": v.tolist(),
        }
    if what == "intervals":
        _mcmc_only(result, "intervals")
        try:
            iv = posterior.posterior_interval(result, level)
        except DomainError as exc:
            raise CliError(str(exc), EXIT_FLAGS) from exc
        rows = [[n, _num(a), _num(b)] for n, a, b in zip(iv.names, iv.lower, iv.upper)]
        return ["parameter", "lower", "upper"], rows, {
            "level": level, **{n: [float(a), float(b)] for n, a, b in zip(iv.names, iv.lower, iv.upper)},
        }
    if what == "waic":
        _mcmc_only(result, "waic")
        if data is None:
            raise CliError("extract waic needs --data (the dataset the fit was made from)", EXIT_FLAGS)
        w = posterior.waic(result, data)
        rows = [[label, *(_num(x) for x in row)] for label, row in zip(w.items, w.pointwise)]
        rows.append(["total", _num(w.lppd), _num(w.p_waic), _num(w.lppd - w.p_waic)])
        return ["item", "lppd", "p_waic", "elpd_waic"], rows, {
            "waic": w.waic, "lppd": w.lppd, "p_waic": w.p_waic,
            "pointwise": {label: row.tolist() for label, row in zip(w.items, w.pointwise)},
        }
    raise CliError(f"unknown extract target {what!r}", EXIT_FLAGS)


def cmd_extract(args) -> int:
    data = None
    if args.data is not None:
        data = _read_data(args.data, args.data_format, args.categories, args.missing)
    result = _load(args.archive, data)
    try:
        header, rows, obj = extract_payload(result, args.what, args.level, data)
    except UnsupportedError as exc:
        raise CliError(str(exc), EXIT_NOT_AVAILABLE) from exc
    text = json.dumps(obj, sort_keys=True, indent=1) + "\n" if args.format == "json" else _csv_text(header, rows)
    _emit(text, args.out)
    return EXIT_OK


# --------------------------------------------------------------------------
# plotdata


def plot_rows(result: FitResult, kind: str, items=None, level: float = 0.9):
    K = result.spec.K
    if kind == "raters":
        theta = posterior.point_estimate(result, "theta").value.reshape(-1, K, K)
        labels = result.rater_labels if result.spec.variant != "homogeneous" else ("1",)
        rows = [
            [labels[j], k + 1, m + 1, _num(theta[j, k, m])]
            for j in range(theta.shape[0]) for k in range(K) for m in range(K)
        ]
        return ["rater", "true_class", "rated_class", "mean_prob"], rows
    if kind == "prevalence":
        pi = posterior.point_estimate(result, "pi").value
        if result.method == "mcmc":
            iv = posterior.posterior_interval(result, level, "pi")
            lo, hi = [_num(x) for x in iv.lower], [_num(x) for x in iv.upper]
        else:
            lo = hi = ["NA"] * K
        return ["class", "mean", "lower", "upper"], [[k + 1, _num(pi[k]), lo[k], hi[k]] for k in range(K)]
    if kind == "latent-class":
        cp = result.class_probs
        labels = list(result.item_labels)
        if items:
            missing = [i for i in items if i not in labels]
            if missing:
                raise CliError(f"unknown items: {', '.join(missing)}", EXIT_FLAGS)
            idx = [labels.index(i) for i in items]
        else:
            idx = range(len(labels))
        header = ["item"] + [f"Pr(z={k + 1})" for k in range(K)]
        return header, [[labels[i], *(_num(v) for v in cp[i])] for i in idx]
    raise CliError(f"unknown plot kind {kind!r}; choose from {', '.join(PLOT_KINDS)}", EXIT_FLAGS)


def cmd_plotdata(args) -> int:
    if args.kind not in PLOT_KINDS:
        raise CliError(f"unknown plot kind {args.kind!r}; choose from {', '.join(PLOT_KINDS)}", EXIT_FLAGS)
    result = _load(args.archive)
    items = [s.strip() for s in args.items.split(",") if s.strip()] if args.items else None
    header, rows = plot_rows(result, args.kind, items, args.level)
    _emit(_csv_text(header, rows), args.out)
    return EXIT_OK


# --------------------------------------------------------------------------
# simulate


def read_params(path):
    """Parameters from JSON: ``pi`` plus ``theta`` (J x K x K) or ``p`` (J x K)."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror or exc}", EXIT_PARSE) from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"{path} is not valid JSON: {exc}", EXIT_PARSE) from exc
    try:
        if "theta" in doc:
            return PARAM_TYPES["dawid_skene"](np.array(doc["pi"], dtype=float), np.array(doc["theta"], dtype=float))
        if "p" in doc:
            return PARAM_TYPES["class_conditional"](np.array(doc["pi"], dtype=float), np.array(doc["p"], dtype=float))
    except (KeyError, TypeError, ValueError, DomainError, ShapeError) as exc:
        raise CliError(f"invalid parameters in {path}: {exc}", EXIT_PARSE) from exc
    raise CliError(f"{path} needs 'pi' and either 'theta' or 'p'", EXIT_PARSE)


def read_design(path):
    """``item,rater`` pairs (1-based integers); a header row is optional."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror or exc}", EXIT_PARSE) from exc
    if rows and not rows[0][0].strip().lstrip("-").isdigit():
        rows = rows[1:]
    out = []
    for n, r in enumerate(rows, start=1):
        try:
            out.append((int(r[0]), int(r[1])))
        except (IndexError, ValueError) as exc:
            raise CliError(f"{path}: bad design row {n}: {r}", EXIT_PARSE) from exc
    if not out:
        raise CliError(f"{path}: design is empty", EXIT_PARSE)
    return out


def cmd_simulate(args) -> int:
    params = read_params(args.params)
    design = read_design(args.design)
    try:
        sim = posterior.simulate_ratings(params, design, args.seed)
    except (DomainError, ShapeError) as exc:
        raise CliError(str(exc), EXIT_PARSE) from exc
    _emit(ds.to_csv_string(sim), args.out)
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def _common(required_out=False):
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=None, help="random seed")
    p.add_argument("--quiet", action="store_true", help="suppress progress messages")
    p.add_argument("--out", default=None, required=required_out, help="output path (default: stdout)")
    return p


def _data_opts(p, fmt_default="long"):
    p.add_argument("--data-format", choices=ds.FORMATS, default=fmt_default)
    p.add_argument("--categories", type=int, default=None, help="number of categories K (default: largest rating)")
    p.add_argument("--missing", default="NA", help="token for missing ratings (default NA)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="raterfit", description="Bayesian Dawid-Skene models for rating data.")
    parser.add_argument("--version", action="version", version=f"raterfit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("convert", parents=[_common()], help="convert between long, wide and grouped CSV")
    p.add_argument("input")
    p.add_argument("--from", dest="from_format", choices=ds.FORMATS, default="long")
    p.add_argument("--to", dest="to_format", choices=ds.FORMATS, required=True)
    p.add_argument("--categories", type=int, default=None)
    p.add_argument("--missing", default="NA")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser(
        "fit", parents=[_common()], help="fit a model and write a fit archive (default: <data>.fit.json)"
    )
    p.add_argument("data")
    p.add_argument("--data-format", choices=ds.FORMATS, default=None)
    p.add_argument("--categories", type=int, default=None)
    p.add_argument("--missing", default="NA")
    p.add_argument("--model", default=None, help="dawid-skene, class-conditional, hierarchical or homogeneous")
    p.add_argument("--method", default=None, help="mcmc (default) or optim")
    p.add_argument("--config", default=None, help="JSON file with default settings")
    g = p.add_argument_group("prior")
    g.add_argument("--alpha", type=float, nargs="+", default=None, help="prevalence pseudocounts (one or K values)")
    g.add_argument("--beta-file", default=None, help="CSV with a KxK matrix or J stacked KxK blocks")
    g.add_argument("--prior-n", type=float, default=None, help="pseudocount total N per error-matrix row")
    g.add_argument("--prior-p", type=float, default=None, help="prior probability of a correct rating")
    g = p.add_argument_group("sampler")
    g.add_argument("--chains", type=int, default=None)
    g.add_argument("--warmup", type=int, default=None)
    g.add_argument("--draws", type=int, default=None)
    g.add_argument("--target-accept", type=float, default=None)
    g.add_argument("--max-leapfrog", type=int, default=None)
    g.add_argument("--jobs", type=int, default=None, help="chains run in parallel threads")
    g = p.add_argument_group("optimisation")
    g.add_argument("--tol", type=float, default=None)
    g.add_argument("--max-iter", type=int, default=None)
    g.add_argument("--init", default=None, choices=("uniform-diagonal", "jittered", "from-majority-vote"))
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("summary", parents=[_common()], help="print a text summary of a fit archive")
    p.add_argument("archive")
    p.set_defaults(func=cmd_summary)

    p = sub.add_parser("extract", parents=[_common()], help="export estimates, draws, intervals or WAIC")
    p.add_argument("archive")
    p.add_argument("what", choices=EXTRACT_WHAT)
    p.add_argument("--level", type=float, default=0.9, help="credible level for intervals (default 0.9)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--data", default=None, help="dataset, required for waic and checked against the archive")
    _data_opts(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("plotdata", parents=[_common()], help="emit tidy CSV for plotting")
    p.add_argument("archive")
    p.add_argument("kind", help=", ".join(PLOT_KINDS))
    p.add_argument("--items", default=None, help="comma-separated item labels (latent-class)")
    p.add_argument("--level", type=float, default=0.9)
    p.set_defaults(func=cmd_plotdata)

    p = sub.add_parser("simulate", parents=[_common()], help="simulate ratings from fixed parameters")
    p.add_argument("params", help="JSON with pi and theta (or p)")
    p.add_argument("design", help="CSV of item,rater pairs")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"raterfit: error: {exc}", file=sys.stderr)
        return exc.code
    except (StateError, RaterError) as exc:
        print(f"raterfit: error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC if isinstance(exc, NumericalError) else EXIT_FLAGS


if __name__ == "__main__":
    sys.exit(main())
