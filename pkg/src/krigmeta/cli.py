"""Command-line interface.

    krigmeta fit data.csv --target y --out model.json
    krigmeta predict model.json newdata.csv --out predictions.csv
    krigmeta importance model.json
    krigmeta heatmap model.json --out matrix.csv --pgm matrix.pgm
    krigmeta validate-glm --n 2000 --seed 1
    krigmeta eval model.json eval.csv

Exit codes: 0 success, 2 input error, 3 degenerate data, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
import time
import warnings
from importlib.metadata import PackageNotFoundError, version
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import baseline, interpret, surrogate
from .errors import (AllColumnsConstant, ConstantVector, DegenerateResponse, DimensionMismatch, InvalidSpec,
                     KrigmetaError, NotPositiveDefinite, OneClassOnly, SingularInformation)
from .kriging import FitConfig, Optimizer
from .metrics import fidelity_report

logger = logging.getLogger("krigmeta")

EXIT_OK, EXIT_INPUT, EXIT_DEGENERATE, EXIT_NUMERIC = 0, 2, 3, 4


class InputError(KrigmetaError, ValueError):
    pass


def _version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:  # pragma: no cover
        return "0+unknown"


def read_table(path: str) -> Tuple[List[str], np.ndarray]:
    """Read a numeric CSV with a header row. Lines starting with '#' are skipped."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            lines = [ln for ln in fh if not ln.startswith("#")]
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    rows = [r for r in csv.reader(lines) if r]
    if len(rows) < 2:
        raise InputError(f"{path}: need a header row and at least one data row")
    header = [h.strip() for h in rows[0]]
    data = np.empty((len(rows) - 1, len(header)))
    for i, r in enumerate(rows[1:], start=2):
        if len(r) != len(header):
            raise InputError(f"{path}:{i}: expected {len(header)} fields, found {len(r)}")
        for j, cell in enumerate(r):
            try:
                data[i - 2, j] = float(cell)
            except ValueError:
                raise InputError(f"{path}:{i}: non-numeric value {cell!r} in column {header[j]!r}") from None
    if not np.all(np.isfinite(data)):
        raise InputError(f"{path}: non-finite values are not allowed")
    return header, data


def _columns(header: List[str], data: np.ndarray, names: Sequence[str], path: str) -> np.ndarray:
    missing = [n for n in names if n not in header]
    if missing:
        raise InputError(f"{path}: missing column(s) {', '.join(missing)}")
    return data[:, [header.index(n) for n in names]]


def _file_digest(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


class Manifest:
    """Run record. The hash covers everything except wall time and output paths."""

    def __init__(self, command: str, inputs: Sequence[str], settings: dict):
        self.start = time.perf_counter()
        self.record = {
            "command": command,
            "inputs": {p: _file_digest(p) for p in inputs},
            "settings": settings,
            "version": _version(),
        }

    def digest(self) -> str:
        blob = json.dumps(self.record, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()

    def header(self) -> str:
        return f"krigmeta manifest sha256:{self.digest()}"

    def write(self, path: Optional[str], extra: Optional[dict] = None) -> None:
        doc = dict(self.record)
        doc.update(extra or {})
        doc["manifest_sha256"] = self.digest()
        doc["wall_time_s"] = round(time.perf_counter() - self.start, 6)
        text = json.dumps(doc, indent=1, sort_keys=True, default=str)
        if path:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        else:
            sys.stderr.write(json.dumps(doc, sort_keys=True, default=str) + "\n")


def _manifest_path(args, out: Optional[str]) -> Optional[str]:
    if args.manifest:
        return args.manifest
    return f"{out}.manifest.json" if out else None


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _fit_config(args) -> FitConfig:
    return FitConfig(
        optimizer=Optimizer(args.optimizer),
        theta_bounds=(args.theta_lo, args.theta_hi),
        nugget=args.nugget,
        nugget_max=max(args.nugget_max, args.nugget),
        de_population=args.pop,
        de_iterations=args.iters,
        qn_restarts=args.restarts,
        seed=args.seed,
        optimize_p=args.optimize_p,
        workers=args.workers,
    )


def _config_echo(cfg: FitConfig) -> dict:
    return {
        "optimizer": cfg.optimizer.value,
        "theta_bounds": list(cfg.theta_bounds),
        "nugget": cfg.nugget,
        "nugget_max": cfg.nugget_max,
        "de_population": cfg.de_population,
        "de_iterations": cfg.de_iterations,
        "qn_restarts": cfg.qn_restarts,
        "seed": cfg.seed,
        "optimize_p": cfg.optimize_p,
    }


def cmd_fit(args) -> int:
    header, data = read_table(args.data)
    if args.target not in header:
        raise InputError(f"{args.data}: target column {args.target!r} not found")
    feats = [h for h in header if h != args.target]
    if not feats:
        raise InputError(f"{args.data}: no feature columns besides {args.target!r}")
    cfg = _fit_config(args)
    man = Manifest("fit", [args.data], {"target": args.target, "config": _config_echo(cfg)})
    X = _columns(header, data, feats, args.data)
    y = data[:, header.index(args.target)]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        sur = surrogate.fit_surrogate(X, y, feats, cfg, target=args.target)
    for w in caught:
        logger.warning("%s", w.message)
    surrogate.save(sur, args.out, man.header())
    m = sur.model
    print(f"logL = {m.log_likelihood!r}")
    print(f"mu_hat = {m.mu_hat!r}  (original units: {float(sur.scaling.unscale_response(m.mu_hat))!r})")
    print(f"sigma2_hat = {m.sigma2_hat!r}  (original units: {m.sigma2_hat * sur.scaling.response_scale ** 2!r})")
    print(f"nugget = {m.nugget!r}")
    for name, th in zip(sur.used_features, m.params.theta):
        print(f"theta[{name}] = {float(th)!r}")
    man.write(_manifest_path(args, args.out), {
        "outputs": [args.out],
        "scaling": {"kept": list(sur.used_features),
                    "dropped": [feats[j] for j in sur.scaling.dropped],
                    "response_center": sur.scaling.response_center,
                    "response_scale": sur.scaling.response_scale},
    })
    return EXIT_OK


def _load_model(path: str) -> surrogate.Surrogate:
    try:
        return surrogate.load(path)
    except OSError as exc:
        raise InputError(f"cannot read model {path}: {exc}") from exc


def cmd_predict(args) -> int:
    sur = _load_model(args.model)
    header, data = read_table(args.data)
    X = _columns(header, data, sur.feature_names, args.data)
    settings = {"ei_best": args.ei_best}
    man = Manifest("predict", [args.model, args.data], settings)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        mean = sur.predict(X)
        sd = sur.predict_sd(X)
        ei = sur.expected_improvement(X, args.ei_best) if args.ei_best is not None else None
    buf = io.StringIO()
    buf.write(f"# {man.header()}\n")
    cols = ["mean", "sd"] + (["ei"] if ei is not None else [])
    buf.write(",".join(cols) + "\n")
    for i in range(mean.size):
        vals = [mean[i], sd[i]] + ([ei[i]] if ei is not None else [])
        buf.write(",".join(repr(float(v)) for v in vals) + "\n")
    _emit(buf.getvalue(), args.out)
    man.write(_manifest_path(args, args.out), {"outputs": [args.out or "<stdout>"]})
    return EXIT_OK


def cmd_importance(args) -> int:
    sur = _load_model(args.model)
    man = Manifest("importance", [args.model], {})
    rep = interpret.feature_importance(sur.model, sur.used_features)
    buf = io.StringIO()
    buf.write(f"# {man.header()}\n")
    buf.write("name,theta,normalized_score,inactive\n")
    for e in rep.entries:
        buf.write(f"{e.name},{e.theta!r},{e.score!r},{str(e.inactive).lower()}\n")
    _emit(buf.getvalue(), args.out)
    man.write(_manifest_path(args, args.out), {"outputs": [args.out or "<stdout>"]})
    return EXIT_OK


def cmd_heatmap(args) -> int:
    sur = _load_model(args.model)
    man = Manifest("heatmap", [args.model], {})
    G = interpret.group_explanation(sur.model)
    try:
        _emit(interpret.heatmap_csv(G, man.header()), args.out)
        if args.pgm:
            _emit(interpret.heatmap_pgm(G, man.header()), args.pgm)
    except OSError as exc:
        raise InputError(f"cannot write heatmap: {exc}") from exc
    man.write(_manifest_path(args, args.out), {"outputs": [args.out, args.pgm] if args.pgm else [args.out]})
    return EXIT_OK


def _floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InputError(f"expected comma-separated numbers, got {text!r}") from None


def cmd_validate_glm(args) -> int:
    coeffs = tuple(c * args.coef_scale for c in _floats(args.coeffs))
    spec = baseline.SynthGlmSpec(n=args.n, coeffs=coeffs, intercept=args.intercept, feature_corr=args.rho,
                                 noise_features=args.noise_features, seed=args.seed)
    cfg = _fit_config(args)
    grid = _floats(args.grid)
    man = Manifest("validate-glm", [], {"spec": spec.describe(), "grid": grid, "kriging_n": args.kriging_n,
                                        "target": args.surrogate_target, "hde_feature": args.hde_feature,
                                        "config": _config_echo(cfg)})
    try:
        report = baseline.run_validation(spec, cfg, kriging_n=args.kriging_n, target=args.surrogate_target,
                                         hde_feature=args.hde_feature, grid=grid)
    except (InvalidSpec, InputError, DimensionMismatch):
        raise
    except KrigmetaError as exc:
        raise _NumericFailure(str(exc)) from exc
    report["manifest_sha256"] = man.digest()
    comp = report["comparison"]
    print(f"spec: {json.dumps(report['spec'])}")
    print(f"kriging order: {[report['feature_names'][j] for j in comp['kriging_order']]}")
    print(f"logistic order: {[report['feature_names'][j] for j in comp['glm_order']]}")
    print(f"top-{len(report['true_active'])} hit rate: kriging {comp['kriging_hit_rate']}, "
          f"logistic {comp['glm_hit_rate']}")
    print(f"logistic separation flag: {report['logistic']['separation_flag']}")
    print(f"HDE on {report['hde']['feature']}: |z| = {[round(z, 4) for z in report['hde']['abs_wald_z']]} "
          f"declared {report['hde']['declared']}")
    if args.out:
        _emit(json.dumps(report, indent=1) + "\n", args.out)
    man.write(_manifest_path(args, args.out), {"outputs": [args.out or "<stdout>"]})
    return EXIT_OK


class _NumericFailure(KrigmetaError):
    pass


def cmd_eval(args) -> int:
    sur = _load_model(args.model)
    header, data = read_table(args.data)
    X = _columns(header, data, sur.feature_names, args.data)
    y = _columns(header, data, [sur.target], args.data)[:, 0]
    man = Manifest("eval", [args.model, args.data], {})
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        fid = fidelity_report(sur, X, y)
    print(f"RMSE(r) = {fid.cell()}")
    print(f"units: RMSE in {fid.units} of {sur.target!r}; r is unitless")
    man.write(_manifest_path(args, None), {"rmse": fid.rmse, "r": fid.r})
    return EXIT_OK


def _add_fit_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--optimizer", choices=[o.value for o in Optimizer], default="de")
    p.add_argument("--theta-lo", type=float, default=1e-4)
    p.add_argument("--theta-hi", type=float, default=1e2)
    p.add_argument("--nugget", type=float, default=1e-10)
    p.add_argument("--nugget-max", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pop", type=int, default=None, help="DE population (default 10 per dimension)")
    p.add_argument("--iters", type=int, default=200, help="DE generations")
    p.add_argument("--restarts", type=int, default=5, help="quasi-Newton starts when run alone")
    p.add_argument("--optimize-p", action="store_true")
    p.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="krigmeta", description="Kriging metamodels for black-box interpretation")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a surrogate to a CSV of inputs and black-box outputs")
    p.add_argument("data")
    p.add_argument("--target", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--manifest")
    _add_fit_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predict mean, sd and optional expected improvement")
    p.add_argument("model")
    p.add_argument("data")
    p.add_argument("--out")
    p.add_argument("--ei-best", type=float, default=None)
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("importance", help="rank features by fitted activity")
    p.add_argument("model")
    p.add_argument("--out")
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_importance)

    p = sub.add_parser("heatmap", help="export the cluster-ordered sample correlation matrix")
    p.add_argument("model")
    p.add_argument("--out", required=True)
    p.add_argument("--pgm")
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("validate-glm", help="synthetic GLM comparison with logistic regression")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--coeffs", default=",".join(str(c) for c in baseline.DEFAULT_COEFFS))
    p.add_argument("--coef-scale", type=float, default=1.0)
    p.add_argument("--intercept", type=float, default=0.0)
    p.add_argument("--rho", type=float, default=0.2)
    p.add_argument("--noise-features", type=int, default=4)
    p.add_argument("--grid", default=",".join(str(g) for g in baseline.DEFAULT_GRID))
    p.add_argument("--hde-feature", type=int, default=0)
    p.add_argument("--kriging-n", type=int, default=100)
    p.add_argument("--surrogate-target", choices=["eta", "prob"], default="eta")
    p.add_argument("--out")
    p.add_argument("--manifest")
    _add_fit_flags(p)
    p.set_defaults(func=cmd_validate_glm)

    p = sub.add_parser("eval", help="RMSE(r) of the surrogate against black-box outputs")
    p.add_argument("model")
    p.add_argument("data")
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_eval)
    return ap


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, (DegenerateResponse, AllColumnsConstant, ConstantVector, OneClassOnly)):
        return EXIT_DEGENERATE
    if isinstance(exc, (_NumericFailure, NotPositiveDefinite, SingularInformation)):
        return EXIT_NUMERIC
    if isinstance(exc, (ValueError, OSError)):
        return EXIT_INPUT
    return EXIT_NUMERIC


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (KrigmetaError, OSError, ValueError) as exc:
        code = _exit_code(exc)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
