"""Command-line entry point: ``margin-lab <command> ...``.

Exit codes: 0 success, 1 a verify criterion failed, 2 invalid input,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import acceptance, classifiers, events, geometry, harness, risk
from .errors import NumericalError, ValidationError
from .gram import gram_quantities
from .model import Dataset, ModelSpec, sample_dataset


def _read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ValidationError(f"no such file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path} is not valid JSON: {exc}") from exc


def _emit(doc: dict, out) -> None:
    text = json.dumps(doc, indent=2, default=_json_default)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f"not serializable: {type(obj).__name__}")


def _dataset(args) -> Dataset:
    if getattr(args, "data", None):
        try:
            return Dataset.load(args.data)
        except FileNotFoundError as exc:
            raise ValidationError(f"no such file: {args.data}") from exc
    if getattr(args, "spec", None):
        return sample_dataset(ModelSpec.from_dict(_read_json(args.spec)), args.seed)
    raise ValidationError("give --data or --spec")


def _spec(args, dataset: Dataset | None = None) -> ModelSpec:
    if getattr(args, "spec", None):
        return ModelSpec.from_dict(_read_json(args.spec))
    if dataset is not None and dataset.spec is not None:
        return dataset.spec
    raise ValidationError("this command needs a model spec (--spec, or a dataset saved with one)")


def _constants(args) -> dict:
    return _read_json(args.constants) if getattr(args, "constants", None) else {}


def _classifier(args, dataset: Dataset) -> classifiers.Classifier:
    if getattr(args, "classifier", None):
        return classifiers.Classifier.from_dict(_read_json(args.classifier))
    return classifiers.max_margin(dataset)


# ---------------------------------------------------------------------------
# commands


def cmd_gen(args) -> int:
    spec = ModelSpec.from_dict(_read_json(args.spec))
    out = args.out or "dataset.npz"
    sample_dataset(spec, args.seed).save(out)
    print(f"wrote {out} (n={spec.n}, p={spec.p}, seed={args.seed})")
    return 0


def cmd_fit(args) -> int:
    data = _dataset(args)
    if args.method == "ls":
        clf = classifiers.ls_interpolator(data)
    elif args.method == "oracle":
        clf = classifiers.hard_margin_oracle(data, tol=args.tol, max_iter=args.max_iter)
    elif args.method == "max-margin":
        clf = classifiers.max_margin(data)
    else:
        ref = classifiers.max_margin(data).w if args.reference else None
        traj = classifiers.logistic_gd(data, step=args.step, max_iter=args.max_iter,
                                       record_every=args.record_every, reference=ref)
        if args.trajectory:
            traj.to_csv(args.trajectory)
        clf = traj.final
    _emit(clf.to_dict(), args.out)
    return 0


def cmd_audit(args) -> int:
    data = _dataset(args)
    spec = _spec(args, data)
    pred = events.em_event_parameters(spec, args.delta)
    thresholds = events.EventThresholds(**_read_json(args.thresholds)) if args.thresholds else pred.thresholds()
    report = events.event_report(data, thresholds)
    doc = {"predicted": pred.to_dict(), "events": report.to_dict()}
    doc["quadratic_bounds"] = events.verify_quad_bounds(gram_quantities(data), report, data).to_dict()
    checklists = []
    for theorem in args.theorem or []:
        cl = events.theorem_preconditions(spec, args.delta, theorem, _constants(args))
        checklists.append(cl.to_dict())
        print(cl.render(), file=sys.stderr)
    doc["checklists"] = checklists
    _emit(doc, args.out)
    return 0


def cmd_risk(args) -> int:
    data = _dataset(args)
    spec = _spec(args, data)
    clf = _classifier(args, data)
    doc: dict = {"zeta": risk.zeta(clf.w, spec.mu)}
    if spec.is_gaussian:
        doc["test_error_exact"] = risk.test_error_exact(clf.w, spec.mu, spec.sigma, spec.eta, spec).to_dict()
    doc["test_error_mc"] = risk.test_error_mc(clf.w, spec, args.n_mc, args.seed).to_dict()
    regime = "noisy" if spec.eta > 0 else "noiseless"
    n_rho = spec.n * spec.rho
    doc["zeta_sq"] = risk.predicted_zeta_sq(spec.eta, n_rho, spec.mu_norm, regime, observed=doc["zeta"] ** 2).to_dict()
    psi2 = spec.xi_law.psi2_norm if spec.g_law.kind == "constant" else None
    op = spec.g_law.moment(2) * spec.sigma.op_norm(spec.p)
    doc["bounds"] = risk.risk_bounds(spec.eta, n_rho, spec.mu_norm, op, _constants(args),
                                     psi2_norm=psi2 if psi2 and np.isfinite(psi2) else None).to_dict()
    if spec.is_gaussian and spec.eta > 0:
        doc["sandwich"] = risk.sandwich_check(data, clf).to_dict()
    _emit(doc, args.out)
    return 0


def cmd_geom(args) -> int:
    data = _dataset(args)
    dec = geometry.clean_noisy_decomposition(data, _classifier(args, data))
    doc = dec.to_dict()
    if 0 < data.eta < 0.5:
        n_rho = float(np.sum(np.linalg.norm(data.Z, axis=1) ** -2.0))
        doc["orthogonal_formula"] = dict(zip(("nu_c", "nu_n"), geometry.orthogonal_nu_formulas(data.eta, n_rho * float(data.mu @ data.mu))))
    _emit(doc, args.out)
    return 0


def cmd_sweep(args) -> int:
    doc = _read_json(args.config)
    plot = doc.pop("plot", None)
    if args.workers:
        doc["workers"] = args.workers
    if args.seed is not None:
        doc["master_seed"] = args.seed
    config = harness.SweepConfig.from_dict(doc)
    table = harness.run_sweep(config)
    out = Path(args.out or "sweep_out")
    out.mkdir(parents=True, exist_ok=True)
    harness.emit_csv(table, out / "rows.csv")
    harness.emit_summary_csv(table, out / "summary.csv", config.axis_names, config.outputs)
    if plot:
        harness.emit_svg(table, plot["x"], plot["y"], out / plot.get("file", "plot.svg"),
                         scales=tuple(plot.get("scales", ("linear", "linear"))))
    bad = sum(row["status"] != "ok" for row in table.rows)
    print(f"{len(table)} rows ({bad} failed) written to {out}")
    return 0


def cmd_verify(args) -> int:
    failed = 0
    for result in acceptance.run_all(args.only):
        print(result.line(), flush=True)
        failed += not result.passed
    return 1 if failed else 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="margin-lab", description="Max-margin classification under label noise.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=True):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out")
        if data:
            p.add_argument("--data", help="dataset .npz written by gen")
            p.add_argument("--spec", help="model spec JSON")

    p = sub.add_parser("gen", help="sample a dataset from a model spec")
    p.add_argument("--spec", required=True)
    common(p, data=False)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("fit", help="fit a classifier")
    common(p)
    p.add_argument("--method", choices=["ls", "oracle", "gd", "max-margin"], default="max-margin")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=100_000)
    p.add_argument("--step", type=float)
    p.add_argument("--record-every", type=int, default=1000)
    p.add_argument("--reference", action="store_true", help="track cosine to the max-margin direction")
    p.add_argument("--trajectory", help="CSV path for the gradient descent trajectory")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("audit", help="events, quadratic bounds and theorem checklists")
    common(p)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--theorem", action="append", choices=sorted(events.THEOREMS))
    p.add_argument("--thresholds", help="JSON with eps, alpha2, alpha_inf, M, beta, gamma, rho")
    p.add_argument("--constants", help="JSON map of universal constants")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("risk", help="test error, predicted margin ratio, bounds and sandwich")
    common(p)
    p.add_argument("--classifier", help="classifier JSON from fit (default: max-margin)")
    p.add_argument("--n-mc", type=int, default=100_000)
    p.add_argument("--constants")
    p.set_defaults(func=cmd_risk)

    p = sub.add_parser("geom", help="clean/noisy decomposition of the max-margin direction")
    common(p)
    p.add_argument("--classifier")
    p.set_defaults(func=cmd_geom)

    p = sub.add_parser("sweep", help="run a sweep config into CSV/SVG")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--seed", type=int, help="override the config's master seed")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="run the acceptance criteria")
    p.add_argument("--only", type=int, nargs="+", choices=sorted(acceptance.CRITERIA))
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
