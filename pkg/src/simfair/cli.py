"""Experiment command line: gen / estimate / robustness / train / sweep.

Result tables are CSV with a leading ``# schema=simfair/v1`` comment and a
``<out>.meta.json`` sidecar echoing the resolved run configuration.  All
numbers are written with full round-trip precision and every command is
deterministic given its flags.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .classifier import FairMultiLabelClassifier, TrainReport, evaluate
from .data import Dataset, LoadError, SynthSpec, export_dataset, gen_synthetic, load, rank_label_groups, split, subsample_advantaged
from .fairness import dp_violation, eop_violation, simfair_violation
from .network import load_backbone, save_backbone
from .similarity import SimilaritySpec

SCHEMA = "simfair/v1"

DEFAULT_GAMMAS = "0.1,0.5,1,5,10"
DEFAULT_REPORT_GAMMAS = "1,5,10"
DEFAULT_KEEP = "1.0,0.7,0.3,0.1,0.05"
DEFAULT_LAMBDAS = "1,10,100,1000,5000"
DEFAULT_REGS = "dp,eop,simfair:5"

_SYNTH_KEYS = ("n_samples", "n_features", "n_labels", "n_groups", "proportions", "decay", "bias", "seed")


def _parse_floats(text: str) -> list:
    try:
        return [float(t) for t in text.split(",") if t.strip() != ""]
    except ValueError as exc:
        raise ValueError(f"expected a comma-separated list of numbers, got {text!r}") from exc


def _parse_ints(text: str) -> tuple:
    try:
        return tuple(int(t) for t in text.split(",") if t.strip() != "")
    except ValueError as exc:
        raise ValueError(f"expected a comma-separated list of integers, got {text!r}") from exc


def _read_synth_spec(path, data_seed=None) -> SynthSpec:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ValueError(f"cannot read synth spec {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValueError(f"synth spec {path} is not valid JSON: {exc}") from exc
    missing = [k for k in _SYNTH_KEYS if k not in raw]
    if missing:
        raise ValueError(f"synth spec {path} is missing keys: {', '.join(missing)}")
    unknown = [k for k in raw if k not in _SYNTH_KEYS]
    if unknown:
        raise ValueError(f"synth spec {path} has unknown keys: {', '.join(unknown)}")
    if data_seed is not None:
        raw["seed"] = data_seed  # flags override spec-file values
    raw["proportions"] = tuple(raw["proportions"])
    return SynthSpec(**raw)


def _get_dataset(args) -> tuple:
    """Resolve the dataset source; returns (dataset, source description)."""
    if (args.manifest is None) == (args.synth is None):
        raise ValueError("exactly one of --manifest or --synth is required")
    if args.manifest is not None:
        return load(args.manifest), {"manifest": str(args.manifest)}
    spec = _read_synth_spec(args.synth, getattr(args, "data_seed", None))
    return gen_synthetic(spec), {"synth": str(args.synth), "resolved": spec.__dict__ | {"proportions": list(spec.proportions)}}


def _resolve_y_adv(selector, train: Dataset) -> np.ndarray:
    """`rank:k` / `rank:last` resolved on the training split, or a bitstring."""
    if selector is None:
        selector = "rank:1"
    if selector.startswith("rank:"):
        ranked = rank_label_groups(train)
        token = selector[len("rank:"):]
        if token == "last":
            return ranked[-1][0]
        try:
            k = int(token)
        except ValueError as exc:
            raise ValueError(f"bad rank selector {selector!r}") from exc
        if not 1 <= k <= len(ranked):
            raise ValueError(f"rank {k} out of range; the dataset has {len(ranked)} distinct label groups")
        return ranked[k - 1][0]
    if not selector or any(c not in "01" for c in selector):
        raise ValueError(f"y_adv must be 'rank:k', 'rank:last', or a 0/1 bitstring, got {selector!r}")
    if len(selector) != train.n_labels:
        raise ValueError(f"y_adv bitstring has length {len(selector)}, dataset has {train.n_labels} targets")
    return np.array([int(c) for c in selector], dtype=np.int64)


def _bits(y_adv) -> str:
    return "".join(str(int(b)) for b in y_adv)


def _spec_for_reg(reg: str, gamma) -> SimilaritySpec | None:
    if reg != "simfair" and gamma is not None:
        raise ValueError("--gamma only applies to the simfair regularizer")
    if reg == "none":
        return None
    if reg == "dp":
        return SimilaritySpec.constant()
    if reg == "eop":
        return SimilaritySpec.indicator()
    if gamma is None:
        raise ValueError("--gamma is required for the simfair regularizer")
    return SimilaritySpec.jaccard_exp(gamma)


def _parse_reg_token(token: str) -> tuple:
    """Sweep regularizer tokens: none | dp | eop | simfair:<gamma>."""
    if token in ("none", "dp", "eop"):
        return token, None
    if token.startswith("simfair:"):
        return "simfair", float(token[len("simfair:"):])
    raise ValueError(f"bad regularizer {token!r}; expected none|dp|eop|simfair:<gamma>")


def _fit(train: Dataset, spec, penalty_weight, y_adv, args, seed) -> FairMultiLabelClassifier:
    clf = FairMultiLabelClassifier(
        spec=spec,
        penalty_weight=penalty_weight,
        y_adv=None if y_adv is None else np.asarray(y_adv),
        hidden_dims=_parse_ints(args.hidden),
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        max_grad_norm=args.max_grad_norm,
        random_state=seed,
    )
    clf.fit(train.X, train.Y, sensitive=train.a)
    return clf


def _write_csv(path, fieldnames, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# schema={SCHEMA}\n")
        fh.write(",".join(fieldnames) + "\n")
        for row in rows:
            fh.write(",".join(str(row.get(f, "")) for f in fieldnames) + "\n")


def _write_meta(out_path, command, runspec):
    meta = {"schema": SCHEMA, "command": command, "runspec": runspec}
    Path(str(out_path) + ".meta.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _violation_rows(probs, test: Dataset, y_adv, gammas) -> list:
    reports = [
        ("dp", dp_violation(probs, test.a, test.n_groups)),
    ]
    for gamma in gammas:
        reports.append((f"s_{gamma:g}", simfair_violation(probs, test.a, test.Y, y_adv, SimilaritySpec.jaccard_exp(gamma), test.n_groups)))
    reports.append(("eop", eop_violation(probs, test.a, test.Y, y_adv, test.n_groups)))
    rows = []
    for label, rep in reports:
        rec = rep.to_record()
        rec["estimator"] = label
        rows.append(rec)
    return rows


# --- subcommands -------------------------------------------------------------

def _cmd_gen(args) -> int:
    spec = _read_synth_spec(args.synth, getattr(args, "data_seed", None))
    dataset = gen_synthetic(spec)
    csv_path, manifest_path = export_dataset(dataset, args.out)
    print(f"wrote {csv_path} and {manifest_path}")
    return 0


def _cmd_estimate(args) -> int:
    dataset, source = _get_dataset(args)
    train, test = split(dataset, args.train_fraction, args.seed)
    y_adv = _resolve_y_adv(args.y_adv, train)
    gammas = _parse_floats(args.gammas)
    if args.model is not None:
        backbone = load_backbone(args.model)
    else:
        backbone = _fit(train, None, 0.0, None, args, args.seed).backbone_
    probs = backbone.forward(test.X)
    rows = _violation_rows(probs, test, y_adv, gammas)
    fieldnames = ["estimator", "notion", "gamma", "y_adv", "violation", "form",
                  "reference_mean"] + [f"group{k}_mean" for k in range(1, test.n_groups + 1)]
    _write_csv(args.out, fieldnames, rows)
    _write_meta(args.out, "estimate", {
        "source": source, "y_adv": _bits(y_adv), "gammas": gammas, "seed": args.seed,
        "epochs": args.epochs, "train_fraction": args.train_fraction,
        "model": None if args.model is None else str(args.model),
    })
    print(f"wrote {args.out}")
    return 0


def _cmd_robustness(args) -> int:
    dataset, source = _get_dataset(args)
    train, test = split(dataset, args.train_fraction, args.seed)
    y_adv = _resolve_y_adv(args.y_adv, train)
    gammas = _parse_floats(args.gammas)
    keep_fractions = _parse_floats(args.keep)
    if args.model is not None:
        backbone = load_backbone(args.model)
    else:
        backbone = _fit(train, None, 0.0, None, args, args.seed).backbone_

    rows = []
    for keep in keep_fractions:
        for rep in range(1, args.seeds + 1):
            sub = subsample_advantaged(test, y_adv, keep, args.seed + rep)
            probs = backbone.forward(sub.X)
            for rec in _violation_rows(probs, sub, y_adv, gammas):
                rec["keep_fraction"] = repr(keep)
                rec["replication"] = rep
                rows.append(rec)
    fieldnames = ["keep_fraction", "replication", "estimator", "notion", "gamma", "y_adv",
                  "violation", "form", "reference_mean"] + [f"group{k}_mean" for k in range(1, test.n_groups + 1)]
    _write_csv(args.out, fieldnames, rows)
    _write_meta(args.out, "robustness", {
        "source": source, "y_adv": _bits(y_adv), "gammas": gammas, "keep_fractions": keep_fractions,
        "replications": args.seeds, "seed": args.seed, "epochs": args.epochs,
        "train_fraction": args.train_fraction,
        "model": None if args.model is None else str(args.model),
    })
    print(f"wrote {args.out} ({len(rows)} rows)")
    return 0


def _cmd_train(args) -> int:
    dataset, source = _get_dataset(args)
    train, test = split(dataset, args.train_fraction, args.seed)
    y_adv = _resolve_y_adv(args.y_adv, train)
    spec = _spec_for_reg(args.reg, args.gamma)
    lam = args.lambda_ if spec is not None else 0.0
    clf = _fit(train, spec, lam, y_adv if spec is not None else None, args, args.seed)

    report_gammas = _parse_floats(args.gammas)
    metrics = evaluate(clf.backbone_, test.X, test.a, test.Y, y_adv, report_gammas, test.n_groups)
    config = {
        "source": source,
        "regularizer": args.reg,
        "gamma": args.gamma,
        "lambda": lam,
        "y_adv": _bits(y_adv),
        "hidden": args.hidden,
        "epochs": args.epochs,
        "batch_size": args.batch_size,
        "learning_rate": args.learning_rate,
        "max_grad_norm": args.max_grad_norm,
        "train_fraction": args.train_fraction,
        "report_gammas": report_gammas,
    }
    report = TrainReport(config=config, seed=args.seed, epoch_losses=clf.loss_curve_,
                         f1=metrics["f1"], violations=metrics["violations"],
                         penalty_skips=clf.penalty_skips_)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    model_path = out.with_suffix(".model")
    report_path = out.with_suffix(".report.json")
    save_backbone(clf.backbone_, model_path)
    report_path.write_text(report.to_json() + "\n", encoding="utf-8")
    if clf.penalty_skips_:
        print(f"{clf.penalty_skips_} minibatches had an undefined violation and skipped the penalty")
    print(f"wrote {model_path} and {report_path}")
    return 0


def _cmd_sweep(args) -> int:
    dataset, source = _get_dataset(args)
    train, test = split(dataset, args.train_fraction, args.seed)
    y_adv = _resolve_y_adv(args.y_adv, train)
    lambdas = _parse_floats(args.lambdas)
    regs = [_parse_reg_token(tok) for tok in args.regs.split(",") if tok.strip()]

    rows = []
    for lam in lambdas:
        for reg_name, gamma in regs:
            spec = _spec_for_reg(reg_name, gamma)
            for rep in range(1, args.seeds + 1):
                seed = args.seed + rep - 1
                clf = _fit(train, spec, lam if spec is not None else 0.0,
                           y_adv if spec is not None else None, args, seed)
                probs = clf.backbone_.forward(test.X)
                metrics = evaluate(clf.backbone_, test.X, test.a, test.Y, y_adv, [], test.n_groups)
                dp = dp_violation(probs, test.a, test.n_groups)
                eop = eop_violation(probs, test.a, test.Y, y_adv, test.n_groups)
                rows.append({
                    "lambda": repr(lam),
                    "regularizer": reg_name,
                    "gamma": "" if gamma is None else repr(gamma),
                    "y_adv": _bits(y_adv),
                    "dp": "undefined" if dp.violation is None else repr(dp.violation),
                    "eop": "undefined" if eop.violation is None else repr(eop.violation),
                    "micro_f1": repr(metrics["f1"]["micro"]),
                    "macro_f1": repr(metrics["f1"]["macro"]),
                    "example_f1": repr(metrics["f1"]["example"]),
                    "seed": seed,
                })
    fieldnames = ["lambda", "regularizer", "gamma", "y_adv", "dp", "eop",
                  "micro_f1", "macro_f1", "example_f1", "seed"]
    _write_csv(args.out, fieldnames, rows)
    _write_meta(args.out, "sweep", {
        "source": source, "y_adv": _bits(y_adv), "lambdas": lambdas, "regularizers": args.regs,
        "replications": args.seeds, "seed": args.seed, "epochs": args.epochs,
        "train_fraction": args.train_fraction,
    })
    print(f"wrote {args.out} ({len(rows)} rows)")
    return 0


# --- parser ------------------------------------------------------------------

def _add_dataset_flags(p):
    p.add_argument("--manifest", help="manifest describing a CSV dataset")
    p.add_argument("--synth", help="JSON synthetic-data spec")
    p.add_argument("--data-seed", type=int, default=None, help="override the synth spec's seed")
    p.add_argument("--train-fraction", type=float, default=0.7)


def _add_train_flags(p):
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--max-grad-norm", type=float, default=5.0)
    p.add_argument("--hidden", default="64", help="comma-separated hidden layer widths")
    p.add_argument("--seed", type=int, default=1, help="run seed (replication r uses seed + r)")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="simfair", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="materialize a synthetic dataset to CSV + manifest")
    p.add_argument("--synth", required=True)
    p.add_argument("--data-seed", type=int, default=None)
    p.add_argument("--out", required=True, help="output path prefix")
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("estimate", help="violations of an unregularized model across a gamma grid")
    _add_dataset_flags(p)
    _add_train_flags(p)
    p.add_argument("--y-adv", default=None, help="'rank:k', 'rank:last', or a 0/1 bitstring")
    p.add_argument("--gammas", default=DEFAULT_GAMMAS)
    p.add_argument("--model", default=None, help="load this model instead of training")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("robustness", help="estimator drift under advantaged-group subsampling")
    _add_dataset_flags(p)
    _add_train_flags(p)
    p.add_argument("--y-adv", default=None)
    p.add_argument("--gammas", default=DEFAULT_GAMMAS)
    p.add_argument("--keep", default=DEFAULT_KEEP, help="keep fractions of the advantaged group")
    p.add_argument("--seeds", type=int, default=10, help="number of subsample replications")
    p.add_argument("--model", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_robustness)

    p = sub.add_parser("train", help="train one model with a chosen regularizer")
    _add_dataset_flags(p)
    _add_train_flags(p)
    p.add_argument("--reg", choices=("none", "dp", "eop", "simfair"), default="none")
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--lambda", dest="lambda_", type=float, default=10.0)
    p.add_argument("--y-adv", default=None)
    p.add_argument("--gammas", default=DEFAULT_REPORT_GAMMAS, help="gamma grid for the report's violations")
    p.add_argument("--out", required=True, help="output path prefix for .model and .report.json")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("sweep", help="lambda x regularizer tradeoff grid")
    _add_dataset_flags(p)
    _add_train_flags(p)
    p.add_argument("--lambdas", default=DEFAULT_LAMBDAS)
    p.add_argument("--regs", default=DEFAULT_REGS, help="comma list of none|dp|eop|simfair:<gamma>")
    p.add_argument("--y-adv", default=None)
    p.add_argument("--seeds", type=int, default=1, help="replications per cell")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    try:
        return args.func(args)
    except LoadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
