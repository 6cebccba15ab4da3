"""Operator command line: generate, preprocess, train, evaluate, explain,
serve, and a small end-to-end demo.

Every subcommand is reproducible: identical flags and seed give byte-identical
primary outputs. A JSON manifest (config, seeds, input hashes) is written next
to each output; manifests are the only files that may differ between reruns,
and only in their timestamp.

Exit codes: 0 success, 1 runtime or I/O failure, 2 usage or validation error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import socket
import sys
from datetime import datetime, timezone
from pathlib import Path

from .cohort import (
    CATEGORY_PROBS,
    CATEGORICAL,
    POPULATION_STATS,
    default_schema,
    load_cohort,
    save_cohort,
)
from .errors import ConfigError, IcuRiskError
from .evaluate import (
    FAMILIES,
    TrialRunConfig,
    grid_search,
    make_family_config,
    run_trials,
    train_family,
)
from .explain import (
    compare_top_features,
    explain_record,
    gini_importance,
    lr_coefficients,
    sample_background,
    shap_importance,
)
from .generator import GeneratorConfig, generate_synthetic_cohort
from .models import TrainedModel, load_model, save_model
from .preprocess import (
    PUBLISHED_BMI_REGRESSION,
    apply_standardizer,
    clean_cohort,
    encode,
    fit_standardizer,
)
from .resample import SmoteConfig, smote_nc
from .service import create_app, load_registry


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


def _write_manifest(output: Path, subcommand: str, config: dict,
                    inputs: list[Path]) -> None:
    doc = {
        "subcommand": subcommand,
        "config": {k: (str(v) if isinstance(v, Path) else v) for k, v in config.items()},
        "inputs": [{"path": str(p), "sha256": _sha256(p)} for p in inputs],
        "output": str(output),
        "created_at": datetime.now(timezone.utc).isoformat(),
    }
    manifest = output.with_name(output.name + ".manifest.json")
    manifest.write_text(json.dumps(doc, indent=2), encoding="utf-8")


def _parse_param(text: str) -> tuple[str, object]:
    if "=" not in text:
        raise ConfigError(f"--param expects key=value, got {text!r}")
    key, raw = text.split("=", 1)
    if raw.lower() in ("true", "false"):
        return key, raw.lower() == "true"
    try:
        return key, int(raw)
    except ValueError:
        pass
    try:
        return key, float(raw)
    except ValueError:
        pass
    if "," in raw:
        try:
            return key, tuple(int(v) for v in raw.split(","))
        except ValueError:
            pass
    return key, raw


def _population_record() -> dict:
    """Population-typical feature map: means and most likely categories."""
    values: dict = {}
    for spec in default_schema().features:
        if spec.kind == CATEGORICAL:
            probs = CATEGORY_PROBS[spec.name]
            values[spec.name] = max(spec.categories, key=lambda c: probs.get(c, 0.0))
        else:
            values[spec.name] = POPULATION_STATS[spec.name][0]
    return values


# ---------------------------------------------------------------------------
# Subcommands


def cmd_generate(args) -> int:
    if args.n is None:
        raise ConfigError("--n is required (flag or config file)")
    config = GeneratorConfig(n=args.n, prevalence=args.prevalence, seed=args.seed,
                             missing_height_rate=args.missing_height_rate,
                             missing_weight_rate=args.missing_weight_rate,
                             n_outliers=args.outliers)
    table = generate_synthetic_cohort(config)
    out = Path(args.out)
    save_cohort(table, out)
    _write_manifest(out, "generate",
                    {"n": args.n, "prevalence": args.prevalence, "seed": args.seed,
                     "missing_height_rate": args.missing_height_rate,
                     "missing_weight_rate": args.missing_weight_rate,
                     "outliers": args.outliers}, [])
    positives = sum(r.label for r in table)
    print(f"wrote {len(table)} records ({positives} positive) to {out}")
    return 0


def cmd_preprocess(args) -> int:
    table = load_cohort(args.input)
    regression = PUBLISHED_BMI_REGRESSION if args.paper_coefficients else None
    cleaned, report = clean_cohort(table, regression=regression)
    out = Path(args.out)
    save_cohort(cleaned, out)
    _write_manifest(out, "preprocess",
                    {"in": args.input, "paper_coefficients": args.paper_coefficients},
                    [Path(args.input)])
    for line in report.lines():
        print(line)
    return 0


def _load_search_space(path: str) -> dict:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, dict):
        raise ConfigError("search space file must hold a JSON object")
    return doc


def cmd_train(args) -> int:
    table = load_cohort(args.input)
    matrix = encode(table)
    state = fit_standardizer(matrix)
    standardized = apply_standardizer(state, matrix)
    background = sample_background(standardized, size=args.background_size,
                                   seed=args.seed)
    train_matrix = standardized
    if not args.no_smote:
        train_matrix = smote_nc(standardized, SmoteConfig(k=args.smote_k,
                                                          seed=args.seed)).matrix

    params = dict(_parse_param(p) for p in args.param or [])
    metrics = None
    if args.search_space:
        space = _load_search_space(args.search_space)
        result = grid_search(args.family, space, train_matrix, k=args.cv_folds,
                             seed=args.seed, base_params=params)
        params.update(result.best_params)
        metrics = {"cv_auc_mean": result.best_cv.mean.auc,
                   "cv_auc_std": result.best_cv.std.auc,
                   "cv_folds": result.best_cv.k}
        best = ", ".join(f"{k}={v}" for k, v in result.best_params.items())
        print(f"search selected: {best}")

    config = make_family_config(args.family, params, seed=args.seed)
    model = train_family(args.family, train_matrix, config, seed=args.seed)
    trained = TrainedModel(family=args.family, model=model, schema=table.schema,
                           columns=matrix.columns, standardizer=state,
                           bmi_regression=None, background=background.rows,
                           metrics=metrics)
    out = Path(args.out_model)
    save_model(trained, out)
    _write_manifest(out, "train",
                    {"in": args.input, "family": args.family, "seed": args.seed,
                     "params": {k: list(v) if isinstance(v, tuple) else v
                                for k, v in params.items()},
                     "smote": not args.no_smote},
                    [Path(args.input)])
    print(f"trained {args.family} on {train_matrix.n_rows} rows -> {out}")
    return 0


def cmd_evaluate(args) -> int:
    table = load_cohort(args.input)
    matrix = encode(table)
    families = tuple(args.families.split(","))
    search_spaces = _load_search_space(args.search_space) if args.search_space else None
    config = TrialRunConfig(
        families=families, n_trials=args.trials, base_seed=args.seed,
        test_fraction=args.test_fraction,
        smote=None if args.no_smote else SmoteConfig(k=args.smote_k, seed=args.seed),
        search_spaces=search_spaces)
    report = run_trials(matrix, config)
    out = Path(args.report_out)
    out.write_text(report.to_csv(), encoding="utf-8")
    _write_manifest(out, "evaluate",
                    {"in": args.input, "families": args.families,
                     "trials": args.trials, "seed": args.seed,
                     "test_fraction": args.test_fraction,
                     "smote": not args.no_smote},
                    [Path(args.input)])
    print(report.to_text())
    print(f"report written to {out}")
    return 0


def _bar(phi: float, max_abs: float, width: int = 30) -> str:
    length = 0 if max_abs == 0 else max(1, round(abs(phi) / max_abs * width))
    return ("+" if phi > 0 else "-") * length


def _print_explanation(tag: str, bundle) -> None:
    force = bundle.force
    print(f"[{tag}] base={force.base:.4f} prediction={force.prediction:.4f} "
          f"mode={force.mode} tolerance={force.tolerance:.4g}")
    arrows = force.arrows
    max_abs = max((abs(a.phi) for a in arrows), default=0.0)
    for arrow in arrows:
        raw = f"{arrow.raw_value:g}" if isinstance(arrow.raw_value, float) \
            else str(arrow.raw_value)
        print(f"  {arrow.feature:>24} = {raw:>10}  {arrow.phi:+.4f} "
              f"{_bar(arrow.phi, max_abs)}")
    if bundle.decision_path is not None:
        rules = " AND ".join(bundle.decision_path.rules()) or "(single leaf)"
        print(f"  decision path: {rules} -> p={bundle.decision_path.leaf_probability:.3f}")
    if bundle.neighbors is not None:
        print(f"  neighbors: {bundle.neighbors.vote_summary} "
              f"-> p={bundle.neighbors.probability:.3f}")


def _importance_for(trained: TrainedModel, cohort_matrix, args):
    if trained.family == "logistic":
        return lr_coefficients(trained.model, trained.columns)
    if trained.family in ("tree", "forest"):
        if trained.family == "tree":
            return gini_importance(trained.model, trained.columns)
        rows = cohort_matrix.values[:args.sample]
        return shap_importance(trained.model, rows, trained.background,
                               trained.columns, seed=args.seed)
    if trained.family == "mlp":
        rows = cohort_matrix.values[:args.sample]
        return shap_importance(trained.model, rows, trained.background,
                               trained.columns, repeats=args.repeats,
                               n_permutations=args.n_permutations, seed=args.seed)
    return None  # knn has no intrinsic importance; it borrows forest weights


def cmd_explain(args) -> int:
    models = [load_model(path) for path in args.model]
    table = load_cohort(args.cohort) if args.cohort else None

    if args.importance:
        if table is None:
            raise ConfigError("--importance requires --cohort for sample rows")
        matrix = encode(table)
        standardized = apply_standardizer(models[0].standardizer, matrix)
        rankings = []
        for trained in models:
            ranking = _importance_for(trained, standardized, args)
            if ranking is None:
                print(f"note: {trained.family} omitted (no intrinsic importance)")
                continue
            rankings.append(ranking)
            print(f"[{trained.family}] top {args.top} by |importance| ({ranking.method}):")
            for entry in ranking.entries[:args.top]:
                print(f"  {entry.name:>24}  {entry.value:+.4f}")
        if len(rankings) >= 2:
            comparison = compare_top_features(rankings, n=args.top)
            print("intersection of top features:",
                  ", ".join(comparison.intersection) or "(empty)")
        return 0

    features = _population_record()
    if args.row_index is not None:
        if table is None:
            raise ConfigError("--row-index requires --cohort")
        if not 0 <= args.row_index < len(table):
            raise ConfigError(f"row index {args.row_index} out of range "
                              f"(cohort has {len(table)} records)")
        features = dict(table.records[args.row_index].values)
    schema = models[0].schema
    for override in args.set or []:
        key, value = _parse_param(override)
        if key not in schema:
            raise ConfigError(f"unknown feature {key!r} in --set")
        if schema.spec(key).kind == CATEGORICAL:
            if value not in schema.spec(key).categories:
                raise ConfigError(f"invalid category {value!r} for {key!r}")
            features[key] = value
        else:
            features[key] = float(value)

    documents = {}
    for path, trained in zip(args.model, models):
        tag = Path(path).stem
        bundle = explain_record(trained, features, mode=args.mode,
                                n_permutations=args.n_permutations, seed=args.seed)
        _print_explanation(tag, bundle)
        documents[tag] = bundle.force.to_json()
    if args.json_out:
        Path(args.json_out).write_text(json.dumps(documents, indent=2),
                                       encoding="utf-8")
        print(f"force-plot data written to {args.json_out}")
    return 0


def cmd_serve(args) -> int:
    host, _, port_text = args.bind.rpartition(":")
    host = host or "127.0.0.1"
    port = int(port_text)
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        probe.bind((host, port))
    except OSError as exc:
        print(f"cannot bind {host}:{port}: {exc}", file=sys.stderr)
        return 1
    finally:
        probe.close()

    registry = load_registry(args.model_dir, background_size=args.background_size)
    if not registry.entries:
        print(f"warning: no model artifacts found in {args.model_dir}; "
              "registry is empty", file=sys.stderr)
    app = create_app(registry, allow_origin=args.allow_origin, ui_dir=args.ui_dir)
    import uvicorn
    uvicorn.run(app, host=host, port=port, log_level="info")
    return 0


def cmd_demo(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    raw = out_dir / "cohort.csv"
    clean = out_dir / "cohort.clean.csv"
    print(f"== generate {args.n} records")
    cmd_generate(argparse.Namespace(n=args.n, prevalence=0.076, seed=args.seed,
                                    missing_height_rate=0.08, missing_weight_rate=0.02,
                                    outliers=0, out=str(raw)))
    print("== preprocess")
    cmd_preprocess(argparse.Namespace(input=str(raw), out=str(clean),
                                      paper_coefficients=False))
    for family in ("logistic", "tree"):
        print(f"== train {family}")
        cmd_train(argparse.Namespace(
            input=str(clean), family=family, seed=args.seed,
            out_model=str(out_dir / f"{family}.json"), param=[],
            search_space=None, no_smote=False, smote_k=5,
            background_size=100, cv_folds=5))
    print("== evaluate")
    cmd_evaluate(argparse.Namespace(
        input=str(clean), families="logistic,tree", trials=args.trials,
        seed=args.seed, report_out=str(out_dir / "report.csv"),
        search_space=None, no_smote=False, smote_k=5, test_fraction=0.25))
    print("== explain record 0")
    cmd_explain(argparse.Namespace(
        model=[str(out_dir / "logistic.json"), str(out_dir / "tree.json")],
        cohort=str(clean), row_index=0, set=[], mode="auto", n_permutations=100,
        seed=args.seed, importance=False, top=5, sample=20, repeats=5,
        json_out=str(out_dir / "explanation.json")))
    print(f"demo artifacts in {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(
        prog="icurisk",
        description="Interpretable 28-day post-ICU-discharge mortality toolkit. "
                    "Pipeline order: generate -> preprocess (drop-missing, impute "
                    "heights, 3-sigma filter) -> train -> evaluate -> explain -> serve. "
                    "An optional --config JSON file supplies per-subcommand flag "
                    "defaults; explicit flags win.")
    parser.add_argument("--config", help="JSON file: subcommand -> flag defaults")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    g = sub.add_parser("generate", help="write a seeded synthetic cohort CSV")
    g.add_argument("--n", type=int, default=None,
                   help="record count (required here or via --config)")
    g.add_argument("--prevalence", type=float, default=0.076)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--missing-height-rate", type=float, default=0.08)
    g.add_argument("--missing-weight-rate", type=float, default=0.02)
    g.add_argument("--outliers", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    p = sub.add_parser("preprocess",
                       help="drop-missing, impute heights, 3-sigma filter")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--paper-coefficients", action="store_true",
                   help="impute with the published regression "
                        "(bmi = 5.6925 + 0.2769 * weight) instead of fitting")
    p.set_defaults(func=cmd_preprocess)

    t = sub.add_parser("train", help="train one model family on a cohort")
    t.add_argument("--in", dest="input", required=True)
    t.add_argument("--family", required=True, choices=FAMILIES)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--param", action="append", metavar="KEY=VALUE",
                   help="hyperparameter override, repeatable")
    t.add_argument("--search-space", help="JSON file of per-parameter value lists")
    t.add_argument("--cv-folds", type=int, default=5)
    t.add_argument("--no-smote", action="store_true")
    t.add_argument("--smote-k", type=int, default=5)
    t.add_argument("--background-size", type=int, default=100)
    t.add_argument("--out-model", required=True)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="repeated-trial benchmark, report as CSV")
    e.add_argument("--in", dest="input", required=True)
    e.add_argument("--families", default=",".join(FAMILIES))
    e.add_argument("--trials", type=int, default=30)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--test-fraction", type=float, default=0.25)
    e.add_argument("--no-smote", action="store_true")
    e.add_argument("--smote-k", type=int, default=5)
    e.add_argument("--search-space",
                   help="JSON file: family -> per-parameter value lists")
    e.add_argument("--report-out", required=True)
    e.set_defaults(func=cmd_evaluate)

    x = sub.add_parser("explain", help="force plot, decision path, neighbors, "
                                       "or cross-model importance")
    x.add_argument("--model", action="append", required=True,
                   help="model artifact path, repeatable")
    x.add_argument("--cohort")
    x.add_argument("--row-index", type=int)
    x.add_argument("--set", action="append", metavar="FEATURE=VALUE",
                   help="feature override, repeatable")
    x.add_argument("--mode", default="auto",
                   choices=("auto", "exact", "sampled", "tree"))
    x.add_argument("--n-permutations", type=int, default=200)
    x.add_argument("--seed", type=int, default=0)
    x.add_argument("--importance", action="store_true",
                   help="print per-model rankings and their intersection")
    x.add_argument("--top", type=int, default=5)
    x.add_argument("--sample", type=int, default=30,
                   help="rows used for sampled importance")
    x.add_argument("--repeats", type=int, default=5)
    x.add_argument("--json-out", help="also dump force-plot documents as JSON")
    x.set_defaults(func=cmd_explain)

    s = sub.add_parser("serve", help="serve the model registry over HTTP")
    s.add_argument("--model-dir", required=True)
    s.add_argument("--bind", default="127.0.0.1:8000")
    s.add_argument("--background-size", type=int, default=100)
    s.add_argument("--allow-origin")
    s.add_argument("--ui-dir")
    s.set_defaults(func=cmd_serve)

    d = sub.add_parser("demo", help="run the full chain on a small cohort")
    d.add_argument("--out-dir", required=True)
    d.add_argument("--n", type=int, default=1200)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--trials", type=int, default=3)
    d.set_defaults(func=cmd_demo)

    subparsers = {"generate": g, "preprocess": p, "train": t, "evaluate": e,
                  "explain": x, "serve": s, "demo": d}
    return parser, subparsers


def _apply_config_defaults(argv: list[str], subparsers: dict) -> None:
    """Install per-subcommand defaults from the --config JSON, if given."""
    path = None
    for i, token in enumerate(argv):
        if token == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif token.startswith("--config="):
            path = token.split("=", 1)[1]
    if path is None:
        return
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, dict):
        raise ConfigError("config file must hold a JSON object keyed by subcommand")
    for subcommand, section in doc.items():
        sub = subparsers.get(subcommand)
        if sub is None or not isinstance(section, dict):
            raise ConfigError(f"config has unknown subcommand section {subcommand!r}")
        sub.set_defaults(**{key.replace("-", "_"): value
                            for key, value in section.items()})


def main(argv=None) -> int:
    parser, subparsers = build_parser()
    if argv is None:
        argv = sys.argv[1:]
    try:
        _apply_config_defaults(list(argv), subparsers)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except IcuRiskError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
