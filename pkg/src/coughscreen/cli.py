"""Command-line entry point.

Subcommands: extract, train, eval, search, score, project, synth. Every run
echoes its resolved configuration to ``<out>/config.json``; all randomness
derives from ``--seed`` through labeled child streams, so reruns are
byte-reproducible. Logs are JSON lines on stderr; data products go under
``--out`` only.

Exit codes: 0 success, 1 validation error, 2 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import backends as backends_mod
from . import evaluation, metrics, prep, search
from .audio import decode_audio
from .emb1 import write_emb1
from .errors import PipelineError
from .forest import Forest, ForestParams, load_forest, serialize_forest, train_forest
from .rng import child_seed
from .tsne import TsneConfig, export_scatter, tsne, write_kl_history_csv


class _CliValidation(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with code 2
        raise _CliValidation(message)


def _log(event: str, **fields) -> None:
    print(json.dumps({"event": event, **fields}, sort_keys=True), file=sys.stderr)


def _echo_config(out_dir: Path, args: argparse.Namespace) -> None:
    resolved = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(
        json.dumps(resolved, indent=2, sort_keys=True, default=str) + "\n")


def _forest_params(args: argparse.Namespace) -> ForestParams:
    return ForestParams(
        n_estimators=args.n_estimators,
        criterion=args.criterion,
        max_features=args.max_features,
        min_samples_leaf=args.min_samples_leaf,
        min_samples_split=args.min_samples_split,
        bootstrap=args.bootstrap,
        split_mode=args.split_mode,
    )


def _add_forest_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--n-estimators", type=int, default=100)
    parser.add_argument("--criterion", choices=["entropy", "gini"], default="entropy")
    parser.add_argument("--max-features", type=float, default=0.75)
    parser.add_argument("--min-samples-leaf", type=int, default=4)
    parser.add_argument("--min-samples-split", type=int, default=3)
    parser.add_argument("--bootstrap", action="store_true")
    parser.add_argument("--split-mode", choices=["random", "best"], default="random")


def cmd_synth(args) -> int:
    out = Path(args.out)
    data, splits = evaluation.make_synthetic(
        n=args.n, dim=args.dim, imbalance=args.imbalance,
        separation=args.separation, seed=args.seed)
    out.mkdir(parents=True, exist_ok=True)
    prep.write_manifest(out / "manifest.json", data.ids, data.labels, data.features)
    evaluation.write_fold_files(out / "folds", splits)
    _echo_config(out, args)
    _log("synth", n=data.n, dim=data.dim, out=str(out))
    return 0


def cmd_train(args) -> int:
    out = Path(args.out)
    data = prep.load_manifest(args.manifest)
    splits = evaluation.read_fold_files(args.folds, n_folds=args.n_folds)
    params = _forest_params(args)

    print("forest parameters:")
    for key, value in params.to_dict().items():
        if key != "seed":
            print(f"  {key}={value}")

    results = evaluation.run_folds(
        data, splits, params, sensitivity_target=args.sensitivity_target,
        scaler_scope=args.scaler_scope, l2=not args.no_l2,
        seed=args.seed, jobs=args.jobs)

    models_dir = out / "models"
    models_dir.mkdir(parents=True, exist_ok=True)
    model_paths = []
    for res in results:
        path = models_dir / f"fold_{res.fold_index}.model.json"
        path.write_bytes(serialize_forest(res.model))
        model_paths.append(str(path.relative_to(out)))
    evaluation.write_results_json(out / "results.json", results, model_paths)

    if args.refit_with_val:
        # alternative protocol: refit the winning fold's model on train+val
        best = evaluation.select_best_fold(results)
        split = next(s for s in splits if s.fold_index == best.fold_index)
        full = data.subset(split.train_ids + split.val_ids)
        scaler = prep.fit_scaler(full)
        feats = prep.transform_dataset(full, scaler, l2=not args.no_l2)
        refit_params = replace(params, seed=child_seed(
            args.seed, f"refit-fold-{best.fold_index}"))
        refit = train_forest(feats.features, feats.labels, refit_params)
        refit = refit.with_scaler(scaler, l2_normalize=not args.no_l2)
        (models_dir / "best_refit.model.json").write_bytes(serialize_forest(refit))
        _log("refit", fold=best.fold_index)
    _echo_config(out, args)
    for res in results:
        _log("fold", fold=res.fold_index, auc=round(res.auc, 2),
             specificity=round(res.specificity, 2))
    avg = evaluation.average_row(results)
    _log("average", auc=round(avg["auc"], 2), specificity=round(avg["specificity"], 2))
    return 0


def _load_fold_models(models_dir: Path, n_folds: int) -> list[Forest]:
    models = []
    for k in range(1, n_folds + 1):
        path = models_dir / f"fold_{k}.model.json"
        if not path.exists():
            raise _CliValidation(f"missing model file {path}")
        models.append(load_forest(path.read_bytes()))
    return models


def cmd_eval(args) -> int:
    out = Path(args.out)
    data = prep.load_manifest(args.manifest)
    splits = evaluation.read_fold_files(args.folds, n_folds=args.n_folds)
    models = _load_fold_models(Path(args.models), args.n_folds)
    out.mkdir(parents=True, exist_ok=True)

    results = []
    for split, model in zip(splits, models):
        val = data.subset(split.val_ids)
        feats = prep.transform_dataset(val, model.scaler, l2=model.l2_normalize)
        scored = metrics.ScoredSet(
            evaluation.predict_proba_batch(model, feats.features), feats.labels)
        curve = metrics.roc_curve(scored)
        spec, thr = metrics.specificity_at_sensitivity(scored, args.sensitivity_target)
        metrics.write_roc_csv(curve, out / f"roc_fold_{split.fold_index}.csv")
        results.append(evaluation.FoldResult(
            fold_index=split.fold_index, auc=100.0 * curve.auc,
            sensitivity=100.0 * args.sensitivity_target,
            specificity=100.0 * spec, threshold=thr, model=model))
    evaluation.write_results_json(out / "results.json", results)
    best = evaluation.select_best_fold(results)
    _echo_config(out, args)
    _log("eval", best_fold=best.fold_index, best_auc=round(best.auc, 2))
    return 0


def cmd_search(args) -> int:
    out = Path(args.out)
    data = prep.load_manifest(args.manifest)
    splits = evaluation.read_fold_files(args.folds, n_folds=args.n_folds)
    matching = [s for s in splits if s.fold_index == args.fold]
    if not matching:
        raise _CliValidation(f"fold {args.fold} not found under {args.folds}")
    split = matching[0]
    train = data.subset(split.train_ids)
    val = data.subset(split.val_ids)

    cfg = search.SearchConfig(
        generations=args.generations, population=args.population,
        tournament_size=args.tournament_size, crossover_prob=args.crossover_prob,
        mutation_prob=args.mutation_prob, elitism_count=args.elitism,
        objective=args.objective, sensitivity_target=args.sensitivity_target,
        seed=args.seed)
    genome, fitness, log = search.evolve(
        train, val, cfg, jobs=args.jobs, log_timing=not args.no_log_timing)

    out.mkdir(parents=True, exist_ok=True)
    search.write_search_log(out / "search_log.jsonl", log)
    (out / "best_genome.json").write_text(json.dumps({
        "genome": genome.to_dict(),
        "fitness": {"auc": fitness.auc, "spec_at_80": fitness.spec_at_80},
    }, indent=2, sort_keys=True) + "\n")
    _echo_config(out, args)
    _log("search", best_auc=round(fitness.auc, 2),
         best_spec=round(fitness.spec_at_80, 2), evaluations=len(log))
    return 0


def cmd_score(args) -> int:
    out = Path(args.out)
    blind = prep.load_manifest(args.manifest)
    if args.model:
        models = [load_forest(Path(args.model).read_bytes())]
        weights = None
    else:
        models = _load_fold_models(Path(args.models), args.n_folds)
        results = json.loads(Path(args.results).read_text())
        weights = evaluation.ensemble_weights(
            [fold["auc"] for fold in results["folds"]])
    scores = evaluation.score_blind(models, blind, weights)

    out.mkdir(parents=True, exist_ok=True)
    evaluation.write_scores_csv(out / "scores.csv", blind.ids, scores)
    if blind.labels is not None:
        scored = metrics.ScoredSet(scores, blind.labels)
        curve = metrics.roc_curve(scored)
        spec, thr = metrics.specificity_at_sensitivity(scored, args.sensitivity_target)
        metrics.write_summary_json(out / "metrics.json", auc=curve.auc,
                                   sensitivity=args.sensitivity_target,
                                   specificity=spec, threshold=thr)
        _log("score", auc=round(100 * curve.auc, 2), n=blind.n)
    else:
        _log("score", n=blind.n, labels="absent")
    _echo_config(out, args)
    return 0


def cmd_project(args) -> int:
    out = Path(args.out)
    data = prep.load_manifest(args.manifest)
    scaler = prep.fit_scaler(data)
    feats = prep.transform_dataset(data, scaler, l2=True)
    cfg = TsneConfig(perplexity=args.perplexity, iterations=args.iterations,
                     learning_rate=args.learning_rate, seed=args.seed)
    proj = tsne(feats.features, cfg, ids=data.ids, labels=data.labels)
    out.mkdir(parents=True, exist_ok=True)
    export_scatter(proj, out / "scatter.csv")
    write_kl_history_csv(proj, out / "kl_history.csv")
    _echo_config(out, args)
    _log("project", n=data.n, final_kl=proj.kl_history[-1])
    return 0


def _audio_entries(args) -> list[dict]:
    if args.audio_manifest:
        manifest_path = Path(args.audio_manifest)
        entries = json.loads(manifest_path.read_text())
        for entry in entries:
            path = Path(entry["path"])
            entry["path"] = path if path.is_absolute() else manifest_path.parent / path
        return entries
    audio_dir = Path(args.audio_dir)
    paths = sorted([*audio_dir.glob("*.flac"), *audio_dir.glob("*.wav")])
    if not paths:
        raise _CliValidation(f"no .flac or .wav files under {audio_dir}")
    return [{"id": p.stem, "path": p, "label": None} for p in paths]


def cmd_extract(args) -> int:
    out = Path(args.out)
    backend_list = backends_mod.load_backends(args.backends)
    entries = _audio_entries(args)
    features_dir = out / "features"
    features_dir.mkdir(parents=True, exist_ok=True)
    raw_dir = out / "raw"
    if args.raw_embeddings:
        raw_dir.mkdir(parents=True, exist_ok=True)

    def one(entry: dict) -> dict:
        path = Path(entry["path"])
        if not path.exists():
            raise _CliValidation(f"audio file for id {entry['id']!r} not found: {path}")
        clip = decode_audio(path)
        clip = type(clip)(samples=clip.samples, sample_rate=clip.sample_rate,
                          file_id=str(entry["id"]))
        vec, mats = backends_mod.extract_features(backend_list, clip)
        write_emb1(features_dir / f"{entry['id']}.emb", vec.values[None, :])
        if args.raw_embeddings:
            for backend, mat in zip(backend_list, mats):
                write_emb1(raw_dir / f"{entry['id']}.{backend.id}.emb", mat)
        return {"id": str(entry["id"]), "label": entry.get("label"),
                "features": f"features/{entry['id']}.emb"}

    manifest = evaluation.parallel_map(one, entries, jobs=args.jobs)
    (out / "manifest.json").write_text(json.dumps(manifest) + "\n")
    (out / "extraction.json").write_text(json.dumps({
        "backend_order": [{"id": b.id, "output_dim": b.output_dim} for b in backend_list],
        "pooling": "mean-over-seconds",
    }, indent=2, sort_keys=True) + "\n")
    _echo_config(out, args)
    _log("extract", files=len(manifest), dim=sum(b.output_dim for b in backend_list))
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="coughscreen",
                     description="Cough-recording screening pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic labeled dataset")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--dim", type=int, default=20)
    p.add_argument("--imbalance", type=float, default=0.1)
    p.add_argument("--separation", type=float, default=6.0)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train one forest per fold")
    p.add_argument("--manifest", required=True)
    p.add_argument("--folds", required=True)
    p.add_argument("--n-folds", type=int, default=5)
    _add_forest_args(p)
    p.add_argument("--scaler-scope", choices=["train", "all"], default="train")
    p.add_argument("--no-l2", action="store_true")
    p.add_argument("--refit-with-val", action="store_true",
                   help="refit the selected fold's model on train+val before export")
    p.add_argument("--sensitivity-target", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score saved fold models on their validation splits")
    p.add_argument("--manifest", required=True)
    p.add_argument("--folds", required=True)
    p.add_argument("--models", required=True)
    p.add_argument("--n-folds", type=int, default=5)
    p.add_argument("--sensitivity-target", type=float, default=0.8)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("search", help="genetic hyperparameter search on one fold")
    p.add_argument("--manifest", required=True)
    p.add_argument("--folds", required=True)
    p.add_argument("--n-folds", type=int, default=5)
    p.add_argument("--fold", type=int, default=1)
    p.add_argument("--generations", type=int, default=10)
    p.add_argument("--population", type=int, default=20)
    p.add_argument("--tournament-size", type=int, default=3)
    p.add_argument("--crossover-prob", type=float, default=0.9)
    p.add_argument("--mutation-prob", type=float, default=0.1)
    p.add_argument("--elitism", type=int, default=2)
    p.add_argument("--objective", choices=["auc", "spec80", "lex"], default="lex")
    p.add_argument("--sensitivity-target", type=float, default=0.8)
    p.add_argument("--no-log-timing", action="store_true",
                   help="null the train_seconds field for byte-reproducible logs")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("score", help="score blind recordings")
    p.add_argument("--manifest", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--model", help="single model file")
    group.add_argument("--models", help="fold models directory (ensemble mode)")
    p.add_argument("--results", help="results.json with per-fold AUC weights")
    p.add_argument("--n-folds", type=int, default=5)
    p.add_argument("--sensitivity-target", type=float, default=0.8)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("project", help="2-D t-SNE of the prepared features")
    p.add_argument("--manifest", required=True)
    p.add_argument("--perplexity", type=float, default=30.0)
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--learning-rate", type=float, default=200.0)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("extract", help="audio -> pooled embedding features")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--audio-dir")
    group.add_argument("--audio-manifest")
    p.add_argument("--backends", required=True)
    p.add_argument("--raw-embeddings", action="store_true",
                   help="also keep per-second embeddings per backend")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extract)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _CliValidation as exc:
        _log("validation-error", message=str(exc))
        return 1
    except (PipelineError, FileNotFoundError, ValueError) as exc:
        _log("validation-error", message=str(exc), kind=type(exc).__name__)
        return 1
    except Exception as exc:  # noqa: BLE001
        _log("internal-error", message=str(exc), kind=type(exc).__name__)
        return 2


if __name__ == "__main__":
    sys.exit(main())
