"""Pipeline stages behind the CLI: ingest, preprocess, select, tune, train,
evaluate, explain, report, and the chained `all`.

Each stage reads its inputs from the run directory (verifying recorded
digests), writes its outputs under tables/ checkpoints/ plots/, and updates
the manifest atomically. Stage outputs are deterministic for a fixed
(config, seed); wall-clock data lives in the manifest's volatile block.
"""

from __future__ import annotations

import csv
import time
from pathlib import Path

import numpy as np

from . import dataset as ds_mod
from . import featsel, metrics, preprocess, report, tune
from .checkpoint import load_checkpoint
from .config import RunConfig
from .errors import ConfigError, LucidtabError, StageError
from .explain import BackgroundSet, LimeConfig, global_mean_abs_shap, lime_explain, permutation_importance
from .manifest import STAGE_ORDER, Manifest, atomic_write_text, sha256_file
from .rng import derive_seed, derived_rng

PLAUSIBLE_TOP_FEATURES = {"perimeter_worst", "perimeter_mean", "texture_worst", "texture_mean", "radius_worst"}


# -- dataset snapshots ------------------------------------------------------


def _write_dataset_csv(path: Path, d: ds_mod.Dataset) -> None:
    header = ["id", "diagnosis", "label"] + list(d.feature_names)
    rows = []
    for i, rec in enumerate(d.records):
        rows.append(
            [rec.id, rec.label or "", int(d.labels[i])] + [repr(float(v)) for v in rec.features]
        )
    report.write_csv(path, header, rows)


def _read_dataset_csv(path: Path) -> ds_mod.Dataset:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        feature_names = header[3:]
        records, labels = [], []
        for row in reader:
            records.append(
                ds_mod.Record(
                    id=row[0],
                    features=np.array([float(v) for v in row[3:]], dtype=np.float64),
                    label=row[1] or None,
                )
            )
            labels.append(int(row[2]))
    return ds_mod.Dataset(records=records, feature_names=feature_names, labels=np.array(labels, dtype=np.int64))


def _select_columns(d: ds_mod.Dataset, names: list[str]) -> ds_mod.Dataset:
    idx = [d.feature_names.index(n) for n in names]
    return d.replace_features(d.X[:, idx], list(names))


def _tables(run_dir: Path) -> Path:
    return run_dir / "tables"


# -- stages -----------------------------------------------------------------


def stage_ingest(cfg: RunConfig, run_dir: Path, manifest: Manifest) -> list[str]:
    src = Path(cfg.get("run", "dataset"))
    kept, missing = ds_mod.load_csv(src)
    raw, _ = ds_mod.load_csv(src, drop_missing=False)
    encoded = ds_mod.encode_labels(kept)

    _write_dataset_csv(_tables(run_dir) / "ingested.csv", encoded)
    report.write_csv(
        _tables(run_dir) / "missing_report.csv",
        ["column", "missing_cells"],
        [[name, count] for name, count in missing.items()],
    )

    manifest.doc["dataset"] = {
        "path": str(src),
        "digest": sha256_file(src),
        "n_records": len(encoded),
        "n_rows_dropped": len(raw) - len(kept),
        "class_counts": {"B": int((encoded.y == 0).sum()), "M": int((encoded.y == 1).sum())},
    }
    return ["tables/ingested.csv", "tables/missing_report.csv"]


def stage_preprocess(cfg: RunConfig, run_dir: Path, manifest: Manifest) -> list[str]:
    d = _read_dataset_csv(_tables(run_dir) / "ingested.csv")
    seed = cfg.seed
    ratio = cfg.get_float("run", "split_ratio")
    split_seed = derive_seed(seed, "split")
    train, test, idx = ds_mod.train_test_split(d, ratio, split_seed)

    steps = preprocess.parse_steps(cfg.get("preprocess", "steps"))
    plan = preprocess.fit_plan(train, steps)
    train_p = preprocess.apply_plan(plan, train)
    test_p = preprocess.apply_plan(plan, test)

    _write_dataset_csv(_tables(run_dir) / "train_pre.csv", train_p)
    _write_dataset_csv(_tables(run_dir) / "test_pre.csv", test_p)
    report.write_csv(
        _tables(run_dir) / "split.csv",
        ["row", "partition"],
        [[int(i), "train"] for i in idx.train_idx] + [[int(i), "test"] for i in idx.test_idx],
    )
    report.write_csv(
        _tables(run_dir) / "class_balance.csv",
        ["partition", "class_0", "class_1"],
        [
            ["train", int((train.y == 0).sum()), int((train.y == 1).sum())],
            ["test", int((test.y == 0).sum()), int((test.y == 1).sum())],
        ],
    )
    report.write_csv(
        _tables(run_dir) / "preprocess_plan.csv",
        ["column", "statistic", "value"],
        [["", "plan_format_version", "1"]] + [[c, s, repr(v)] for c, s, v in plan.to_rows()],
    )
    manifest.doc["seeds"]["split"] = split_seed
    manifest.doc["split"] = {
        "ratio": ratio,
        "n_train": len(train),
        "n_test": len(test),
        "train_class_counts": [int((train.y == 0).sum()), int((train.y == 1).sum())],
        "test_class_counts": [int((test.y == 0).sum()), int((test.y == 1).sum())],
    }
    return [
        "tables/train_pre.csv",
        "tables/test_pre.csv",
        "tables/split.csv",
        "tables/class_balance.csv",
        "tables/preprocess_plan.csv",
    ]


def stage_select(cfg: RunConfig, run_dir: Path, manifest: Manifest) -> list[str]:
    train = _read_dataset_csv(_tables(run_dir) / "train_pre.csv")
    k = cfg.get_int("select", "n_features")
    method = cfg.get("select", "method")

    chi_scores, chi_selected = featsel.chi2_select(train, k)
    report.write_csv(
        _tables(run_dir) / "chi2_scores.csv",
        ["feature", "score", "rank"],
        [[fs.name, repr(fs.score), fs.rank] for fs in chi_scores],
    )

    rfe_scores = featsel.rfe(train, k)
    report.write_csv(
        _tables(run_dir) / "rfe_ranks.csv",
        ["feature", "score", "rank"],
        [[fs.name, repr(fs.score), fs.rank] for fs in rfe_scores],
    )

    pca = featsel.pca_fit(train.X)
    report.write_csv(
        _tables(run_dir) / "pca_explained.csv",
        ["component", "eigenvalue", "explained_variance_ratio"],
        [
            [i + 1, repr(float(ev)), repr(float(r))]
            for i, (ev, r) in enumerate(zip(pca.eigenvalues, pca.explained_variance_ratio))
        ],
    )

    label_corr = []
    y = train.y.astype(np.float64)
    for j, name in enumerate(train.feature_names):
        try:
            r = featsel.pearson_corr(train.X[:, j], y)
        except LucidtabError:
            r = float("nan")
        label_corr.append([name, repr(r)])
    report.write_csv(_tables(run_dir) / "pearson_label_corr.csv", ["feature", "r"], label_corr)

    if method == "rfe":
        selected = [fs.name for fs in rfe_scores if fs.rank == 1]
    elif method == "chi2":
        selected = chi_selected
    else:
        selected = list(train.feature_names)
    report.write_csv(_tables(run_dir) / "selected_features.csv", ["feature"], [[n] for n in selected])

    manifest.doc["selected_features"] = selected
    manifest.doc["select"] = {"method": method, "n_features": k}
    return [
        "tables/chi2_scores.csv",
        "tables/rfe_ranks.csv",
        "tables/pca_explained.csv",
        "tables/pearson_label_corr.csv",
        "tables/selected_features.csv",
    ]


def _train_settings(cfg: RunConfig) -> tune.TrainSettings:
    return tune.TrainSettings(
        epochs=cfg.get_int("train", "epochs"),
        batch_size=cfg.get_int("train", "batch_size"),
        patience=cfg.get_int("train", "patience"),
        min_delta=cfg.get_float("train", "min_delta"),
        val_fraction=cfg.get_float("train", "val_fraction"),
        l1=cfg.get_float("train", "l1"),
        l2=cfg.get_float("train", "l2"),
    )


def _selected_train_test(run_dir: Path, manifest: Manifest) -> tuple[ds_mod.Dataset, ds_mod.Dataset]:
    selected = manifest.doc["selected_features"]
    train = _select_columns(_read_dataset_csv(_tables(run_dir) / "train_pre.csv"), selected)
    test = _select_columns(_read_dataset_csv(_tables(run_dir) / "test_pre.csv"), selected)
    return train, test


def _search_csv(path: Path, results: list[tune.CvResult], fields: tuple[str, ...], k: int) -> None:
    header = ["rank"] + list(fields) + [f"fold{i + 1}" for i in range(k)] + ["mean", "std", "failed"]
    rows = []
    for rank, res in enumerate(results, start=1):
        folds = [repr(float(s)) for s in res.fold_scores] + [""] * (k - len(res.fold_scores))
        rows.append(
            [rank]
            + [res.params[f] for f in fields]
            + folds
            + [repr(res.mean) if np.isfinite(res.mean) else "failed", repr(res.std), int(res.failed)]
        )
    report.write_csv(path, header, rows)


def stage_tune(cfg: RunConfig, run_dir: Path, manifest: Manifest) -> list[str]:
    train, _ = _selected_train_test(run_dir, manifest)
    seed = cfg.seed
    k = cfg.get_int("search", "folds")
    settings = _train_settings(cfg)
    method = cfg.get("search", "method")
    kinds = cfg.get_list("search", "model_kinds")

    artifacts = []
    search_summary = {}
    best = None
    for kind in kinds:
        grid = cfg.grid(kind)
        if method == "grid":
            results = tune.grid_search(train, grid, seed=seed, k=k, settings=settings)
        else:
            results = tune.random_search(
                train, grid, n_iter=cfg.get_int("search", "n_iter"), seed=seed, k=k, settings=settings
            )
        rel = f"tables/search_{kind}.csv"
        _search_csv(run_dir / rel, results, grid.fields, k)
        artifacts.append(rel)
        top = results[0]
        search_summary[kind] = {
            "method": method,
            "n_candidates": len(results),
            "grid_size": grid.size(),
            "best_params": {key: top.params[key] for key in sorted(top.params)},
            "best_mean": top.mean,
            "best_std": top.std,
            "fold_scores": top.fold_scores,
        }
        if top.failed:
            raise StageError(f"every {kind} candidate failed during search")
        if best is None or top.mean > best[1].mean:
            best = (kind, top)

    manifest.doc["search"] = search_summary
    manifest.doc["best"] = {
        "kind": best[0],
        "params": {key: best[1].params[key] for key in sorted(best[1].params)},
        "cv_mean": best[1].mean,
        "cv_std": best[1].std,
    }
    manifest.doc["seeds"]["cv_folds"] = derive_seed(seed, "cv-folds")
    return artifacts


def stage_train(cfg: RunConfig, run_dir: Path, manifest: Manifest) -> list[str]:
    train, _ = _selected_train_test(run_dir, manifest)
    best = manifest.doc["best"]
    settings = _train_settings(cfg)
    ckpt_rel = "checkpoints/model.ltck"
    net, history = tune.train_final(
        train,
        best["kind"],
        best["params"],
        settings=settings,
        seed=cfg.seed,
        checkpoint_path=run_dir / ckpt_rel,
    )
    report.write_csv(
        _tables(run_dir) / "train_history.csv",
        ["epoch", "train_loss", "val_accuracy", "checkpointed"],
        [
            [e["epoch"], repr(e["train_loss"]), repr(e["val_accuracy"]), int(e["checkpointed"])]
            for e in history.epochs
        ],
    )
    manifest.doc["train"] = {
        "best_epoch": history.best_epoch,
        "best_val_accuracy": history.best_metric,
        "stopped_early": history.stopped_early,
        "epochs_run": len(history.epochs),
        "monitor": {"metric": "val_accuracy", "min_delta": settings.min_delta, "patience": settings.patience},
    }
    manifest.doc["seeds"]["final_init"] = derive_seed(cfg.seed, "final-init")
    manifest.doc["seeds"]["final_fit"] = derive_seed(cfg.seed, "final-fit")
    return [ckpt_rel, "tables/train_history.csv"]


def stage_evaluate(cfg: RunConfig, run_dir: Path, manifest: Manifest) -> list[str]:
    _, test = _selected_train_test(run_dir, manifest)
    net, _ = load_checkpoint(run_dir / "checkpoints/model.ltck")
    probs = net.predict_proba(test.X)
    pred = (probs >= 0.5).astype(np.int64)

    cm = metrics.confusion(test.y, pred)
    precision, recall, f1, accuracy = metrics.precision_recall_f1_accuracy(cm)
    roc = metrics.roc_curve(test.y, probs)
    cls_report = metrics.classification_report(test.y, pred)

    t = _tables(run_dir)
    report.write_csv(
        t / "metrics.csv",
        ["metric", "value"],
        [
            ["accuracy", repr(accuracy)],
            ["precision", repr(precision)],
            ["recall", repr(recall)],
            ["f1", repr(f1)],
            ["roc_auc", repr(roc.auc)],
        ],
    )
    report.write_csv(
        t / "confusion.csv",
        ["", "pred_0", "pred_1"],
        [["true_0", cm.tn, cm.fp], ["true_1", cm.fn, cm.tp]],
    )
    report.write_csv(
        t / "roc_points.csv",
        ["fpr", "tpr", "threshold"],
        [[repr(float(a)), repr(float(b)), repr(float(c))] for a, b, c in zip(roc.fpr, roc.tpr, roc.thresholds)],
    )
    rep_rows = []
    for label, m in (("0", cls_report.per_class[0]), ("1", cls_report.per_class[1]),
                     ("macro_avg", cls_report.macro), ("weighted_avg", cls_report.weighted)):
        rep_rows.append([label, repr(m.precision), repr(m.recall), repr(m.f1), m.support])
    report.write_csv(t / "classification_report.csv", ["class", "precision", "recall", "f1", "support"], rep_rows)
    atomic_write_text(t / "classification_report.txt", metrics.render_report(cls_report) + "\n")

    manifest.doc["metrics"] = {
        "accuracy": accuracy,
        "precision": precision,
        "recall": recall,
        "f1": f1,
        "roc_auc": roc.auc,
        "confusion": {"tn": cm.tn, "fp": cm.fp, "fn": cm.fn, "tp": cm.tp},
    }
    manifest.doc["classification_report"] = {
        label: {
            "precision": m.precision,
            "recall": m.recall,
            "f1": m.f1,
            "support": m.support,
        }
        for label, m in (
            ("0", cls_report.per_class[0]),
            ("1", cls_report.per_class[1]),
            ("macro_avg", cls_report.macro),
            ("weighted_avg", cls_report.weighted),
        )
    }
    return [
        "tables/metrics.csv",
        "tables/confusion.csv",
        "tables/roc_points.csv",
        "tables/classification_report.csv",
        "tables/classification_report.txt",
    ]


def stage_explain(cfg: RunConfig, run_dir: Path, manifest: Manifest) -> list[str]:
    train, test = _selected_train_test(run_dir, manifest)
    net, _ = load_checkpoint(run_dir / "checkpoints/model.ltck")
    model = net.predict_proba
    names = list(train.feature_names)
    seed = cfg.seed

    bg_seed = derive_seed(seed, "background-base")
    bg = BackgroundSet.sample(train.X, cfg.get_int("explain", "n_background"), bg_seed)

    n_instances = min(cfg.get_int("explain", "n_instances"), len(test))
    pick = np.sort(derived_rng(seed, "explain-instances").choice(len(test), size=n_instances, replace=False))
    X_sample = test.X[pick]

    method = cfg.get("explain", "method")
    subset = None
    if method == "exact":
        # exact enumeration runs on a user-selected subset; everything else
        # stays pinned at the instance values
        wanted = cfg.get_list("explain", "exact_features")
        unknown = [n for n in wanted if n not in names]
        if unknown:
            raise ConfigError(f"explain.exact_features not in the selected feature set: {unknown}")
        if not wanted and len(names) > 20:
            raise ConfigError(
                "explain.method=exact enumerates 2^n coalitions and is capped at 20 features; "
                "set explain.exact_features or use the kernel estimator"
            )
        if wanted:
            subset = [names.index(n) for n in wanted]
    shap_scores = global_mean_abs_shap(
        model,
        X_sample,
        bg,
        method=method,
        seed=derive_seed(seed, "kernel-shap"),
        n_coalitions=cfg.get_int("explain", "n_coalitions"),
        feature_names=names,
        feature_subset=subset,
    )
    t = _tables(run_dir)
    report.write_csv(
        t / "shap_global.csv",
        ["feature", "mean_abs_phi", "rank"],
        [[fs.name, repr(fs.score), fs.rank] for fs in shap_scores],
    )

    perm_scores = permutation_importance(
        model,
        test.X,
        test.y,
        metrics.accuracy_metric,
        repeats=cfg.get_int("explain", "permutation_repeats"),
        seed=derive_seed(seed, "permutation"),
        feature_names=names,
    )
    report.write_csv(
        t / "permutation_importance.csv",
        ["feature", "mean_score_drop", "rank"],
        [[fs.name, repr(fs.score), fs.rank] for fs in perm_scores],
    )

    width_raw = cfg.get("explain", "lime_kernel_width")
    lime_cfg = LimeConfig(
        n_samples=cfg.get_int("explain", "lime_samples"),
        kernel_width=None if width_raw == "auto" else float(width_raw),
        max_features=cfg.get_int("explain", "lime_max_features"),
        ridge=cfg.get_float("explain", "lime_ridge"),
    )
    scales = train.X.std(axis=0)
    scales[scales == 0] = 1.0
    lime_artifacts = []
    lime_text_parts = []
    lime_predicted = []
    n_lime = min(cfg.get_int("explain", "lime_instances"), len(pick))
    for k in range(n_lime):
        row = X_sample[k]
        res = lime_explain(model, row, scales, lime_cfg, seed=derive_seed(seed, "lime", k), feature_names=names)
        rel = f"tables/lime_instance_{k}.csv"
        report.write_csv(
            run_dir / rel,
            ["feature", "contribution"],
            [[n, repr(float(v))] for n, v in zip(res.attribution.feature_names, res.attribution.phi)],
        )
        lime_artifacts.append(rel)
        lime_predicted.append(res.attribution.predicted)
        lime_text_parts.append(
            report.lime_text_report(
                names, res.attribution.phi, res.attribution.predicted, res.fidelity, test.records[pick[k]].id
            )
        )
    atomic_write_text(t / "lime_report.txt", "\n".join(lime_text_parts))

    top3 = [fs.name for fs in shap_scores[:3]]
    plausible = bool(set(top3) & PLAUSIBLE_TOP_FEATURES)
    if not plausible:
        atomic_write_text(
            t / "plausibility_warning.txt",
            "WARNING: none of the expected high-importance features "
            f"({', '.join(sorted(PLAUSIBLE_TOP_FEATURES))}) appear in the attribution top 3: {top3}.\n"
            "Review the attribution outputs manually.\n",
        )
    manifest.doc["explain"] = {
        "method": method,
        "n_background": len(bg),
        "instances": [int(i) for i in pick],
        "lime_predicted": lime_predicted,
        "top_features": top3,
        "plausible": plausible,
    }
    manifest.doc["seeds"]["background"] = bg_seed
    artifacts = ["tables/shap_global.csv", "tables/permutation_importance.csv", "tables/lime_report.txt"]
    artifacts.extend(lime_artifacts)
    if not plausible:
        artifacts.append("tables/plausibility_warning.txt")
    return artifacts


def stage_report(cfg: RunConfig, run_dir: Path, manifest: Manifest) -> list[str]:
    t = _tables(run_dir)
    plots = run_dir / "plots"
    artifacts = []

    full = _read_dataset_csv(t / "ingested.csv")
    report.histogram_grid(full.X, full.feature_names, plots / "histogram_grid.svg", plots / "histogram_grid.csv")
    artifacts += ["plots/histogram_grid.svg", "plots/histogram_grid.csv"]

    train_p = _read_dataset_csv(t / "train_pre.csv")
    report.feature_boxplot(train_p.X, train_p.feature_names, plots / "boxplot.svg", plots / "boxplot.csv")
    artifacts += ["plots/boxplot.svg", "plots/boxplot.csv"]

    rfe_path = t / "rfe_ranks.csv"
    if rfe_path.exists():
        with rfe_path.open(newline="") as fh:
            rows = list(csv.reader(fh))[1:]
        report.rfe_heatmap(
            [r[0] for r in rows], [int(r[2]) for r in rows], plots / "rfe_heatmap.svg", plots / "rfe_heatmap.csv"
        )
        artifacts += ["plots/rfe_heatmap.svg", "plots/rfe_heatmap.csv"]

    cm_doc = manifest.doc["metrics"]["confusion"]
    cm = metrics.ConfusionMatrix(tn=cm_doc["tn"], tp=cm_doc["tp"], fp=cm_doc["fp"], fn=cm_doc["fn"])
    report.confusion_heatmap(cm, plots / "confusion_heatmap.svg", plots / "confusion_heatmap.csv")
    artifacts += ["plots/confusion_heatmap.svg", "plots/confusion_heatmap.csv"]

    with (t / "roc_points.csv").open(newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    curve = metrics.RocCurve(
        fpr=np.array([float(r[0]) for r in rows]),
        tpr=np.array([float(r[1]) for r in rows]),
        thresholds=np.array([float(r[2]) for r in rows]),
        auc=manifest.doc["metrics"]["roc_auc"],
    )
    report.roc_plot(curve, plots / "roc.svg", plots / "roc.csv")
    artifacts += ["plots/roc.svg", "plots/roc.csv"]

    shap_path = t / "shap_global.csv"
    if shap_path.exists():
        with shap_path.open(newline="") as fh:
            rows = list(csv.reader(fh))[1:]
        report.shap_bar(
            [r[0] for r in rows],
            [float(r[1]) for r in rows],
            plots / "shap_bar.svg",
            plots / "shap_bar.csv",
        )
        artifacts += ["plots/shap_bar.svg", "plots/shap_bar.csv"]

    lime_path = t / "lime_instance_0.csv"
    if lime_path.exists():
        with lime_path.open(newline="") as fh:
            rows = list(csv.reader(fh))[1:]
        lime_preds = manifest.doc.get("explain", {}).get("lime_predicted", [])
        predicted = lime_preds[0] if lime_preds else 0.0
        report.lime_bar(
            [r[0] for r in rows],
            [float(r[1]) for r in rows],
            predicted,
            plots / "lime_report.svg",
            plots / "lime_report.csv",
        )
        artifacts += ["plots/lime_report.svg", "plots/lime_report.csv"]

    return artifacts


_STAGE_FUNCS = {
    "ingest": stage_ingest,
    "preprocess": stage_preprocess,
    "select": stage_select,
    "tune": stage_tune,
    "train": stage_train,
    "evaluate": stage_evaluate,
    "explain": stage_explain,
    "report": stage_report,
}


def run_stage(stage: str, cfg: RunConfig, run_dir: str | Path) -> Manifest:
    """Run one stage (or 'all'), enforcing prerequisites and updating the
    manifest. Raises the underlying error after recording the failure."""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    stages = STAGE_ORDER if stage == "all" else [stage]
    manifest = Manifest.load_or_create(run_dir)
    manifest.doc["config"] = dict(cfg.flat)
    manifest.doc["config_hash"] = cfg.config_hash()
    manifest.doc["seed"] = cfg.seed

    for name in stages:
        if name not in _STAGE_FUNCS:
            raise ConfigError(f"unknown stage {name!r}; valid: {', '.join(STAGE_ORDER + ['all'])}")
        manifest.require_stage(name)
        started = time.perf_counter()
        try:
            artifacts = _STAGE_FUNCS[name](cfg, run_dir, manifest)
        except LucidtabError as exc:
            manifest.stage_failed(name, str(exc), time.perf_counter() - started)
            manifest.write()
            raise
        manifest.stage_ok(name, time.perf_counter() - started, artifacts)
        manifest.write()
    return manifest
