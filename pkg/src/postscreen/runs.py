"""Run orchestration behind the service endpoints and the CLI.

Every run resolves its inputs from a RunConfig, writes its artifacts
under config.output_dir, and records a manifest (config hash, seed,
input checksums) sufficient to reproduce the run bitwise. Artifacts
carry no timestamps so identical runs produce identical bytes.
"""

from __future__ import annotations

import csv
import itertools
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .bundle import TaskModels, bundle_payload, load_bundle, save_bundle
from .config import RunConfig, TrainingSection
from .corpus import (
    COARSE_CLASSES,
    FINE_CLASSES,
    POSITIVE_COARSE,
    Corpus,
    LabeledPost,
    detect_delimiter,
    load_dataset,
)
from .ensemble import (
    Disagreement,
    EnsembleSpec,
    ScoredPrediction,
    combine_labels,
    disagreement_report,
    pseudo_label,
    vote,
)
from .errors import ConfigError, DataError
from .evalreport import (
    EvalReport,
    ablation_table,
    confusion,
    per_class_report,
    pooled_confusion,
    render_ablation_text,
    render_report_text,
    weighted_f1,
)
from .featurize import FeatureFlags, Featurizer
from .ioutil import canonical_json, pretty_json, resolve_data_path, sha256_file
from .lexfeat import Lexicon, MetaScaler, load_lexicon, meta_vector
from .model import TrainConfig, train_linear, train_one_vs_all
from .preprocess import (
    TextCleaner,
    load_contractions,
    load_emoji_table,
    load_stopwords,
)
from .vectorize import (
    EmbeddingTable,
    FeatureLayout,
    FeatureVector,
    SparseVector,
    assemble,
    load_embeddings,
    select_entity_terms,
)

log = logging.getLogger(__name__)

ABLATION_COMBOS = (
    (),
    ("m1",),
    ("m2",),
    ("m3",),
    ("m1", "m2"),
    ("m1", "m3"),
    ("m2", "m3"),
    ("m1", "m2", "m3"),
)


# ---------------------------------------------------------------------------
# resolution helpers


def _resolve_optional(value: str | None) -> Path | None:
    return resolve_data_path(value) if value else None


def _require_path(config: RunConfig, name: str) -> Path:
    value = getattr(config.paths, name)
    if not value:
        raise ConfigError(f"config field paths.{name} is required for this run")
    path = resolve_data_path(value)
    if not path.is_file():
        raise ConfigError(f"paths.{name}: file not found: {path}")
    return path


def _load_split(config: RunConfig, split: str) -> Corpus:
    path = _require_path(config, split)
    return load_dataset(path, config.language, config.task, split, config.delimiter)


def _build_cleaner(config: RunConfig) -> TextCleaner:
    contractions_path = _resolve_optional(config.paths.contractions)
    stopwords_path = _resolve_optional(config.paths.stopwords)
    emoji_path = _resolve_optional(config.paths.emoji_ranges)
    return TextCleaner(
        config.language,
        contractions=load_contractions(contractions_path) if contractions_path else None,
        stopwords=(
            load_stopwords(config.language, stopwords_path) if stopwords_path else None
        ),
        emoji_table=load_emoji_table(emoji_path) if emoji_path else None,
    )


def _coarse_labels(config: RunConfig) -> tuple[str, str]:
    positive = config.positive_label or POSITIVE_COARSE[config.task]
    candidates = COARSE_CLASSES[config.task]
    if positive not in candidates:
        raise ConfigError(
            f"positive_label {positive!r} not among coarse classes {list(candidates)}"
        )
    negative = next(c for c in candidates if c != positive)
    return positive, negative


def _train_config(section: TrainingSection, seed: int) -> TrainConfig:
    return TrainConfig(
        loss=section.loss,
        l2=section.l2,
        learning_rate=section.learning_rate,
        epochs=section.epochs,
        seed=seed,
        class_weighting=section.class_weighting,
    )


def _collect_tokens(cleaner: TextCleaner, texts) -> set[str]:
    tokens: set[str] = set()
    for text in texts:
        tokens.update(cleaner.clean(text).tokens)
    return tokens


@dataclass
class _Resources:
    """Resolved external inputs plus their checksum records."""

    cleaner: TextCleaner
    lexicon: Lexicon | None
    embeddings: EmbeddingTable | None
    records: dict[str, dict]


def _gather_resources(
    config: RunConfig,
    need_lexicon: bool,
    need_embeddings: bool,
    restrict_texts=None,
) -> _Resources:
    cleaner = _build_cleaner(config)
    records: dict[str, dict] = {}

    for name in ("contractions", "stopwords", "emoji_ranges"):
        value = getattr(config.paths, name)
        if value:
            path = resolve_data_path(value)
            records[name] = {"path": str(path), "sha256": sha256_file(path), "builtin": False}

    lexicon = None
    if need_lexicon:
        lexicon_path = _resolve_optional(config.paths.lexicon)
        lexicon = load_lexicon(lexicon_path)
        records["lexicon"] = {
            "path": str(lexicon_path) if lexicon_path else None,
            "sha256": sha256_file(lexicon.source),
            "builtin": lexicon_path is None,
        }

    embeddings = None
    if need_embeddings:
        emb_path = _require_path(config, "embeddings")
        restrict = None
        if restrict_texts is not None:
            restrict = _collect_tokens(cleaner, restrict_texts)
        embeddings = load_embeddings(emb_path, restrict=restrict)
        records["embeddings"] = {
            "path": str(emb_path),
            "sha256": sha256_file(emb_path),
            "builtin": False,
        }
    return _Resources(cleaner=cleaner, lexicon=lexicon, embeddings=embeddings, records=records)


def _make_featurizer(
    config: RunConfig,
    res: _Resources,
    flags: FeatureFlags,
    entity_vocab=None,
) -> Featurizer:
    return Featurizer(
        language=config.language,
        flags=flags,
        cleaner=res.cleaner,
        lexicon=res.lexicon,
        embeddings=res.embeddings,
        entity_vocab=entity_vocab,
        tfidf_min_df=config.features.tfidf_min_df,
        substring_match=config.features.substring_match,
    )


def _flags_from_config(config: RunConfig) -> FeatureFlags:
    f = config.features
    if not (f.tfidf or f.embed or f.bow or f.m1 or f.m2 or f.m3):
        raise ConfigError("config enables no feature family at all")
    return FeatureFlags(tfidf=f.tfidf, embed=f.embed, bow=f.bow, m1=f.m1, m2=f.m2, m3=f.m3)


# ---------------------------------------------------------------------------
# training + evaluation core


def _fit_task_models(
    config: RunConfig,
    featurizer: Featurizer,
    train_posts: Sequence[LabeledPost],
    training: TrainingSection,
) -> TaskModels:
    positive, negative = _coarse_labels(config)
    X = featurizer.transform_many(train_posts)
    y = [1 if p.coarse == positive else 0 for p in train_posts]
    coarse = train_linear(X, y, _train_config(training, config.seed))
    fine = None
    if config.task == "hostility":
        fine_section = config.resolved_fine_training()
        fine_section = type(fine_section)(**{
            **fine_section.model_dump(),
            "loss": training.loss,
            "l2": training.l2,
            "learning_rate": training.learning_rate,
            "epochs": training.epochs,
        })
        fine = train_one_vs_all(
            X,
            [p.fine for p in train_posts],
            _train_config(fine_section, config.seed),
            classes=FINE_CLASSES,
            threshold=fine_section.threshold,
        )
    return TaskModels(
        featurizer=featurizer,
        coarse=coarse,
        fine=fine,
        task=config.task,
        positive_label=positive,
        negative_label=negative,
    )


def _evaluate_models(
    models: TaskModels,
    posts: Sequence[LabeledPost],
    split: str,
    run_meta: dict,
) -> dict[str, EvalReport]:
    if not posts:
        raise DataError(f"split {split!r} has no posts to evaluate")
    preds = [models.predict_post(p) for p in posts]
    return _reports_from_predictions(models.task, posts, preds, split, run_meta)


def _reports_from_predictions(
    task: str,
    posts: Sequence[LabeledPost],
    preds: Sequence[ScoredPrediction],
    split: str,
    run_meta: dict,
) -> dict[str, EvalReport]:
    classes = list(COARSE_CLASSES[task])
    y_true = [p.coarse for p in posts]
    y_pred = [pr.coarse for pr in preds]
    coarse_report = EvalReport(
        task=f"{task}:coarse",
        split=split,
        weighted_f1=weighted_f1(y_true, y_pred),
        per_class=per_class_report(y_true, y_pred, classes),
        confusion=confusion(y_true, y_pred, classes).tolist(),
        classes=classes,
        run_meta=dict(run_meta),
    )
    reports = {"coarse": coarse_report}
    if task == "hostility":
        y_true_f = [p.fine for p in posts]
        y_pred_f = [pr.fine for pr in preds]
        rows = per_class_report(y_true_f, y_pred_f, FINE_CLASSES)
        reports["fine"] = EvalReport(
            task=f"{task}:fine",
            split=split,
            weighted_f1=rows[-1].f1,
            per_class=rows,
            confusion=pooled_confusion(y_true_f, y_pred_f, FINE_CLASSES).tolist(),
            classes=["in_class", "not_in_class"],
            run_meta=dict(run_meta),
        )
    return reports


def _write_reports(
    out_dir: Path, reports: dict[str, EvalReport], split: str
) -> list[str]:
    written = []
    for grain, report in reports.items():
        stem = f"report_{split}_{grain}"
        (out_dir / f"{stem}.json").write_text(report.to_json() + "\n", encoding="utf-8")
        (out_dir / f"{stem}.txt").write_text(render_report_text(report), encoding="utf-8")
        written += [f"{stem}.json", f"{stem}.txt"]
    return written


def _write_manifest(
    out_dir: Path,
    command: str,
    config: RunConfig,
    inputs: dict[str, Path | None],
    outputs: list[str],
) -> None:
    manifest = {
        "command": command,
        "config": config.model_dump(mode="json"),
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "inputs": {
            name: {"path": str(path), "sha256": sha256_file(path)}
            for name, path in sorted(inputs.items())
            if path is not None
        },
        "outputs": sorted(set(outputs)),
        "version": __version__,
    }
    (out_dir / "manifest.json").write_text(pretty_json(manifest), encoding="utf-8")


def _out_dir(config: RunConfig) -> Path:
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _grid_candidates(config: RunConfig) -> list[TrainingSection]:
    base = config.training
    lrs = config.grid.learning_rate or [base.learning_rate]
    l2s = config.grid.l2 or [base.l2]
    epochs = config.grid.epochs or [base.epochs]
    out = []
    for lr, l2, ep in itertools.product(lrs, l2s, epochs):
        out.append(
            TrainingSection(**{
                **base.model_dump(),
                "learning_rate": lr,
                "l2": l2,
                "epochs": ep,
            })
        )
    return out


# ---------------------------------------------------------------------------
# train


@dataclass
class TrainResult:
    model_path: str
    reports: dict[str, EvalReport]
    grid_log: list[dict]
    entity_vocab_size: int | None
    pseudo_added: int | None
    output_dir: str

    def summary(self) -> dict:
        return {
            "model_path": self.model_path,
            "output_dir": self.output_dir,
            "reports": {g: r.to_json_dict() for g, r in self.reports.items()},
            "grid_log": self.grid_log,
            "entity_vocab_size": self.entity_vocab_size,
            "pseudo_added": self.pseudo_added,
        }


def run_train(config: RunConfig) -> TrainResult:
    out_dir = _out_dir(config)
    train_corpus = _load_split(config, "train")
    val_corpus = _load_split(config, "validation")
    if not len(train_corpus):
        raise DataError("train split is empty")

    restrict_texts = None
    if config.features.embed:
        restrict_texts = [p.text for p in train_corpus] + [p.text for p in val_corpus]
        for extra in ("test", "unlabeled"):
            value = getattr(config.paths, extra)
            if value:
                path = resolve_data_path(value)
                if path.is_file():
                    restrict_texts += [
                        p.text
                        for p in load_dataset(
                            path, config.language, config.task, "test", config.delimiter
                        )
                    ]
        if config.pseudo.enabled and config.pseudo.source not in (
            "train", "validation", "test",
        ):
            source = resolve_data_path(config.pseudo.source)
            if source.is_file():
                restrict_texts += [
                    text for _, text in _read_prediction_rows(source, config.delimiter)[0]
                ]
    res = _gather_resources(
        config,
        need_lexicon=config.features.m1,
        need_embeddings=config.features.embed,
        restrict_texts=restrict_texts,
    )
    flags = _flags_from_config(config)
    run_meta = {"config_hash": config.config_hash(), "seed": config.seed}
    outputs = ["model.json", "manifest.json"]

    # Entity BoW needs a base model's validation errors first.
    entity_vocab = None
    if flags.bow:
        base_flags = replace(flags, bow=False)
        base_featurizer = _make_featurizer(config, res, base_flags).fit(train_corpus.posts)
        base_models = _fit_task_models(config, base_featurizer, train_corpus.posts,
                                       config.training)
        misclassified = []
        for post in val_corpus:
            predicted = base_models.predict_post(post).coarse
            if predicted != post.coarse:
                misclassified.append((post, predicted))
        entity_vocab = select_entity_terms(
            train_corpus,
            misclassified,
            res.cleaner,
            top_k=config.features.entity_top_k,
            ratio_min=config.features.entity_ratio_min,
        )
        entity_vocab.save(out_dir / "entity_vocab.tsv")
        outputs.append("entity_vocab.tsv")

    featurizer = _make_featurizer(config, res, flags, entity_vocab).fit(train_corpus.posts)

    candidates = _grid_candidates(config)
    grid_log: list[dict] = []
    best: tuple[float, int, TaskModels, TrainingSection, dict] | None = None
    for idx, training in enumerate(candidates):
        models = _fit_task_models(config, featurizer, train_corpus.posts, training)
        reports = _evaluate_models(models, val_corpus.posts, "validation", run_meta)
        coarse_f1 = reports["coarse"].weighted_f1
        entry = {
            "learning_rate": training.learning_rate,
            "l2": training.l2,
            "epochs": training.epochs,
            "validation_coarse_f1": coarse_f1,
        }
        if "fine" in reports:
            entry["validation_fine_f1"] = reports["fine"].weighted_f1
        grid_log.append(entry)
        if best is None or coarse_f1 > best[0]:
            best = (coarse_f1, idx, models, training, reports)
    assert best is not None
    _, best_idx, models, training_used, reports = best
    grid_log[best_idx]["selected"] = True

    pseudo_added = None
    if config.pseudo.enabled:
        if training_used.loss != "logistic":
            raise ConfigError("pseudo-labelling needs loss=logistic (probabilities)")
        pseudo_added = 0
        for _ in range(config.pseudo.rounds):
            unlabeled = _pseudo_source_posts(config)
            augmented = pseudo_label(
                models.predict_post, unlabeled, config.pseudo.confidence_min, train_corpus
            )
            pseudo_added = len(augmented) - len(train_corpus)
            featurizer = _make_featurizer(config, res, flags, entity_vocab).fit(
                augmented.posts
            )
            models = _fit_task_models(config, featurizer, augmented.posts, training_used)
        reports = _evaluate_models(models, val_corpus.posts, "validation", run_meta)

    model_path = out_dir / "model.json"
    save_bundle(
        model_path,
        bundle_payload(
            models,
            config.language,
            res.records,
            train_config=training_used.model_dump(),
        ),
    )
    outputs += _write_reports(out_dir, reports, "validation")
    if len(candidates) > 1:
        (out_dir / "grid_log.jsonl").write_text(
            "".join(canonical_json(entry) + "\n" for entry in grid_log),
            encoding="utf-8",
        )
        outputs.append("grid_log.jsonl")

    inputs = {
        "train": resolve_data_path(config.paths.train),
        "validation": resolve_data_path(config.paths.validation),
    }
    for name in ("lexicon", "embeddings"):
        rec = res.records.get(name)
        if rec and rec.get("path"):
            inputs[name] = Path(rec["path"])
    _write_manifest(out_dir, "train", config, inputs, outputs)

    return TrainResult(
        model_path=str(model_path),
        reports=reports,
        grid_log=grid_log,
        entity_vocab_size=len(entity_vocab) if entity_vocab is not None else None,
        pseudo_added=pseudo_added,
        output_dir=str(out_dir),
    )


def _pseudo_source_posts(config: RunConfig) -> list[LabeledPost]:
    source = config.pseudo.source
    if source in ("train", "validation", "test"):
        return list(_load_split(config, source).posts)
    path = resolve_data_path(source)
    if not path.is_file():
        raise ConfigError(f"pseudo.source: file not found: {path}")
    rows, _ = _read_prediction_rows(path, config.delimiter)
    _, negative = _coarse_labels(config)
    return [
        LabeledPost(id=row_id, text=text, coarse=negative, split="test")
        for row_id, text in rows
    ]


# ---------------------------------------------------------------------------
# evaluate


@dataclass
class EvaluateResult:
    reports: dict[str, EvalReport]
    output_dir: str

    def summary(self) -> dict:
        return {
            "output_dir": self.output_dir,
            "reports": {g: r.to_json_dict() for g, r in self.reports.items()},
        }


def run_evaluate(
    config: RunConfig, model_path: str, split: str, force: bool = False
) -> EvaluateResult:
    out_dir = _out_dir(config)
    corpus = _load_split(config, split)
    models = _load_models_for(corpus, model_path, force)
    if models.task != config.task:
        raise ConfigError(
            f"model was trained for task {models.task!r}, config says {config.task!r}"
        )
    run_meta = {"config_hash": config.config_hash(), "seed": config.seed}
    reports = _evaluate_models(models, corpus.posts, split, run_meta)
    outputs = _write_reports(out_dir, reports, split) + ["manifest.json"]
    _write_manifest(
        out_dir,
        "evaluate",
        config,
        {split: resolve_data_path(getattr(config.paths, split)), "model": Path(model_path)},
        outputs,
    )
    return EvaluateResult(reports=reports, output_dir=str(out_dir))


def _load_models_for(corpus: Corpus, model_path: str, force: bool) -> TaskModels:
    def provider(cleaner: TextCleaner) -> set[str]:
        return _collect_tokens(cleaner, (p.text for p in corpus))

    return load_bundle(model_path, force=force, restrict_tokens=provider)


# ---------------------------------------------------------------------------
# predict


@dataclass
class PredictResult:
    output_path: str
    rows: int
    warnings: int

    def summary(self) -> dict:
        return {
            "output_path": self.output_path,
            "rows": self.rows,
            "warnings": self.warnings,
        }


def _read_prediction_rows(
    path: Path, delimiter: str | None
) -> tuple[list[tuple[str, str]], int]:
    """Tolerant reader for id+text input: malformed rows are skipped
    with a warning instead of aborting the run."""
    if not path.is_file():
        raise DataError(f"input file not found: {path}")
    rows: list[tuple[str, str]] = []
    warnings = 0
    with path.open(encoding="utf-8", newline="") as fh:
        first = fh.readline()
        if not first.strip():
            raise DataError(f"{path}: missing header row")
        delim = delimiter or detect_delimiter(first)
        fh.seek(0)
        reader = csv.reader(fh, delimiter=delim)
        header = next(reader)
        lowered = [h.strip().lower().lstrip("\ufeff") for h in header]
        id_col = next((i for i, h in enumerate(lowered) if h in
                       ("id", "unique id", "unique_id", "tweet_id", "post_id")), None)
        text_col = next((i for i, h in enumerate(lowered) if h in
                         ("text", "tweet", "post", "content")), None)
        if id_col is None or text_col is None:
            raise DataError(f"{path}: input needs id and text columns, got {header!r}")
        for row in reader:
            if not row:
                continue
            if len(row) != len(header):
                log.warning("%s: line %d: expected %d fields, got %d (row skipped)",
                            path, reader.line_num, len(header), len(row))
                warnings += 1
                continue
            rows.append((row[id_col].strip(), row[text_col]))
    return rows, warnings


def run_predict(
    config: RunConfig,
    model_path: str,
    input_path: str,
    output_name: str = "predictions.tsv",
    force: bool = False,
) -> PredictResult:
    out_dir = _out_dir(config)
    path = resolve_data_path(input_path)
    rows, warnings = _read_prediction_rows(path, config.delimiter)

    def provider(cleaner: TextCleaner) -> set[str]:
        return _collect_tokens(cleaner, (text for _, text in rows))

    models = load_bundle(model_path, force=force, restrict_tokens=provider)
    out_path = out_dir / output_name
    fieldnames = ["id", "coarse", "fine", "score"]
    if models.fine is not None:
        fieldnames += [f"score_{cls}" for cls in FINE_CLASSES]
    with out_path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(fieldnames)
        for row_id, text in rows:
            post = LabeledPost(id=row_id, text=text, coarse=models.negative_label,
                               split="test")
            pred = models.predict_post(post)
            record = [
                row_id,
                pred.coarse,
                ",".join(sorted(pred.fine)),
                repr(pred.scores[models.positive_label]),
            ]
            if models.fine is not None:
                record += [repr(pred.scores[f"fine:{cls}"]) for cls in FINE_CLASSES]
            writer.writerow(record)
    _write_manifest(
        out_dir,
        "predict",
        config,
        {"input": path, "model": Path(model_path)},
        [output_name, "manifest.json"],
    )
    return PredictResult(output_path=str(out_path), rows=len(rows), warnings=warnings)


# ---------------------------------------------------------------------------
# ablate


@dataclass
class AblateResult:
    tables: dict[str, dict]
    output_dir: str

    def summary(self) -> dict:
        return {"tables": self.tables, "output_dir": self.output_dir}


def run_ablate(config: RunConfig) -> AblateResult:
    out_dir = _out_dir(config)
    train_corpus = _load_split(config, "train")
    val_corpus = _load_split(config, "validation")
    restrict_texts = None
    if config.features.embed:
        restrict_texts = [p.text for p in train_corpus] + [p.text for p in val_corpus]
    res = _gather_resources(
        config, need_lexicon=True, need_embeddings=config.features.embed,
        restrict_texts=restrict_texts,
    )
    run_meta = {"config_hash": config.config_hash(), "seed": config.seed}

    runs_by_grain: dict[str, list[tuple[str, EvalReport]]] = {"coarse": []}
    if config.task == "hostility":
        runs_by_grain["fine"] = []
    for combo in ABLATION_COMBOS:
        tag = "+".join(combo) if combo else "none"
        flags = FeatureFlags(
            tfidf=config.features.tfidf,
            embed=config.features.embed,
            bow=False,
            m1="m1" in combo,
            m2="m2" in combo,
            m3="m3" in combo,
        )
        featurizer = _make_featurizer(config, res, flags).fit(train_corpus.posts)
        models = _fit_task_models(config, featurizer, train_corpus.posts, config.training)
        reports = _evaluate_models(models, val_corpus.posts, "validation", run_meta)
        for grain in runs_by_grain:
            runs_by_grain[grain].append((tag, reports[grain]))

    tables = {grain: ablation_table(rows) for grain, rows in runs_by_grain.items()}
    (out_dir / "ablation.json").write_text(pretty_json(tables), encoding="utf-8")
    (out_dir / "ablation.txt").write_text(render_ablation_text(tables), encoding="utf-8")
    _write_manifest(
        out_dir,
        "ablate",
        config,
        {
            "train": resolve_data_path(config.paths.train),
            "validation": resolve_data_path(config.paths.validation),
        },
        ["ablation.json", "ablation.txt", "manifest.json"],
    )
    return AblateResult(tables=tables, output_dir=str(out_dir))


# ---------------------------------------------------------------------------
# ensemble


@dataclass
class EnsembleResult:
    reports: dict[str, EvalReport]
    rule: str
    output_dir: str

    def summary(self) -> dict:
        return {
            "rule": self.rule,
            "output_dir": self.output_dir,
            "reports": {g: r.to_json_dict() for g, r in self.reports.items()},
        }


def _vote_fine(
    member_preds: Sequence[ScoredPrediction], spec: EnsembleSpec, hostile: bool
) -> frozenset[str]:
    """Per-class majority over member fine sets, gated by the combined
    coarse label; an empty result falls back to the priority member."""
    if not hostile:
        return frozenset()
    chosen = set()
    for cls in FINE_CLASSES:
        votes = sum(1 for p in member_preds if cls in p.fine)
        if votes * 2 > len(member_preds):
            chosen.add(cls)
        elif votes * 2 == len(member_preds) and cls in member_preds[spec.tie_break].fine:
            chosen.add(cls)
    if not chosen:
        return member_preds[spec.tie_break].fine
    return frozenset(chosen)


def run_ensemble(config: RunConfig, force: bool = False) -> EnsembleResult:
    out_dir = _out_dir(config)
    if not config.ensemble.members:
        raise ConfigError("ensemble.members must list at least one model file")
    split = config.ensemble.split
    corpus = _load_split(config, split)
    members = [_load_models_for(corpus, path, force) for path in config.ensemble.members]
    tasks = {m.task for m in members}
    if tasks != {config.task}:
        raise ConfigError(f"ensemble members trained for tasks {sorted(tasks)}, "
                          f"config says {config.task!r}")
    spec = EnsembleSpec(
        members=tuple(config.ensemble.members),
        rule=config.ensemble.rule,
        tie_break=config.ensemble.tie_break,
    )
    positive, negative = _coarse_labels(config)

    combined: list[ScoredPrediction] = []
    for post in corpus:
        preds = [m.predict_post(post) for m in members]
        if spec.rule == "majority":
            coarse = vote([p.coarse for p in preds], spec)
        else:
            coarse = combine_labels([p.coarse for p in preds], spec.rule, positive, negative)
        fine = (
            _vote_fine(preds, spec, coarse == "hostile")
            if config.task == "hostility"
            else frozenset()
        )
        confidence = sum(p.confidence for p in preds) / len(preds)
        combined.append(
            ScoredPrediction(coarse=coarse, fine=fine, confidence=confidence)
        )
    run_meta = {"config_hash": config.config_hash(), "seed": config.seed}
    reports = _reports_from_predictions(config.task, corpus.posts, combined, split, run_meta)

    if config.ensemble.stack == "linear":
        reports["stacked_coarse"] = _stacked_report(
            config, members, corpus, split, run_meta
        )

    outputs = _write_reports(out_dir, reports, split) + ["manifest.json"]
    inputs = {split: resolve_data_path(getattr(config.paths, split))}
    for i, member in enumerate(config.ensemble.members):
        inputs[f"member_{i}"] = Path(member)
    _write_manifest(out_dir, "ensemble", config, inputs, outputs)
    return EnsembleResult(reports=reports, rule=spec.rule, output_dir=str(out_dir))


def _stacked_report(
    config: RunConfig,
    members: Sequence[TaskModels],
    eval_corpus: Corpus,
    split: str,
    run_meta: dict,
) -> EvalReport:
    """Linear stacker: a logistic head over member decision scores plus
    the metadata block, trained on the validation split."""
    val_corpus = _load_split(config, "validation")
    positive, negative = _coarse_labels(config)
    cleaner = members[0].featurizer.cleaner
    lexicon = members[0].featurizer.lexicon

    def meta_row(post: LabeledPost) -> np.ndarray:
        doc = cleaner.clean(post.text)
        return meta_vector(post, doc, lexicon).as_vector()

    def score_row(post: LabeledPost) -> np.ndarray:
        return np.array(
            [m.coarse.decision(m.featurizer.transform(post)) for m in members],
            dtype=np.float64,
        )

    layout = FeatureLayout(blocks=(
        ("dense", len(members) + 6), ("tfidf", 0), ("bow", 0), ("meta", 0),
    ))
    val_meta = np.stack([meta_row(p) for p in val_corpus])
    scaler = MetaScaler.fit(val_meta)

    def features(post: LabeledPost, meta: np.ndarray) -> FeatureVector:
        dense = np.concatenate([score_row(post), scaler.transform(meta)])
        return assemble(dense, SparseVector.empty(), np.empty(0), layout)

    X = [features(p, m) for p, m in zip(val_corpus, val_meta)]
    y = [1 if p.coarse == positive else 0 for p in val_corpus]
    section = TrainingSection(**{**config.training.model_dump(), "loss": "logistic"})
    stacker = train_linear(X, y, _train_config(section, config.seed))

    y_true = [p.coarse for p in eval_corpus]
    y_pred = []
    for post in eval_corpus:
        x = features(post, meta_row(post))
        y_pred.append(positive if stacker.decision(x) > 0 else negative)
    classes = list(COARSE_CLASSES[config.task])
    return EvalReport(
        task=f"{config.task}:coarse(stacked)",
        split=split,
        weighted_f1=weighted_f1(y_true, y_pred),
        per_class=per_class_report(y_true, y_pred, classes),
        confusion=confusion(y_true, y_pred, classes).tolist(),
        classes=classes,
        run_meta=dict(run_meta),
    )


# ---------------------------------------------------------------------------
# audit


@dataclass
class AuditResult:
    items: list[Disagreement]
    output_path: str

    def summary(self) -> dict:
        return {
            "output_path": self.output_path,
            "items": [
                {
                    "id": d.post.id,
                    "gold": d.gold,
                    "predicted": d.predicted,
                    "mean_confidence": d.mean_confidence,
                }
                for d in self.items
            ],
        }


def run_audit(
    config: RunConfig, model_paths: Sequence[str], split: str, force: bool = False
) -> AuditResult:
    out_dir = _out_dir(config)
    if len(model_paths) < 2:
        raise ConfigError("audit needs at least 2 model files")
    corpus = _load_split(config, split)
    members = [_load_models_for(corpus, path, force) for path in model_paths]
    rows = disagreement_report([m.predict_post for m in members], corpus)
    out_path = out_dir / "disagreements.tsv"
    with out_path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(["id", "gold", "predicted", "mean_confidence", "text"])
        for d in rows:
            writer.writerow([d.post.id, d.gold, d.predicted, repr(d.mean_confidence),
                             d.post.text])
    inputs = {split: resolve_data_path(getattr(config.paths, split))}
    for i, member in enumerate(model_paths):
        inputs[f"member_{i}"] = Path(member)
    _write_manifest(out_dir, "audit", config, inputs,
                    ["disagreements.tsv", "manifest.json"])
    return AuditResult(items=rows, output_path=str(out_path))


# ---------------------------------------------------------------------------
# preprocess


@dataclass
class PreprocessResult:
    output_path: str
    rows: int

    def summary(self) -> dict:
        return {"output_path": self.output_path, "rows": self.rows}


def run_preprocess(
    config: RunConfig,
    split: str | None = None,
    input_path: str | None = None,
    output_name: str = "cleaned.tsv",
) -> PreprocessResult:
    out_dir = _out_dir(config)
    cleaner = _build_cleaner(config)
    if input_path:
        path = resolve_data_path(input_path)
        rows, _ = _read_prediction_rows(path, config.delimiter)
        source = path
    elif split:
        corpus = _load_split(config, split)
        rows = [(p.id, p.text) for p in corpus]
        source = resolve_data_path(getattr(config.paths, split))
    else:
        raise ConfigError("preprocess needs a split name or an input file")
    out_path = out_dir / output_name
    with out_path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(["id", "tokens", "mentions", "urls", "hashtags", "emojis"])
        for row_id, text in rows:
            doc = cleaner.clean(text)
            counts = doc.pre_strip
            writer.writerow([
                row_id, " ".join(doc.tokens), counts.mentions, counts.urls,
                counts.hashtags, counts.emojis,
            ])
    _write_manifest(out_dir, "preprocess", config, {"input": source},
                    [output_name, "manifest.json"])
    return PreprocessResult(output_path=str(out_path), rows=len(rows))
