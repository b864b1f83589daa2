"""Training/evaluation drivers: multi-seed runs, sweeps, and ablations.

One annotator (tag source) is built per invocation and shared by every
seed and cell, mirroring a single upstream labeler feeding many
downstream experiments. All randomness derives from explicit seeds, so
rerunning a configuration reproduces its outputs byte for byte.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np
import torch

from . import __version__, datasets
from .bio import TagAlphabet, start_mask, transition_mask
from .config import ConfigError, ExperimentResult, RunConfig
from .embeddings import TagProvider
from .entailment import EsimClassifier
from .metrics import MetricReport, accuracy, exact_match, srl_span_f1, token_f1
from .reader import SpanReader
from .srl import CHECKPOINT_FORMAT, CHECKPOINT_VERSION, SrlTagger
from .taggers import GazetteerNeTagger, default_pos_tagger
from .viterbi import viterbi_decode

logger = logging.getLogger(__name__)

SWEEP_DIMS = (1, 2, 5, 10, 20, 50, 100)


def pos_tag_provider(tagger=None) -> TagProvider:
    tagger = tagger or default_pos_tagger()
    from .taggers import PENN_TAGS

    return TagProvider("pos", tuple(PENN_TAGS), tagger.tag)


def ne_tag_provider(gazetteer: GazetteerNeTagger | None = None) -> TagProvider:
    gazetteer = gazetteer or GazetteerNeTagger()
    vocabulary = tuple(str(t) for t in gazetteer.alphabet.tags)
    return TagProvider("ne", vocabulary, gazetteer.tag)


def train_annotator(config: RunConfig) -> SrlTagger:
    """Fit the in-harness role labeler used as a downstream tag source."""
    sizes = config.annotator_sizes()
    examples = datasets.load_srl_conll(config.srl_data)
    tagger = SrlTagger(num_layers=sizes["num_layers"], hidden_size=sizes["hidden_size"],
                       context_dim=sizes["context_dim"], indicator_dim=config.indicator_dim,
                       epochs=config.annotator_epochs, seed=config.annotator_seed)
    X = [(ex.tokens, ex.predicate_index) for ex in examples]
    y = [ex.tags for ex in examples]
    logger.info("training annotator on %d sentences (%d epochs)", len(X), config.annotator_epochs)
    return tagger.fit(X, y)


def build_tag_source(config: RunConfig):
    """Returns (provider, annotator_descriptor) for the configured source."""
    if config.task == "srl" or config.tag_source == "none":
        return None, {"type": "none"}
    if config.tag_source == "srl":
        tagger = train_annotator(config)
        return tagger.tag_provider(), {"type": "srl", "payload": tagger.export_state()}
    if config.tag_source == "pos":
        return pos_tag_provider(), {"type": "pos"}
    return ne_tag_provider(), {"type": "ne"}


def provider_from_descriptor(descriptor: dict) -> TagProvider | None:
    kind = descriptor.get("type", "none")
    if kind == "none":
        return None
    if kind == "srl":
        return SrlTagger.restore_state(descriptor["payload"]).tag_provider()
    if kind == "pos":
        return pos_tag_provider()
    if kind == "ne":
        return ne_tag_provider()
    raise ValueError(f"unknown annotator type {kind!r}")


# -- single runs ------------------------------------------------------------


def _build_estimator(config: RunConfig, seed: int, provider: TagProvider | None):
    use_tags = config.tag_source != "none"
    if config.task == "entailment":
        return EsimClassifier(
            hidden_size=config.effective_hidden_size(),
            word_dim=0 if config.use_context else config.word_dim,
            context_dim=config.context_dim if config.use_context else 0,
            tag_dim=config.tag_dim, use_tags=use_tags, tag_provider=provider,
            epochs=config.epochs, learning_rate=config.learning_rate,
            batch_size=config.batch_size, seed=seed)
    if config.task == "reading":
        return SpanReader(
            hidden_size=config.effective_hidden_size(),
            word_dim=config.word_dim, char_dim=config.char_dim,
            context_dim=config.context_dim if config.use_context else 0,
            tag_dim=config.tag_dim, use_tags=use_tags, tag_provider=provider,
            max_answer_len=config.max_answer_len, epochs=config.epochs,
            learning_rate=config.learning_rate, batch_size=config.batch_size, seed=seed)
    return SrlTagger(
        num_layers=config.effective_num_layers(), hidden_size=config.effective_hidden_size(),
        context_dim=config.context_dim, indicator_dim=config.indicator_dim,
        epochs=config.epochs, learning_rate=config.learning_rate,
        batch_size=config.batch_size, seed=seed)


def _load_task_data(config: RunConfig, spec: str):
    if config.task == "entailment":
        return datasets.load_nli_jsonl(spec)[0]
    if config.task == "reading":
        return datasets.load_squad(spec)
    return datasets.load_srl_conll(spec)


def _fit(estimator, config: RunConfig, train):
    if config.task == "entailment":
        return estimator.fit(train, [ex.label for ex in train])
    if config.task == "reading":
        return estimator.fit(train)
    return estimator.fit([(ex.tokens, ex.predicate_index) for ex in train],
                         [ex.tags for ex in train])


def evaluate_estimator(estimator, task: str, dev) -> dict[str, float]:
    """Dev-set metrics for a fitted estimator, as plain floats."""
    if task == "entailment":
        predictions = estimator.predict(dev)
        golds = [ex.label for ex in dev]
        return {"accuracy": accuracy(list(predictions), golds)}
    if task == "reading":
        texts = estimator.predict_text(dev)
        em = float(np.mean([exact_match(p, ex.answer_texts) for p, ex in zip(texts, dev)]))
        f1 = float(np.mean([token_f1(p, ex.answer_texts) for p, ex in zip(texts, dev)]))
        return {"em": em, "f1": f1}
    predicted = estimator.predict([ex.tokens for ex in dev])
    precision, recall, f1 = srl_span_f1(predicted, [ex.tags for ex in dev])
    return {"span_precision": precision, "span_recall": recall, "span_f1": f1}


def save_checkpoint(path, estimator, annotator_descriptor: dict, config_hash: str | None = None):
    state = estimator.export_state()
    torch.save({
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "kind": state["kind"],
        "config_hash": config_hash,
        "estimator": state,
        "annotator": annotator_descriptor,
    }, path)


def load_checkpoint(path):
    """Rebuild a frozen estimator (with its tag source re-attached)."""
    payload = torch.load(path, weights_only=False)
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path} is not a checkpoint file")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('version')}")
    kind = payload["kind"]
    if kind == "srl":
        return SrlTagger.restore_state(payload["estimator"])
    provider = provider_from_descriptor(payload.get("annotator") or {"type": "none"})
    if kind == "entailment":
        return EsimClassifier.restore_state(payload["estimator"], tag_provider=provider)
    if kind == "reading":
        return SpanReader.restore_state(payload["estimator"], tag_provider=provider)
    raise ValueError(f"unknown checkpoint kind {kind!r}")


def _provenance(config: RunConfig) -> dict:
    checksums = {"train_data": datasets.file_checksum(datasets.resolve_data_path(config.train_data))}
    checksums["dev_data"] = datasets.file_checksum(datasets.resolve_data_path(config.dev_data_or_train))
    if config.task != "srl" and config.tag_source == "srl":
        checksums["srl_data"] = datasets.file_checksum(datasets.resolve_data_path(config.srl_data))
    return {"package_version": __version__, "data_checksums": checksums,
            "seeds": list(config.seeds)}


def cmd_train(config: RunConfig, write_outputs: bool = True,
              tag_source: tuple | None = None) -> ExperimentResult:
    """Train once per seed, aggregate, and write the result record.

    ``tag_source`` lets sweeps and ablations hand a prebuilt
    (provider, descriptor) pair to every cell instead of retraining the
    annotator; cells configured without tags ignore it.
    """
    config.validate()
    if config.task != "srl" and config.tag_source == "srl" and tag_source is not None:
        provider, descriptor = tag_source
    else:
        provider, descriptor = build_tag_source(config)
    train = _load_task_data(config, config.train_data)
    dev = _load_task_data(config, config.dev_data_or_train)
    out_dir = config.resolved_output_dir()
    per_seed: dict[int, dict[str, float]] = {}
    for seed in config.seeds:
        estimator = _build_estimator(config, seed, provider)
        _fit(estimator, config, train)
        per_seed[seed] = evaluate_estimator(estimator, config.task, dev)
        logger.info("seed %d: %s", seed, per_seed[seed])
        if write_outputs:
            out_dir.mkdir(parents=True, exist_ok=True)
            save_checkpoint(out_dir / f"seed{seed}.ckpt", estimator, descriptor,
                            config.config_hash())
    metric_names = sorted(per_seed[config.seeds[0]])
    reports = [MetricReport.aggregate(name, {s: per_seed[s][name] for s in config.seeds}, len(dev))
               for name in metric_names]
    result = ExperimentResult(config_hash=config.config_hash(), task=config.task,
                              config=config.to_dict(), per_seed=per_seed, reports=reports,
                              provenance=_provenance(config))
    if write_outputs:
        result.save(out_dir)
    return result


def cmd_eval(checkpoint_path, data_spec: str) -> list[MetricReport]:
    estimator = load_checkpoint(checkpoint_path)
    if isinstance(estimator, EsimClassifier):
        kind, data = "entailment", datasets.load_nli_jsonl(data_spec)[0]
    elif isinstance(estimator, SpanReader):
        kind, data = "reading", datasets.load_squad(data_spec)
    else:
        kind, data = "srl", datasets.load_srl_conll(data_spec)
    metrics = evaluate_estimator(estimator, kind, data)
    return [MetricReport(name, value, len(data)) for name, value in sorted(metrics.items())]


def cmd_annotate(input_path, checkpoint_path, output_path) -> tuple[int, int]:
    """Label each input line; returns (sentences written, lines failed)."""
    tagger = load_checkpoint(checkpoint_path)
    if not isinstance(tagger, SrlTagger):
        raise ValueError("annotate needs a role-labeler checkpoint")
    written = failed = 0
    with open(input_path, encoding="utf-8") as src, open(output_path, "w", encoding="utf-8") as dst:
        for line_no, line in enumerate(src, 1):
            text = line.strip()
            if not text:
                continue
            tokens = datasets.simple_tokenize(text)
            if not tokens:
                dst.write(f"# line {line_no}: no tokens\n\n")
                failed += 1
                continue
            try:
                annotated = tagger.annotate(tokens)
            except Exception as exc:
                dst.write(f"# line {line_no}: {exc}\n\n")
                failed += 1
                continue
            for token, label in zip(annotated.tokens, annotated.labels):
                dst.write(f"{token.text}\t{label}\n")
            dst.write("\n")
            written += 1
    return written, failed


def cmd_decode(roles: list[str], matrix_path) -> tuple[list[str], float]:
    """Debug decode of a whitespace-separated emission matrix file."""
    alphabet = TagAlphabet(roles)
    matrix = np.loadtxt(matrix_path, ndmin=2)
    if matrix.shape[1] != len(alphabet):
        raise ValueError(f"matrix has {matrix.shape[1]} columns but the alphabet has "
                         f"{len(alphabet)} tags")
    path = viterbi_decode(matrix, transition_mask(alphabet), start_mask(alphabet))
    return [str(alphabet.tag(i)) for i in path.tags], path.score


# -- sweeps and ablations -----------------------------------------------------


def _primary_metric(task: str) -> str:
    return {"entailment": "accuracy", "reading": "f1", "srl": "span_f1"}[task]


def _write_rows(out_dir: Path, stem: str, rows: list[dict], columns: list[str]):
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / f"{stem}.jsonl", "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    widths = [max(len(c), *(len(_cell(row.get(c))) for row in rows)) for c in columns]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths))]
    for row in rows:
        lines.append("  ".join(_cell(row.get(c)).ljust(w) for c, w in zip(columns, widths)))
    (out_dir / f"{stem}.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _cell(value) -> str:
    if isinstance(value, float):
        return f"{100 * value:.2f}"
    return "" if value is None else str(value)


def cmd_sweep_dim(config: RunConfig, dims=SWEEP_DIMS) -> list[dict]:
    """One training run per tag-embedding dimension; failures recorded."""
    config.validate()
    if config.tag_source == "none":
        raise ConfigError("sweep needs a tag source; set tag_source to srl, pos or ne")
    shared_source = build_tag_source(config)  # tag vectors do not depend on tag_dim
    base_dir = config.resolved_output_dir()
    metric = _primary_metric(config.task)
    rows = []
    for dim in dims:
        cell = config.derived(tag_dim=int(dim), output_dir=str(Path(config.output_dir) / f"dim{dim}"))
        try:
            result = cmd_train(cell, tag_source=shared_source)
            value = {r.name: r.value for r in result.reports}[metric]
            rows.append({"tag_dim": int(dim), metric: value, "config_hash": result.config_hash})
        except Exception as exc:  # record and keep sweeping
            logger.warning("sweep cell dim=%s failed: %s", dim, exc)
            rows.append({"tag_dim": int(dim), "error": str(exc)})
    _write_rows(base_dir, "sweep", rows, ["tag_dim", metric, "error", "config_hash"])
    return rows


EMBEDDING_GRID = (("full", True, True), ("-context", False, True),
                  ("-tags", True, False), ("-context -tags", False, False))


def cmd_ablate(config: RunConfig, tag_sources: bool = False) -> list[dict]:
    """2x2 context/tags grid, or the tag-source comparison rows."""
    config.validate()
    metric = _primary_metric(config.task)
    rows = []
    if tag_sources:
        cells = [("baseline", {"tag_source": "none"})]
        cells += [(f"word+{source}", {"tag_source": source}) for source in ("srl", "pos", "ne")]
    else:
        if config.tag_source == "none":
            raise ConfigError("the embedding ablation needs a tag source in the base config")
        cells = [(label, {"use_context": ctx, "tag_source": config.tag_source if tags else "none"})
                 for label, ctx, tags in EMBEDDING_GRID]
    shared: dict[str, tuple] = {}
    hashes = set()
    for label, changes in cells:
        slug = label.replace(" ", "_").replace("+", "-")
        cell = config.derived(output_dir=str(Path(config.output_dir) / f"cell{slug}"), **changes)
        if cell.config_hash() in hashes:
            raise RuntimeError(f"ablation cell {label!r} duplicates another cell's configuration")
        hashes.add(cell.config_hash())
        try:
            if cell.tag_source == "srl" and "srl" not in shared:
                shared["srl"] = build_tag_source(cell)
            result = cmd_train(cell, tag_source=shared.get(cell.tag_source))
            value = {r.name: r.value for r in result.reports}[metric]
            rows.append({"cell": label, metric: value, "config_hash": result.config_hash})
        except Exception as exc:
            logger.warning("ablation cell %r failed: %s", label, exc)
            rows.append({"cell": label, "error": str(exc)})
    stem = "tag_sources" if tag_sources else "ablation"
    _write_rows(config.resolved_output_dir(), stem, rows, ["cell", metric, "error", "config_hash"])
    return rows
