"""Command-line workflow: prepare -> train-qg -> gen-questions ->
train-source -> adapt -> eval -> diagnose.

Configuration is a flat ``section.key=value`` file; flags override file
values. Every command writes its artifacts atomically into one run
directory and snapshots the resolved configuration next to them.

Exit codes: 0 success, 2 usage or missing input, 3 training divergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from dataclasses import dataclass, field

import numpy as np
import torch

from . import corpus as corpus_mod
from .adversary import DomainClassifier
from .checkpoint import (CheckpointError, load_checkpoint, load_module_params,
                         module_params, save_checkpoint)
from .corpus import (DomainLabel, LoadStats, QAExample, RuleAnnotator,
                     Vocabulary, build_vocab, load_examples_jsonl,
                     load_passages_jsonl, load_pretrained_embeddings,
                     load_squad_json, make_synthetic_domains,
                     random_embeddings, save_examples_jsonl,
                     save_passages_jsonl, synthetic_annotator, vocab_streams)
from .experiment import split_corpus
from .metrics import (collect_features, domain_kl, evaluate_model,
                      export_projection)
from .mrc import MRCConfig, MRCModel
from .qgen import QGenConfig, QGenerator, build_tgen, train_qgen
from .trainer import (TrainConfig, TrainingDiverged, adapt,
                      adapt_semi_supervised, checkpoint_manifest,
                      train_source)

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DIVERGED = 3


class UsageError(Exception):
    """Bad configuration or missing prerequisite artifact."""


@dataclass
class CorpusSettings:
    mode: str = "synthetic"            # synthetic | squad
    n_passages: int = 200              # per domain, synthetic mode
    dev_passages: int = 40             # per domain, synthetic mode
    source_path: str = ""              # squad mode
    target_path: str = ""              # squad mode (passages used unlabeled)
    target_dev_path: str = ""          # squad mode dev labels
    embeddings_path: str = ""          # optional word-vector text file
    min_count: int = 1
    max_vocab: int = 50_000
    embedding_dim: int = 64
    max_per_passage: int = 3           # answer candidates per passage


@dataclass
class RunConfig:
    output_dir: str = "runs/adamrc"
    seed: int = 0
    corpus: CorpusSettings = field(default_factory=CorpusSettings)
    qgen: QGenConfig = field(default_factory=QGenConfig)
    mrc: MRCConfig = field(default_factory=MRCConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_SECTIONS = {"corpus": CorpusSettings, "qgen": QGenConfig, "mrc": MRCConfig,
             "train": TrainConfig}
_RUN_KEYS = {"output_dir": str, "seed": int}


def _coerce(raw: str, kind: type):
    if kind is bool:
        if raw.lower() in ("1", "true", "yes"):
            return True
        if raw.lower() in ("0", "false", "no"):
            return False
        raise UsageError(f"expected boolean, got {raw!r}")
    try:
        return kind(raw)
    except ValueError as e:
        raise UsageError(f"cannot parse {raw!r} as {kind.__name__}") from e


def parse_config_file(path: str) -> dict[str, str]:
    pairs: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected KEY=VALUE")
            key, value = line.split("=", 1)
            pairs[key.strip()] = value.strip()
    return pairs


def build_run_config(pairs: dict[str, str]) -> RunConfig:
    """Validate every key against the config schema before any compute."""
    cfg = RunConfig()
    fields_by_section = {
        name: {f.name: f.type for f in dataclasses.fields(klass)}
        for name, klass in _SECTIONS.items()
    }
    updates: dict[str, dict] = {name: {} for name in _SECTIONS}
    for key, raw in pairs.items():
        if key.startswith("run."):
            sub = key[4:]
            if sub not in _RUN_KEYS:
                raise UsageError(f"unknown config key {key!r}")
            setattr(cfg, sub, _coerce(raw, _RUN_KEYS[sub]))
            continue
        if "." not in key:
            raise UsageError(f"unknown config key {key!r}")
        section, sub = key.split(".", 1)
        if section not in _SECTIONS or sub not in fields_by_section[section]:
            raise UsageError(f"unknown config key {key!r}")
        annotation = fields_by_section[section][sub]
        kind = {"int": int, "float": float, "str": str, "bool": bool}.get(
            str(annotation).replace("builtins.", ""), str)
        updates[section][sub] = _coerce(raw, kind)
    try:
        cfg.corpus = dataclasses.replace(cfg.corpus, **updates["corpus"])
        cfg.qgen = dataclasses.replace(cfg.qgen, **updates["qgen"])
        cfg.mrc = dataclasses.replace(cfg.mrc, **updates["mrc"])
        cfg.train = dataclasses.replace(cfg.train, **updates["train"])
    except ValueError as e:
        raise UsageError(str(e)) from e
    return cfg


def resolve_config(args: argparse.Namespace) -> RunConfig:
    pairs = parse_config_file(args.config) if args.config else {}
    cfg = build_run_config(pairs)
    if args.out:
        cfg.output_dir = args.out
    flag_map = {"ks": ("train", "k_s"), "kt": ("train", "k_t"),
                "lambda_gamma": ("train", "lambda_gamma"),
                "lr": ("train", "learning_rate"),
                "dropout": ("train", "dropout_rate"),
                "epochs": ("train", "epochs")}
    overrides: dict[str, dict] = {}
    for flag, (section, name) in flag_map.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides.setdefault(section, {})[name] = value
    if "train" in overrides:
        try:
            cfg.train = dataclasses.replace(cfg.train, **overrides["train"])
        except ValueError as e:
            raise UsageError(str(e)) from e
    if getattr(args, "dropout", None) is not None:
        cfg.mrc = dataclasses.replace(cfg.mrc, dropout_rate=args.dropout)
        cfg.qgen = dataclasses.replace(cfg.qgen, dropout_rate=args.dropout)
    if args.seed is not None:
        cfg.seed = args.seed
    elif "run.seed" not in pairs and os.environ.get("ADAMRC_SEED"):
        cfg.seed = int(os.environ["ADAMRC_SEED"])
    cfg.train = dataclasses.replace(cfg.train, seed=cfg.seed)
    return cfg


# ---------------------------------------------------------------------------
# Artifact paths and IO helpers
# ---------------------------------------------------------------------------

class RunPaths:
    def __init__(self, output_dir: str):
        self.root = output_dir
        join = lambda name: os.path.join(output_dir, name)
        self.config_snapshot = join("config_snapshot.json")
        self.prepare_summary = join("prepare_summary.json")
        self.vocab = join("vocab.json")
        self.source_train = join("source_train.jsonl")
        self.source_train_examples = join("source_train_examples.jsonl")
        self.source_dev = join("source_dev.jsonl")
        self.source_dev_examples = join("source_dev_examples.jsonl")
        self.target_train = join("target_train.jsonl")
        self.target_train_examples = join("target_train_examples.jsonl")
        self.target_dev = join("target_dev.jsonl")
        self.target_dev_examples = join("target_dev_examples.jsonl")
        self.tgen = join("tgen_examples.jsonl")
        self.qg_ckpt = join("qg.ckpt")
        self.source_ckpt = join("source.ckpt")
        self.adapted_ckpt = join("adapted.ckpt")
        self.qg_log = join("qg_train_log.jsonl")
        self.source_log = join("source_train_log.jsonl")
        self.adapt_log = join("adapt_log.jsonl")
        self.eval_report = join("eval_report.json")
        self.diagnostics = join("diagnostics.json")
        self.projection = join("projection.csv")
        self.features = join("features.ckpt")


def write_json_atomic(payload: dict, path: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def _require(path: str, hint: str) -> str:
    if not os.path.exists(path):
        raise UsageError(f"missing artifact {path}; run `{hint}` first")
    return path


def _annotator(cfg: RunConfig) -> RuleAnnotator:
    return synthetic_annotator() if cfg.corpus.mode == "synthetic" \
        else RuleAnnotator()


def save_vocab(vocab: Vocabulary, path: str) -> None:
    write_json_atomic({"embedding_dim": vocab.embedding_dim,
                       "tokens": list(vocab.id_to_token[4:])}, path)


def load_vocab(path: str) -> Vocabulary:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    return Vocabulary(payload["tokens"], payload["embedding_dim"])


def _embedding_table(cfg: RunConfig, vocab: Vocabulary) -> np.ndarray:
    if cfg.corpus.embeddings_path:
        return load_pretrained_embeddings(cfg.corpus.embeddings_path, vocab,
                                          seed=cfg.seed)
    return random_embeddings(vocab, cfg.seed)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_prepare(cfg: RunConfig, paths: RunPaths) -> int:
    snapshot = {"corpus": dataclasses.asdict(cfg.corpus), "seed": cfg.seed}
    outputs = [paths.vocab, paths.source_train, paths.source_train_examples,
               paths.source_dev, paths.source_dev_examples, paths.target_train,
               paths.target_dev, paths.target_dev_examples]
    if os.path.exists(paths.prepare_summary) and all(
            os.path.exists(p) for p in outputs):
        with open(paths.prepare_summary, "r", encoding="utf-8") as fh:
            old = json.load(fh)
        if old.get("snapshot") == snapshot:
            print("prepare: cache up to date, nothing to do")
            return EXIT_OK

    stats = LoadStats()
    if cfg.corpus.mode == "synthetic":
        source, target = make_synthetic_domains(cfg.seed,
                                                cfg.corpus.n_passages)
        src_train, src_dev = split_corpus(source, cfg.corpus.dev_passages)
        tgt_train, tgt_dev = split_corpus(target, cfg.corpus.dev_passages)
        src_train_ex, src_dev_ex = src_train.examples, src_dev.examples
        tgt_train_ex, tgt_dev_ex = tgt_train.examples, tgt_dev.examples
        src_train_p, src_dev_p = src_train.passages, src_dev.passages
        tgt_train_p, tgt_dev_p = tgt_train.passages, tgt_dev.passages
    elif cfg.corpus.mode == "squad":
        src_path = _require(cfg.corpus.source_path, "set corpus.source_path")
        tgt_path = _require(cfg.corpus.target_path, "set corpus.target_path")
        ann = RuleAnnotator()
        src_all = load_squad_json(src_path, DomainLabel.SOURCE, annotator=ann,
                                  stats=stats)
        n_dev = max(1, len(src_all) // 10)
        src_train_ex, src_dev_ex = src_all[:-n_dev], src_all[-n_dev:]
        tgt_train_ex = load_squad_json(tgt_path, DomainLabel.TARGET,
                                       annotator=ann, stats=stats)
        if cfg.corpus.target_dev_path:
            tgt_dev_ex = load_squad_json(cfg.corpus.target_dev_path,
                                         DomainLabel.TARGET, annotator=ann,
                                         stats=stats)
        else:
            n_tdev = max(1, len(tgt_train_ex) // 10)
            tgt_dev_ex = tgt_train_ex[-n_tdev:]
            tgt_train_ex = tgt_train_ex[:-n_tdev]

        def uniq(examples):
            seen, out = set(), []
            for ex in examples:
                if ex.passage.id not in seen:
                    seen.add(ex.passage.id)
                    out.append(ex.passage)
            return out

        src_train_p, src_dev_p = uniq(src_train_ex), uniq(src_dev_ex)
        tgt_train_p, tgt_dev_p = uniq(tgt_train_ex), uniq(tgt_dev_ex)
    else:
        raise UsageError(f"unknown corpus.mode {cfg.corpus.mode!r}")

    vocab = build_vocab(
        list(vocab_streams(src_train_ex))
        + [[t.text for t in p.tokens] for p in tgt_train_p],
        min_count=cfg.corpus.min_count, max_size=cfg.corpus.max_vocab,
        embedding_dim=cfg.corpus.embedding_dim)

    save_passages_jsonl(src_train_p, paths.source_train)
    save_examples_jsonl(src_train_ex, paths.source_train_examples)
    save_passages_jsonl(src_dev_p, paths.source_dev)
    save_examples_jsonl(src_dev_ex, paths.source_dev_examples)
    save_passages_jsonl(tgt_train_p, paths.target_train)
    save_examples_jsonl(tgt_train_ex, paths.target_train_examples)
    save_passages_jsonl(tgt_dev_p, paths.target_dev)
    save_examples_jsonl(tgt_dev_ex, paths.target_dev_examples)
    save_vocab(vocab, paths.vocab)
    summary = {
        "snapshot": snapshot,
        "n_source_passages": len(src_train_p) + len(src_dev_p),
        "n_target_passages": len(tgt_train_p) + len(tgt_dev_p),
        "n_source_examples": len(src_train_ex) + len(src_dev_ex),
        "n_target_examples": len(tgt_train_ex) + len(tgt_dev_ex),
        "n_dropped": stats.n_dropped,
        "vocab_size": len(vocab),
    }
    write_json_atomic(summary, paths.prepare_summary)
    print(f"prepare: {summary['n_source_passages']} source passages, "
          f"{summary['n_target_passages']} target passages, "
          f"{summary['n_dropped']} dropped examples, vocab {len(vocab)}")
    return EXIT_OK


def _load_prepared(cfg: RunConfig, paths: RunPaths):
    _require(paths.vocab, "adamrc prepare")
    ann = _annotator(cfg)
    vocab = load_vocab(paths.vocab)
    for name, dim in (("qgen.word_dim", cfg.qgen.word_dim),
                      ("mrc.word_dim", cfg.mrc.word_dim)):
        if dim != vocab.embedding_dim:
            raise UsageError(
                f"{name}={dim} does not match corpus.embedding_dim="
                f"{vocab.embedding_dim}")
    src_train_p = load_passages_jsonl(paths.source_train)
    src_train_ex = load_examples_jsonl(paths.source_train_examples,
                                       src_train_p, annotator=ann)
    src_dev_p = load_passages_jsonl(paths.source_dev)
    src_dev_ex = load_examples_jsonl(paths.source_dev_examples, src_dev_p,
                                     annotator=ann)
    tgt_train_p = load_passages_jsonl(paths.target_train)
    tgt_dev_p = load_passages_jsonl(paths.target_dev)
    tgt_dev_ex = load_examples_jsonl(paths.target_dev_examples, tgt_dev_p,
                                     annotator=ann)
    return vocab, src_train_ex, src_dev_ex, tgt_train_p, tgt_dev_ex


def cmd_train_qg(cfg: RunConfig, paths: RunPaths) -> int:
    vocab, src_train_ex, _, _, _ = _load_prepared(cfg, paths)
    model = QGenerator(cfg.qgen, vocab, _embedding_table(cfg, vocab))
    history = train_qgen(model, src_train_ex, cfg.train)
    with open(paths.qg_log + ".tmp", "w", encoding="utf-8") as fh:
        for epoch, nll in enumerate(history.epoch_nll):
            fh.write(json.dumps({"epoch": epoch, "nll": nll}) + "\n")
    os.replace(paths.qg_log + ".tmp", paths.qg_log)
    manifest = {"config": cfg.to_dict(), "epoch": len(history.epoch_nll) - 1,
                "dev_metrics": {"train_nll": history.epoch_nll[-1]}}
    save_checkpoint(module_params(model, "qgen."), manifest, paths.qg_ckpt)
    print(f"train-qg: final NLL {history.epoch_nll[-1]:.4f} "
          f"-> {paths.qg_ckpt}")
    return EXIT_OK


def cmd_gen_questions(cfg: RunConfig, paths: RunPaths) -> int:
    vocab, _, _, tgt_train_p, _ = _load_prepared(cfg, paths)
    _require(paths.qg_ckpt, "adamrc train-qg")
    params, _ = load_checkpoint(paths.qg_ckpt)
    model = QGenerator(cfg.qgen, vocab)
    load_module_params(model, params, "qgen.")
    tgen = build_tgen(tgt_train_p, model, _annotator(cfg),
                      max_per_passage=cfg.corpus.max_per_passage,
                      seed=cfg.seed)
    tmp = paths.tgen + ".tmp"
    save_examples_jsonl(tgen, tmp)
    os.replace(tmp, paths.tgen)
    print(f"gen-questions: {len(tgen)} synthetic examples -> {paths.tgen}")
    return EXIT_OK


def cmd_train_source(cfg: RunConfig, paths: RunPaths) -> int:
    vocab, src_train_ex, src_dev_ex, _, _ = _load_prepared(cfg, paths)
    model = MRCModel(cfg.mrc, vocab, _embedding_table(cfg, vocab))
    with open(paths.source_log, "w", encoding="utf-8") as fh:
        result = train_source(model, src_train_ex, src_dev_ex, cfg.train,
                              log_stream=fh)
    manifest = checkpoint_manifest(cfg.train, result,
                                   {"config": cfg.to_dict()})
    save_checkpoint(result.params, manifest, paths.source_ckpt)
    print(f"train-source: best dev F1 {result.best_metrics['f1']:.2f} "
          f"(epoch {result.best_epoch}) -> {paths.source_ckpt}")
    return EXIT_OK


def _load_tgen(cfg: RunConfig, paths: RunPaths, tgt_train_p):
    _require(paths.tgen, "adamrc gen-questions")
    return load_examples_jsonl(paths.tgen, tgt_train_p,
                               annotator=_annotator(cfg))


def cmd_adapt(cfg: RunConfig, paths: RunPaths) -> int:
    vocab, src_train_ex, _, tgt_train_p, tgt_dev_ex = _load_prepared(cfg, paths)
    _require(paths.source_ckpt, "adamrc train-source")
    tgen = _load_tgen(cfg, paths, tgt_train_p)
    params, _ = load_checkpoint(paths.source_ckpt)
    model = MRCModel(cfg.mrc, vocab)
    load_module_params(model.encoder, params, "encoder.")
    load_module_params(model.answer_module, params, "decoder.")
    classifier = DomainClassifier(2 * cfg.mrc.hidden)

    ratio = cfg.train.semi_supervised_ratio
    with open(paths.adapt_log, "w", encoding="utf-8") as fh:
        if ratio > 0.0:
            tgt_train_ex = load_examples_jsonl(
                paths.target_train_examples, tgt_train_p,
                annotator=_annotator(cfg))
            if not tgt_train_ex:
                raise UsageError("semi-supervised ratio > 0 but no labeled "
                                 "target examples were prepared")
            result = adapt_semi_supervised(
                model, classifier, src_train_ex, tgt_train_ex, tgen,
                tgt_dev_ex, cfg.train, log_stream=fh)
        else:
            result = adapt(model, classifier, src_train_ex, tgen, tgt_dev_ex,
                           cfg.train, log_stream=fh)
    manifest = checkpoint_manifest(cfg.train, result,
                                   {"config": cfg.to_dict()})
    save_checkpoint(result.params, manifest, paths.adapted_ckpt)
    print(f"adapt: best target-dev F1 {result.best_metrics['f1']:.2f} "
          f"(epoch {result.best_epoch}) -> {paths.adapted_ckpt}")
    return EXIT_OK


def _load_mrc_checkpoint(cfg: RunConfig, paths: RunPaths, which: str,
                         vocab: Vocabulary) -> tuple[MRCModel, DomainClassifier | None]:
    ckpt = {"source": paths.source_ckpt, "adapted": paths.adapted_ckpt
            }.get(which, which)
    _require(ckpt, "adamrc train-source / adamrc adapt")
    params, _ = load_checkpoint(ckpt)
    model = MRCModel(cfg.mrc, vocab)
    load_module_params(model.encoder, params, "encoder.")
    load_module_params(model.answer_module, params, "decoder.")
    classifier = None
    if any(name.startswith("classifier.") for name in params):
        classifier = DomainClassifier(2 * cfg.mrc.hidden)
        load_module_params(classifier, params, "classifier.")
    return model, classifier


def cmd_eval(cfg: RunConfig, paths: RunPaths, which: str) -> int:
    vocab, _, src_dev_ex, _, tgt_dev_ex = _load_prepared(cfg, paths)
    model, _ = _load_mrc_checkpoint(cfg, paths, which, vocab)
    target = evaluate_model(model, tgt_dev_ex)
    source = evaluate_model(model, src_dev_ex)
    report = {"checkpoint": which, "seed": cfg.seed,
              "target_dev": target.to_dict(), "source_dev": source.to_dict()}
    write_json_atomic(report, paths.eval_report)
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_diagnose(cfg: RunConfig, paths: RunPaths, which: str,
                 n_samples: int) -> int:
    vocab, _, src_dev_ex, _, tgt_dev_ex = _load_prepared(cfg, paths)
    model, classifier = _load_mrc_checkpoint(cfg, paths, which, vocab)
    if classifier is None:
        torch.manual_seed(cfg.seed + 9000)
        classifier = DomainClassifier(2 * cfg.mrc.hidden)
    samples = collect_features(model, classifier, src_dev_ex + tgt_dev_ex,
                               n_samples, seed=cfg.seed)
    kl = domain_kl(samples)
    export_projection(samples, paths.projection)
    features = {f"feature.{i}": s.features for i, s in enumerate(samples)}
    manifest = {"config": cfg.to_dict(), "epoch": 0,
                "dev_metrics": {},
                "domains": [int(s.domain) for s in samples]}
    save_checkpoint(features, manifest, paths.features)
    payload = {"checkpoint": which, "domain_kl": kl,
               "n_samples": len(samples), "projection": paths.projection}
    write_json_atomic(payload, paths.diagnostics)
    print(json.dumps(payload, indent=2, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adamrc",
        description="Adversarial domain adaptation for extractive reading "
                    "comprehension")
    parser.add_argument("--config", help="flat section.key=value config file")
    parser.add_argument("--out", help="run directory (overrides run.output_dir)")
    parser.add_argument("--seed", type=int, default=None,
                        help="seed (falls back to ADAMRC_SEED)")
    parser.add_argument("--ks", type=int, default=None,
                        help="source items per adaptation batch")
    parser.add_argument("--kt", type=int, default=None,
                        help="target items per adaptation batch")
    parser.add_argument("--lambda-gamma", dest="lambda_gamma", type=float,
                        default=None, help="ramp steepness for the trade-off")
    parser.add_argument("--lr", type=float, default=None, help="learning rate")
    parser.add_argument("--dropout", type=float, default=None,
                        help="dropout rate")
    parser.add_argument("--epochs", type=int, default=None,
                        help="training epochs for the invoked stage")
    parser.add_argument("-v", "--verbose", action="store_true")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("prepare", help="build and cache annotated corpora")
    sub.add_parser("train-qg", help="train the question generator on source")
    sub.add_parser("gen-questions", help="synthesize target-domain QA pairs")
    sub.add_parser("train-source", help="pre-train the reader on source")
    sub.add_parser("adapt", help="adversarial fine-tuning on source + T_gen")
    p_eval = sub.add_parser("eval", help="evaluate a checkpoint")
    p_eval.add_argument("--checkpoint", default="adapted",
                        help="source | adapted | path")
    p_diag = sub.add_parser("diagnose",
                            help="feature diagnostics: KL + 2-D projection")
    p_diag.add_argument("--checkpoint", default="adapted")
    p_diag.add_argument("--n-samples", type=int, default=100)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        paths = RunPaths(cfg.output_dir)
        os.makedirs(cfg.output_dir, exist_ok=True)
        write_json_atomic(cfg.to_dict(), paths.config_snapshot)
        torch.manual_seed(cfg.seed)
        if args.command == "prepare":
            return cmd_prepare(cfg, paths)
        if args.command == "train-qg":
            return cmd_train_qg(cfg, paths)
        if args.command == "gen-questions":
            return cmd_gen_questions(cfg, paths)
        if args.command == "train-source":
            return cmd_train_source(cfg, paths)
        if args.command == "adapt":
            return cmd_adapt(cfg, paths)
        if args.command == "eval":
            return cmd_eval(cfg, paths, args.checkpoint)
        if args.command == "diagnose":
            return cmd_diagnose(cfg, paths, args.checkpoint, args.n_samples)
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, CheckpointError,
            corpus_mod.CorpusFormatError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingDiverged as e:
        print(f"error: training diverged: {e}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
