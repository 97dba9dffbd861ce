"""Command-line entry point: prepare, train, generate, evaluate, gradcheck.

Runs are reproducible: every output artifact embeds the full run
configuration, and identical configurations (seed included) produce
byte-identical outputs on one platform.

Exit codes: 0 ok, 1 usage, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from . import decoder as decoder_mod
from . import encoders as encoders_mod
from .corpus import (
    Corpus,
    CorpusError,
    QuestionType,
    build_silver,
    corpus_stats,
    filter_hcd,
    load_corpus,
    save_corpus,
)
from .corpus import HCD_TYPES
from .evaluate import concat_protocol, max_match_protocol, type_kl_report
from .generation import (
    BASELINE_MODES,
    PipelineError,
    PipelineModels,
    PipelineOutput,
    PipelineItem,
    e2e_generate,
    extract_baseline,
    generate_questions,
    postfilter_flags,
    read_outputs,
    run_pipeline,
    textrank_summary,
    wo_tdl_generate,
    write_outputs,
)
from .graph import build_token_graph
from .model import ModelConfig, Seq2SeqModel, Vocabulary
from .numcore import NonFiniteGradient, grad_check, run_registry
from .training import (
    TrainConfig,
    e2e_examples,
    qgen_examples,
    summarizer_examples,
    train_seq2seq,
)
from .typedist import TypePredictor, append_pseudo_label, train_typedist

GRAD_TOL = 1e-4

GENERATE_MODES = ("pipeline", "wo-tdl", "e2e", "textrank") + BASELINE_MODES


@dataclass
class RunConfig:
    seed: int = 0
    embed_dim: int = 64
    hidden_dim: int = 64
    attn_dim: int = 64
    heads: int = 4
    layers: int = 2
    gamma: float = 0.7
    lam_cov: float = 1.0
    cov_start_epoch: int = 5
    ss_floor: float = 0.5
    ss_decay: float = 0.05
    lr: float = 2e-3
    epochs_typedist: int = 500
    epochs_summarizer: int = 200
    epochs_qgen: int = 120
    epochs_e2e: int = 200
    num_order_tags: int = 5
    model_sharing: str = "shared"  # shared | per-type
    tdl: str = "with-tdl"          # with-tdl | wo-tdl
    max_decode_len: int = 30
    e2e_max_len: int = 100
    textrank_k: int = 3
    split: str = "train"

    def as_dict(self) -> dict:
        return asdict(self)

    def model_config(self, use_control: bool = True, max_decode_len: int | None = None) -> ModelConfig:
        return ModelConfig(
            embed_dim=self.embed_dim, hidden_dim=self.hidden_dim,
            layers=self.layers, heads=self.heads, attn_dim=self.attn_dim,
            max_decode_len=max_decode_len or self.max_decode_len,
            use_control=use_control)

    def train_config(self, epochs: int, seed_offset: int = 0) -> TrainConfig:
        return TrainConfig(epochs=epochs, lr=self.lr, lam_cov=self.lam_cov,
                           cov_start_epoch=self.cov_start_epoch,
                           ss_floor=self.ss_floor, ss_decay=self.ss_decay,
                           seed=self.seed + seed_offset)


def load_run_config(path) -> RunConfig:
    """Flat key=value text; unknown keys rejected, values coerced by field type."""
    cfg = RunConfig()
    types = {f.name: type(getattr(cfg, f.name)) for f in fields(cfg)}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CorpusError(f"config line {lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in types:
            raise CorpusError(f"config line {lineno}: unknown key {key!r}")
        kind = types[key]
        try:
            setattr(cfg, key, kind(value) if kind is not bool else value.lower() == "true")
        except ValueError as exc:
            raise CorpusError(f"config line {lineno}: bad value for {key}: {exc}") from exc
    return cfg


# ---------------------------------------------------------------------------
# commands

def _load_prepared(out_dir: Path, stage: str) -> Corpus:
    path = out_dir / "filtered.jsonl"
    if not path.exists():
        raise CorpusError(f"stage {stage!r}: missing prepared corpus {path}; run prepare first")
    return load_corpus(path)


def cmd_prepare(args, cfg: RunConfig) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    corpus = build_silver(filter_hcd(load_corpus(args.inp)))
    header = cfg.as_dict()
    save_corpus(corpus, out_dir / "filtered.jsonl", header=header)
    with open(out_dir / "silver.jsonl", "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"_header": header}, sort_keys=True) + "\n")
        for p in corpus.paragraphs:
            for s in p.silver:
                fh.write(json.dumps({
                    "id": p.pid, "qtype": s.qtype.value, "order_index": s.order_index,
                    "tokens": s.tokens, "flagged": s.flagged}, sort_keys=True) + "\n")
    stats = corpus_stats(corpus)
    report = {"config": header, "stats": json.loads(stats.to_json())}
    (out_dir / "stats.json").write_text(json.dumps(report, sort_keys=True, indent=2),
                                        encoding="utf-8")
    print(f"prepared {len(corpus)} paragraphs -> {out_dir}")
    return 0


def _write_loss_curve(path: Path, log: list[dict], cfg: RunConfig) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"_header": cfg.as_dict()}, sort_keys=True) + "\n")
        for rec in log:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def _save_seq2seq(model: Seq2SeqModel, log: list[dict], out: Path, cfg: RunConfig) -> None:
    model.save(out)
    meta_path = out / "meta.json"
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    meta["run_config"] = cfg.as_dict()
    meta_path.write_text(json.dumps(meta, sort_keys=True), encoding="utf-8")
    _write_loss_curve(out / "loss_curve.jsonl", log, cfg)


def cmd_train(args, cfg: RunConfig) -> int:
    out_dir = Path(args.out)
    stage = args.stage
    train_corpus = _load_prepared(out_dir, stage).select_split("train")
    if not train_corpus.paragraphs:
        raise CorpusError(f"stage {stage!r}: no train-split paragraphs in prepared corpus")
    vocab = Vocabulary.from_corpus(train_corpus, num_order_tags=cfg.num_order_tags)

    if stage == "typedist":
        model = TypePredictor(vocab, seed=cfg.seed, config=cfg.model_config(), gamma=cfg.gamma)
        log = train_typedist(train_corpus, model, epochs=cfg.epochs_typedist, lr=cfg.lr)
        model.save(out_dir / "typedist")
        _write_loss_curve(out_dir / "typedist" / "loss_curve.jsonl", log, cfg)
        print(f"typedist: final mean KL {log[-1]['mean_kl']:.6f}")
        return 0

    if stage in ("summarizer", "qgen"):
        use_control = cfg.tdl == "with-tdl"
        build = summarizer_examples if stage == "summarizer" else qgen_examples
        epochs = cfg.epochs_summarizer if stage == "summarizer" else cfg.epochs_qgen
        suffix = "" if use_control else "_wo_tdl"
        if cfg.model_sharing == "per-type" and use_control:
            for ti, qtype in enumerate(HCD_TYPES):
                model = Seq2SeqModel(vocab, seed=cfg.seed + ti,
                                     config=cfg.model_config(use_control=True))
                examples = build(train_corpus, model, qtype=qtype)
                log = train_seq2seq(model, examples, cfg.train_config(epochs, seed_offset=ti))
                _save_seq2seq(model, log, out_dir / f"{stage}_{qtype.value}", cfg)
                print(f"{stage}[{qtype.value}]: final loss {log[-1]['mean_loss']:.4f}")
            return 0
        model = Seq2SeqModel(vocab, seed=cfg.seed, config=cfg.model_config(use_control=use_control))
        examples = build(train_corpus, model)
        log = train_seq2seq(model, examples, cfg.train_config(epochs))
        _save_seq2seq(model, log, out_dir / f"{stage}{suffix}", cfg)
        print(f"{stage}{suffix}: final loss {log[-1]['mean_loss']:.4f}")
        return 0

    if stage == "e2e":
        model = Seq2SeqModel(vocab, seed=cfg.seed, config=cfg.model_config(
            use_control=False, max_decode_len=cfg.e2e_max_len))
        examples = e2e_examples(train_corpus, model)
        log = train_seq2seq(model, examples, cfg.train_config(cfg.epochs_e2e))
        _save_seq2seq(model, log, out_dir / "e2e", cfg)
        print(f"e2e: final loss {log[-1]['mean_loss']:.4f}")
        return 0

    raise CorpusError(f"unknown training stage {stage!r}")


def _load_seq2seq(out_dir: Path, name: str, stage: str) -> Seq2SeqModel:
    path = out_dir / name
    if not (path / "meta.json").exists():
        raise CorpusError(f"stage {stage!r}: missing checkpoint {path}; train it first")
    return Seq2SeqModel.load(path)


class PerTypeRouter:
    """Duck-typed Seq2SeqModel that dispatches on the leading type tag."""

    def __init__(self, models: dict[str, Seq2SeqModel]):
        self.models = models
        any_model = next(iter(models.values()))
        self.vocab = any_model.vocab
        self.config = any_model.config

    def generate(self, tokens: list[str], graph, max_len=None, trace=None) -> list[str]:
        tag = tokens[0].strip("<>")
        if tag not in self.models:
            raise ValueError(f"no per-type model for control tag {tokens[0]!r}")
        return self.models[tag].generate(tokens, graph, max_len=max_len, trace=trace)


def _load_stage_model(out_dir: Path, stage: str, cfg: RunConfig, mode: str):
    if cfg.model_sharing == "per-type":
        return PerTypeRouter({
            t.value: _load_seq2seq(out_dir, f"{stage}_{t.value}", mode) for t in HCD_TYPES})
    return _load_seq2seq(out_dir, stage, mode)


def _baseline_outputs(corpus: Corpus, mode: str, qgen: Seq2SeqModel, cfg: RunConfig) -> list[PipelineOutput]:
    outputs = []
    for p in corpus.paragraphs:
        if mode == "textrank":
            sentences = textrank_summary(p.tokens, cfg.textrank_k)
        else:
            sentences = extract_baseline(p.tokens, mode, seed=cfg.seed)
        summaries = [(HCD_TYPES[0], i + 1, sent) for i, sent in enumerate(sentences)]
        questions = generate_questions(summaries, qgen)
        flags = postfilter_flags([q for _, _, q in questions])
        items = [PipelineItem(qtype=qt, order=order, summary=s, question=q,
                              kept=kept, filter_reason=reason)
                 for (qt, order, s), (_, _, q), (kept, reason) in zip(summaries, questions, flags)]
        outputs.append(PipelineOutput(paragraph_id=p.pid, distribution=None,
                                      counts=[len(items), 0, 0], items=items))
    return outputs


def cmd_generate(args, cfg: RunConfig) -> int:
    out_dir = Path(args.out)
    mode = args.mode
    corpus = _load_prepared(out_dir, f"generate:{mode}").select_split(cfg.split)
    if not corpus.paragraphs:
        raise CorpusError(f"generate: no paragraphs in split {cfg.split!r}")

    if mode == "pipeline":
        models = PipelineModels(
            typedist=TypePredictor.load(_require(out_dir / "typedist", mode)),
            summarizer=_load_stage_model(out_dir, "summarizer", cfg, mode),
            qgen=_load_stage_model(out_dir, "qgen", cfg, mode),
        )
        outputs = [run_pipeline(p, models) for p in corpus.paragraphs]
    elif mode == "wo-tdl":
        summarizer = _load_seq2seq(out_dir, "summarizer_wo_tdl", mode)
        qgen = _load_seq2seq(out_dir, "qgen_wo_tdl", mode)
        outputs = [wo_tdl_generate(p, summarizer, qgen) for p in corpus.paragraphs]
    elif mode == "e2e":
        model = _load_seq2seq(out_dir, "e2e", mode)
        outputs = []
        for p in corpus.paragraphs:
            g = build_token_graph(p.tokens, p.dep_heads, p.dep_labels, p.edu_spans, p.edu_heads)
            questions = e2e_generate(p.tokens, g, model, max_len=cfg.e2e_max_len)
            flags = postfilter_flags(questions)
            items = [PipelineItem(qtype=HCD_TYPES[0], order=i + 1, summary=[], question=q,
                                  kept=kept, filter_reason=reason)
                     for i, (q, (kept, reason)) in enumerate(zip(questions, flags))]
            outputs.append(PipelineOutput(paragraph_id=p.pid, distribution=None,
                                          counts=[len(items), 0, 0], items=items))
    elif mode in BASELINE_MODES or mode == "textrank":
        qgen = _load_seq2seq(out_dir, "qgen_wo_tdl", mode)
        outputs = _baseline_outputs(corpus, mode, qgen, cfg)
    else:
        raise CorpusError(f"unknown generation mode {mode!r}")

    out_path = out_dir / f"outputs_{mode.replace('-', '_')}.jsonl"
    write_outputs(outputs, out_path, header=cfg.as_dict())
    kept = sum(1 for o in outputs for it in o.items if it.kept)
    print(f"generated {kept} questions ({mode}) -> {out_path}")
    return 0


def _require(path: Path, stage: str) -> Path:
    if not (path / "meta.json").exists():
        raise CorpusError(f"stage {stage!r}: missing checkpoint {path}; train it first")
    return path


def cmd_evaluate(args, cfg: RunConfig) -> int:
    out_dir = Path(args.out)
    mode = args.mode
    outputs_path = Path(args.inp) if args.inp else out_dir / f"outputs_{mode.replace('-', '_')}.jsonl"
    if not outputs_path.exists():
        raise CorpusError(f"evaluate: missing outputs file {outputs_path}")
    gold_corpus = _load_prepared(out_dir, "evaluate").select_split(cfg.split)
    outputs = {o.paragraph_id: o for o in read_outputs(outputs_path)}

    per_paragraph = []
    concat_scores = []
    max_scores = []
    gold_counts = {}
    predicted = {}
    for p in gold_corpus.paragraphs:
        gold = [q.question for q in p.qa]
        out = outputs.get(p.pid)
        generated = out.questions() if out is not None else []
        c = concat_protocol(generated, gold)
        m = max_match_protocol(generated, gold)
        concat_scores.append(c)
        max_scores.append(m)
        record = {"id": p.pid, "concat": c.as_dict(), "max_match": m.as_dict()}
        if out is not None and out.distribution is not None:
            counts = p.question_counts()
            gold_counts[p.pid] = counts
            predicted[p.pid] = out.distribution
            record["true_distribution"] = append_pseudo_label(counts).probs.tolist()
            record["predicted_distribution"] = out.distribution.probs.tolist()
            record["recovered_counts"] = out.counts
        per_paragraph.append(record)

    def _mean(scores, attr):
        return sum(getattr(s, attr) for s in scores) / len(scores)

    report = {
        "config": cfg.as_dict(),
        "split": cfg.split,
        "mode": mode,
        "n_paragraphs": len(gold_corpus.paragraphs),
        "concat": {k: _mean(concat_scores, k) for k in ("precision", "recall", "f1")},
        "max_match": {k: _mean(max_scores, k) for k in ("precision", "recall", "f1")},
        "type_kl": type_kl_report(gold_counts, predicted) if gold_counts else None,
        "per_paragraph": per_paragraph,
    }
    report_path = Path(args.report) if args.report else out_dir / f"report_{mode.replace('-', '_')}.json"
    report_path.write_text(json.dumps(report, sort_keys=True, indent=2), encoding="utf-8")
    print(f"concat F1 {report['concat']['f1']:.4f} | max-match F1 {report['max_match']['f1']:.4f}"
          + (f" | type KL {report['type_kl']:.6f}" if report["type_kl"] is not None else ""))
    return 0


def run_gradcheck(trials: int = 100, extra_cases: dict | None = None,
                  max_coords: int | None = 8) -> tuple[dict[str, float], bool]:
    """Primitive registry plus the composite GAT-layer and decoder-step cases.

    Composite cases probe a sampled subset of coordinates per trial to keep
    the full run under the time budget.
    """
    results = run_registry(trials=trials, seed=0)
    composites = {"gat_layer": encoders_mod.gradcheck_case,
                  "decoder_step": decoder_mod.gradcheck_case}
    if extra_cases:
        composites.update(extra_cases)
    for name, build in composites.items():
        results[name] = grad_check(build, trials=trials, seed=0, max_coords=max_coords)
    ok = all(err < GRAD_TOL for err in results.values())
    return results, ok


def cmd_gradcheck(args, cfg: RunConfig) -> int:
    results, ok = run_gradcheck(trials=args.trials)
    width = max(len(k) for k in results)
    for name, err in results.items():
        status = "PASS" if err < GRAD_TOL else "FAIL"
        print(f"{name:<{width}}  {err:.3e}  {status}")
    print(f"{'ALL PASS' if ok else 'FAILURES PRESENT'} (tolerance {GRAD_TOL:g})")
    return 0 if ok else 3


# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="storyqg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key=value run-config file")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", required=True, help="workspace directory")

    p = sub.add_parser("prepare", parents=[common], help="filter corpus, build silver data, stats")
    p.add_argument("--in", dest="inp", required=True, help="input corpus (JSONL)")

    p = sub.add_parser("train", parents=[common], help="train one pipeline stage")
    p.add_argument("--stage", required=True,
                   choices=["typedist", "summarizer", "qgen", "e2e"])
    p.add_argument("--mode", choices=["shared", "per-type", "with-tdl", "wo-tdl"],
                   help="override model sharing / tdl flags")

    p = sub.add_parser("generate", parents=[common], help="run a generation mode")
    p.add_argument("--mode", default="pipeline", choices=list(GENERATE_MODES))

    p = sub.add_parser("evaluate", parents=[common], help="score outputs against gold")
    p.add_argument("--mode", default="pipeline", choices=list(GENERATE_MODES))
    p.add_argument("--in", dest="inp", help="outputs file (defaults to workspace)")
    p.add_argument("--report", help="report path (defaults to workspace)")

    p = sub.add_parser("gradcheck", parents=[common], help="finite-difference check of all ops")
    p.add_argument("--trials", type=int, default=100)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_run_config(args.config) if args.config else RunConfig()
        if args.seed is not None:
            cfg.seed = args.seed
        mode = getattr(args, "mode", None)
        if args.command == "train" and mode:
            if mode in ("shared", "per-type"):
                cfg.model_sharing = mode
            else:
                cfg.tdl = mode
        handler = {
            "prepare": cmd_prepare,
            "train": cmd_train,
            "generate": cmd_generate,
            "evaluate": cmd_evaluate,
            "gradcheck": cmd_gradcheck,
        }[args.command]
        return handler(args, cfg)
    except NonFiniteGradient as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except (ValueError, PipelineError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
