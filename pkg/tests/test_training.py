import dataclasses

import pytest

from storyqg.corpus import Corpus, HCD_TYPES, QuestionType
from storyqg.model import Seq2SeqModel
from storyqg.training import (
    TrainConfig,
    e2e_examples,
    qgen_examples,
    summarizer_examples,
    train_seq2seq,
)
from tests.conftest import TINY

NO_CONTROL = dataclasses.replace(TINY, use_control=False)


class TestExampleBuilders:
    def test_summarizer_inputs_carry_control_prefix(self, train_corpus, vocab):
        model = Seq2SeqModel(vocab, seed=41, config=TINY)
        examples = summarizer_examples(train_corpus, model)
        assert examples
        for ex in examples:
            assert ex.src_tokens[0].startswith("<") and ex.src_tokens[1].startswith("<")
            assert ex.graph.node_count == len(ex.src_tokens)
            assert ex.target_ids[-1] == vocab.eos_id

    def test_summarizer_targets_are_silver_statements(self, train_corpus, vocab):
        model = Seq2SeqModel(vocab, seed=41, config=TINY)
        examples = summarizer_examples(train_corpus, model)
        silver = {tuple(s.tokens) for p in train_corpus.paragraphs for s in p.silver}
        for ex in examples:
            assert tuple(ex.target_tokens) in silver

    def test_wo_tdl_target_is_concatenation(self, train_corpus, vocab):
        model = Seq2SeqModel(vocab, seed=42, config=NO_CONTROL)
        examples = summarizer_examples(train_corpus, model)
        assert len(examples) == len(train_corpus.paragraphs)
        p = train_corpus.paragraphs[0]
        expected = [tok for s in sorted(
            p.silver, key=lambda s: (HCD_TYPES.index(s.qtype), s.order_index))
            for tok in s.tokens]
        assert examples[0].target_tokens == expected
        assert examples[0].src_tokens == p.tokens

    def test_qgen_pairs_match_by_type_and_order(self, train_corpus, vocab):
        model = Seq2SeqModel(vocab, seed=43, config=TINY)
        examples = qgen_examples(train_corpus, model)
        questions = {tuple(q.question) for p in train_corpus.paragraphs for q in p.qa}
        assert examples
        for ex in examples:
            assert tuple(ex.target_tokens) in questions

    def test_per_type_filter(self, train_corpus, vocab):
        model = Seq2SeqModel(vocab, seed=44, config=TINY)
        causal_only = qgen_examples(train_corpus, model, qtype=QuestionType.CAUSAL)
        for ex in causal_only:
            assert ex.src_tokens[0] == "<causal>"

    def test_e2e_targets_concatenate_questions(self, train_corpus, vocab):
        model = Seq2SeqModel(vocab, seed=45, config=NO_CONTROL)
        examples = e2e_examples(train_corpus, model)
        p = train_corpus.paragraphs[0]
        n_questions = len(p.qa)
        assert examples[0].target_tokens.count("?") == n_questions

    def test_no_examples_rejected(self, vocab):
        model = Seq2SeqModel(vocab, seed=46, config=TINY)
        with pytest.raises(ValueError, match="example"):
            train_seq2seq(model, [], TrainConfig(epochs=1))


class TestTrainSeq2Seq:
    def test_loss_decreases_and_log_is_complete(self, train_corpus, vocab):
        model = Seq2SeqModel(vocab, seed=47, config=TINY)
        examples = qgen_examples(Corpus(train_corpus.paragraphs[:2]), model)
        log = train_seq2seq(model, examples, TrainConfig(epochs=12, lr=5e-3, seed=0))
        assert len(log) == 12
        assert log[-1]["mean_loss"] < log[0]["mean_loss"]
        assert log[0]["teacher_forcing"] == 1.0
        assert log[11]["teacher_forcing"] == pytest.approx(max(0.5, 1 - 11 / 20))

    def test_training_is_seed_deterministic(self, train_corpus, vocab):
        def run():
            model = Seq2SeqModel(vocab, seed=48, config=TINY)
            examples = qgen_examples(Corpus(train_corpus.paragraphs[:2]), model)
            train_seq2seq(model, examples, TrainConfig(epochs=5, lr=5e-3, seed=3))
            return b"".join(t.data.tobytes() for _, t in model.store.items())

        assert run() == run()
