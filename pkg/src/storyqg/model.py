"""Vocabulary and trainable model bundles.

A Seq2SeqModel ties one shared embedding table to a graph encoder and the
copy/coverage decoder; checkpoints are a params file plus a JSON sidecar
carrying the vocabulary and configuration.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .corpus import Corpus
from .decoder import DecoderConfig, DecoderParams, decode_greedy
from .encoders import EncoderConfig, EncoderOutput, GraphEncoder
from .graph import TokenGraph
from .numcore import ParamStore

UNK, BOS, EOS = "<unk>", "<bos>", "<eos>"

TYPE_TAGS = {"action": "<action>", "causal": "<causal>", "outcome": "<outcome>"}

_ORDER_WORDS = ["first", "second", "third", "fourth", "fifth",
                "sixth", "seventh", "eighth", "ninth", "tenth"]


def order_tag(order_index: int) -> str:
    """Control token for a 1-based order index."""
    if not 1 <= order_index <= len(_ORDER_WORDS):
        raise ValueError(f"order index {order_index} out of range 1..{len(_ORDER_WORDS)}")
    return f"<{_ORDER_WORDS[order_index - 1]}>"


class Vocabulary:
    """Token <-> id map with special and control tokens first.

    ``encode_extended`` assigns per-source ids beyond the base vocabulary to
    out-of-vocabulary source tokens so the copy mechanism can emit them.
    """

    def __init__(self, tokens: list[str], num_order_tags: int = 5):
        self.num_order_tags = num_order_tags
        specials = [UNK, BOS, EOS]
        specials += [TYPE_TAGS[t] for t in ("action", "causal", "outcome")]
        specials += [order_tag(i) for i in range(1, num_order_tags + 1)]
        words = sorted(set(tokens) - set(specials))
        self._tokens = specials + words
        self._ids = {tok: i for i, tok in enumerate(self._tokens)}
        self.unk_id = self._ids[UNK]
        self.bos_id = self._ids[BOS]
        self.eos_id = self._ids[EOS]

    @classmethod
    def from_corpus(cls, corpus: Corpus, num_order_tags: int = 5) -> "Vocabulary":
        toks: list[str] = []
        for p in corpus.paragraphs:
            toks.extend(p.tokens)
            for q in p.qa:
                toks.extend(q.question)
                toks.extend(q.answer)
            for s in p.silver:
                toks.extend(s.tokens)
        return cls(toks, num_order_tags)

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    @property
    def tokens(self) -> list[str]:
        return list(self._tokens)

    def id_of(self, token: str) -> int:
        return self._ids.get(token, self.unk_id)

    def token_of(self, idx: int) -> str:
        return self._tokens[idx]

    def encode(self, tokens: list[str]) -> np.ndarray:
        return np.array([self.id_of(t) for t in tokens], dtype=np.int64)

    def encode_extended(self, source_tokens: list[str]) -> tuple[np.ndarray, np.ndarray, list[str]]:
        """(base ids, extended ids, source OOV tokens in first-seen order)."""
        base = []
        ext = []
        oov: list[str] = []
        for tok in source_tokens:
            i = self._ids.get(tok)
            if i is None:
                base.append(self.unk_id)
                if tok not in oov:
                    oov.append(tok)
                ext.append(len(self._tokens) + oov.index(tok))
            else:
                base.append(i)
                ext.append(i)
        return (np.array(base, dtype=np.int64), np.array(ext, dtype=np.int64), oov)

    def encode_target(self, tokens: list[str], oov: list[str]) -> list[int]:
        """Extended-vocab target ids (OOVs resolve through the source list)."""
        out = []
        for tok in tokens:
            i = self._ids.get(tok)
            if i is None:
                out.append(len(self._tokens) + oov.index(tok) if tok in oov else self.unk_id)
            else:
                out.append(i)
        return out

    def decode_extended(self, ids: list[int], oov: list[str]) -> list[str]:
        return [self._tokens[i] if i < len(self._tokens) else oov[i - len(self._tokens)]
                for i in ids]


@dataclass
class ModelConfig:
    embed_dim: int = 64
    hidden_dim: int = 64
    layers: int = 2
    heads: int = 4
    attn_dim: int = 64
    leaky_slope: float = 0.2
    max_decode_len: int = 30
    use_control: bool = True  # expect <type> <order> prefixes on inputs

    def encoder_config(self) -> EncoderConfig:
        return EncoderConfig(embed_dim=self.embed_dim, hidden_dim=self.hidden_dim,
                             layers=self.layers, heads=self.heads,
                             leaky_slope=self.leaky_slope)

    def decoder_config(self) -> DecoderConfig:
        return DecoderConfig(embed_dim=self.embed_dim, hidden_dim=self.hidden_dim,
                             attn_dim=self.attn_dim)


class Seq2SeqModel:
    """Graph encoder + copy/coverage decoder over one shared vocabulary."""

    def __init__(self, vocab: Vocabulary, seed: int, config: ModelConfig | None = None):
        self.vocab = vocab
        self.config = config or ModelConfig()
        self.store = ParamStore(seed)
        self.encoder = GraphEncoder(self.store, len(vocab), self.config.encoder_config())
        self.decoder = DecoderParams(self.store, self.encoder.embedding,
                                     self.encoder.output_dim, len(vocab),
                                     self.config.decoder_config())

    def encode(self, source_tokens: list[str], graph: TokenGraph) -> tuple[EncoderOutput, np.ndarray, list[str]]:
        base, ext, oov = self.vocab.encode_extended(source_tokens)
        return self.encoder.encode(base, graph), ext, oov

    def generate(self, source_tokens: list[str], graph: TokenGraph,
                 max_len: int | None = None, trace: list | None = None) -> list[str]:
        """Greedy decode; returns surface tokens (copied OOVs included)."""
        enc_out, ext, oov = self.encode(source_tokens, graph)
        ids = decode_greedy(enc_out.final, self.decoder, ext,
                            len(self.vocab) + len(oov),
                            max_len or self.config.max_decode_len,
                            self.vocab.bos_id, self.vocab.eos_id,
                            self.vocab.unk_id, trace=trace)
        return self.vocab.decode_extended(ids, oov)

    def save(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        self.store.save(out / "params.npz")
        meta = {
            "kind": "seq2seq",
            "seed": self.store.seed,
            "config": asdict(self.config),
            "num_order_tags": self.vocab.num_order_tags,
            "vocab": self.vocab.tokens,
        }
        (out / "meta.json").write_text(json.dumps(meta, sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, in_dir) -> "Seq2SeqModel":
        src = Path(in_dir)
        meta = json.loads((src / "meta.json").read_text(encoding="utf-8"))
        vocab = Vocabulary(meta["vocab"], num_order_tags=meta["num_order_tags"])
        model = cls(vocab, meta["seed"], ModelConfig(**meta["config"]))
        loaded = ParamStore.load(src / "params.npz")
        for name, tensor in model.store.items():
            tensor.data[...] = loaded.get(name).data
        return model
