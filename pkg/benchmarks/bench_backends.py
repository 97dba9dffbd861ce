"""Compare the compiled kernel backend against the pure-numpy fallback.

Micro section times each kernel on both backends in-process; the macro
section reruns a short training workload in subprocesses with
STORYQG_BACKEND forced, since the backend binds at import time.

    python benchmarks/bench_backends.py [--macro-epochs 30]
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import time
import timeit

import numpy as np

from storyqg._kernels import kernels_py

try:
    from storyqg._kernels import kernels_cy
except ImportError:
    kernels_cy = None


def bench(fn, number=2000):
    return timeit.timeit(fn, number=number) / number * 1e6  # us/call


def micro_table():
    rng = np.random.default_rng(0)
    x64 = rng.normal(size=64)
    gy64 = rng.normal(size=64)
    gx64 = np.zeros(64)
    rows = rng.normal(size=(24, 24))
    mask = (rng.uniform(size=(24, 24)) > 0.3).astype(np.float64)
    mask[:, 0] = 1.0
    p = rng.normal(size=4096)
    g = rng.normal(size=4096)
    m = np.zeros(4096)
    v = np.zeros(4096)
    a_ids = rng.integers(0, 4, size=80).astype(np.int64)
    b_ids = rng.integers(0, 4, size=80).astype(np.int64)

    y64 = kernels_py.tanh(x64)
    cases = {
        "sigmoid(64)": lambda k: (lambda: k.sigmoid(x64)),
        "tanh_bwd(64)": lambda k: (lambda: k.tanh_bwd(y64, gy64, gx64)),
        "leaky_relu(64)": lambda k: (lambda: k.leaky_relu(x64, 0.2)),
        "minimum(64)": lambda k: (lambda: k.minimum(x64, gy64)),
        "softmax_rows(24x24,mask)": lambda k: (lambda: k.softmax_rows(rows, mask)),
        "adam_update(4096)": lambda k: (lambda: k.adam_update(p, g, m, v, 5, 1e-3, 0.9, 0.999, 1e-8)),
        "lcs_len(80,80)": lambda k: (lambda: k.lcs_len(a_ids, b_ids)),
    }
    print(f"{'kernel':<26} {'numpy us':>10} {'cython us':>10} {'speedup':>8}")
    for name, make in cases.items():
        t_py = bench(make(kernels_py))
        if kernels_cy is None:
            print(f"{name:<26} {t_py:>10.2f} {'n/a':>10} {'n/a':>8}")
            continue
        t_cy = bench(make(kernels_cy))
        print(f"{name:<26} {t_py:>10.2f} {t_cy:>10.2f} {t_py / t_cy:>7.1f}x")


MACRO_SNIPPET = """
import time
import numpy as np
from storyqg.corpus import build_silver, filter_hcd
from storyqg.fixtures import build_fixture_corpus
from storyqg.model import ModelConfig, Seq2SeqModel, Vocabulary
from storyqg.training import TrainConfig, summarizer_examples, train_seq2seq

corpus = build_silver(filter_hcd(build_fixture_corpus(n_train=8, n_val=0))).select_split("train")
vocab = Vocabulary.from_corpus(corpus)
cfg = ModelConfig(embed_dim=48, hidden_dim=48, attn_dim=48, layers=1, heads=2)
model = Seq2SeqModel(vocab, seed=3, config=cfg)
examples = summarizer_examples(corpus, model)
t0 = time.perf_counter()
train_seq2seq(model, examples, TrainConfig(epochs={epochs}, lr=3e-3, lam_cov=1.0, seed=0))
print(f"{{time.perf_counter() - t0:.2f}}")
"""


def macro(epochs: int):
    print(f"\nmacro: summarizer training, {epochs} epochs on an 8-paragraph fixture")
    results = {}
    for backend in ("python", "cython"):
        env = dict(os.environ, STORYQG_BACKEND=backend)
        proc = subprocess.run([sys.executable, "-c", MACRO_SNIPPET.format(epochs=epochs)],
                              capture_output=True, text=True, env=env)
        if proc.returncode != 0:
            print(f"  {backend}: failed ({proc.stderr.strip().splitlines()[-1]})")
            continue
        results[backend] = float(proc.stdout.strip())
        print(f"  {backend:<8} {results[backend]:.2f}s")
    if len(results) == 2:
        print(f"  speedup  {results['python'] / results['cython']:.2f}x")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--macro-epochs", type=int, default=30)
    parser.add_argument("--skip-macro", action="store_true")
    args = parser.parse_args()
    print(f"compiled backend available: {kernels_cy is not None}")
    micro_table()
    if not args.skip_macro:
        macro(args.macro_epochs)


if __name__ == "__main__":
    main()
