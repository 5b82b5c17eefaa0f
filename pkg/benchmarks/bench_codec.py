#!/usr/bin/env python3
"""Compare the compiled and pure-Python option codecs.

Encodes and decodes a corpus of representative option lists and reports
per-call latency and the speedup of the compiled backend.

    python3 benchmarks/bench_codec.py [--iterations N]
"""

import argparse
import random
import timeit

from minitcp import _codec_py

try:
    from minitcp import _codec as _codec_c
except ImportError:
    _codec_c = None


def make_corpus(n: int, seed: int = 7) -> list:
    rng = random.Random(seed)
    corpus = []
    for _ in range(n):
        pairs = []
        budget = 40
        for _ in range(rng.randint(0, 5)):
            payload = bytes(rng.randrange(256) for _ in range(rng.randint(0, 12)))
            if 2 + len(payload) > budget:
                break
            budget -= 2 + len(payload)
            pairs.append((rng.randint(2, 252), payload))
        corpus.append(pairs)
    return corpus


def bench(mod, corpus, iterations: int) -> tuple[float, float]:
    encoded = [mod.encode_option_bytes(pairs) for pairs in corpus]

    def run_encode():
        for pairs in corpus:
            mod.encode_option_bytes(pairs)

    def run_decode():
        for raw in encoded:
            mod.decode_option_bytes(raw)

    n_calls = iterations * len(corpus)
    t_enc = timeit.timeit(run_encode, number=iterations) / n_calls
    t_dec = timeit.timeit(run_decode, number=iterations) / n_calls
    return t_enc, t_dec


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--iterations", type=int, default=2000)
    parser.add_argument("--corpus-size", type=int, default=200)
    args = parser.parse_args()

    corpus = make_corpus(args.corpus_size)
    results = {"python": bench(_codec_py, corpus, args.iterations)}
    if _codec_c is not None:
        results["cython"] = bench(_codec_c, corpus, args.iterations)
    else:
        print("compiled backend not built; benchmarking pure Python only")

    print(f"{'backend':<10} {'encode ns/call':>16} {'decode ns/call':>16}")
    for name, (t_enc, t_dec) in results.items():
        print(f"{name:<10} {t_enc * 1e9:>16.0f} {t_dec * 1e9:>16.0f}")
    if "cython" in results:
        enc_speedup = results["python"][0] / results["cython"][0]
        dec_speedup = results["python"][1] / results["cython"][1]
        print(f"\nspeedup: encode {enc_speedup:.1f}x, decode {dec_speedup:.1f}x")


if __name__ == "__main__":
    main()
