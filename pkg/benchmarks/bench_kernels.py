"""Compare the numba and pure-numpy kernels.

    python3 benchmarks/bench_kernels.py [--repeat N]

Both code paths are imported directly, so the INTERPROMPT_DISABLE_NUMBA flag
does not matter here.
"""

import argparse
import statistics
import time

import numpy as np

from interprompt import kernels
from interprompt.losslab import LossConfig, _batch, _token_weights, toy_problem
from interprompt.prompts import PromptTemplate
from interprompt.synthetic import synthetic_posts


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times), statistics.median(times)


def lcs_cases(rng):
    for n in (12, 100, 1000):
        a = rng.integers(0, 20, n)
        b = rng.integers(0, 20, n)
        yield f"lcs n={n}", (a, b), kernels.lcs_length_np, kernels.lcs_length_jit


def toy_cases():
    for n_posts in (4, 50):
        model, records = toy_problem(synthetic_posts()[:n_posts], PromptTemplate())
        batch = _batch(model, records)
        w = _token_weights(batch, LossConfig())
        args = (model.W, model.U, batch.bags, batch.rec, batch.span, batch.prev, batch.nxt, w)
        label = f"loss+grad {n_posts} records, V={model.vocab_size}, {batch.n_tokens} tokens"
        yield label, args, kernels.toy_loss_grad_np, kernels.toy_loss_grad_jit


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args(argv)
    rng = np.random.default_rng(0)

    print(f"{'kernel':<52} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8}")
    for label, inputs, np_fn, jit_fn in (*lcs_cases(rng), *toy_cases()):
        jit_fn(*inputs)  # compile outside the timing
        np_best, _ = best_of(lambda: np_fn(*inputs), args.repeat)
        jit_best, _ = best_of(lambda: jit_fn(*inputs), args.repeat)
        print(f"{label:<52} {np_best * 1e3:>10.3f} {jit_best * 1e3:>10.3f} {np_best / jit_best:>7.1f}x")


if __name__ == "__main__":
    main()
