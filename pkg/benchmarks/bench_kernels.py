"""Compare the numba kernels against the pure-numpy path.

Times each kernel on transformer-shaped inputs after a warmup call (which
also absorbs numba compilation), verifies both paths agree numerically,
and prints one table row per kernel.

With ``--train-steps N`` it also times N full training steps on a small
model under whichever backend is active; run that twice with
``METAPHOR_FORGE_NUMBA=0`` and ``=1`` to compare end to end.

Run:  python3 benchmarks/bench_kernels.py [--repeats N] [--train-steps N]
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from metaphor_forge import kernels


def _agreement(a, b) -> float:
    if isinstance(a, tuple):
        return max(_agreement(x, y) for x, y in zip(a, b))
    return float(np.max(np.abs(np.asarray(a, dtype=np.float64) - b)))


def bench(name: str, make_args, repeats: int) -> None:
    np_fn = getattr(kernels.numpy_impl, name)
    nb_fn = getattr(kernels.numba_impl, name)

    args_np = make_args()
    args_nb = make_args()
    out_np = np_fn(*args_np)
    out_nb = nb_fn(*args_nb)  # warmup doubles as the compile step
    if name == "adam_update":
        # in-place kernel: compare the mutated parameter buffers
        delta = _agreement(args_np[0], args_nb[0])
    else:
        delta = _agreement(out_np, out_nb)

    t_np = min(timeit.repeat(lambda: np_fn(*make_args()), number=1, repeat=repeats))
    t_nb = min(timeit.repeat(lambda: nb_fn(*make_args()), number=1, repeat=repeats))
    speedup = t_np / t_nb if t_nb > 0 else float("inf")
    print(
        f"{name:24s} numpy {t_np * 1e3:9.3f} ms   numba {t_nb * 1e3:9.3f} ms   "
        f"x{speedup:5.2f}   max|delta| {delta:.3e}"
    )


def bench_train_steps(steps: int) -> None:
    from metaphor_forge import transformer as tf

    config = tf.TransformerConfig(
        vocab_size=256, encoder_layers=2, decoder_layers=2, heads=4,
        d_model=64, d_ff=256, max_len=24, dropout_rate=0.0, seed=0,
    )
    params = tf.init_params(config)
    state = tf.init_optimizer(params, base_rate=0.5, warmup_steps=100)
    rng = np.random.default_rng(7)
    batch = [
        (
            [tf.BOS_ID] + [int(t) for t in rng.integers(5, 256, size=16)] + [tf.EOS_ID],
            [tf.BOS_ID] + [int(t) for t in rng.integers(5, 256, size=16)] + [tf.EOS_ID],
        )
        for _ in range(16)
    ]
    tf.train_step(params, state, batch)  # warmup absorbs compilation
    elapsed = min(
        timeit.repeat(lambda: tf.train_step(params, state, batch), number=steps, repeat=1)
    )
    print(
        f"train_step x{steps} (batch 16, seq 18, d_model 64) under backend "
        f"{kernels.BACKEND!r}: {elapsed:.2f} s ({elapsed / steps * 1e3:.1f} ms/step)"
    )


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--train-steps", type=int, default=0,
                        help="also time N end-to-end training steps")
    args = parser.parse_args()

    if kernels.numba_impl is None:
        print("numba is not importable; nothing to compare")
        return 1
    print(f"active backend: {kernels.BACKEND}")

    rng = np.random.default_rng(7)
    rows, cols, dim, vocab = 4096, 64, 64, 4000

    scores = rng.normal(size=(rows, cols))
    scores[:, -8:] = -np.inf  # masked tail, as attention produces
    probs = kernels.numpy_impl.softmax_rows(scores)
    dprobs = rng.normal(size=(rows, cols))
    x = rng.normal(size=(rows, dim))
    gain = rng.normal(size=dim) + 1.0
    bias = rng.normal(size=dim)
    _, xhat, inv_std = kernels.numpy_impl.layernorm_forward(x, gain, bias, 1e-6)
    dy = rng.normal(size=(rows, dim))
    n_params = 1_000_000
    grad = rng.normal(size=n_params)
    logits = rng.normal(size=(2048, vocab))
    targets = rng.integers(0, vocab, size=2048)
    valid = (rng.random(2048) > 0.1).astype(np.float64)

    bench("softmax_rows", lambda: (scores.copy(),), args.repeats)
    bench("softmax_rows_backward", lambda: (probs.copy(), dprobs.copy()), args.repeats)
    bench("layernorm_forward", lambda: (x.copy(), gain, bias, 1e-6), args.repeats)
    bench("layernorm_backward", lambda: (dy.copy(), xhat.copy(), inv_std.copy(), gain), args.repeats)
    bench(
        "adam_update",
        lambda: (
            np.zeros(n_params),
            grad.copy(),
            np.zeros(n_params),
            np.zeros(n_params),
            1e-3, 0.9, 0.98, 1e-9, 1.0 / (1 - 0.9), 1.0 / (1 - 0.98),
        ),
        args.repeats,
    )
    bench("cross_entropy_rows", lambda: (logits.copy(), targets, valid.copy()), args.repeats)
    if args.train_steps > 0:
        bench_train_steps(args.train_steps)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
