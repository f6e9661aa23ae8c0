"""Time the compiled and pure-Python kernels on identical inputs.

    python benchmarks/bench_kernels.py [--repeat N] [--bytes N]

Also times the end-to-end conceal/reveal path with the active backend.
"""

import argparse
import time

import numpy as np

from chaosveil import keyforge, kernels, pipeline, sift
from chaosveil.chaoscrypt import DEFAULT_DT, DEFAULT_TEMPLATE
from chaosveil.corpus import natural_texture
from chaosveil.imagecore import Image


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def kernel_cases(n_bytes):
    coeffs = DEFAULT_TEMPLATE.coefficients()
    img = natural_texture(7, 256)
    space = sift.build_scale_space(keyforge.key_stable(img).to_float())
    cand = sift.dog_extrema(space)
    cfg = sift.DEFAULT_CONFIG
    by_octave = {}
    for c in cand:
        by_octave.setdefault(c.octave, []).append((c.level, c.y, c.x))
    batches = [(space.dogs[o], np.asarray(rows, dtype=np.int64)) for o, rows in by_octave.items()]
    return {
        f"cnn_keystream ({n_bytes} bytes)":
            lambda b: b.cnn_keystream(0.1, 0.2, 0.3, 200, n_bytes, 3.7, 41.0, *coeffs, DEFAULT_DT),
        f"cnn_trajectory ({n_bytes} steps)":
            lambda b: b.cnn_trajectory(0.1, 0.2, 0.3, n_bytes, *coeffs, DEFAULT_DT),
        f"refine_extrema ({len(cand)} candidates)":
            lambda b: [b.refine_extrema(dog, rows, cfg.contrast, cfg.edge_r, cfg.max_hops)
                       for dog, rows in batches],
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--bytes", type=int, default=65536)
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    print(f"active backend: {kernels.BACKEND}")
    print(f"{'kernel':40s}" + "".join(f"{name:>12s}" for name in backends) + f"{'speedup':>10s}")
    for label, fn in kernel_cases(args.bytes).items():
        times = {name: best_of(lambda: fn(mod), args.repeat) for name, mod in backends.items()}
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{label:40s}" + "".join(f"{t * 1e3:10.2f}ms" for t in times.values())
              + f"{speed:9.1f}x")

    cover = natural_texture(11, 256)
    msg = Image(np.random.default_rng(0).integers(0, 256, (64, 64), dtype=np.uint8))
    t = best_of(lambda: pipeline.reveal(pipeline.conceal(cover, msg).stego), args.repeat)
    print(f"conceal+reveal 256x256 cover, 64x64 message: {t * 1e3:.1f} ms")


if __name__ == "__main__":
    main()
