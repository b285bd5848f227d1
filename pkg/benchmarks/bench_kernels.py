"""Time the numba and pure-numpy raster kernels side by side.

    python benchmarks/bench_kernels.py --sizes 64 128 256 --repeat 5

Both backends are called directly, so the CPLOSS_DISABLE_NUMBA flag does not
matter here. Every timed pair is also checked for identical output.
"""
import argparse
import timeit

import numpy as np

from cploss import _kernels as K
from cploss._accel import numba
from cploss.synth import SceneConfig, gen_scene


def inputs(size, seed):
    rng = np.random.default_rng(seed)
    sparse = rng.random((size, size)) < 0.002
    _, gt = gen_scene(SceneConfig(size=max(size, 64), seed=seed))
    gt = gt[:size, :size]
    thick = np.zeros((size, size), bool)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            thick |= np.roll(np.roll(gt, dy, 0), dx, 1)
    blobs = rng.random((size, size)) < 0.45
    return {"edt": sparse, "thin": thick, "label": blobs}


def kernels():
    return {
        "edt": (lambda m: K.edt_sq_nb(m), lambda m: K.edt_sq_np(m)),
        "thin": (lambda m: K.thin_nb(m, K.DELETABLE), lambda m: K.thin_np(m, K.DELETABLE)),
        "label": (lambda m: K.label_nb(m, True), lambda m: K.label_np(m, True)),
    }


def best_of(fn, arg, repeat):
    return min(timeit.repeat(lambda: fn(arg), number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[64, 128, 256])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if numba is None:
        raise SystemExit("numba is not installed; nothing to compare")

    print(f"{'kernel':<8}{'size':>6}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}")
    for size in args.sizes:
        data = inputs(size, args.seed)
        for name, (nb, npy) in kernels().items():
            m = np.ascontiguousarray(data[name])
            a, b = nb(m), npy(m)  # also triggers compilation
            if name == "label":
                assert a[1] == b[1] and np.array_equal(a[0], b[0]), name
            else:
                assert np.array_equal(a, b), name
            t_nb = best_of(nb, m, args.repeat) * 1e3
            t_np = best_of(npy, m, args.repeat) * 1e3
            print(f"{name:<8}{size:>6}{t_nb:>12.3f}{t_np:>12.3f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
