"""Time the compiled and numpy likelihood kernels on the same data.

    python benchmarks/bench_kernels.py [--items 2000] [--raters 8] [--categories 4] [--repeat 50]
"""

import argparse
import timeit

import numpy as np

from raterfit import kernels
from raterfit.dataset import LongRatings, bundled
from raterfit.likelihood import compile_data


def synthetic(items, raters, categories, seed=0):
    rng = np.random.default_rng(seed)
    item = np.repeat(np.arange(items), raters)
    rater = np.tile(np.arange(raters), items)
    return LongRatings(
        n_categories=categories,
        rater_labels=tuple(str(j + 1) for j in range(raters)),
        item=item,
        rater=rater,
        rating=rng.integers(categories, size=item.size),
        item_labels=tuple(str(i + 1) for i in range(items)),
    )


def bench(name, dataset, repeat):
    data = compile_data(dataset)
    K, J = data.n_categories, data.n_raters
    rng = np.random.default_rng(1)
    log_pi = np.log(rng.dirichlet(np.ones(K)))
    log_theta = np.log(rng.dirichlet(np.ones(K), size=(J, K)))
    print(f"\n{name}: {data.n_units} units, J={J}, K={K}")
    times = {}
    for backend in kernels.AVAILABLE:
        kern = data.kernel(backend)
        kern.loglik_grad(log_pi, log_theta)
        t = min(timeit.repeat(lambda: kern.loglik_grad(log_pi, log_theta), number=repeat, repeat=5)) / repeat
        times[backend] = t
        print(f"  {backend:>7}: {t * 1e6:10.1f} us per loglik+gradient")
    if len(times) == 2:
        print(f"  speed-up: {times['python'] / times['cython']:.1f}x")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--items", type=int, default=2000)
    ap.add_argument("--raters", type=int, default=8)
    ap.add_argument("--categories", type=int, default=4)
    ap.add_argument("--repeat", type=int, default=50)
    args = ap.parse_args()
    print(f"backends available: {', '.join(kernels.AVAILABLE)} (default {kernels.BACKEND})")
    bench("anesthesia", bundled("anesthesia"), args.repeat)
    bench("caries (grouped)", bundled("caries"), args.repeat)
    bench("synthetic", synthetic(args.items, args.raters, args.categories), args.repeat)


if __name__ == "__main__":
    main()
