"""Time the numba kernels against their numpy twins.

    python benchmarks/bench_kernels.py [--repeat N]

Sizes match a full-resolution run: a 1816x1020 viewport sampled from a
4096x2048 ERI, a 2048x1024 label map, and the 181x102 mesh.
"""
import argparse
import timeit

import numpy as np

from glap import _kernels
from glap.mesh import VertexMesh


def cases(rng):
    eri = rng.random((2048, 4096, 3))
    n = 1816 * 1020
    u, v = rng.uniform(0, 4096, n), rng.uniform(0, 2048, n)
    lab = rng.integers(0, 4, (1024, 2048))
    lab[rng.random(lab.shape) < 0.6] = 0
    b = VertexMesh.uniform(181, 102).vertices
    f = b + rng.uniform(-3, 3, b.shape)
    m = b + rng.uniform(-1, 1, b.shape)
    cw = rng.random((102, 181))
    bounds = (0.5, 180.5, 0.5, 101.5)
    return {
        "bilinear 1816x1020 from 4096x2048": lambda: _kernels.bilinear_sample(eri, u, v, wrap=True),
        "connected components 2048x1024": lambda: _kernels.connected_components(lab, wrap=True),
        "mesh energy + gradient 181x102": lambda: _kernels.mesh_energy_terms(m, b, f, cw, bounds, True, -1),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = ["numba", "numpy"] if _kernels.HAVE_NUMBA else ["numpy"]
    work = cases(np.random.default_rng(0))
    print(f"{'kernel':40s} " + " ".join(f"{b:>10s}" for b in backends) + "    speed-up")
    for name, fn in work.items():
        times = []
        for b in backends:
            _kernels.set_backend(b)
            fn()  # compile / warm caches
            times.append(min(timeit.repeat(fn, number=1, repeat=args.repeat)))
        ratio = f"{times[1] / times[0]:9.1f}x" if len(times) == 2 else ""
        print(f"{name:40s} " + " ".join(f"{t * 1e3:8.1f}ms" for t in times) + f"   {ratio}")


if __name__ == "__main__":
    main()
