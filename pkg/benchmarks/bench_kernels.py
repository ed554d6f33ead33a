"""Benchmark: compiled distance kernels vs the pure-NumPy fallback.

Times the signed-distance query on random convex pairs (the hot kernel of
demo generation and rollouts) and a full hallway rollout, on both backends.

Run:  python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from lyapmotion import _kernels
from lyapmotion._kernels import pyfallback


def random_polygon(rng, n, center):
    angles = np.sort(rng.uniform(0, 2 * np.pi, size=n))
    radii = rng.uniform(0.4, 1.0, size=n)
    pts = np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])
    return np.ascontiguousarray(pts + center)


def random_box(rng, center):
    h = rng.uniform(0.3, 0.8, size=3)
    corners = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)])
    return np.ascontiguousarray(corners * h + center)


def bench_pairs(impl, pairs, repeat):
    t0 = time.perf_counter()
    for _ in range(repeat):
        for va, vb in pairs:
            impl.signed_distance(va, vb)
    return (time.perf_counter() - t0) / (repeat * len(pairs))


def bench_rollout(n_repeats=3):
    from lyapmotion import demogen, envs, lyapnet, policy

    scene = envs.builtin_scene("hallway")
    ds_starts = demogen.grid_starts(scene, (15, 7))[:10]
    cfg = lyapnet.TrainConfig(layer_sizes=(2, 32, 32, 1), epochs=5, batch_size=256, seed=0)
    demo_cfg = demogen.SolverConfig(seed=0)
    dataset = demogen.generate_dataset(scene, ds_starts[:4], demo_cfg, seed=0)
    model, _ = lyapnet.train(dataset, scene, cfg)
    pcfg = policy.PolicyConfig(xdot_max=1.0, dt=0.035,
                               goal_tolerance=0.01 * scene.diameter(), max_steps=600)
    sg = envs.SceneGeometry(scene)
    t0 = time.perf_counter()
    for _ in range(n_repeats):
        for x0 in ds_starts:
            policy.rollout(scene, model, x0, pcfg, _sg=sg)
    return (time.perf_counter() - t0) / (n_repeats * len(ds_starts))


def main():
    rng = np.random.default_rng(99)
    pairs_2d = [(random_polygon(rng, int(rng.integers(3, 11)), rng.uniform(-2, 2, 2)),
                 random_polygon(rng, int(rng.integers(3, 11)), rng.uniform(-2, 2, 2)))
                for _ in range(200)]
    pairs_3d = [(random_box(rng, rng.uniform(-2, 2, 3)),
                 random_box(rng, rng.uniform(-2, 2, 3)))
                for _ in range(200)]

    impls = [("python ", pyfallback)]
    if _kernels.BACKEND == "compiled":
        from lyapmotion._kernels import _core

        impls.append(("compiled", _core))
    else:
        print("compiled backend unavailable; timing the fallback only")

    print(f"{'backend':10s} {'sd 2D':>12s} {'sd 3D':>12s}")
    timings = {}
    for name, impl in impls:
        t2 = bench_pairs(impl, pairs_2d, repeat=5)
        t3 = bench_pairs(impl, pairs_3d, repeat=5)
        timings[name] = (t2, t3)
        print(f"{name:10s} {t2 * 1e6:9.1f} us {t3 * 1e6:9.1f} us")
    if len(timings) == 2:
        a, b = timings["python "], timings["compiled"]
        print(f"{'speedup':10s} {a[0] / b[0]:10.1f}x {a[1] / b[1]:10.1f}x")

    t_roll = bench_rollout()
    print(f"\nhallway rollout ({_kernels.BACKEND} backend): {t_roll * 1e3:.1f} ms/rollout")


if __name__ == "__main__":
    main()
