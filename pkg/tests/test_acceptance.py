"""Acceptance suite: every criterion as one test at its stated tolerance.

The three experiment pipelines run once per session (shared fixtures) via
the CLI, exactly as a user would invoke them. Run with ``-v`` to get the
one-line pass/fail report per criterion; the pipelines dominate runtime.
"""

import json
import time

import numpy as np
import pytest

from lyapmotion import cli, demogen, envs, evaluate, geometry, lyapnet, policy

import oracles

pytestmark = pytest.mark.acceptance


def _run_experiment(name, seed, out_dir):
    rc = cli.main(["experiment", name, "--seed", str(seed), "--out-dir", str(out_dir)])
    report = json.loads((out_dir / "report.json").read_text())
    return rc, report


@pytest.fixture(scope="session")
def hallway_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("hallway")
    t0 = time.time()
    rc, report = _run_experiment("hallway", 7, out)
    return {"rc": rc, "report": report, "dir": out, "runtime": time.time() - t0}


@pytest.fixture(scope="session")
def cross_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("cross")
    rc, report = _run_experiment("cross", 7, out)
    return {"rc": rc, "report": report, "dir": out}


@pytest.fixture(scope="session")
def shelf_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("shelf")
    rc, report = _run_experiment("shelf", 7, out)
    return {"rc": rc, "report": report, "dir": out}


class TestGeometryOracle:
    def test_signed_distance_matches_brute_force(self):
        t0 = time.time()
        rng = np.random.default_rng(2024)
        worst = 0.0
        for _ in range(200):
            off = rng.uniform(-2.5, 2.5, size=2)
            va = oracles.random_convex_polygon(rng)
            vb = oracles.random_convex_polygon(rng, center=off)
            sd = geometry.signed_distance(
                geometry.ConvexHull(va), geometry.ConvexHull(vb)).signed_distance
            worst = max(worst, abs(sd - oracles.signed_distance_oracle(va, vb)))
        for _ in range(50):
            off = rng.uniform(-2.2, 2.2, size=3)
            va = oracles.random_convex_polytope(rng)
            vb = oracles.random_convex_polytope(rng, center=off)
            sd = geometry.signed_distance(
                geometry.ConvexHull(va), geometry.ConvexHull(vb)).signed_distance
            worst = max(worst, abs(sd - oracles.signed_distance_oracle(va, vb)))
        elapsed = time.time() - t0
        assert worst <= 1e-3, f"worst oracle gap {worst:.2e}"
        assert elapsed < 30.0, f"oracle check took {elapsed:.1f}s"


class TestGammaBoundary:
    def _square(self, cx, cy):
        return geometry.ConvexHull(np.array(
            [[cx - .5, cy - .5], [cx + .5, cy - .5], [cx + .5, cy + .5], [cx - .5, cy + .5]]))

    def test_touching_pairs(self):
        for (ax, ay, bx, by) in ((0, 0, 1, 0), (0, 0, 0, 1), (2, 1, 3, 1)):
            a, b = self._square(ax, ay), self._square(bx, by)
            g = geometry.gamma(a, b)
            assert abs(g - 1.0) <= 1e-6
            ctx = policy.modulation_matrix(a, b)
            assert abs(ctx.eigen[0, 0]) <= 1e-6          # lambda_r = 0
            assert abs(ctx.eigen[1, 1] - 2.0) <= 1e-6    # lambda_e = 2

    def test_far_pairs_near_identity(self):
        for dist in (101.0, 300.0, 1000.0):
            ctx = policy.modulation_matrix(self._square(0, 0), self._square(dist, 0))
            assert ctx.gamma >= 100.0
            assert np.abs(ctx.modulation - np.eye(2)).max() <= 2.0 / ctx.gamma


class TestNestedGradients:
    def test_loss_and_value_gradients(self):
        t0 = time.time()
        # d(loss)/dtheta on a (2,4,1) network, batch of 3, vs central FD
        params = lyapnet.init_params((2, 4, 1), seed=11)
        model = lyapnet.LyapunovModel(params, np.array([0.1, -0.2]))
        cfg = lyapnet.TrainConfig(epsilon=0.05, lambda1=3.0, lambda2=5.0)
        rng = np.random.default_rng(13)
        X = model.goal + rng.uniform(0.3, 1.5, size=(3, 2)) * rng.choice([-1, 1], size=(3, 2))
        batch = (X, rng.normal(size=(3, 2)), X + 0.1 * rng.normal(size=(3, 2)))
        _, _, gw, gb = lyapnet.training_loss_and_grads(model, batch, cfg)
        h = 1e-6
        for l in range(len(params.weights)):
            for arr, grad in ((params.weights[l], gw[l]), (params.biases[l], gb[l])):
                it = np.nditer(arr, flags=["multi_index"])
                for _ in it:
                    idx = it.multi_index
                    orig = arr[idx]
                    arr[idx] = orig + h
                    up, _ = lyapnet.training_loss(
                        lyapnet.LyapunovModel(params.copy(), model.goal), batch, cfg)
                    arr[idx] = orig - h
                    dn, _ = lyapnet.training_loss(
                        lyapnet.LyapunovModel(params.copy(), model.goal), batch, cfg)
                    arr[idx] = orig
                    fd = (up - dn) / (2 * h)
                    assert grad[idx] == pytest.approx(fd, rel=1e-3, abs=1e-7)

        # grad_x V vs central differences at 100 random states
        model = lyapnet.LyapunovModel(lyapnet.init_params((2, 24, 24, 1), seed=3),
                                      np.array([0.4, 0.2]))
        h = 1e-5
        count = 0
        while count < 100:
            x = model.goal + rng.uniform(-2, 2, size=2)
            if np.linalg.norm(x - model.goal) < 0.2:
                continue
            count += 1
            g = lyapnet.lyapunov_gradient(model, x)
            fd = np.empty(2)
            for k in range(2):
                e = np.zeros(2)
                e[k] = h
                fd[k] = (lyapnet.lyapunov_value(model, x + e)
                         - lyapnet.lyapunov_value(model, x - e)) / (2 * h)
            assert np.linalg.norm(g - fd) <= 1e-4 * max(1.0, np.linalg.norm(g))
        assert time.time() - t0 < 10.0


def _pipeline_asserts(run, scene_name, min_demos):
    report = run["report"]
    dataset = demogen.load_dataset(run["dir"] / "dataset.jsonl")
    assert len(dataset.demos) >= min_demos
    assert report["training"]["status"] == "valid"
    final = report["training"]["final_report"]
    assert final["positivity_violations"] == 0
    assert final["decrease_violations"] == 0
    grid = report["grid_rollouts"]
    scene = envs.builtin_scene(scene_name)
    delta = 0.01 * scene.diameter()
    assert grid["reach_rate"] == 1.0
    assert all(r["steps"] <= 2000 for r in grid["rows"])
    assert all(r["final_distance"] <= delta for r in grid["rows"])
    assert grid["collision_steps"] == 0
    assert grid["min_sd"] >= 0.0


class TestHallwayPipeline:
    def test_exactly_75_demos(self, hallway_run):
        dataset = demogen.load_dataset(hallway_run["dir"] / "dataset.jsonl")
        assert len(dataset.demos) == 75

    def test_certificate_reach_and_no_collisions(self, hallway_run):
        _pipeline_asserts(hallway_run, "hallway", 75)

    def test_runtime_budget(self, hallway_run):
        assert hallway_run["runtime"] < 30 * 60


class TestCrossPipeline:
    def test_certificate_reach_and_no_collisions(self, cross_run):
        _pipeline_asserts(cross_run, "cross", 300)


class TestShelfPipeline:
    def test_certificate_reach_and_no_collisions(self, shelf_run):
        _pipeline_asserts(shelf_run, "shelf", 100)

    def test_v_traces_monotone_and_terminal(self, shelf_run):
        traces = json.loads((shelf_run["dir"] / "vtraces.json").read_text())["traces"]
        assert traces
        for t in traces:
            assert t["max_step_increase"] <= 1e-6
            assert t["terminal"] <= 0.01


class TestBaselineInequality:
    def test_hallway_model_beats_baseline(self, hallway_run):
        cmp_ = hallway_run["report"]["compare"]
        assert cmp_["model"]["mse_unit"] < cmp_["baseline"]["mse_unit"]

    def test_cross_model_beats_baseline(self, cross_run):
        cmp_ = cross_run["report"]["compare"]
        assert cmp_["model"]["mse_unit"] < cmp_["baseline"]["mse_unit"]


class TestPerturbationRecovery:
    def test_twenty_seeded_kicks_recover(self, shelf_run):
        scene = envs.builtin_scene("shelf")
        model = lyapnet.load_model(shelf_run["dir"] / "model.json")
        dataset = demogen.load_dataset(shelf_run["dir"] / "dataset.jsonl")
        demo_states = np.vstack([d.positions for d in dataset.demos])
        sg = envs.SceneGeometry(scene)
        preset = cli._experiment_preset("shelf")
        pcfg = cli._policy_config(scene, preset["rollout"])
        diameter = scene.diameter()
        rng = np.random.default_rng(424242)
        starts = [d.positions[0] for d in dataset.demos]

        def inside_demonstrated_region(x):
            if np.any(x < scene.pos_lower) or np.any(x > scene.pos_upper):
                return False
            if sg.min_clearance(x) < scene.d_safe:
                return False
            near = np.linalg.norm(demo_states - x, axis=1).min()
            return near <= 0.1 * diameter

        recovered = 0
        for trial in range(20):
            x0 = starts[int(rng.integers(len(starts)))]
            base = policy.rollout(scene, model, x0, pcfg, _sg=sg)
            assert base.reached
            step = int(rng.integers(5, max(6, base.steps // 2)))
            for _ in range(200):
                direction = rng.normal(size=3)
                direction /= np.linalg.norm(direction)
                delta = direction * rng.uniform(0.03, 0.1) * diameter
                if inside_demonstrated_region(base.states[step] + delta):
                    break
            else:
                pytest.fail("could not sample a valid kick")
            res = policy.perturb_rollout(scene, model, x0, pcfg, [(step, delta)])
            if res.reached:
                recovered += 1
        assert recovered == 20


class TestDeterminism:
    def test_hallway_artifacts_byte_identical(self, hallway_run, tmp_path_factory):
        out2 = tmp_path_factory.mktemp("hallway_repeat")
        rc, _ = _run_experiment("hallway", 7, out2)
        for name in ("dataset.jsonl", "model.json", "report.json"):
            a = (hallway_run["dir"] / name).read_bytes()
            b = (out2 / name).read_bytes()
            assert a == b, f"{name} differs between identical runs"
