"""Command-line entry point wiring scenes, demos, training, rollout, and eval.

Every run appends a manifest record (command, config hash, seeds, artifact
paths, wall clock) to ``manifests.jsonl`` next to its outputs. All
randomness flows from one root seed, split per stage by fixed labels, so
identical invocations produce byte-identical data artifacts.
"""

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import demogen, envs, evaluate, lyapnet, policy
from .errors import LyapmotionError

MANIFEST_NAME = "manifests.jsonl"


def stage_seed(root_seed, label):
    """Deterministic per-stage seed derived from the root seed."""
    digest = hashlib.sha256(f"{root_seed}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big") % (2**63)


def _config_hash(args):
    blob = json.dumps({k: v for k, v in sorted(vars(args).items()) if k != "func"},
                      default=str, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _write_manifest(out_dir, command, args, inputs, outputs, t0):
    record = {
        "command": command,
        "config_hash": _config_hash(args),
        "seed": getattr(args, "seed", None),
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "format_versions": {
            "scene": envs.SCENE_FORMAT,
            "dataset": demogen.DATASET_FORMAT,
            "model": lyapnet.MODEL_FORMAT,
        },
        "wall_clock_s": round(time.time() - t0, 3),
    }
    path = Path(out_dir) / MANIFEST_NAME
    with open(path, "a") as fh:
        fh.write(json.dumps(record) + "\n")


def _parse_counts(text):
    return tuple(int(v) for v in text.split(","))


def _parse_point(text):
    return np.asarray([float(v) for v in text.split(",")], dtype=np.float64)


def _experiment_preset(name):
    from importlib import resources

    ref = resources.files("lyapmotion").joinpath(f"presets/experiments/{name}.json")
    return json.loads(ref.read_text())


def _policy_config(scene, spec, overrides=None):
    overrides = overrides or {}
    tol = overrides.get("goal_tolerance", spec.get("goal_tolerance"))
    if tol is None:
        tol = 0.01 * scene.diameter()
    return policy.PolicyConfig(
        xdot_max=overrides.get("xdot_max", spec["xdot_max"]),
        dt=overrides.get("dt", spec["dt"]),
        goal_tolerance=tol,
        max_steps=int(overrides.get("max_steps", spec.get("max_steps", 2000))),
        modulation_enabled=overrides.get("modulation_enabled", True),
    )


def cmd_gen_demos(args):
    t0 = time.time()
    scene = envs.load_scene(args.scene)
    bounds = None
    if args.start_region:
        vals = [float(v) for v in args.start_region.split(",")]
        bounds = (vals[: scene.dim], vals[scene.dim:])
    starts = demogen.grid_starts(scene, _parse_counts(args.grid), bounds=bounds)
    cfg = demogen.SolverConfig(n_via=args.n_via, dt=args.dt, seed=stage_seed(args.seed, "demogen"))
    dataset = demogen.generate_dataset(scene, starts, cfg, stage_seed(args.seed, "demogen"),
                                       val_fraction=args.val_fraction)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    demogen.save_dataset(dataset, out)
    print(f"wrote {len(dataset.demos)} demos ({len(dataset.failures)} infeasible starts) to {out}")
    _write_manifest(out.parent, "gen-demos", args, [args.scene], [out], t0)
    return 0


def cmd_train(args):
    t0 = time.time()
    scene = envs.load_scene(args.scene)
    dataset = demogen.load_dataset(args.data)
    cfg = lyapnet.TrainConfig(
        epsilon=args.epsilon,
        lambda1=args.lambda1,
        lambda2=args.lambda2,
        learning_rate=args.learning_rate,
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=stage_seed(args.seed, "train"),
        multiplier_growth=args.multiplier_growth,
        layer_sizes=_parse_counts(args.arch) if args.arch else None,
    )
    model, history = lyapnet.train(dataset, scene, cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    lyapnet.save_model(model, out, train_config=cfg)
    final = history["final_report"]
    print(f"status={history['status']} positivity_violations={final['positivity_violations']} "
          f"decrease_violations={final['decrease_violations']}")
    if args.history_out:
        with open(args.history_out, "w") as fh:
            json.dump(history, fh, indent=1)
            fh.write("\n")
    _write_manifest(out.parent, "train", args, [args.scene, args.data], [out], t0)
    return 0 if history["status"] == "valid" else 1


def cmd_rollout(args):
    t0 = time.time()
    scene = envs.load_scene(args.scene)
    source = "baseline" if args.baseline else lyapnet.load_model(args.model)
    cfg = _policy_config(scene, {
        "xdot_max": args.xdot_max, "dt": args.dt,
        "goal_tolerance": args.goal_tolerance, "max_steps": args.max_steps,
        "modulation_enabled": not args.no_modulation,
    })
    result = policy.rollout(scene, source, _parse_point(args.start), cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    policy.rollout_to_csv(result, out)
    print(f"status={result.status} steps={result.steps} "
          f"min_sd={float(np.min(result.min_sd_trace)):.4f}")
    _write_manifest(out.parent, "rollout", args, [args.scene], [out], t0)
    return 0 if result.reached else 1


def cmd_eval(args):
    t0 = time.time()
    scene = envs.load_scene(args.scene)
    dataset = demogen.load_dataset(args.data)
    model = lyapnet.load_model(args.model)
    cfg = _policy_config(scene, {
        "xdot_max": args.xdot_max, "dt": args.dt,
        "goal_tolerance": args.goal_tolerance, "max_steps": args.max_steps,
    })
    if args.baseline:
        payload = evaluate.compare(model, scene, dataset, cfg, mse_split=args.split)
    else:
        payload = {"model": evaluate.build_eval_report(model, scene, dataset, cfg,
                                                       mse_split=args.split)}
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    evaluate.save_report(payload, out)
    mse = payload["model"].mse_unit
    msg = f"model mse_unit={mse:.5f} reach_rate={payload['model'].reach_rate:.3f}"
    if args.baseline:
        msg += (f" baseline mse_unit={payload['baseline'].mse_unit:.5f}"
                f" model_better={payload['model_better']}")
    print(msg)
    _write_manifest(out.parent, "eval", args, [args.scene, args.data, args.model], [out], t0)
    return 0


def cmd_export_field(args):
    t0 = time.time()
    scene = envs.load_scene(args.scene)
    model = lyapnet.load_model(args.model)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    policy.export_field(scene, model, _parse_counts(args.grid), out, xdot_max=args.xdot_max)
    print(f"wrote field grid {args.grid} to {out}")
    _write_manifest(out.parent, "export-field", args, [args.scene, args.model], [out], t0)
    return 0


def cmd_experiment(args):
    t0 = time.time()
    preset = _experiment_preset(args.preset)
    scene = envs.builtin_scene(preset["scene"])
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dg, tr, ro = preset["demogen"], preset["train"], preset["rollout"]

    bounds = dg.get("start_region")
    starts = demogen.grid_starts(scene, dg["grid"],
                                 bounds=tuple(bounds) if bounds else None)
    print(f"[1/5] generating {len(starts)} demonstrations")
    solver_cfg = demogen.SolverConfig(n_via=dg["n_via"], dt=dg["dt"],
                                      seed=stage_seed(args.seed, "demogen"))
    dataset = demogen.generate_dataset(scene, starts, solver_cfg,
                                       stage_seed(args.seed, "demogen"),
                                       val_fraction=preset["eval"]["val_fraction"])
    dataset_path = out_dir / "dataset.jsonl"
    demogen.save_dataset(dataset, dataset_path)

    print(f"[2/5] training {tr['arch']} for {tr['epochs']} epochs")
    train_cfg = lyapnet.TrainConfig(
        epsilon=tr["epsilon"], lambda1=tr["lambda1"], lambda2=tr["lambda2"],
        learning_rate=tr["learning_rate"], epochs=tr["epochs"],
        batch_size=tr["batch_size"], seed=stage_seed(args.seed, "train"),
        multiplier_growth=tr["multiplier_growth"], layer_sizes=tuple(tr["arch"]))
    model, history = lyapnet.train(dataset, scene, train_cfg)
    model_path = out_dir / "model.json"
    lyapnet.save_model(model, model_path, train_config=train_cfg)

    print(f"[3/5] rolling out from {len(starts)} grid starts")
    pcfg = _policy_config(scene, ro)
    sg = envs.SceneGeometry(scene)
    rollout_rows = []
    vtraces = []
    for x0 in starts:
        res = policy.rollout(scene, model, x0, pcfg, _sg=sg)
        rollout_rows.append({
            "start": [float(v) for v in x0],
            "status": res.status,
            "steps": res.steps,
            "final_distance": float(np.linalg.norm(res.states[-1] - scene.goal)),
            "min_sd": float(np.min(res.min_sd_trace)),
            "collision_steps": int((res.min_sd_trace < 0.0).sum()),
        })
        vtraces.append(res.states)
    reach_rate = sum(r["status"] == "reached" for r in rollout_rows) / len(rollout_rows)
    traces = evaluate.v_trace_report(model, vtraces)
    vtrace_path = out_dir / "vtraces.json"
    with open(vtrace_path, "w") as fh:
        json.dump({"scene": scene.name, "traces": traces}, fh)
        fh.write("\n")

    print("[4/5] evaluating against the quadratic baseline")
    comparison = evaluate.compare(model, scene, dataset, pcfg,
                                  mse_split="val", epsilon=tr["epsilon"])
    report = {
        "scene": scene.name,
        "seed": args.seed,
        "training": {"status": history["status"], "final_report": history["final_report"],
                     "epochs_run": len(history["epochs"])},
        "grid_rollouts": {
            "n_starts": len(rollout_rows),
            "reach_rate": reach_rate,
            "collision_steps": sum(r["collision_steps"] for r in rollout_rows),
            "min_sd": min(r["min_sd"] for r in rollout_rows),
            "rows": rollout_rows,
        },
        "compare": comparison,
        "vtrace_summary": {
            "monotone_fraction": sum(t["monotone"] for t in traces) / len(traces),
            "max_terminal": max(t["terminal"] for t in traces),
        },
    }
    report_path = out_dir / "report.json"
    evaluate.save_report(report, report_path)

    print("[5/5] exporting the policy field")
    field_path = out_dir / "field.csv"
    field_grid = (40, 40) if scene.dim == 2 else (12, 12, 12)
    policy.export_field(scene, model, field_grid, field_path, xdot_max=pcfg.xdot_max)
    scene_path = out_dir / "scene.json"
    envs.save_scene(scene, scene_path)

    outputs = [dataset_path, model_path, vtrace_path, report_path, field_path, scene_path]
    _write_manifest(out_dir, "experiment", args, [args.preset], outputs, t0)
    print(f"experiment complete: reach_rate={reach_rate:.3f} "
          f"model_better={comparison['model_better']} status={history['status']}")
    ok = (history["status"] == "valid" and reach_rate == 1.0
          and comparison["model_better"])
    return 0 if ok else 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lyapmotion",
        description="Stable motion policies from a learned Lyapunov network")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-demos", help="generate demonstrations on a start grid")
    p.add_argument("--scene", required=True)
    p.add_argument("--grid", required=True, help="per-axis counts, e.g. 15,7")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--n-via", type=int, default=None)
    p.add_argument("--dt", type=float, default=0.1)
    p.add_argument("--val-fraction", type=float, default=0.2)
    p.add_argument("--start-region", default=None,
                   help="lo1,lo2[,lo3],hi1,hi2[,hi3] bounds for the start grid")
    p.set_defaults(func=cmd_gen_demos)

    p = sub.add_parser("train", help="train the Lyapunov network on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--scene", required=True)
    p.add_argument("--arch", default=None, help="layer sizes, e.g. 2,128,128,128,1")
    p.add_argument("--epochs", type=int, default=400)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--lambda1", type=float, default=4.0)
    p.add_argument("--lambda2", type=float, default=4.0)
    p.add_argument("--learning-rate", type=float, default=2e-3)
    p.add_argument("--batch-size", type=int, default=1024)
    p.add_argument("--multiplier-growth", type=float, default=1.04)
    p.add_argument("--history-out", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("rollout", help="run one policy rollout to CSV")
    p.add_argument("--scene", required=True)
    p.add_argument("--model", default=None)
    p.add_argument("--baseline", action="store_true")
    p.add_argument("--start", required=True, help="comma-separated start state")
    p.add_argument("--out", required=True)
    p.add_argument("--dt", type=float, default=0.04)
    p.add_argument("--xdot-max", type=float, default=1.0)
    p.add_argument("--goal-tolerance", type=float, default=None)
    p.add_argument("--max-steps", type=int, default=2000)
    p.add_argument("--no-modulation", action="store_true")
    p.set_defaults(func=cmd_rollout)

    p = sub.add_parser("eval", help="evaluate a model (optionally vs the baseline)")
    p.add_argument("--model", required=True)
    p.add_argument("--scene", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--baseline", action="store_true")
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="val")
    p.add_argument("--dt", type=float, default=0.04)
    p.add_argument("--xdot-max", type=float, default=1.0)
    p.add_argument("--goal-tolerance", type=float, default=None)
    p.add_argument("--max-steps", type=int, default=2000)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export-field", help="export nominal/modulated velocity grid")
    p.add_argument("--scene", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--grid", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--xdot-max", type=float, default=1.0)
    p.set_defaults(func=cmd_export_field)

    p = sub.add_parser("experiment", help="full pipeline for a builtin preset")
    p.add_argument("preset", choices=list(envs.BUILTIN_SCENES))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_experiment)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "rollout" and not args.baseline and not args.model:
        parser.error("rollout requires --model or --baseline")
    try:
        return args.func(args)
    except LyapmotionError as err:
        print(json.dumps({"error": type(err).__name__, "message": str(err)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
