"""Metrics and experiment reports: unit-vector MSE, convergence, collisions.

The prediction error is the mean squared distance between unit vectors of
predicted and demonstrated velocities, pooled over all samples of a split
(zero-velocity samples are excluded and counted). Reach/collision numbers
come directly from rollout results; nothing is recomputed.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .envs import SceneGeometry
from .errors import InvalidArgumentError
from .lyapnet import LyapunovModel, lyapunov_gradient_batch, verify_stability
from .policy import BASELINE, rollout

VTRACE_MONOTONE_TOL = 1e-6


@dataclass
class EvalReport:
    mse_unit: float
    reach_rate: float
    collision_count: int
    mean_steps: float
    lyapunov_report: dict
    excluded_samples: int
    per_demo: list = field(default_factory=list)
    per_demo_mse: list = field(default_factory=list)

    def to_dict(self):
        return {
            "mse_unit": self.mse_unit,
            "reach_rate": self.reach_rate,
            "collision_count": self.collision_count,
            "mean_steps": self.mean_steps,
            "lyapunov_report": self.lyapunov_report,
            "excluded_samples": self.excluded_samples,
            "per_demo": self.per_demo,
            "per_demo_mse": self.per_demo_mse,
        }


def _split_samples(dataset, tag):
    xs, vs = [], []
    for demo, t in zip(dataset.demos, dataset.split):
        if t != tag:
            continue
        for n in range(len(demo.velocities)):
            xs.append(demo.positions[n])
            vs.append(demo.velocities[n])
    return np.asarray(xs), np.asarray(vs)


def _predicted_directions(action_source, X, goal):
    if isinstance(action_source, LyapunovModel):
        G = lyapunov_gradient_batch(action_source, X)
        return -G / np.linalg.norm(G, axis=1)[:, None]
    if action_source == BASELINE:
        diff = goal - X
        return diff / np.linalg.norm(diff, axis=1)[:, None]
    raise InvalidArgumentError("action source must be a LyapunovModel or 'baseline'")


def unit_mse(action_source, samples, goal=None):
    """Mean |u_pred - u_demo|^2 over samples; in [0, 4] by construction.

    ``samples`` is an ``(X, Xdot)`` pair. Zero-velocity and goal-coincident
    rows (unit vector undefined) are excluded; use :func:`unit_mse_detail`
    for the exclusion count.
    """
    return unit_mse_detail(action_source, samples, goal)[0]


def unit_mse_detail(action_source, samples, goal=None):
    X, Xdot = (np.asarray(a, dtype=np.float64) for a in samples)
    if len(X) == 0:
        raise InvalidArgumentError("empty sample set")
    if goal is None:
        if not isinstance(action_source, LyapunovModel):
            raise InvalidArgumentError("goal required for the baseline source")
        goal = action_source.goal
    speed = np.linalg.norm(Xdot, axis=1)
    at_goal = np.linalg.norm(X - goal, axis=1) <= 1e-12
    keep = (speed > 0.0) & ~at_goal
    excluded = int((~keep).sum())
    if not keep.any():
        raise InvalidArgumentError("no usable samples (all zero-velocity or at goal)")
    u_demo = Xdot[keep] / speed[keep][:, None]
    u_pred = _predicted_directions(action_source, X[keep], goal)
    mse = float(((u_pred - u_demo) ** 2).sum(axis=1).mean())
    return mse, excluded


def build_eval_report(action_source, scene, dataset, policy_cfg, *,
                      mse_split="val", epsilon=0.01):
    """Rollouts from every demo start plus split MSE and the stability counts."""
    X, Xdot = _split_samples(dataset, mse_split)
    if len(X) == 0:
        raise InvalidArgumentError(f"dataset has no '{mse_split}' samples")
    mse, excluded = unit_mse_detail(action_source, (X, Xdot), scene.goal)

    per_demo_mse = []
    for i, (demo, tag) in enumerate(zip(dataset.demos, dataset.split)):
        if tag != mse_split or len(demo.velocities) == 0:
            continue
        try:
            demo_mse, _ = unit_mse_detail(
                action_source, (demo.positions[:-1], demo.velocities), scene.goal)
        except InvalidArgumentError:
            continue
        per_demo_mse.append({"demo": i, "mse_unit": demo_mse})

    sg = SceneGeometry(scene)
    per_demo = []
    statuses = []
    collision_count = 0
    steps = []
    for i, demo in enumerate(dataset.demos):
        res = rollout(scene, action_source, demo.positions[0], policy_cfg, _sg=sg)
        statuses.append(res.status)
        collisions = int((res.min_sd_trace < 0.0).sum()) if len(res.min_sd_trace) else 0
        collision_count += collisions
        steps.append(res.steps)
        per_demo.append({
            "demo": i,
            "status": res.status,
            "steps": res.steps,
            "final_distance": float(np.linalg.norm(res.states[-1] - scene.goal)),
            "min_sd": float(np.min(res.min_sd_trace)) if len(res.min_sd_trace) else None,
            "collision_steps": collisions,
        })
    reach_rate = statuses.count("reached") / len(statuses)

    if isinstance(action_source, LyapunovModel):
        pairs = []
        for demo in dataset.demos:
            P = demo.positions
            pairs.extend((P[n], P[n + 1]) for n in range(len(P) - 1))
        lyap = verify_stability(action_source, pairs, epsilon).to_dict() if pairs else {}
    else:
        lyap = {}

    return EvalReport(
        mse_unit=mse,
        reach_rate=reach_rate,
        collision_count=collision_count,
        mean_steps=float(np.mean(steps)),
        lyapunov_report=lyap,
        excluded_samples=excluded,
        per_demo=per_demo,
        per_demo_mse=per_demo_mse,
    )


def compare(model, scene, dataset, policy_cfg, *, mse_split="val", epsilon=0.01):
    """Model and baseline reports plus the MSE inequality used by acceptance."""
    model_report = build_eval_report(model, scene, dataset, policy_cfg,
                                     mse_split=mse_split, epsilon=epsilon)
    base_report = build_eval_report(BASELINE, scene, dataset, policy_cfg,
                                    mse_split=mse_split, epsilon=epsilon)
    return {
        "model": model_report,
        "baseline": base_report,
        "model_better": model_report.mse_unit < base_report.mse_unit,
    }


def v_trace_report(model, trajectories):
    """Normalized V traces with per-trajectory monotonicity flags.

    Each trace is V(x_n)/V(x_0); a start at the goal yields the single
    entry 0.0 and counts as monotone by convention.
    """
    out = []
    for traj in trajectories:
        traj = np.asarray(traj, dtype=np.float64)
        from .lyapnet import lyapunov_value_batch

        values = lyapunov_value_batch(model, traj)
        v0 = float(values[0])
        if v0 <= 0.0:
            out.append({"trace": [0.0], "monotone": True,
                        "max_step_increase": 0.0, "terminal": 0.0})
            continue
        trace = values / v0
        increases = np.diff(trace)
        max_inc = float(increases.max()) if len(increases) else 0.0
        out.append({
            "trace": trace.tolist(),
            "monotone": bool(max_inc <= VTRACE_MONOTONE_TOL),
            "max_step_increase": max_inc,
            "terminal": float(trace[-1]),
        })
    return out


def save_report(report, path):
    payload = report if isinstance(report, dict) else report.to_dict()

    def default(obj):
        if isinstance(obj, EvalReport):
            return obj.to_dict()
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, (np.floating, np.integer)):
            return obj.item()
        raise TypeError(f"not serializable: {type(obj)}")

    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, default=default)
        fh.write("\n")
