"""Policy extraction, convex-pair modulation, and closed-loop rollouts.

The nominal action is the normalized negative Lyapunov gradient scaled to
the speed limit; near obstacles it is reshaped by the full-rank modulation
matrix built from the pair Gamma ratio. Rollouts are side-effect-free and
safe to run concurrently.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .envs import SceneGeometry
from .errors import (
    AtGoalError,
    DegenerateConfigurationError,
    DegenerateGradientError,
    InvalidArgumentError,
)
from .geometry import gamma_from_sd
from .lyapnet import LyapunovModel, lyapunov_gradient, lyapunov_value

BASELINE = "baseline"


@dataclass
class PolicyConfig:
    xdot_max: float
    dt: float
    goal_tolerance: float
    max_steps: int = 2000
    modulation_enabled: bool = True

    def __post_init__(self):
        if min(self.xdot_max, self.dt, self.goal_tolerance) <= 0 or self.max_steps <= 0:
            raise InvalidArgumentError("policy config values must be positive")


def nominal_action(model, x, xdot_max):
    """Unit direction of -grad V scaled to the speed limit."""
    g = lyapunov_gradient(model, x)
    norm = float(np.linalg.norm(g))
    if norm < 1e-12:
        raise DegenerateGradientError(f"|grad V| = {norm:.3e} at {np.asarray(x).tolist()}")
    return (-xdot_max / norm) * g


def quadratic_baseline_action(x, goal, xdot_max):
    """Policy of the distance-to-goal value function: straight at the goal."""
    x = np.asarray(x, dtype=np.float64)
    goal = np.asarray(goal, dtype=np.float64)
    diff = goal - x
    dist = float(np.linalg.norm(diff))
    if dist <= 1e-12:
        raise AtGoalError("baseline action undefined at the goal")
    return (xdot_max / dist) * diff


def basis_vectors(normal, dim):
    """Orthonormal matrix [r, e_1, (e_2)] from a unit normal.

    2D: the tangent is the normal rotated +90 degrees. 3D: tangents are the
    polar/azimuthal unit vectors of the normal direction; within 1e-6 of
    the +-z pole they default to x-hat, y-hat.
    """
    r = np.asarray(normal, dtype=np.float64)
    if r.shape != (dim,):
        raise InvalidArgumentError(f"normal must have shape ({dim},)")
    if abs(float(np.linalg.norm(r)) - 1.0) > 1e-9:
        raise InvalidArgumentError("normal must be unit length")
    if dim == 2:
        e1 = np.array([-r[1], r[0]])
        return np.column_stack([r, e1])
    if (np.linalg.norm(r - [0.0, 0.0, 1.0]) < 1e-6
            or np.linalg.norm(r + [0.0, 0.0, 1.0]) < 1e-6):
        return np.column_stack([r, [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    theta = np.arccos(np.clip(r[2], -1.0, 1.0))
    phi = np.arctan2(r[1], r[0])
    theta_hat = np.array([np.cos(theta) * np.cos(phi), np.cos(theta) * np.sin(phi), -np.sin(theta)])
    phi_hat = np.array([-np.sin(phi), np.cos(phi), 0.0])
    return np.column_stack([r, theta_hat, phi_hat])


@dataclass
class ModulationContext:
    """One (robot hull, obstacle) modulation: M = E diag(l_r, l_e..) E^-1."""

    gamma: float
    normal: np.ndarray
    tangents: np.ndarray
    basis: np.ndarray
    eigen: np.ndarray
    modulation: np.ndarray
    in_collision: bool = False


def modulation_context_from_witness(sd, normal, robot_ref, obstacle_ref):
    """Modulation data from a precomputed signed-distance witness."""
    norm = float(np.linalg.norm(normal))
    if norm < 1e-9:
        raise DegenerateConfigurationError("witness normal is degenerate")
    r = normal / norm
    g = gamma_from_sd(robot_ref, obstacle_ref, sd)
    dim = len(r)
    E = basis_vectors(r, dim)
    lam_r = 1.0 - 1.0 / g
    lam_e = 1.0 + 1.0 / g
    D = np.diag([lam_r] + [lam_e] * (dim - 1))
    # E is orthonormal by construction, so its inverse is the transpose
    M = E @ D @ E.T
    return ModulationContext(gamma=g, normal=r, tangents=E[:, 1:], basis=E,
                             eigen=D, modulation=M, in_collision=g < 1.0)


def modulation_matrix(robot_hull_at_x, obstacle):
    """ModulationContext for a robot hull placed at the query state."""
    from .geometry import signed_distance

    witness = signed_distance(robot_hull_at_x, obstacle)
    return modulation_context_from_witness(
        witness.signed_distance, witness.normal,
        robot_hull_at_x.reference_point, obstacle.reference_point)


def modulate(velocity, contexts):
    """Apply modulation contexts sequentially, farthest obstacle first.

    The nearest obstacle (smallest Gamma) is applied last so its blocking
    eigenvalue is not diluted: at Gamma = 1 the returned velocity has no
    component along the into-obstacle normal.
    """
    v = np.asarray(velocity, dtype=np.float64).copy()
    if not contexts:
        return v
    order = np.argsort([-c.gamma for c in contexts], kind="stable")
    for k in order:
        v = contexts[k].modulation @ v
    return v


@dataclass
class RolloutResult:
    states: np.ndarray
    v_trace: np.ndarray
    min_sd_trace: np.ndarray
    status: str
    steps: int
    clip_events: int = 0

    @property
    def reached(self):
        return self.status == "reached"


def _value(source, x, goal):
    if source == BASELINE:
        return float(np.linalg.norm(np.asarray(x) - goal))
    return lyapunov_value(source, x)


def _action(source, scene, cfg, x):
    if source == BASELINE:
        return quadratic_baseline_action(x, scene.goal, cfg.xdot_max)
    return nominal_action(source, x, cfg.xdot_max)


def rollout(scene, action_source, x0, cfg, *, perturbations=None, _sg=None):
    """Iterate the (modulated) policy from ``x0`` until the goal or the cap.

    ``action_source`` is a LyapunovModel or the string "baseline". Records
    V and the minimum signed distance at every visited state; positions are
    clipped to the scene limits with clip events counted.
    """
    if not (isinstance(action_source, LyapunovModel) or action_source == BASELINE):
        raise InvalidArgumentError("action_source must be a LyapunovModel or 'baseline'")
    x = np.asarray(x0, dtype=np.float64).copy()
    if np.any(x < scene.pos_lower) or np.any(x > scene.pos_upper):
        raise InvalidArgumentError("start state outside position limits")
    sg = _sg if _sg is not None else SceneGeometry(scene)
    perturb = {int(k): np.asarray(v, dtype=np.float64) for k, v in (perturbations or {}).items()}

    states = [x.copy()]
    v_trace = []
    sd_trace = []
    clip_events = 0
    status = "max-steps"
    steps = 0

    def record(xq):
        witnesses = sg.pair_witnesses(xq) if scene.obstacles else []
        min_sd = min((w[0] for w in witnesses), default=np.inf)
        sd_trace.append(min_sd)
        return witnesses

    for step in range(cfg.max_steps + 1):
        if step in perturb:
            x = x + perturb[step]
            if np.any(x < scene.pos_lower) or np.any(x > scene.pos_upper):
                raise InvalidArgumentError(f"perturbation at step {step} leaves the limits")
            states[-1] = x.copy()
        witnesses = record(x)
        v_trace.append(_value(action_source, x, scene.goal))
        if float(np.linalg.norm(x - scene.goal)) <= cfg.goal_tolerance:
            status = "reached"
            break
        if step == cfg.max_steps:
            break
        try:
            v = _action(action_source, scene, cfg, x)
        except (DegenerateGradientError, AtGoalError):
            status = "degenerate"
            break
        if cfg.modulation_enabled and witnesses:
            contexts = [modulation_context_from_witness(sd, n, ref_a, ref_b)
                        for sd, n, ref_a, ref_b in witnesses]
            v = modulate(v, contexts)
            speed = float(np.linalg.norm(v))
            if speed > cfg.xdot_max:
                v *= cfg.xdot_max / speed
        x = x + cfg.dt * v
        clipped = np.clip(x, scene.pos_lower, scene.pos_upper)
        if not np.array_equal(clipped, x):
            clip_events += 1
            x = clipped
        states.append(x.copy())
        steps += 1

    return RolloutResult(
        states=np.asarray(states),
        v_trace=np.asarray(v_trace),
        min_sd_trace=np.asarray(sd_trace),
        status=status,
        steps=steps,
        clip_events=clip_events,
    )


def perturb_rollout(scene, model, x0, cfg, perturbations):
    """Rollout with state kicks added at given steps (list of (step, delta))."""
    table = {}
    for step, delta in perturbations:
        table[int(step)] = table.get(int(step), 0) + np.asarray(delta, dtype=np.float64)
    return rollout(scene, model, x0, cfg, perturbations=table)


def rollout_to_csv(result, path):
    """CSV export: step, coordinates, V, min signed distance."""
    dim = result.states.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step"] + [f"x{k}" for k in range(dim)] + ["V", "min_sd"])
        for i, x in enumerate(result.states):
            sd = result.min_sd_trace[i] if np.isfinite(result.min_sd_trace[i]) else ""
            writer.writerow([i] + [repr(float(c)) for c in x]
                            + [repr(float(result.v_trace[i])), sd if sd == "" else repr(float(sd))])


def export_field(scene, model, grid, path, *, xdot_max=1.0):
    """Grid of nominal and modulated velocities with V values (CSV).

    Feeds the plotting frontend; every grid point is emitted, with zero
    velocities where the policy is undefined (at the goal or a degenerate
    gradient).
    """
    grid = tuple(int(g) for g in grid)
    if len(grid) != scene.dim:
        raise InvalidArgumentError(f"grid must have {scene.dim} counts")
    axes = [np.linspace(scene.pos_lower[k], scene.pos_upper[k], grid[k])
            for k in range(scene.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    sg = SceneGeometry(scene)
    coord_names = ["x", "y", "z"][: scene.dim]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = (coord_names
                  + [f"v{c}_nominal" for c in coord_names]
                  + [f"v{c}_modulated" for c in coord_names]
                  + ["V", "min_sd"])
        writer.writerow(header)
        for x in pts:
            v_val = lyapunov_value(model, x)
            try:
                v_nom = nominal_action(model, x, xdot_max)
            except (DegenerateGradientError, AtGoalError):
                v_nom = np.zeros(scene.dim)
            witnesses = sg.pair_witnesses(x) if scene.obstacles else []
            min_sd = min((w[0] for w in witnesses), default=np.inf)
            v_mod = v_nom
            if witnesses and np.any(v_nom):
                try:
                    contexts = [modulation_context_from_witness(sd, n, ra, rb)
                                for sd, n, ra, rb in witnesses]
                    v_mod = modulate(v_nom, contexts)
                    speed = float(np.linalg.norm(v_mod))
                    if speed > xdot_max:
                        v_mod = v_mod * (xdot_max / speed)
                except (DegenerateConfigurationError, InvalidArgumentError):
                    v_mod = v_nom
            row = ([repr(float(c)) for c in x]
                   + [repr(float(c)) for c in v_nom]
                   + [repr(float(c)) for c in v_mod]
                   + [repr(float(v_val)), repr(float(min_sd)) if np.isfinite(min_sd) else "inf"])
            writer.writerow(row)
