"""Automatic demonstration generation via discretized trajectory optimization.

Each demonstration minimizes path length over via points with fixed
endpoints, subject to position/velocity limits and a safety clearance from
every obstacle. Constraints are handled with an augmented-Lagrangian scheme
over projected gradient descent with backtracking line search; the
non-smooth clearance term uses the witness-direction subgradient.

Optimizations are warm-started from a coarse shortest path on a validity
grid (straight-line initialization stalls against walls in corridor
scenes), then refined; seeded jittered restarts cover the rare stalls.
"""

import heapq
import itertools
import json
from dataclasses import dataclass

import numpy as np

from .envs import SceneGeometry, _check_limits
from .errors import DatasetEmptyError, InfeasibleStartError, InvalidArgumentError

DATASET_FORMAT = 1


@dataclass(frozen=True)
class Demonstration:
    """One trajectory: N+1 positions and the N finite-difference velocities."""

    positions: np.ndarray
    velocities: np.ndarray
    dt: float
    scene_name: str
    solver_status: str = "converged"

    def __post_init__(self):
        object.__setattr__(self, "positions", np.asarray(self.positions, dtype=np.float64))
        object.__setattr__(self, "velocities", np.asarray(self.velocities, dtype=np.float64))

    @property
    def n_steps(self):
        return len(self.velocities)

    def path_length(self):
        if len(self.positions) < 2:
            return 0.0
        return float(np.linalg.norm(np.diff(self.positions, axis=0), axis=1).sum())

    def to_dict(self):
        return {
            "positions": self.positions.tolist(),
            "velocities": self.velocities.tolist(),
            "dt": self.dt,
            "scene_name": self.scene_name,
            "solver_status": self.solver_status,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            positions=np.asarray(data["positions"], dtype=np.float64),
            velocities=np.asarray(data["velocities"], dtype=np.float64),
            dt=float(data["dt"]),
            scene_name=data["scene_name"],
            solver_status=data.get("solver_status", "converged"),
        )


@dataclass(frozen=True)
class Dataset:
    """Demonstrations with a deterministic train/validation split."""

    demos: tuple
    split: tuple
    seed: int
    failures: tuple = ()

    def subset(self, tag):
        return [d for d, s in zip(self.demos, self.split) if s == tag]


@dataclass
class SolverConfig:
    """Trajectory-optimization settings; defaults resolve per scene dim."""

    n_via: int = None           # 50 in 2D, 80 in 3D
    dt: float = 0.1
    goal_tol: float = None      # defaults to 1% of scene diameter
    constraint_tol: float = 1e-3
    max_outer: int = 14
    max_inner: int = 160
    penalty_init: float = 50.0
    penalty_growth: float = 2.5
    penalty_cap: float = 1e6
    step_uniformity: float = 50.0
    restarts: int = 3
    jitter_scale: float = 0.15
    astar_resolution: float = None  # 0.08 in 2D, 0.15 in 3D
    seed: int = 0

    def resolved(self, scene):
        out = SolverConfig(**self.__dict__)
        if out.n_via is None:
            out.n_via = 50 if scene.dim == 2 else 80
        if out.goal_tol is None:
            out.goal_tol = 0.01 * scene.diameter()
        if out.astar_resolution is None:
            out.astar_resolution = 0.08 if scene.dim == 2 else 0.15
        return out


def grid_starts(scene, resolution, *, bounds=None, goal_tol=None):
    """Valid start states on a regular grid: inside limits, clear of
    obstacles by d_safe, and outside the goal tolerance ball."""
    resolution = tuple(int(r) for r in resolution)
    if len(resolution) != scene.dim or any(r < 2 for r in resolution):
        raise InvalidArgumentError(f"resolution must be {scene.dim} counts, each >= 2")
    if bounds is None:
        lo, hi = scene.pos_lower, scene.pos_upper
    else:
        lo = np.asarray(bounds[0], dtype=np.float64)
        hi = np.asarray(bounds[1], dtype=np.float64)
    if goal_tol is None:
        goal_tol = 0.01 * scene.diameter()
    axes = [np.linspace(lo[k], hi[k], resolution[k]) for k in range(scene.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    sg = SceneGeometry(scene)
    return [p for p in pts
            if np.all(p >= scene.pos_lower) and np.all(p <= scene.pos_upper)
            and np.linalg.norm(p - scene.goal) > goal_tol
            and sg.min_clearance(p) >= scene.d_safe]


class _ValidityGrid:
    """Coarse free-space grid shared across starts; seeds the optimizer."""

    def __init__(self, scene, resolution):
        sg = SceneGeometry(scene)
        lo, hi = scene.pos_lower, scene.pos_upper
        counts = np.maximum(((hi - lo) / resolution).astype(int) + 1, 3)
        self.axes = [np.linspace(lo[k], hi[k], counts[k]) for k in range(scene.dim)]
        self.shape = tuple(counts.tolist())
        self.valid = np.zeros(self.shape, dtype=bool)
        for idx in itertools.product(*[range(c) for c in counts]):
            p = np.array([self.axes[k][idx[k]] for k in range(scene.dim)])
            self.valid[idx] = sg.min_clearance(p) >= scene.d_safe
        self.dim = scene.dim
        steps = [-1, 0, 1]
        self.moves = [m for m in itertools.product(steps, repeat=scene.dim)
                      if any(m)]

    def point(self, idx):
        return np.array([self.axes[k][idx[k]] for k in range(self.dim)])

    def nearest_valid(self, x):
        idx = tuple(int(np.argmin(np.abs(self.axes[k] - x[k]))) for k in range(self.dim))
        if self.valid[idx]:
            return idx
        cells = np.argwhere(self.valid)
        if len(cells) == 0:
            return None
        pts = np.stack([self.axes[k][cells[:, k]] for k in range(self.dim)], axis=1)
        return tuple(cells[int(np.argmin(((pts - x) ** 2).sum(axis=1)))].tolist())

    def shortest_path(self, x0, x1):
        """A* between the nearest valid cells; returns waypoint array or None."""
        s = self.nearest_valid(x0)
        t = self.nearest_valid(x1)
        if s is None or t is None:
            return None
        pt = self.point
        target = pt(t)
        openq = [(0.0, s)]
        gscore = {s: 0.0}
        came = {}
        closed = set()
        while openq:
            _, cur = heapq.heappop(openq)
            if cur == t:
                path = [cur]
                while path[-1] in came:
                    path.append(came[path[-1]])
                pts = [pt(i) for i in reversed(path)]
                return np.asarray([x0] + pts + [x1])
            if cur in closed:
                continue
            closed.add(cur)
            cp = pt(cur)
            for m in self.moves:
                nxt = tuple(cur[k] + m[k] for k in range(self.dim))
                if any(nxt[k] < 0 or nxt[k] >= self.shape[k] for k in range(self.dim)):
                    continue
                if not self.valid[nxt] or nxt in closed:
                    continue
                g = gscore[cur] + float(np.linalg.norm(pt(nxt) - cp))
                if g < gscore.get(nxt, np.inf):
                    gscore[nxt] = g
                    came[nxt] = cur
                    heapq.heappush(openq, (g + float(np.linalg.norm(pt(nxt) - target)), nxt))
        return None


def _resample_polyline(pts, n_points):
    pts = np.asarray(pts, dtype=np.float64)
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    total = float(seg.sum())
    if total <= 0.0:
        return np.repeat(pts[:1], n_points, axis=0)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    targets = np.linspace(0.0, total, n_points)
    out = np.empty((n_points, pts.shape[1]))
    for k in range(pts.shape[1]):
        out[:, k] = np.interp(targets, arc, pts[:, k])
    return out


class _PathProblem:
    """Merit function and subgradient for one trajectory optimization."""

    def __init__(self, scene, cfg, sg):
        self.scene = scene
        self.cfg = cfg
        self.sg = sg
        self.n_pairs = max(1, len(scene.robot_links) * len(scene.obstacles))

    def clearances(self, P):
        """sd and increasing-sd normal for every (via point, pair)."""
        sds = np.empty((len(P), self.n_pairs))
        normals = np.empty((len(P), self.n_pairs, self.scene.dim))
        for n, x in enumerate(P):
            for j, (sd, normal, _, _) in enumerate(self.sg.pair_witnesses(x)):
                sds[n, j] = sd
                normals[n, j] = normal
        return sds, normals

    def merit_and_grad(self, P, lam, mu):
        scene, cfg = self.scene, self.cfg
        N = len(P) - 1
        diffs = P[1:] - P[:-1]
        lens = np.sqrt((diffs**2).sum(axis=1) + 1e-24)
        merit = float(lens.sum())
        units = diffs / lens[:, None]
        grad = np.zeros_like(P)
        grad[:-1] -= units
        grad[1:] += units

        # keep via-point spacing uniform: the length objective is invariant
        # to re-parameterization, and bunched points carry degenerate
        # velocities. Deviations sum to zero, so the mean needs no chain rule.
        dev = lens - lens.mean()
        merit += cfg.step_uniformity * float((dev**2).sum())
        du = 2.0 * cfg.step_uniformity * dev[:, None] * units
        grad[1:] += du
        grad[:-1] -= du

        if scene.obstacles:
            sds, normals = self.clearances(P)
            c = scene.d_safe - sds                     # constraint c <= 0
            y = np.maximum(lam + mu * c, 0.0)
            merit += float(((y**2 - lam**2) / (2.0 * mu)).sum())
            # d(merit)/dx = y * dc/dx = -y * normal
            grad -= (y[:, :, None] * normals).sum(axis=1)
            max_violation = float(np.maximum(c, 0.0).max())
        else:
            c = np.zeros((len(P), self.n_pairs))
            max_violation = 0.0

        v = diffs / cfg.dt
        over = np.maximum(v - scene.vel_upper, 0.0)
        under = np.maximum(scene.vel_lower - v, 0.0)
        merit += 0.5 * mu * float((over**2 + under**2).sum())
        dv = mu * (over - under) / cfg.dt
        grad[1:] += dv
        grad[:-1] -= dv

        grad[0] = 0.0
        grad[-1] = 0.0
        return merit, grad, c, max_violation


def _solve_from_init(scene, P0, cfg, sg, history):
    problem = _PathProblem(scene, cfg, sg)
    P = P0.copy()
    lam = np.zeros((len(P), problem.n_pairs))
    mu = cfg.penalty_init
    scale = scene.diameter()
    status = "max-iters"
    prev_violation = np.inf

    for outer in range(cfg.max_outer):
        merit, grad, c, _ = problem.merit_and_grad(P, lam, mu)
        alpha = 0.5 * scale / max(float(np.abs(grad).max()), 1e-9)
        for inner in range(cfg.max_inner):
            cand = P - alpha * grad
            cand[1:-1] = np.clip(cand[1:-1], scene.pos_lower, scene.pos_upper)
            cand[0], cand[-1] = P[0], P[-1]
            m_new, g_new, c_new, _ = problem.merit_and_grad(cand, lam, mu)
            decrease = float((grad * (P - cand)).sum())
            if m_new <= merit - 1e-4 * decrease and m_new < merit:
                step = float(np.abs(cand - P).max())
                P, merit, grad, c = cand, m_new, g_new, c_new
                history.append((outer, inner, merit))
                alpha *= 1.8
                if step <= 1e-7 * scale:
                    break
            else:
                alpha *= 0.5
                if alpha * max(float(np.abs(grad).max()), 1e-12) <= 1e-10 * scale:
                    break

        violation = float(np.maximum(c, 0.0).max())
        if violation <= cfg.constraint_tol:
            status = "converged"
            break
        lam = np.maximum(lam + mu * c, 0.0)
        if violation > 0.5 * prev_violation:
            mu = min(mu * cfg.penalty_growth, cfg.penalty_cap)
        prev_violation = violation

    _, _, c, violation = problem.merit_and_grad(P, lam, mu)
    return P, violation, status


def optimize_trajectory(scene, x0, cfg, *, _sg=None, _vgrid=None, _rng=None):
    """Shortest collision-free trajectory from ``x0`` to the scene goal.

    Returns a Demonstration whose invariants (endpoint, dynamics
    consistency, clearance within the constraint tolerance) hold; raises
    InfeasibleStartError when no feasible solution is found after restarts.
    """
    cfg = cfg.resolved(scene)
    x0 = _check_limits(scene, x0)
    sg = _sg if _sg is not None else SceneGeometry(scene)
    if sg.min_clearance(x0) < scene.d_safe:
        raise InfeasibleStartError(
            f"start {x0.tolist()} violates the safety margin",
            diagnostics={"start": x0.tolist()})

    goal = scene.goal
    if np.linalg.norm(x0 - goal) <= 1e-12:
        return Demonstration(positions=x0[None, :],
                             velocities=np.zeros((0, scene.dim)),
                             dt=cfg.dt, scene_name=scene.name)

    rng = _rng if _rng is not None else np.random.default_rng(cfg.seed)
    n_pts = cfg.n_via + 1

    # straight line when it clears the obstacles (the common near-goal case);
    # otherwise a coarse grid-search path seeds the right homotopy class
    straight = _resample_polyline(np.asarray([x0, goal]), 2 * n_pts)
    if all(sg.min_clearance(x) >= scene.d_safe for x in straight):
        waypoints = np.asarray([x0, goal])
    else:
        vgrid = _vgrid if _vgrid is not None else _ValidityGrid(scene, cfg.astar_resolution)
        waypoints = vgrid.shortest_path(x0, goal)

    attempts = []
    for attempt in range(cfg.restarts + 1):
        if waypoints is not None:
            P0 = _resample_polyline(waypoints, n_pts)
        else:
            P0 = _resample_polyline(np.asarray([x0, goal]), n_pts)
        if attempt > 0:
            # bow the interior of the path sideways; deterministic under seed
            bump = rng.normal(size=scene.dim)
            bump /= max(np.linalg.norm(bump), 1e-12)
            amps = np.sin(np.linspace(0.0, np.pi, n_pts))[:, None]
            P0 = P0 + cfg.jitter_scale * scene.diameter() * attempt / (cfg.restarts + 1) * amps * bump
            P0[1:-1] = np.clip(P0[1:-1], scene.pos_lower, scene.pos_upper)
            P0[0], P0[-1] = x0, goal
        history = []
        P, violation, status = _solve_from_init(scene, P0, cfg, sg, history)
        # re-parameterize to uniform arc length (uniform demo speeds), then
        # polish once if the resampled points dip below the margin
        for _ in range(2):
            P_u = _resample_polyline(P, n_pts)
            P_u[0], P_u[-1] = x0, goal
            if scene.obstacles:
                v_u = max(scene.d_safe - sg.min_clearance(x) for x in P_u)
            else:
                v_u = 0.0
            if v_u <= cfg.constraint_tol:
                P, violation = P_u, v_u
                break
            P, violation, status = _solve_from_init(scene, P_u, cfg, sg, history)
        attempts.append(violation)
        if violation <= cfg.constraint_tol:
            velocities = np.diff(P, axis=0) / cfg.dt
            return Demonstration(positions=P, velocities=velocities, dt=cfg.dt,
                                 scene_name=scene.name, solver_status=status)

    raise InfeasibleStartError(
        f"no collision-free trajectory from {x0.tolist()} after "
        f"{cfg.restarts + 1} attempts",
        diagnostics={"start": x0.tolist(), "violations": attempts})


def generate_dataset(scene, starts, cfg, seed, *, val_fraction=0.2):
    """One demonstration per feasible start, with a seeded train/val split.

    Infeasible starts are collected into ``Dataset.failures`` rather than
    dropped silently; an all-infeasible run raises DatasetEmptyError.
    """
    if len(starts) == 0:
        raise DatasetEmptyError("no start states supplied")
    cfg = cfg.resolved(scene)
    sg = SceneGeometry(scene)
    vgrid = _ValidityGrid(scene, cfg.astar_resolution)
    demos = []
    failures = []
    for i, x0 in enumerate(starts):
        rng = np.random.default_rng((seed, 2971, i))
        try:
            demos.append(optimize_trajectory(scene, x0, cfg, _sg=sg, _vgrid=vgrid, _rng=rng))
        except InfeasibleStartError as err:
            failures.append((i, str(err)))
    if not demos:
        raise DatasetEmptyError(f"all {len(starts)} starts infeasible")

    rng = np.random.default_rng((seed, 607))
    n = len(demos)
    n_val = int(round(val_fraction * n)) if n >= 2 else 0
    val_idx = set(rng.choice(n, size=n_val, replace=False).tolist())
    split = tuple("val" if i in val_idx else "train" for i in range(n))
    return Dataset(demos=tuple(demos), split=split, seed=seed, failures=tuple(failures))


def save_dataset(dataset, path):
    """JSON-lines: a header object, then one demonstration per line."""
    with open(path, "w") as fh:
        header = {
            "format": DATASET_FORMAT,
            "kind": "dataset-header",
            "seed": dataset.seed,
            "n_demos": len(dataset.demos),
            "failures": list(dataset.failures),
        }
        fh.write(json.dumps(header) + "\n")
        for demo, tag in zip(dataset.demos, dataset.split):
            rec = demo.to_dict()
            rec["split"] = tag
            fh.write(json.dumps(rec) + "\n")


def load_dataset(path):
    with open(path) as fh:
        header = json.loads(fh.readline())
        if header.get("format") != DATASET_FORMAT:
            raise InvalidArgumentError(f"unsupported dataset format: {header.get('format')!r}")
        demos = []
        split = []
        for line in fh:
            rec = json.loads(line)
            split.append(rec.pop("split"))
            demos.append(Demonstration.from_dict(rec))
    return Dataset(demos=tuple(demos), split=tuple(split), seed=int(header["seed"]),
                   failures=tuple(tuple(f) for f in header.get("failures", [])))


def validate_demonstration(demo, scene, *, goal_tol=None, constraint_tol=1e-3):
    """Check the demonstration invariants; returns a list of violations."""
    problems = []
    P = demo.positions
    if np.any(P[0] < scene.pos_lower) or np.any(P[0] > scene.pos_upper):
        problems.append("start outside limits")
    if goal_tol is None:
        goal_tol = 0.01 * scene.diameter()
    if np.linalg.norm(P[-1] - scene.goal) > goal_tol:
        problems.append("endpoint misses the goal tolerance")
    if len(P) > 1:
        recon = P[:-1] + demo.dt * demo.velocities
        err = float(np.abs(recon - P[1:]).max())
        if err > 1e-6:
            problems.append(f"dynamics inconsistency {err:.2e}")
    sg = SceneGeometry(scene)
    worst = min((sg.min_clearance(x) for x in P), default=np.inf)
    if worst < scene.d_safe - constraint_tol:
        problems.append(f"clearance {worst:.4f} below d_safe - tol")
    return problems
