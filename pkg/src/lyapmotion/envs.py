"""Scene definitions (hallway, cross, shelf), robot geometry, and scene I/O.

Scenes are immutable after load and freely shareable across threads. The
builtin presets live in versioned JSON files under ``presets/scenes``; their
exact dimensions are figure-matched approximations (the source experiments
publish no numeric scene dimensions).
"""

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from . import _kernels
from .errors import InvalidArgumentError, SceneNotFoundError
from .geometry import ConvexHull

SCENE_FORMAT = 1
BUILTIN_SCENES = ("hallway", "cross", "shelf")


@dataclass(frozen=True)
class Scene:
    """Obstacles, robot hulls, goal and limits for one experiment."""

    name: str
    dim: int
    obstacles: tuple
    robot_links: tuple
    goal: np.ndarray
    pos_lower: np.ndarray
    pos_upper: np.ndarray
    vel_lower: np.ndarray
    vel_upper: np.ndarray
    d_safe: float

    def __post_init__(self):
        for attr in ("goal", "pos_lower", "pos_upper", "vel_lower", "vel_upper"):
            v = np.asarray(getattr(self, attr), dtype=np.float64)
            if v.shape != (self.dim,):
                raise InvalidArgumentError(f"{attr} must have shape ({self.dim},)")
            object.__setattr__(self, attr, v)
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        object.__setattr__(self, "robot_links", tuple(self.robot_links))
        if not np.all(self.pos_lower < self.pos_upper):
            raise InvalidArgumentError("position limits must satisfy lower < upper elementwise")
        if not np.all(self.vel_lower < self.vel_upper):
            raise InvalidArgumentError("velocity limits must satisfy lower < upper elementwise")
        if self.d_safe <= 0.0:
            raise InvalidArgumentError("d_safe must be positive")
        for hull in self.obstacles + self.robot_links:
            if hull.dim != self.dim:
                raise InvalidArgumentError("hull dimension does not match scene")
            if hull.degenerate:
                raise InvalidArgumentError("scene hulls must be non-degenerate")
        if np.any(self.goal < self.pos_lower) or np.any(self.goal > self.pos_upper):
            raise InvalidArgumentError("goal must lie inside the position limits")
        if self.obstacles and min_clearance(self, self.goal) < self.d_safe:
            raise InvalidArgumentError("goal violates the safety margin")

    def diameter(self):
        """Diagonal of the position-limit box; reference length for tolerances."""
        return float(np.linalg.norm(self.pos_upper - self.pos_lower))

    def to_dict(self):
        return {
            "format": SCENE_FORMAT,
            "name": self.name,
            "dim": self.dim,
            "obstacles": [h.to_dict() for h in self.obstacles],
            "robot_links": [h.to_dict() for h in self.robot_links],
            "goal": self.goal.tolist(),
            "pos_lower": self.pos_lower.tolist(),
            "pos_upper": self.pos_upper.tolist(),
            "vel_lower": self.vel_lower.tolist(),
            "vel_upper": self.vel_upper.tolist(),
            "d_safe": self.d_safe,
        }

    @classmethod
    def from_dict(cls, data):
        if data.get("format") != SCENE_FORMAT:
            raise InvalidArgumentError(f"unsupported scene format: {data.get('format')!r}")
        return cls(
            name=data["name"],
            dim=int(data["dim"]),
            obstacles=tuple(ConvexHull.from_dict(h) for h in data["obstacles"]),
            robot_links=tuple(ConvexHull.from_dict(h) for h in data["robot_links"]),
            goal=np.asarray(data["goal"], dtype=np.float64),
            pos_lower=np.asarray(data["pos_lower"], dtype=np.float64),
            pos_upper=np.asarray(data["pos_upper"], dtype=np.float64),
            vel_lower=np.asarray(data["vel_lower"], dtype=np.float64),
            vel_upper=np.asarray(data["vel_upper"], dtype=np.float64),
            d_safe=float(data["d_safe"]),
        )


def builtin_scene(name):
    """Load one of the builtin presets: hallway, cross or shelf."""
    if name not in BUILTIN_SCENES:
        raise SceneNotFoundError(f"unknown scene {name!r}; choose from {BUILTIN_SCENES}")
    ref = resources.files("lyapmotion").joinpath(f"presets/scenes/{name}.json")
    return Scene.from_dict(json.loads(ref.read_text()))


def load_scene(path_or_name):
    """Scene from a preset name or a scene JSON file path."""
    if path_or_name in BUILTIN_SCENES:
        return builtin_scene(path_or_name)
    with open(path_or_name) as fh:
        return Scene.from_dict(json.load(fh))


def save_scene(scene, path):
    with open(path, "w") as fh:
        json.dump(scene.to_dict(), fh, indent=1)
        fh.write("\n")


def _check_limits(scene, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (scene.dim,):
        raise InvalidArgumentError(f"state must have shape ({scene.dim},)")
    if np.any(x < scene.pos_lower) or np.any(x > scene.pos_upper):
        raise InvalidArgumentError(f"state {x.tolist()} outside position limits")
    return x


def placed_robot(scene, x):
    """Robot link hulls translated so each reference point sits at ``x``."""
    x = _check_limits(scene, x)
    return [link.translated(x - link.reference_point) for link in scene.robot_links]


def min_clearance(scene, x):
    """Min signed distance over (link, obstacle) pairs; +inf without obstacles."""
    x = _check_limits(scene, x)
    return SceneGeometry(scene).min_clearance(x)


class SceneGeometry:
    """Precomputed vertex arrays for repeated clearance queries.

    Skips hull revalidation on the hot path: link vertices are stored in the
    reference-point frame and translated by the query state only.
    """

    def __init__(self, scene):
        self.scene = scene
        self.link_local = [np.ascontiguousarray(h.vertices - h.reference_point)
                           for h in scene.robot_links]
        self.obstacle_verts = [np.ascontiguousarray(h.vertices) for h in scene.obstacles]
        self.obstacle_refs = [h.reference_point.copy() for h in scene.obstacles]
        self._sd = _kernels.signed_distance

    def min_clearance(self, x):
        best = np.inf
        for local in self.link_local:
            va = local + x
            for vb in self.obstacle_verts:
                _, sd, _, _, _ = self._sd(va, vb)
                if sd < best:
                    best = sd
        return float(best)

    def pair_witnesses(self, x):
        """Per (link, obstacle) pair: (sd, normal, link_ref, obstacle_ref).

        ``normal`` is the unit direction of increasing sd with respect to
        translating the robot; feeds clearance gradients and modulation.
        """
        out = []
        for local in self.link_local:
            va = local + x
            for vb, ref_b in zip(self.obstacle_verts, self.obstacle_refs):
                _, sd, _, _, normal = self._sd(va, vb)
                out.append((float(sd), normal, x, ref_b))
        return out
