"""Learned Lyapunov motion policies with convex-pair obstacle avoidance.

Subpackages cover the full pipeline: convex geometry (:mod:`.geometry`),
scene presets (:mod:`.envs`), demonstration generation (:mod:`.demogen`),
Lyapunov-network training (:mod:`.lyapnet`), modulated policy rollout
(:mod:`.policy`), metrics (:mod:`.evaluate`) and the CLI (:mod:`.cli`).
"""

from ._kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
