"""Lyapunov-network model: evaluation, input gradient, constrained training.

The value function is ``V(x) = phi(x - g) - phi(0) + |x - g|`` with ``phi``
a tanh MLP, so V(goal) = 0 by construction. Training minimizes the cosine
alignment between ``grad V`` and demonstrated velocities plus hinge
penalties for the positivity and decrease conditions, with multipliers
grown while violations persist.

The alignment term needs d/dtheta of grad_x V (second order). This is done
without an autodiff tape: the forward pass carries (value, input-gradient)
pairs, and one reverse sweep accumulates both first- and second-order
contributions into the weights. The finite-difference tests in
``tests/test_lyapnet.py`` pin this machinery down.
"""

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    AtGoalError,
    InvalidArgumentError,
    TrainingDivergedError,
)

MODEL_FORMAT = 1

DEFAULT_ARCH = {2: (2, 128, 128, 128, 1), 3: (3, 256, 256, 256, 256, 1)}


@dataclass
class MlpParams:
    """Weights/biases of the tanh MLP (linear scalar output)."""

    layer_sizes: tuple
    weights: list
    biases: list

    def __post_init__(self):
        self.layer_sizes = tuple(int(s) for s in self.layer_sizes)
        if self.layer_sizes[-1] != 1:
            raise InvalidArgumentError("output layer must have one unit")
        for l, w in enumerate(self.weights):
            expect = (self.layer_sizes[l + 1], self.layer_sizes[l])
            if w.shape != expect:
                raise InvalidArgumentError(f"weight {l} must have shape {expect}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(self.biases[l]))):
                raise InvalidArgumentError("parameters must be finite")

    def copy(self):
        return MlpParams(self.layer_sizes, [w.copy() for w in self.weights],
                         [b.copy() for b in self.biases])


def init_params(layer_sizes, seed):
    """Uniform +-1/sqrt(fan_in) initialization, seeded."""
    rng = np.random.default_rng((int(seed), 811))
    weights, biases = [], []
    for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = 1.0 / np.sqrt(n_in)
        weights.append(rng.uniform(-bound, bound, size=(n_out, n_in)))
        biases.append(rng.uniform(-bound, bound, size=n_out))
    return MlpParams(tuple(layer_sizes), weights, biases)


def _forward(params, Z):
    """phi values plus per-layer caches. Z is (M, d)."""
    A = [np.asarray(Z, dtype=np.float64)]
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        s = A[-1] @ w.T + b
        A.append(np.tanh(s) if l < len(params.weights) - 1 else s)
    return A[-1][:, 0], A


def _forward_with_input_grad(params, Z):
    """phi, d(phi)/dZ and the caches needed for the second-order sweep."""
    phis, A = _forward(params, Z)
    L = len(params.weights)
    M = Z.shape[0]
    U = [None] * (L + 1)  # U[l]: d(phi)/d(a_l)
    T = [None] * (L + 1)
    U[L] = np.ones((M, 1))
    for l in range(L, 0, -1):
        if l == L:
            T[l] = U[l]
        else:
            T[l] = U[l] * (1.0 - A[l] ** 2)
        U[l - 1] = T[l] @ params.weights[l - 1]
    return phis, U[0], A, U, T


def _backprop_value(params, A, alpha, grads_w, grads_b):
    """Accumulate d(sum alpha_m phi_m)/dtheta into grads (first order only)."""
    L = len(params.weights)
    abar = alpha[:, None]
    for l in range(L, 0, -1):
        if l == L:
            sbar = abar
        else:
            sbar = abar * (1.0 - A[l] ** 2)
        grads_w[l - 1] += sbar.T @ A[l - 1]
        grads_b[l - 1] += sbar.sum(axis=0)
        abar = sbar @ params.weights[l - 1]


def _backprop_value_and_grad(params, A, U, T, alpha, gbar, grads_w, grads_b):
    """Accumulate d(sum_m alpha_m phi_m + gbar_m . grad_phi_m)/dtheta.

    Reverse sweep through both the forward chain and the input-gradient
    chain; hidden-layer curvature enters via tanh'' = -2 a (1 - a^2).
    """
    L = len(params.weights)
    M = A[0].shape[0]
    sbar = [None] * (L + 1)

    # unwind the input-gradient pass (its computation ran l = L..1)
    ubar = gbar
    for l in range(1, L + 1):
        w = params.weights[l - 1]
        tbar = ubar @ w.T
        grads_w[l - 1] += T[l].T @ ubar
        if l < L:
            h1 = 1.0 - A[l] ** 2
            h2 = -2.0 * A[l] * h1
            sbar[l] = tbar * U[l] * h2
            ubar = tbar * h1
        # output layer: h' = 1, h'' = 0; U[L] is constant

    # unwind the forward pass
    abar = alpha[:, None]
    for l in range(L, 0, -1):
        if l == L:
            s_total = abar
        else:
            s_total = abar * (1.0 - A[l] ** 2)
        if sbar[l] is not None:
            s_total = s_total + sbar[l]
        grads_w[l - 1] += s_total.T @ A[l - 1]
        grads_b[l - 1] += s_total.sum(axis=0)
        abar = s_total @ params.weights[l - 1]


@dataclass
class LyapunovModel:
    """Trained value function: MLP parameters anchored at a goal state."""

    params: MlpParams
    goal: np.ndarray
    phi_at_zero: float = None

    def __post_init__(self):
        self.goal = np.asarray(self.goal, dtype=np.float64)
        if self.goal.shape != (self.params.layer_sizes[0],):
            raise InvalidArgumentError("goal dimension does not match the network input")
        if self.phi_at_zero is None:
            phi0, _ = _forward(self.params, np.zeros((1, len(self.goal))))
            self.phi_at_zero = float(phi0[0])

    @property
    def dim(self):
        return len(self.goal)


def lyapunov_value(model, x):
    """V(x) = phi(x - g) - phi(0) + |x - g|; exactly 0 at the goal."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.dim,):
        raise InvalidArgumentError(f"state must have shape ({model.dim},)")
    return float(lyapunov_value_batch(model, x[None, :])[0])


def lyapunov_value_batch(model, X):
    Z = np.asarray(X, dtype=np.float64) - model.goal
    phis, _ = _forward(model.params, Z)
    return phis - model.phi_at_zero + np.linalg.norm(Z, axis=1)


def lyapunov_gradient(model, x):
    """Analytic grad_x V; undefined at the goal (norm term kink)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.dim,):
        raise InvalidArgumentError(f"state must have shape ({model.dim},)")
    z = x - model.goal
    r = float(np.linalg.norm(z))
    if r <= 1e-12:
        raise AtGoalError("Lyapunov gradient is undefined at the goal state")
    _, G, _, _, _ = _forward_with_input_grad(model.params, z[None, :])
    return G[0] + z / r


def lyapunov_gradient_batch(model, X):
    Z = np.asarray(X, dtype=np.float64) - model.goal
    r = np.linalg.norm(Z, axis=1)
    if np.any(r <= 1e-12):
        raise AtGoalError("batch contains the goal state")
    _, G, _, _, _ = _forward_with_input_grad(model.params, Z)
    return G + Z / r[:, None]


@dataclass
class TrainConfig:
    epsilon: float = 0.01
    lambda1: float = 4.0
    lambda2: float = 4.0
    learning_rate: float = 2e-3
    lr_decay: float = 0.05      # final lr fraction, reached exponentially
    epochs: int = 400
    batch_size: int = 1024
    seed: int = 0
    multiplier_growth: float = 1.04
    multiplier_cap: float = 1e4
    layer_sizes: tuple = None   # defaults per scene dimension

    def __post_init__(self):
        if not (0.0 < self.epsilon < 1.0):
            raise InvalidArgumentError("epsilon must lie in (0, 1)")
        if self.lambda1 < 0 or self.lambda2 < 0 or self.multiplier_growth < 1.0:
            raise InvalidArgumentError("multipliers must be >= 0 and growth >= 1")


@dataclass
class LossComponents:
    alignment: float
    positivity: float
    decrease: float
    skipped: int = 0

    def total(self, lambda1, lambda2):
        return self.alignment + lambda1 * self.positivity + lambda2 * self.decrease


def _loss_terms(params, goal, X, Xdot, Xp, epsilon, lambda1, lambda2, *, want_grads):
    """Batch loss (sums) and, optionally, parameter gradients of the total."""
    Z = X - goal
    Zp = Xp - goal
    r = np.linalg.norm(Z, axis=1)
    rp = np.linalg.norm(Zp, axis=1)

    phis, G, A, U, T = _forward_with_input_grad(params, Z)
    phis_p, A_p = _forward(params, Zp)
    phi0, A_0 = _forward(params, np.zeros((1, Z.shape[1])))
    phi0 = float(phi0[0])

    Vn = phis - phi0 + r
    Vp = phis_p - phi0 + rp

    Wal = G + Z / r[:, None]
    wnorm = np.maximum(np.linalg.norm(Wal, axis=1), 1e-12)
    vhat = Xdot / np.linalg.norm(Xdot, axis=1)[:, None]
    cos = (Wal * vhat).sum(axis=1) / wnorm

    align = 1.0 + cos
    pos_viol = np.maximum(-Vn, 0.0)
    dec_arg = Vp - (1.0 - epsilon) * Vn
    dec_viol = np.maximum(dec_arg, 0.0)

    comps = LossComponents(float(align.sum()), float(pos_viol.sum()), float(dec_viol.sum()))
    if not want_grads:
        return comps, None, None

    m1 = (Vn < 0.0).astype(np.float64)
    m2 = (dec_arg > 0.0).astype(np.float64)

    grads_w = [np.zeros_like(w) for w in params.weights]
    grads_b = [np.zeros_like(b) for b in params.biases]

    gbar = vhat / wnorm[:, None] - (cos / wnorm**2)[:, None] * Wal
    alpha_n = -lambda1 * m1 - lambda2 * (1.0 - epsilon) * m2
    alpha_p = lambda2 * m2

    _backprop_value_and_grad(params, A, U, T, alpha_n, gbar, grads_w, grads_b)
    _backprop_value(params, A_p, alpha_p, grads_w, grads_b)
    alpha_0 = np.array([-(alpha_n.sum() + alpha_p.sum())])
    _backprop_value(params, A_0, alpha_0, grads_w, grads_b)
    return comps, grads_w, grads_b


def make_batch(demos, goal):
    """(x_n, xdot_n, x_{n+1}) triples pooled over demos.

    Goal-coincident states and zero-velocity samples cannot enter the
    alignment term; they are dropped here and the count reported.
    """
    xs, vs, xps = [], [], []
    skipped = 0
    for demo in demos:
        P, V = demo.positions, demo.velocities
        for n in range(len(V)):
            if np.linalg.norm(V[n]) == 0.0 or np.array_equal(P[n], goal):
                skipped += 1
                continue
            xs.append(P[n])
            vs.append(V[n])
            xps.append(P[n + 1])
    if not xs:
        return None, skipped
    return (np.asarray(xs), np.asarray(vs), np.asarray(xps)), skipped


def training_loss(model, batch, cfg):
    """Eq.-style batch loss: alignment sum plus hinge penalties.

    ``batch`` is an (X, Xdot, Xp) triple; zero-velocity rows are skipped
    and counted in the returned components.
    """
    X, Xdot, Xp = (np.asarray(a, dtype=np.float64) for a in batch)
    if len(X) == 0:
        raise InvalidArgumentError("batch must be nonempty")
    keep = np.linalg.norm(Xdot, axis=1) > 0.0
    skipped = int((~keep).sum())
    comps, _, _ = _loss_terms(model.params, model.goal, X[keep], Xdot[keep], Xp[keep],
                              cfg.epsilon, cfg.lambda1, cfg.lambda2, want_grads=False)
    comps.skipped = skipped
    return comps.total(cfg.lambda1, cfg.lambda2), comps


def training_loss_and_grads(model, batch, cfg):
    """Loss plus d(total)/dtheta; the finite-difference tests pin this."""
    X, Xdot, Xp = (np.asarray(a, dtype=np.float64) for a in batch)
    keep = np.linalg.norm(Xdot, axis=1) > 0.0
    comps, gw, gb = _loss_terms(model.params, model.goal, X[keep], Xdot[keep], Xp[keep],
                                cfg.epsilon, cfg.lambda1, cfg.lambda2, want_grads=True)
    comps.skipped = int((~keep).sum())
    return comps.total(cfg.lambda1, cfg.lambda2), comps, gw, gb


@dataclass
class StabilityReport:
    n_states: int
    positivity_violations: int
    decrease_violations: int
    max_violation_magnitude: float
    rho_estimate: float

    def to_dict(self):
        return dict(self.__dict__)

    @property
    def certified(self):
        return self.positivity_violations == 0 and self.decrease_violations == 0


def verify_stability(model, pairs, epsilon):
    """Exact violation counts of the positivity/decrease conditions.

    ``pairs`` is a sequence of (x_n, x_{n+1}); goal-coincident x_n are
    excluded from both checks. ``rho_estimate`` is the largest sublevel
    value below which every checked pair satisfies both conditions.
    """
    if len(pairs) == 0:
        raise InvalidArgumentError("pairs must be nonempty")
    Xn = np.asarray([p[0] for p in pairs], dtype=np.float64)
    Xp = np.asarray([p[1] for p in pairs], dtype=np.float64)
    Vn = lyapunov_value_batch(model, Xn)
    Vp = lyapunov_value_batch(model, Xp)
    non_goal = np.linalg.norm(Xn - model.goal, axis=1) > 0.0

    pos_bad = non_goal & (Vn <= 0.0)
    dec_bad = non_goal & (Vp > (1.0 - epsilon) * Vn)
    bad = pos_bad | dec_bad

    magnitudes = np.concatenate([
        -Vn[pos_bad],
        (Vp - (1.0 - epsilon) * Vn)[dec_bad],
    ])
    max_mag = float(magnitudes.max()) if len(magnitudes) else 0.0
    if bad.any():
        rho = max(0.0, float(Vn[bad].min()))
    else:
        rho = max(0.0, float(Vn.max()))
    return StabilityReport(
        n_states=len(pairs),
        positivity_violations=int(pos_bad.sum()),
        decrease_violations=int(dec_bad.sum()),
        max_violation_magnitude=max_mag,
        rho_estimate=rho,
    )


def train(dataset, scene, cfg):
    """Fit the Lyapunov network on the train split of ``dataset``.

    Returns ``(model, history)``. The model is the checkpoint with zero
    stability violations on the training states and the best alignment;
    ``history["status"]`` is "invalid" when no such epoch occurred,
    mirroring the certificate requirement.
    """
    demos = dataset.subset("train") if hasattr(dataset, "subset") else list(dataset)
    if len(demos) == 0:
        raise InvalidArgumentError("dataset has no training demonstrations")
    batch_all, skipped = make_batch(demos, scene.goal)
    if batch_all is None:
        raise InvalidArgumentError("no usable training samples")
    X, Xdot, Xp = batch_all
    M = len(X)

    layer_sizes = cfg.layer_sizes or DEFAULT_ARCH[scene.dim]
    if layer_sizes[0] != scene.dim:
        raise InvalidArgumentError("network input size must equal the scene dimension")
    params = init_params(layer_sizes, cfg.seed)

    adam_m = [np.zeros_like(w) for w in params.weights] + [np.zeros_like(b) for b in params.biases]
    adam_v = [np.zeros_like(g) for g in adam_m]
    beta1, beta2, eps_adam = 0.9, 0.999, 1e-8
    step = 0

    lam1, lam2 = cfg.lambda1, cfg.lambda2
    order_rng = np.random.default_rng((cfg.seed, 499))
    history = {"epochs": [], "skipped_samples": skipped, "status": "invalid"}
    best = None  # (alignment_mean, params_copy, epoch)

    pairs = list(zip(X, Xp))
    for epoch in range(cfg.epochs):
        epoch_lr = cfg.learning_rate * cfg.lr_decay ** (epoch / max(1, cfg.epochs - 1))
        perm = order_rng.permutation(M)
        for lo in range(0, M, cfg.batch_size):
            idx = perm[lo:lo + cfg.batch_size]
            comps, gw, gb = _loss_terms(params, scene.goal, X[idx], Xdot[idx], Xp[idx],
                                        cfg.epsilon, lam1, lam2, want_grads=True)
            total = comps.total(lam1, lam2)
            if not np.isfinite(total):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}",
                    last_checkpoint=best[1] if best else params.copy())
            step += 1
            scale_m = 1.0 / len(idx)
            lr_t = epoch_lr * np.sqrt(1.0 - beta2**step) / (1.0 - beta1**step)
            for slot, (p, g) in enumerate(zip(params.weights + params.biases, gw + gb)):
                g = g * scale_m
                adam_m[slot] = beta1 * adam_m[slot] + (1 - beta1) * g
                adam_v[slot] = beta2 * adam_v[slot] + (1 - beta2) * g * g
                p -= lr_t * adam_m[slot] / (np.sqrt(adam_v[slot]) + eps_adam)

        model_now = LyapunovModel(params, scene.goal)
        report = verify_stability(model_now, pairs, cfg.epsilon)
        comps, _, _ = _loss_terms(params, scene.goal, X, Xdot, Xp,
                                  cfg.epsilon, lam1, lam2, want_grads=False)
        align_mean = comps.alignment / M
        history["epochs"].append({
            "epoch": epoch,
            "alignment_mean": align_mean,
            "positivity_sum": comps.positivity,
            "decrease_sum": comps.decrease,
            "positivity_violations": report.positivity_violations,
            "decrease_violations": report.decrease_violations,
            "lambda1": lam1,
            "lambda2": lam2,
        })
        if report.certified:
            if best is None or align_mean < best[0]:
                best = (align_mean, params.copy(), epoch)
        else:
            lam1 = min(lam1 * cfg.multiplier_growth, cfg.multiplier_cap)
            lam2 = min(lam2 * cfg.multiplier_growth, cfg.multiplier_cap)

    if best is not None:
        history["status"] = "valid"
        history["best_epoch"] = best[2]
        params = best[1]
    model = LyapunovModel(params, scene.goal)
    final_report = verify_stability(model, pairs, cfg.epsilon)
    history["final_report"] = final_report.to_dict()
    return model, history


def config_hash(cfg):
    blob = json.dumps({k: (list(v) if isinstance(v, tuple) else v)
                       for k, v in sorted(cfg.__dict__.items())})
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def save_model(model, path, *, train_config=None):
    data = {
        "format": MODEL_FORMAT,
        "layer_sizes": list(model.params.layer_sizes),
        "weights": [w.tolist() for w in model.params.weights],
        "biases": [b.tolist() for b in model.params.biases],
        "goal": model.goal.tolist(),
        "config_hash": config_hash(train_config) if train_config else None,
    }
    with open(path, "w") as fh:
        json.dump(data, fh)
        fh.write("\n")


def load_model(path):
    with open(path) as fh:
        data = json.load(fh)
    if data.get("format") != MODEL_FORMAT:
        raise InvalidArgumentError(f"unsupported model format: {data.get('format')!r}")
    params = MlpParams(
        tuple(data["layer_sizes"]),
        [np.asarray(w, dtype=np.float64) for w in data["weights"]],
        [np.asarray(b, dtype=np.float64) for b in data["biases"]],
    )
    return LyapunovModel(params, np.asarray(data["goal"], dtype=np.float64))
