"""Inner-loop adaptation and the outer-loop rules: Reptile, Eigen-Reptile,
first-order MAML with a zeroed head (foMAML+ZO) and implicit MAML.

Two inner-loop modes exist. ``supervised_ce`` runs SGD on the cross-entropy of
the support set. ``batman_clr`` never looks at label identities beyond the way
partition: each step draws a fresh batch of ``v`` manifold samples from the
support augmentation pool and steps ``phi -= alpha / v * grad(sum DCL)``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .contrastive import DclConfig, dcl_loss
from .episodes import SplitDataset, Task, TaskSpec, sample_task
from .manifold import (Augmenter, AugmentationPool, ManBatch, batman_sample,
                       build_augmentation_pool, make_ssl_task, rand_batch)
from .nn import NetworkSpec, backward, ce_loss_and_grad, forward, hvp, init_network

log = logging.getLogger(__name__)

LEARNERS = ("reptile", "eigen_reptile", "fomaml_zo", "imaml")
MODES = ("supervised_ce", "batman_clr")
SAMPLERS = ("batman", "rand")

# inner-loop steps per learner when none are given explicitly
DEFAULT_STEPS = {"reptile": 7, "eigen_reptile": 7, "fomaml_zo": 5, "imaml": 12}


@dataclass(frozen=True)
class InnerLoopConfig:
    steps_u: int = 7
    lr_alpha: float = 0.1
    mode: str = "supervised_ce"
    batman_v: int = 5
    zero_out_head: bool = False
    sampler: str = "batman"
    support_augs: int = 5

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.sampler not in SAMPLERS:
            raise ValueError(f"sampler must be one of {SAMPLERS}, got {self.sampler!r}")
        if self.steps_u < 0 or self.lr_alpha <= 0 or self.batman_v < 1 or self.support_augs < 2:
            raise ValueError("invalid inner-loop configuration")


@dataclass(frozen=True)
class OuterConfig:
    lr_beta: float = 1.0
    meta_batch: int = 5
    query_v: int = 15
    query_sampler: str = "batman"
    query_augs: int = 2

    def __post_init__(self):
        if self.lr_beta <= 0 or self.meta_batch < 1 or self.query_v < 1 or self.query_augs < 2:
            raise ValueError("invalid outer-loop configuration")
        if self.query_sampler not in SAMPLERS:
            raise ValueError(f"query_sampler must be one of {SAMPLERS}")


@dataclass(frozen=True)
class ImamlConfig:
    lam: float = 0.5
    cg_iters: int = 5
    hvp_h: float = 1e-4

    def __post_init__(self):
        if not self.lam > 0 or self.cg_iters < 1 or not self.hvp_h > 0:
            raise ValueError("invalid iMAML configuration")


@dataclass
class InnerPath:
    points: list = field(default_factory=list)

    def as_array(self) -> np.ndarray:
        return np.stack(self.points)


# ---------------------------------------------------------------------------
# objectives
# ---------------------------------------------------------------------------


def zero_head(params, spec: NetworkSpec) -> np.ndarray:
    out = np.array(params, dtype=np.float64)
    if spec.head_width is not None:
        out[spec.head_slice()] = 0.0
    return out


def dcl_objective(params, spec: NetworkSpec, batch: ManBatch, dcl: DclConfig) -> tuple[float, np.ndarray]:
    """Sum of per-manifold DCL losses of ``batch`` and its parameter gradient."""
    v, n2, d = batch.x.shape
    z, trace = forward(params, spec, batch.x.reshape(v * n2, d))
    loss, gz = dcl_loss(z.reshape(v, n2, -1), dcl)
    return loss, backward(trace, gz.reshape(v * n2, -1))


def supervised_objective(params, spec: NetworkSpec, x, y) -> tuple[float, np.ndarray]:
    """Cross-entropy with task labels 1..N."""
    return ce_loss_and_grad(params, spec, x, np.asarray(y) - 1)


def _draw(pool: AugmentationPool, N: int, v: int, sampler: str, aug: Augmenter, rng) -> ManBatch:
    if sampler == "rand":
        return rand_batch(pool, N, v, aug, rng)
    return batman_sample(pool, N, v, aug, rng)


# ---------------------------------------------------------------------------
# inner loop
# ---------------------------------------------------------------------------


def inner_adapt(theta, task: Task, cfg: InnerLoopConfig, spec: NetworkSpec, seed, *,
                dcl: DclConfig = DclConfig(), aug: Augmenter = Augmenter(),
                proximal: Optional[float] = None) -> tuple[np.ndarray, InnerPath]:
    """Adapt ``theta`` to ``task``'s support set.

    ``proximal`` adds ``(lam/2) * ||phi - theta||^2`` to every step's objective
    (the iMAML inner problem). The returned path starts at ``theta`` after the
    optional head reset.
    """
    rng = np.random.default_rng(seed)
    start = zero_head(theta, spec) if cfg.zero_out_head else np.array(theta, dtype=np.float64)
    phi = start.copy()
    path = InnerPath([start.copy()])
    if cfg.mode == "supervised_ce":
        x, y = task.support.x, task.support.y

        def step_grad(p):
            return supervised_objective(p, spec, x, y)[1]
    else:
        pool = build_augmentation_pool(task.support, aug, cfg.support_augs, rng)
        v = cfg.batman_v

        def step_grad(p):
            batch = _draw(pool, task.N, v, cfg.sampler, aug, rng)
            return dcl_objective(p, spec, batch, dcl)[1] / v

    for _ in range(cfg.steps_u):
        g = step_grad(phi)
        if proximal is not None:
            g = g + proximal * (phi - start)
        phi = phi - cfg.lr_alpha * g
        path.points.append(phi.copy())
    return phi, path


# ---------------------------------------------------------------------------
# outer-loop rules
# ---------------------------------------------------------------------------


def reptile_update(theta, phis, beta: float) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64)
    phis = [np.asarray(p, dtype=np.float64) for p in phis]
    if not phis:
        raise ValueError("reptile_update needs at least one adapted vector")
    if any(p.shape != theta.shape for p in phis):
        raise ValueError("length mismatch between theta and phis")
    return theta + beta * (np.mean(phis, axis=0) - theta)


def principal_direction(points: np.ndarray, iters: int = 500, tol: float = 1e-14) -> Optional[np.ndarray]:
    """Unit top principal direction of the rows of ``points``.

    Power iteration runs on the small ``(m, m)`` Gram matrix of the centred
    points; the parameter-space direction is mapped back through them. Returns
    ``None`` when all points coincide.
    """
    X = points - points.mean(axis=0)
    G = X @ X.T
    if not np.any(G):
        return None
    a = X @ (points[-1] - points[0])
    if not np.any(a):
        a = np.ones(len(points))
    a /= np.linalg.norm(a)
    for _ in range(iters):
        b = G @ a
        nb = np.linalg.norm(b)
        if nb == 0:
            return None
        b /= nb
        if np.linalg.norm(b - a) < tol:
            a = b
            break
        a = b
    d = X.T @ a
    nd = np.linalg.norm(d)
    return None if nd == 0 else d / nd


def eigen_reptile_update(theta, path: InnerPath, beta: float) -> np.ndarray:
    """Step along the top principal direction of the inner path.

    The direction is oriented towards the final point and the step length is
    the projection of the total displacement onto it.
    """
    theta = np.asarray(theta, dtype=np.float64)
    pts = path.as_array()
    if len(pts) < 2:
        raise ValueError("path needs at least two points")
    d = principal_direction(pts)
    if d is None:
        return theta.copy()
    delta = pts[-1] - pts[0]
    m = float(d @ delta)
    if m < 0:
        d, m = -d, -m
    return theta + beta * m * d


def query_objective(phi, task: Task, spec: NetworkSpec, mode: str, outer: OuterConfig,
                    seed, *, dcl: DclConfig = DclConfig(), aug: Augmenter = Augmenter()):
    """Query loss and gradient at ``phi``: CE on the query set or summed DCL on a
    query batch of ``outer.query_v`` manifolds."""
    if len(task.query) == 0:
        raise ValueError("task has an empty query set")
    if mode == "supervised_ce":
        return supervised_objective(phi, spec, task.query.x, task.query.y)
    rng = np.random.default_rng(seed)
    pool = build_augmentation_pool(task.query, aug, outer.query_augs, rng)
    batch = _draw(pool, task.N, outer.query_v, outer.query_sampler, aug, rng)
    return dcl_objective(phi, spec, batch, dcl)


def fomaml_zo_meta_grad(phi, task: Task, cfg: InnerLoopConfig, spec: NetworkSpec, seed, *,
                        outer: OuterConfig = OuterConfig(), dcl: DclConfig = DclConfig(),
                        aug: Augmenter = Augmenter()) -> np.ndarray:
    """First-order meta-gradient: the query-loss gradient evaluated at ``phi``."""
    return query_objective(phi, task, spec, cfg.mode, outer, seed, dcl=dcl, aug=aug)[1]


@dataclass
class CGInfo:
    iterations: int
    residuals: list
    breakdown: bool = False


def conjugate_gradient(matvec: Callable[[np.ndarray], np.ndarray], b, iters: int,
                       tol: float = 1e-12) -> tuple[np.ndarray, CGInfo]:
    """Plain CG from ``x0 = 0``. Stops early on convergence or non-positive curvature."""
    b = np.asarray(b, dtype=np.float64)
    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rs = float(r @ r)
    info = CGInfo(0, [np.sqrt(rs)])
    if rs == 0.0:
        return x, info
    for k in range(iters):
        Ap = matvec(p)
        curv = float(p @ Ap)
        if curv <= 0.0:
            info.breakdown = True
            log.debug("CG breakdown at iteration %d (curvature %.3g); returning best iterate", k, curv)
            break
        alpha = rs / curv
        x = x + alpha * p
        r = r - alpha * Ap
        rs_new = float(r @ r)
        info.iterations = k + 1
        info.residuals.append(np.sqrt(rs_new))
        if np.sqrt(rs_new) <= tol * info.residuals[0]:
            break
        p = r + (rs_new / rs) * p
        rs = rs_new
    return x, info


def implicit_meta_grad(query_grad, support_grad_fn: Callable[[np.ndarray], np.ndarray], phi,
                       cfg: ImamlConfig) -> tuple[np.ndarray, CGInfo]:
    """Solve ``(I + H / lam) x = g`` with H the support-loss Hessian at ``phi``."""
    phi = np.asarray(phi, dtype=np.float64)

    def matvec(v):
        return v + hvp(support_grad_fn, phi, v, cfg.hvp_h) / cfg.lam

    return conjugate_gradient(matvec, query_grad, cfg.cg_iters)


def imaml_meta_grad(theta, phi, task: Task, inner: InnerLoopConfig, cfg: ImamlConfig,
                    spec: NetworkSpec, seed, *, outer: OuterConfig = OuterConfig(),
                    dcl: DclConfig = DclConfig(), aug: Augmenter = Augmenter()) -> np.ndarray:
    """Implicit meta-gradient for a ``phi`` adapted with the proximal term.

    In ``batman_clr`` mode the Hessian is taken of the contrastive loss on one
    fixed support batch so that the finite-difference HVP sees a deterministic
    function.
    """
    rng = np.random.default_rng(seed)
    g = query_objective(phi, task, spec, inner.mode, outer, rng, dcl=dcl, aug=aug)[1]
    if inner.mode == "supervised_ce":
        x, y = task.support.x, task.support.y

        def support_grad(p):
            return supervised_objective(p, spec, x, y)[1]
    else:
        pool = build_augmentation_pool(task.support, aug, inner.support_augs, rng)
        batch = _draw(pool, task.N, inner.batman_v, inner.sampler, aug, rng)

        def support_grad(p):
            return dcl_objective(p, spec, batch, dcl)[1] / inner.batman_v

    return implicit_meta_grad(g, support_grad, phi, cfg)[0]


# ---------------------------------------------------------------------------
# meta-training
# ---------------------------------------------------------------------------


def _task_for(data: SplitDataset, task_spec: TaskSpec, task_source: str, aug: Augmenter, seed) -> Task:
    if task_source == "ssl":
        return make_ssl_task(data, task_spec.N, task_spec.K, task_spec.Q, aug, seed)
    return sample_task(data, task_spec, seed)


def meta_train(data: SplitDataset, learner: str, inner: InnerLoopConfig, outer: OuterConfig,
               imaml: ImamlConfig, spec: NetworkSpec, epochs: int, seed, *,
               task_spec: TaskSpec = TaskSpec(5, 5, 15), dcl: DclConfig = DclConfig(),
               aug: Augmenter = Augmenter(), task_source: str = "labeled",
               theta0=None, callback=None) -> np.ndarray:
    """Run ``epochs`` meta-epochs of ``learner`` and return the meta-parameters.

    Every meta-epoch samples ``outer.meta_batch`` tasks; their updates are
    averaged. Reptile-type learners ignore the query set, so their tasks are
    drawn with ``Q = 0``.
    """
    if learner not in LEARNERS:
        raise ValueError(f"learner must be one of {LEARNERS}, got {learner!r}")
    if inner.mode == "supervised_ce" and spec.head_width != task_spec.N:
        raise ValueError("supervised meta-training needs a head with N outputs")
    if inner.mode == "batman_clr" and spec.head_width is not None:
        raise ValueError("contrastive meta-training expects an embedding network without head")
    if learner == "fomaml_zo" and spec.head_width is not None and not inner.zero_out_head:
        inner = replace(inner, zero_out_head=True)
    theta = init_network(spec, [int(seed), 0]) if theta0 is None else np.array(theta0, dtype=np.float64)
    uses_query = learner in ("fomaml_zo", "imaml")
    ts = task_spec if uses_query else TaskSpec(task_spec.N, task_spec.K, 0)
    for epoch in range(epochs):
        updates = []
        for t in range(outer.meta_batch):
            tseed = [int(seed), 1, epoch, t]
            task = _task_for(data, ts, task_source, aug, tseed + [0])
            prox = imaml.lam if learner == "imaml" else None
            phi, path = inner_adapt(theta, task, inner, spec, tseed + [1], dcl=dcl, aug=aug,
                                    proximal=prox)
            if learner == "reptile":
                updates.append(phi - theta)
            elif learner == "eigen_reptile":
                updates.append(eigen_reptile_update(theta, path, 1.0) - theta)
            elif learner == "fomaml_zo":
                g = fomaml_zo_meta_grad(phi, task, inner, spec, tseed + [2], outer=outer,
                                        dcl=dcl, aug=aug)
                updates.append(-g)
            else:
                g = imaml_meta_grad(theta, phi, task, inner, imaml, spec, tseed + [2],
                                    outer=outer, dcl=dcl, aug=aug)
                updates.append(-g)
        theta = theta + outer.lr_beta * np.mean(updates, axis=0)
        if callback is not None:
            callback(epoch, theta)
    return theta
