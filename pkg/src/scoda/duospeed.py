"""Dual-speed teacher-student engine.

The student moves fast (SGD with momentum, every batch); the teacher
moves slowly (EMA of the student after each student step, plus an EMA of
the student's BatchNorm running statistics).  One adaptation step is:

    teacher forward (eval mode, read-only)
    student forward (train mode)
    loss + gradient          (losses module)
    backward through student
    sgd_step   on the student
    ema_step   teacher <- m * teacher + (1-m) * student
    bn_ema_step  same, on BN running statistics

in exactly this order.  Also here: the BYOL-style self-supervised
pre-training used to produce the initial checkpoint h, and continual
chaining across a sequence of target domains.
"""

from dataclasses import dataclass, field

import numpy as np

from .datagen import AugmentSpec, DomainDataset, augment_view
from .errors import ConfigError, DataError, DivergenceError, ShapeError
from .losses import LossValue, cos_loss, space_loss, total_loss
from .model import (FeatureExtractorParams, backward_features, clone_params,
                    forward_features, init_params)
from .numkernel import linear_backward, linear_forward

VARIANTS = ("full", "cos_only", "space_only")

__all__ = [
    "AdaptationConfig",
    "OptimizerState",
    "AdaptRunResult",
    "VARIANTS",
    "sgd_step",
    "ema_step",
    "bn_ema_step",
    "adapt_step",
    "adapt_run",
    "pretext_pretrain",
    "continual_run",
]


@dataclass
class AdaptationConfig:
    """Scalar knobs for one adaptation (or pre-training) run.

    validate() enforces the documented ranges and is always called on
    the config-file path; the engine itself accepts anything finite so
    unit tests can probe boundary behaviour (eta=0 freezes the student,
    m=0 makes the teacher track it).
    """
    lam: float = 1.0
    m: float = 0.999
    eta: float = 0.0012
    sgd_momentum: float = 0.9
    weight_decay: float = 1e-3
    batch_size: int = 64
    epochs: int = 30
    seed: int = 0
    shuffle: bool = True

    def validate(self):
        if not 0.0 <= self.m < 1.0:
            raise ConfigError(f"m must be in [0, 1), got {self.m}")
        if not self.eta > 0:
            raise ConfigError(f"eta must be > 0, got {self.eta}")
        if self.batch_size < 2:
            raise ConfigError(f"batch_size must be >= 2, got {self.batch_size}")
        if self.lam < 0:
            raise ConfigError(f"lambda must be >= 0, got {self.lam}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if not np.isfinite([self.eta, self.m, self.lam, self.sgd_momentum,
                            self.weight_decay]).all():
            raise ConfigError("config values must be finite")
        return self


@dataclass
class OptimizerState:
    """SGD velocity buffers mirroring a student's parameter layout."""
    velocity: list = field(default_factory=list)

    @staticmethod
    def for_params(params: FeatureExtractorParams) -> "OptimizerState":
        vel = []
        for layer in params.layers:
            v = {"w": np.zeros_like(layer.w), "b": np.zeros_like(layer.b),
                 "gamma": None, "beta": None}
            if layer.bn is not None:
                v["gamma"] = np.zeros_like(layer.bn.gamma)
                v["beta"] = np.zeros_like(layer.bn.beta)
            vel.append(v)
        return OptimizerState(vel)


@dataclass
class AdaptRunResult:
    adapted_student: FeatureExtractorParams
    final_teacher: FeatureExtractorParams
    loss_trace: list          # one LossValue per executed step
    degeneracy_count: int     # eps-guarded rows/columns seen across the run


def _check_structure(a: FeatureExtractorParams, b, what: str):
    nb = len(b.velocity) if isinstance(b, OptimizerState) else len(b.layers)
    if len(a.layers) != nb:
        raise ShapeError(f"{what}: {len(a.layers)} layers vs {nb}")


def sgd_step(student: FeatureExtractorParams, grads, opt_state: OptimizerState,
             eta: float, sgd_momentum: float, weight_decay: float):
    """v <- mu*v + g + wd*p ; p <- p - eta*v  for every learnable.

    Weight decay applies to weights and biases but not to BN gamma/beta;
    running statistics are never touched here.
    """
    if len(grads) != len(student.layers) or len(opt_state.velocity) != len(student.layers):
        raise ShapeError("sgd_step: grads/velocity do not match student layout")
    for layer, g, v in zip(student.layers, grads, opt_state.velocity):
        if g["w"].shape != layer.w.shape:
            raise ShapeError(f"sgd_step: grad {g['w'].shape} vs weight {layer.w.shape}")
        v["w"] = sgd_momentum * v["w"] + g["w"] + weight_decay * layer.w
        layer.w = layer.w - eta * v["w"]
        v["b"] = sgd_momentum * v["b"] + g["b"] + weight_decay * layer.b
        layer.b = layer.b - eta * v["b"]
        if layer.bn is not None:
            if g["gamma"] is None:
                raise ShapeError("sgd_step: BN layer received no gamma gradient")
            v["gamma"] = sgd_momentum * v["gamma"] + g["gamma"]
            layer.bn.gamma = layer.bn.gamma - eta * v["gamma"]
            v["beta"] = sgd_momentum * v["beta"] + g["beta"]
            layer.bn.beta = layer.bn.beta - eta * v["beta"]


def ema_step(teacher: FeatureExtractorParams, student: FeatureExtractorParams, m: float):
    """theta <- m*theta + (1-m)*psi on every learnable teacher parameter."""
    _check_structure(teacher, student, "ema_step")
    for lt, ls in zip(teacher.layers, student.layers):
        if lt.w.shape != ls.w.shape or (lt.bn is None) != (ls.bn is None):
            raise ShapeError("ema_step: teacher/student layer mismatch")
        lt.w = m * lt.w + (1 - m) * ls.w
        lt.b = m * lt.b + (1 - m) * ls.b
        if lt.bn is not None:
            lt.bn.gamma = m * lt.bn.gamma + (1 - m) * ls.bn.gamma
            lt.bn.beta = m * lt.bn.beta + (1 - m) * ls.bn.beta


def bn_ema_step(teacher: FeatureExtractorParams, student: FeatureExtractorParams, m: float):
    """Running-statistics EMA with the same momentum; variance kept >= 0."""
    _check_structure(teacher, student, "bn_ema_step")
    for lt, ls in zip(teacher.layers, student.layers):
        if (lt.bn is None) != (ls.bn is None):
            raise ShapeError("bn_ema_step: teacher/student layer mismatch")
        if lt.bn is not None:
            lt.bn.running_mean = m * lt.bn.running_mean + (1 - m) * ls.bn.running_mean
            lt.bn.running_var = np.maximum(
                m * lt.bn.running_var + (1 - m) * ls.bn.running_var, 0)


def adapt_step(teacher: FeatureExtractorParams, student: FeatureExtractorParams,
               opt_state: OptimizerState, batch: np.ndarray, cfg: AdaptationConfig,
               variant: str = "full"):
    """One full step on one batch; returns (LossValue, n_degenerate).

    variant selects the distillation gradient: "full" uses
    cos + lam*space, "cos_only" drops the space term from the gradient
    (both components still recorded), "space_only" trains on the space
    term alone at weight 1.
    """
    if batch.shape[0] < 2:
        raise DataError(f"adapt_step needs a batch of >= 2 rows, got {batch.shape[0]}")
    f_teacher, _ = forward_features(teacher, batch, "eval")
    f_student, caches = forward_features(student, batch, "train")
    if variant == "full":
        lv, grad, ndegen = total_loss(f_teacher, f_student, cfg.lam)
    elif variant == "cos_only":
        lv, grad, ndegen = total_loss(f_teacher, f_student, 0.0)
    elif variant == "space_only":
        cv, _, cd = cos_loss(f_teacher, f_student)
        sv, grad, sd = space_loss(f_teacher, f_student)
        lv = LossValue(total=sv, cos_component=cv, space_component=sv, lam=1.0)
        ndegen = cd + sd
    else:
        raise ConfigError(f"unknown loss variant {variant!r}; expected one of {VARIANTS}")
    grads = backward_features(student, caches, grad)
    sgd_step(student, grads, opt_state, cfg.eta, cfg.sgd_momentum, cfg.weight_decay)
    ema_step(teacher, student, cfg.m)
    bn_ema_step(teacher, student, cfg.m)
    return lv, ndegen


def adapt_run(source_checkpoint: FeatureExtractorParams, target_data: DomainDataset,
              cfg: AdaptationConfig, variant: str = "full", step_callback=None,
              teacher_init: FeatureExtractorParams | None = None) -> AdaptRunResult:
    """Adapt a source checkpoint to one unlabeled target domain.

    Both nets start as copies of the checkpoint (teacher_init overrides
    the teacher's start, used by continual_run to carry the slow net
    across stages).  Labels in target_data are never read.  Epochs use a
    seeded shuffle; a final partial batch smaller than 2 is dropped.
    step_callback(step_index, student, teacher), if given, runs after
    every completed step.
    """
    feats = target_data.features
    if feats.shape[0] == 0:
        raise DataError("adapt_run: empty target dataset")
    if variant not in VARIANTS:
        raise ConfigError(f"unknown loss variant {variant!r}; expected one of {VARIANTS}")
    teacher = clone_params(teacher_init if teacher_init is not None else source_checkpoint)
    student = clone_params(source_checkpoint)
    opt = OptimizerState.for_params(student)
    rng = np.random.default_rng([cfg.seed, 0])
    N = feats.shape[0]
    trace, ndegen, step = [], 0, 0
    for _ in range(cfg.epochs):
        order = rng.permutation(N) if cfg.shuffle else np.arange(N)
        for s0 in range(0, N, cfg.batch_size):
            idx = order[s0:s0 + cfg.batch_size]
            if len(idx) < 2:
                continue
            lv, nd = adapt_step(teacher, student, opt, feats[idx], cfg, variant)
            if not np.isfinite(lv.total):
                raise DivergenceError(step, f"non-finite loss at step {step}")
            trace.append(lv)
            ndegen += nd
            if step_callback is not None:
                step_callback(step, student, teacher)
            step += 1
    return AdaptRunResult(student, teacher, trace, ndegen)


def pretext_pretrain(spec, source_data: DomainDataset, cfg: AdaptationConfig,
                     aug: AugmentSpec) -> FeatureExtractorParams:
    """Self-supervised initialization on unlabeled source data.

    BYOL shape, simplified: an online net with a single linear predictor
    head chases an EMA target net across two augmented views of each
    batch; the loss is the instance-level cosine term, symmetrized over
    the views.  Labels are ignored.  Returns the online network (the
    predictor is discarded); this is the checkpoint h that adapt_run
    consumes.
    """
    feats = source_data.features
    if feats.shape[0] == 0:
        raise DataError("pretext_pretrain: empty source dataset")
    online = init_params(spec, cfg.seed)
    target = clone_params(online)
    rng = np.random.default_rng([cfg.seed, 100])
    rng_pred = np.random.default_rng([cfg.seed, 101])
    d = online.feature_dim
    bound = np.sqrt(6.0 / d)
    pw = rng_pred.uniform(-bound, bound, (d, d))
    pb = np.zeros(d)
    opt = OptimizerState.for_params(online)
    v_pw, v_pb = np.zeros_like(pw), np.zeros_like(pb)
    mu, wd, eta = cfg.sgd_momentum, cfg.weight_decay, cfg.eta
    N = feats.shape[0]
    step = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(N) if cfg.shuffle else np.arange(N)
        for s0 in range(0, N, cfg.batch_size):
            idx = order[s0:s0 + cfg.batch_size]
            if len(idx) < 2:
                continue
            batch = feats[idx]
            view_a = augment_view(batch, aug, rng)
            view_b = augment_view(batch, aug, rng)
            ta, _ = forward_features(target, view_a, "train")
            tb, _ = forward_features(target, view_b, "train")
            oa, cache_a = forward_features(online, view_a, "train")
            ob, cache_b = forward_features(online, view_b, "train")
            pa = linear_forward(oa, pw, pb)
            pb_out = linear_forward(ob, pw, pb)
            # symmetrized: each view's prediction chases the *other*
            # view's (stop-grad) target features
            ca, g1, _ = cos_loss(ta, pb_out)
            cb, g2, _ = cos_loss(tb, pa)
            if not np.isfinite(ca + cb):
                raise DivergenceError(step, f"pretext loss non-finite at step {step}")
            g_pb_out, g_pa = 0.5 * g1, 0.5 * g2
            g_ob, g_pw_b, g_pb_b = linear_backward(ob, pw, g_pb_out)
            g_oa, g_pw_a, g_pb_a = linear_backward(oa, pw, g_pa)
            gb = backward_features(online, cache_b, g_ob)
            ga = backward_features(online, cache_a, g_oa)
            grads = [{k: (b[k] + a[k] if b[k] is not None else None) for k in b}
                     for b, a in zip(gb, ga)]
            sgd_step(online, grads, opt, eta, mu, wd)
            v_pw = mu * v_pw + (g_pw_b + g_pw_a) + wd * pw
            pw = pw - eta * v_pw
            v_pb = mu * v_pb + (g_pb_b + g_pb_a) + wd * pb
            pb = pb - eta * v_pb
            ema_step(target, online, cfg.m)
            step += 1
    return online


def continual_run(source_checkpoint: FeatureExtractorParams, targets,
                  cfg: AdaptationConfig, variant: str = "full"):
    """Adapt to a sequence of target domains, carrying both nets forward.

    Stage k starts from stage k-1's final student AND final teacher (the
    slow net's memory is the point of chaining); only stage 1 starts
    from the checkpoint.  Returns one AdaptRunResult per stage.
    """
    targets = list(targets)
    if not targets:
        raise ValueError("continual_run: need at least one target domain")
    results = []
    student_init = source_checkpoint
    teacher_init = None
    for ds in targets:
        res = adapt_run(student_init, ds, cfg, variant=variant, teacher_init=teacher_init)
        results.append(res)
        student_init = res.adapted_student
        teacher_init = res.final_teacher
    return results
