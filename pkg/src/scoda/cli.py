"""Command-line entry point for the adaptation pipeline.

Subcommands: gen-data, pretrain, adapt, eval, ablate, gradcheck.  A JSON
config file (sections: data, model, pretrain, adapt, eval) drives
everything; flags stay minimal (--config, --seed, --out plus per-command
inputs).  The config is merged over defaults and fully validated before
any file is touched, and every emitted artifact carries the seed and a
hash of the effective config.

Exit codes: 0 success, 1 check failure, 2 config error, 3 I/O error,
4 numerical divergence.
"""

import argparse
import copy
import hashlib
import json
import math
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from .datagen import (AugmentSpec, DomainDataset, DomainShiftSpec,
                      load_dataset, make_domain_pair, save_dataset,
                      split_dataset)
from .duospeed import (VARIANTS, AdaptationConfig, AdaptRunResult, adapt_run,
                       continual_run, pretext_pretrain)
from .errors import (CheckpointError, ConfigError, DataError, DivergenceError,
                     ShapeError)
from .evalsuite import (ablation_run, evaluate_model, extract_features,
                        forgetting_report, write_report)
from .losses import cos_loss, space_loss, total_loss
from .model import (backward_features, default_spec, forward_features,
                    init_params, load_checkpoint, save_checkpoint)
from .numkernel import (BatchNormState, batchnorm_backward, batchnorm_forward,
                        grad_check, linear_backward, linear_forward)

# ---------------------------------------------------------------------------
# config document

DEFAULTS = {
    "data": {
        "seed": 0,
        "n_classes": 3,
        "dim": 16,
        "n_per_class": 200,
        "n_targets": 1,
        "shift": {
            "rotation_degrees": 30.0,
            "mean_shift": 1.0,
            "scale": 1.2,
            "noise_sigma": 0.3,
        },
    },
    "model": {"hidden": [64, 64], "feature_dim": 32},
    "pretrain": {
        "m": 0.99,
        "eta": 0.05,
        "sgd_momentum": 0.9,
        "weight_decay": 1e-3,
        "batch_size": 64,
        "epochs": 100,
        "seed": 0,
        "shuffle": True,
        "augment": {"noise_sigma": 0.0, "scale_jitter": 0.0, "dropout_prob": 0.15},
    },
    "adapt": {
        "lambda": 1.0,
        "m": 0.999,
        "eta": 0.0012,
        "sgd_momentum": 0.9,
        "weight_decay": 1e-3,
        "batch_size": 64,
        "epochs": 30,
        "seed": 0,
        "shuffle": True,
        "variant": "full",
    },
    "eval": {"seeds": [0]},
}


def _merge(defaults, user, path):
    """Overlay a user document onto defaults, rejecting unknown keys."""
    for key in user:
        if key not in defaults:
            raise ConfigError(f"{path}{key}: unknown key")
    out = {}
    for key, dval in defaults.items():
        if key in user:
            uval = user[key]
            if isinstance(dval, dict):
                if not isinstance(uval, dict):
                    raise ConfigError(f"{path}{key}: expected an object")
                out[key] = _merge(dval, uval, path + key + ".")
            else:
                out[key] = uval
        else:
            out[key] = copy.deepcopy(dval)
    return out


def _int_field(v, path, lo):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{path}: expected an integer, got {v!r}")
    if v < lo:
        raise ConfigError(f"{path}: must be >= {lo}, got {v}")
    return v


def _num_field(v, path, lo=None, lo_strict=None, hi_strict=None):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {v!r}")
    v = float(v)
    if not math.isfinite(v):
        raise ConfigError(f"{path}: must be finite, got {v}")
    if lo is not None and v < lo:
        raise ConfigError(f"{path}: must be >= {lo}, got {v}")
    if lo_strict is not None and v <= lo_strict:
        raise ConfigError(f"{path}: must be > {lo_strict}, got {v}")
    if hi_strict is not None and v >= hi_strict:
        raise ConfigError(f"{path}: must be < {hi_strict}, got {v}")
    return v


def _bool_field(v, path):
    if not isinstance(v, bool):
        raise ConfigError(f"{path}: expected true/false, got {v!r}")
    return v


def _check_train_section(s, sec):
    s["m"] = _num_field(s["m"], f"{sec}.m", lo=0.0, hi_strict=1.0)
    s["eta"] = _num_field(s["eta"], f"{sec}.eta", lo_strict=0.0)
    s["sgd_momentum"] = _num_field(s["sgd_momentum"], f"{sec}.sgd_momentum",
                                   lo=0.0, hi_strict=1.0)
    s["weight_decay"] = _num_field(s["weight_decay"], f"{sec}.weight_decay", lo=0.0)
    s["batch_size"] = _int_field(s["batch_size"], f"{sec}.batch_size", 2)
    s["epochs"] = _int_field(s["epochs"], f"{sec}.epochs", 0)
    s["seed"] = _int_field(s["seed"], f"{sec}.seed", 0)
    s["shuffle"] = _bool_field(s["shuffle"], f"{sec}.shuffle")
    if "lambda" in s:
        s["lambda"] = _num_field(s["lambda"], f"{sec}.lambda", lo=0.0)


def validate_config(cfg):
    """Semantic validation with field paths in every message."""
    d = cfg["data"]
    d["seed"] = _int_field(d["seed"], "data.seed", 0)
    d["n_classes"] = _int_field(d["n_classes"], "data.n_classes", 2)
    d["dim"] = _int_field(d["dim"], "data.dim", 2)
    d["n_per_class"] = _int_field(d["n_per_class"], "data.n_per_class", 10)
    d["n_targets"] = _int_field(d["n_targets"], "data.n_targets", 1)
    s = d["shift"]
    s["rotation_degrees"] = _num_field(s["rotation_degrees"], "data.shift.rotation_degrees")
    s["mean_shift"] = _num_field(s["mean_shift"], "data.shift.mean_shift", lo=0.0)
    s["scale"] = _num_field(s["scale"], "data.shift.scale", lo_strict=0.0)
    s["noise_sigma"] = _num_field(s["noise_sigma"], "data.shift.noise_sigma", lo=0.0)
    mo = cfg["model"]
    if not isinstance(mo["hidden"], list) or not mo["hidden"]:
        raise ConfigError("model.hidden: expected a non-empty list of layer widths")
    mo["hidden"] = [_int_field(w, f"model.hidden[{i}]", 1)
                    for i, w in enumerate(mo["hidden"])]
    mo["feature_dim"] = _int_field(mo["feature_dim"], "model.feature_dim", 1)
    _check_train_section(cfg["pretrain"], "pretrain")
    _check_train_section(cfg["adapt"], "adapt")
    a = cfg["pretrain"]["augment"]
    a["noise_sigma"] = _num_field(a["noise_sigma"], "pretrain.augment.noise_sigma", lo=0.0)
    a["scale_jitter"] = _num_field(a["scale_jitter"], "pretrain.augment.scale_jitter", lo=0.0)
    a["dropout_prob"] = _num_field(a["dropout_prob"], "pretrain.augment.dropout_prob",
                                   lo=0.0, hi_strict=1.0)
    if cfg["adapt"]["variant"] not in VARIANTS:
        raise ConfigError(f"adapt.variant: must be one of {list(VARIANTS)}, "
                          f"got {cfg['adapt']['variant']!r}")
    seeds = cfg["eval"]["seeds"]
    if not isinstance(seeds, list) or not seeds:
        raise ConfigError("eval.seeds: expected a non-empty list of seeds")
    cfg["eval"]["seeds"] = [_int_field(x, f"eval.seeds[{i}]", 0)
                            for i, x in enumerate(seeds)]
    # belt and suspenders: the dataclasses re-check their own invariants
    adaptation_config(cfg, "pretrain")
    adaptation_config(cfg, "adapt")
    return cfg


def load_config(path=None):
    """Read, merge over defaults, and validate a config document."""
    if path is None:
        doc = {}
    else:
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    return _merge(DEFAULTS, doc, "")


def _finalize_config(args):
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        for sec in ("data", "pretrain", "adapt"):
            cfg[sec]["seed"] = args.seed
    return validate_config(cfg)


def config_hash(cfg) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:12]


# config -> domain objects

def adaptation_config(cfg, section) -> AdaptationConfig:
    s = cfg[section]
    return AdaptationConfig(
        lam=s.get("lambda", 1.0), m=s["m"], eta=s["eta"],
        sgd_momentum=s["sgd_momentum"], weight_decay=s["weight_decay"],
        batch_size=s["batch_size"], epochs=s["epochs"], seed=s["seed"],
        shuffle=s["shuffle"],
    ).validate()


def shift_spec(cfg) -> DomainShiftSpec:
    return DomainShiftSpec(**cfg["data"]["shift"])


def augment_spec(cfg) -> AugmentSpec:
    return AugmentSpec(**cfg["pretrain"]["augment"])


def model_spec(cfg, in_dim):
    return default_spec(in_dim, tuple(cfg["model"]["hidden"]),
                        cfg["model"]["feature_dim"])


# ---------------------------------------------------------------------------
# shared output helpers


def _dump_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_trace(path, trace):
    lines = ["step,total,cos,space,lambda"]
    for i, lv in enumerate(trace):
        lines.append(f"{i},{lv.total!r},{lv.cos_component!r},"
                     f"{lv.space_component!r},{lv.lam!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def _write_stage(stage_dir: Path, res: AdaptRunResult):
    stage_dir.mkdir(parents=True, exist_ok=True)
    save_checkpoint(res.adapted_student, stage_dir / "student.ckpt")
    save_checkpoint(res.final_teacher, stage_dir / "teacher.ckpt")
    _write_trace(stage_dir / "trace.csv", res.loss_trace)
    trace = res.loss_trace
    return {
        "steps": len(trace),
        "degenerate_rows": res.degeneracy_count,
        "first_total": trace[0].total if trace else None,
        "final_total": trace[-1].total if trace else None,
    }


# ---------------------------------------------------------------------------
# commands


def cmd_gen_data(args) -> int:
    cfg = _finalize_config(args)
    d = cfg["data"]
    base = shift_spec(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    source = None
    targets = []
    for i in range(d["n_targets"]):
        # stage i compounds the shift: a drifting sequence of domains
        # sharing one source (the source draw does not depend on the
        # shift parameters, so every call returns the same source)
        k = i + 1
        shift_i = DomainShiftSpec(base.rotation_degrees * k, base.mean_shift * k,
                                  base.scale ** k, base.noise_sigma)
        src_i, tgt_i = make_domain_pair(d["seed"], d["n_classes"], d["dim"],
                                        d["n_per_class"], shift_i)
        if source is None:
            source = src_i
        tgt_i = DomainDataset(tgt_i.features, tgt_i.labels, f"target_{i}",
                              tgt_i.n_classes)
        save_dataset(tgt_i, out / f"target_{i}.csv")
        targets.append({"file": f"target_{i}.csv", "shift": asdict(shift_i)})
    save_dataset(source, out / "source.csv")
    _dump_json({
        "seed": d["seed"],
        "n_classes": d["n_classes"],
        "dim": d["dim"],
        "n_per_class": d["n_per_class"],
        "source": "source.csv",
        "targets": targets,
        "config": cfg,
        "config_hash": config_hash(cfg),
    }, out / "manifest.json")
    print(f"wrote source + {d['n_targets']} target(s) to {out} "
          f"(seed={d['seed']} config={config_hash(cfg)})")
    return 0


def cmd_pretrain(args) -> int:
    cfg = _finalize_config(args)
    ds = load_dataset(args.data)
    spec = model_spec(cfg, ds.features.shape[1])
    pcfg = adaptation_config(cfg, "pretrain")
    h = pretext_pretrain(spec, ds, pcfg, augment_spec(cfg))
    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(h, out)
    _dump_json({
        "command": "pretrain",
        "data": Path(args.data).name,
        "seed": pcfg.seed,
        "config": cfg,
        "config_hash": config_hash(cfg),
    }, str(out) + ".meta.json")
    print(f"pretext checkpoint {out} (epochs={pcfg.epochs} seed={pcfg.seed} "
          f"config={config_hash(cfg)})")
    return 0


def cmd_adapt(args) -> int:
    cfg = _finalize_config(args)
    acfg = adaptation_config(cfg, "adapt")
    variant = cfg["adapt"]["variant"]
    h = load_checkpoint(args.checkpoint)
    targets = [load_dataset(p) for p in args.target]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if len(targets) == 1:
        results = [adapt_run(h, targets[0], acfg, variant=variant)]
        stages = [_write_stage(out, results[0])]
    else:
        results = continual_run(h, targets, acfg, variant=variant)
        stages = [_write_stage(out / f"stage_{i}", res)
                  for i, res in enumerate(results)]
    _dump_json({
        "command": "adapt",
        "checkpoint": Path(args.checkpoint).name,
        "targets": [Path(p).name for p in args.target],
        "variant": variant,
        "seed": acfg.seed,
        "stages": stages,
        "config": cfg,
        "config_hash": config_hash(cfg),
    }, out / "run.json")
    for i, st in enumerate(stages):
        where = "." if len(targets) == 1 else f"stage_{i}/"
        print(f"stage {i} [{where}]: {st['steps']} steps, "
              f"final total {st['final_total']}, "
              f"degenerate rows {st['degenerate_rows']}")
    print(f"seed={acfg.seed} config={config_hash(cfg)}")
    return 0


def cmd_eval(args) -> int:
    cfg = _finalize_config(args)
    acfg = adaptation_config(cfg, "adapt")
    pre = load_checkpoint(args.pre)
    post = load_checkpoint(args.post)
    src = load_dataset(args.source)
    tgt = load_dataset(args.target)
    # score the two checkpoints; no loss trace is available here
    res = AdaptRunResult(adapted_student=post, final_teacher=post,
                         loss_trace=[], degeneracy_count=0)
    rep = forgetting_report(pre, res, src, tgt, acfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_report(rep, out / "report.csv")
    write_report(rep, out / "report.json", format="structured-text")
    # confusion matrices for the post-adaptation model, same protocol as
    # the report: reference bank from the pre checkpoint on half the
    # source eval split
    ref_ds, query_ds = split_dataset(src, 0.5, [acfg.seed, 9])
    bank = (extract_features(pre, ref_ds.features), ref_ds.labels, 5)
    src_acc, cm_src = evaluate_model(post, query_ds, bank)
    tgt_acc, cm_tgt = evaluate_model(post, tgt, bank)
    write_report(cm_src, out / "cm_source.csv")
    write_report(cm_tgt, out / "cm_target.csv")
    _dump_json({
        "command": "eval",
        "pre": Path(args.pre).name,
        "post": Path(args.post).name,
        "source": Path(args.source).name,
        "target": Path(args.target).name,
        "seed": acfg.seed,
        "records": [asdict(r) for r in rep.records],
        "post_source_accuracy": src_acc,
        "post_target_accuracy": tgt_acc,
        "config": cfg,
        "config_hash": config_hash(cfg),
    }, out / "summary.json")
    for r in rep.records:
        print(f"{r.domain_id}: {r.pre_accuracy:.4f} -> {r.post_accuracy:.4f} "
              f"(delta {r.delta:+.4f})")
    print(f"seed={acfg.seed} config={config_hash(cfg)}")
    return 0


def cmd_ablate(args) -> int:
    cfg = _finalize_config(args)
    acfg = adaptation_config(cfg, "adapt")
    seeds = cfg["eval"]["seeds"]
    h = load_checkpoint(args.checkpoint)
    tgt = load_dataset(args.target)
    src = load_dataset(args.source)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    per_variant = {v: [] for v in VARIANTS}
    lines = ["seed,variant,accuracy"]
    for seed in seeds:
        scfg = replace(acfg, seed=seed)
        for variant, acc in ablation_run(h, tgt, src, tgt, scfg):
            per_variant[variant].append(acc)
            lines.append(f"{seed},{variant},{acc!r}")
    if len(seeds) > 1:
        for variant in VARIANTS:
            lines.append(f"mean,{variant},{float(np.mean(per_variant[variant]))!r}")
    (out / "ablation.csv").write_text("\n".join(lines) + "\n")
    _dump_json({
        "command": "ablate",
        "checkpoint": Path(args.checkpoint).name,
        "target": Path(args.target).name,
        "source": Path(args.source).name,
        "seeds": seeds,
        "mean_accuracy": {v: float(np.mean(per_variant[v])) for v in VARIANTS},
        "config": cfg,
        "config_hash": config_hash(cfg),
    }, out / "run.json")
    for v in VARIANTS:
        print(f"{v}: mean accuracy {float(np.mean(per_variant[v])):.4f} "
              f"over {len(seeds)} seed(s)")
    print(f"config={config_hash(cfg)}")
    return 0


# ---------------------------------------------------------------------------
# gradient self-check


def gradcheck_suite(seed: int, lam: float = 1.0, tol: float = 1e-5):
    """Finite-difference suite: losses, layer primitives, end-to-end net.

    Returns [(part_name, GradCheckReport), ...] in a fixed order.
    """
    rng = np.random.default_rng([seed, 7])
    parts = []

    # losses w.r.t. the student feature matrix
    ft = rng.standard_normal((8, 16))
    fs0 = rng.standard_normal((8, 16))

    def loss_fn(name):
        def fn(p):
            fs = p["fs"]
            if name == "cos":
                v, g, _ = cos_loss(ft, fs)
            elif name == "space":
                v, g, _ = space_loss(ft, fs)
            else:
                lv, g, _ = total_loss(ft, fs, lam)
                v = lv.total
            return v, {"fs": g}
        return fn

    for name in ("cos", "space", "total"):
        parts.append((f"losses.{name}",
                      grad_check(loss_fn(name), {"fs": fs0.copy()}, tol)))

    # linear layer under a fixed random probe
    x = rng.standard_normal((5, 7))
    w = 0.3 * rng.standard_normal((7, 4))
    b = 0.1 * rng.standard_normal(4)
    probe = rng.standard_normal((5, 4))

    def linear_fn(p):
        y = linear_forward(p["x"], p["w"], p["b"])
        gx, gw, gb = linear_backward(p["x"], p["w"], probe)
        return float(np.sum(y * probe)), {"x": gx, "w": gw, "b": gb}

    parts.append(("layer.linear", grad_check(linear_fn, {"x": x, "w": w, "b": b}, tol)))

    # train-mode batchnorm under a fixed random probe
    xb = rng.standard_normal((6, 5))
    gamma = 0.5 + rng.uniform(0.0, 1.0, 5)
    beta = rng.standard_normal(5)
    probe_b = rng.standard_normal((6, 5))

    def bn_fn(p):
        st = BatchNormState(p["gamma"], p["beta"], np.zeros(5), np.ones(5))
        y, cache = batchnorm_forward(p["x"], st, "train")
        gx, gg, gb = batchnorm_backward(cache, probe_b)
        return float(np.sum(y * probe_b)), {"x": gx, "gamma": gg, "beta": gb}

    parts.append(("layer.batchnorm",
                  grad_check(bn_fn, {"x": xb, "gamma": gamma, "beta": beta}, tol)))

    # end to end: losses through the default architecture, train mode
    spec = default_spec(16)
    net = init_params(spec, seed)
    xin = rng.standard_normal((8, 16))
    ftn = rng.standard_normal((8, net.feature_dim))
    params = {}
    for i, layer in enumerate(net.layers):
        params[f"layer{i}.w"] = layer.w
        params[f"layer{i}.b"] = layer.b
        if layer.bn is not None:
            params[f"layer{i}.gamma"] = layer.bn.gamma
            params[f"layer{i}.beta"] = layer.bn.beta

    def net_fn(name):
        def fn(_p):
            f, caches = forward_features(net, xin, "train")
            if name == "cos":
                v, g, _ = cos_loss(ftn, f)
            elif name == "space":
                v, g, _ = space_loss(ftn, f)
            else:
                lv, g, _ = total_loss(ftn, f, lam)
                v = lv.total
            grads = backward_features(net, caches, g)
            flat = {}
            for i, gl in enumerate(grads):
                flat[f"layer{i}.w"] = gl["w"]
                flat[f"layer{i}.b"] = gl["b"]
                if gl["gamma"] is not None:
                    flat[f"layer{i}.gamma"] = gl["gamma"]
                    flat[f"layer{i}.beta"] = gl["beta"]
            return v, flat
        return fn

    for name in ("cos", "space", "total"):
        parts.append((f"net.{name}", grad_check(net_fn(name), params, tol)))
    return parts


def cmd_gradcheck(args) -> int:
    seed = args.seed if args.seed is not None else 0
    tol = 1e-5
    parts = gradcheck_suite(seed, tol=tol)
    print(f"gradcheck seed={seed} tol={tol:g}")
    worst = (None, -1.0, None)  # (part, err, param)
    for name, report in parts:
        pname, perr = max(report.per_parameter_errors, key=lambda t: t[1])
        print(f"  {name:<16} max_rel {report.max_rel_error:.3e}  ({pname})")
        if report.max_rel_error > worst[1]:
            worst = (name, report.max_rel_error, pname)
    print(f"max relative error {worst[1]:.3e} ({worst[0]} {worst[2]})")
    if all(report.passed for _, report in parts):
        print("PASS")
        return 0
    print("FAIL")
    return 1


# ---------------------------------------------------------------------------
# parser / entry point


def build_parser():
    ap = argparse.ArgumentParser(
        prog="scoda",
        description="dual-speed teacher-student feature adaptation pipeline")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=None,
                       help="override every seed in the config")

    p = sub.add_parser("gen-data", help="generate synthetic domain pair(s)")
    common(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("pretrain", help="self-supervised source pre-training")
    common(p)
    p.add_argument("--data", required=True, help="source dataset CSV")
    p.add_argument("--out", required=True, help="checkpoint file to write")
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("adapt", help="adapt a checkpoint to target domain(s)")
    common(p)
    p.add_argument("--checkpoint", required=True, help="source checkpoint")
    p.add_argument("--target", action="append", required=True,
                   help="target dataset CSV (repeat for a continual chain)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_adapt)

    p = sub.add_parser("eval", help="pre/post adaptation report")
    common(p)
    p.add_argument("--pre", required=True, help="pre-adaptation checkpoint")
    p.add_argument("--post", required=True, help="post-adaptation checkpoint")
    p.add_argument("--source", required=True, help="source eval CSV")
    p.add_argument("--target", required=True, help="target eval CSV")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="loss-component ablation table")
    common(p)
    p.add_argument("--checkpoint", required=True, help="source checkpoint")
    p.add_argument("--target", required=True, help="target dataset CSV")
    p.add_argument("--source", required=True, help="source eval CSV")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("gradcheck", help="finite-difference gradient self-check")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except DivergenceError as e:
        print(f"error: {e}", file=sys.stderr)
        return 4
    except (DataError, CheckpointError, ShapeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
