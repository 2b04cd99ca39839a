"""Feature extractor: an MLP with BatchNorm/ReLU layers.

Holds the parameter containers for both networks of the dual-speed
engine (the slow teacher and the fast student are structurally
identical), plus deterministic seeded initialization and a bit-exact
checkpoint format:

    magic  "SCDA1\\n"
    4-byte little-endian manifest length
    UTF-8 JSON manifest (layer shapes, feature_dim, creation seed)
    payload: flat float64 little-endian arrays in manifest order

The payload order per layer is w, b, then gamma/beta/running_mean/
running_var when the layer has batchnorm.
"""

import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import CheckpointError, ShapeError
from .numkernel import (
    BatchNormState,
    batchnorm_backward,
    batchnorm_forward,
    linear_backward,
    linear_forward,
    relu_backward,
    relu_forward,
)

MAGIC = b"SCDA1\n"

__all__ = [
    "MAGIC",
    "LayerSpec",
    "Layer",
    "FeatureExtractorParams",
    "default_spec",
    "init_params",
    "forward_features",
    "backward_features",
    "save_checkpoint",
    "load_checkpoint",
    "clone_params",
    "params_equal",
]


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    has_batchnorm: bool
    has_relu: bool


@dataclass
class Layer:
    w: np.ndarray
    b: np.ndarray
    bn: BatchNormState | None


@dataclass
class FeatureExtractorParams:
    layers: list
    spec: list
    feature_dim: int
    seed: object = None  # creation seed, carried into checkpoints


def default_spec(in_dim: int, hidden=(64, 64), feature_dim: int = 32):
    """Default experiment architecture: hidden BN+ReLU layers, linear head."""
    dims = [in_dim, *hidden]
    spec = [LayerSpec(dims[i], dims[i + 1], True, True) for i in range(len(dims) - 1)]
    spec.append(LayerSpec(dims[-1], feature_dim, False, False))
    return spec


def _validate_spec(spec):
    if not spec:
        raise ShapeError("empty layer spec")
    for i, ls in enumerate(spec):
        if ls.in_dim < 1 or ls.out_dim < 1:
            raise ShapeError(f"layer {i}: dims must be >= 1, got {ls.in_dim}x{ls.out_dim}")
        if i > 0 and spec[i - 1].out_dim != ls.in_dim:
            raise ShapeError(
                f"layer {i}: in_dim {ls.in_dim} != previous out_dim {spec[i - 1].out_dim}")


def init_params(spec, seed) -> FeatureExtractorParams:
    """He-uniform weights (+-sqrt(6/fan_in)) from a seeded PCG64 stream.

    numpy's default_rng (PCG64 seeded through SeedSequence) is the
    documented splitmix-seeded equivalent; biases start at 0, BN at
    gamma=1, beta=0, running stats (0, 1).
    """
    _validate_spec(spec)
    rng = np.random.default_rng(seed)
    layers = []
    for ls in spec:
        bound = np.sqrt(6.0 / ls.in_dim)
        w = rng.uniform(-bound, bound, (ls.in_dim, ls.out_dim))
        b = np.zeros(ls.out_dim)
        bn = BatchNormState.fresh(ls.out_dim) if ls.has_batchnorm else None
        layers.append(Layer(w, b, bn))
    return FeatureExtractorParams(layers, list(spec), spec[-1].out_dim, seed)


def forward_features(params: FeatureExtractorParams, x: np.ndarray, mode: str):
    """Run the network; returns (features, caches).

    Train mode uses batch BN statistics and updates running stats in
    place; eval mode reads running stats and mutates nothing.  caches is
    None in eval mode.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"unknown mode {mode!r}")
    if x.ndim != 2 or x.shape[1] != params.spec[0].in_dim:
        raise ShapeError(
            f"input {x.shape} incompatible with first layer ({params.spec[0].in_dim} dims)")
    h = np.ascontiguousarray(x, dtype=np.float64)
    caches = [] if mode == "train" else None
    for ls, layer in zip(params.spec, params.layers):
        x_in = h
        z = linear_forward(h, layer.w, layer.b)
        bn_cache = None
        if layer.bn is not None:
            z, bn_cache = batchnorm_forward(z, layer.bn, mode)
        pre_act = z
        if ls.has_relu:
            z = relu_forward(z)
        if mode == "train":
            caches.append((x_in, bn_cache, pre_act))
        h = z
    return h, caches


def backward_features(params: FeatureExtractorParams, caches, grad_f: np.ndarray):
    """Backprop grad_f through the network; returns per-layer grad dicts.

    Layout mirrors params.layers: [{"w", "b", "gamma", "beta"}, ...] with
    gamma/beta None for layers without batchnorm.
    """
    if caches is None or len(caches) != len(params.layers):
        raise ShapeError("caches do not match params (need a train-mode forward)")
    grads = [None] * len(params.layers)
    g = grad_f
    for i in range(len(params.layers) - 1, -1, -1):
        ls, layer = params.spec[i], params.layers[i]
        x_in, bn_cache, pre_act = caches[i]
        if ls.has_relu:
            g = relu_backward(pre_act, g)
        g_gamma = g_beta = None
        if layer.bn is not None:
            g, g_gamma, g_beta = batchnorm_backward(bn_cache, g)
        g, g_w, g_b = linear_backward(x_in, layer.w, g)
        grads[i] = {"w": g_w, "b": g_b, "gamma": g_gamma, "beta": g_beta}
    return grads


def clone_params(params: FeatureExtractorParams) -> FeatureExtractorParams:
    layers = [Layer(l.w.copy(), l.b.copy(), l.bn.copy() if l.bn else None)
              for l in params.layers]
    return FeatureExtractorParams(layers, list(params.spec), params.feature_dim, params.seed)


def params_equal(a: FeatureExtractorParams, b: FeatureExtractorParams) -> bool:
    """Bit-exact equality of every array (and structure)."""
    if [tuple(vars(s).values()) for s in a.spec] != [tuple(vars(s).values()) for s in b.spec]:
        return False
    for la, lb in zip(a.layers, b.layers):
        if not (np.array_equal(la.w, lb.w) and np.array_equal(la.b, lb.b)):
            return False
        if (la.bn is None) != (lb.bn is None):
            return False
        if la.bn is not None:
            if not (np.array_equal(la.bn.gamma, lb.bn.gamma)
                    and np.array_equal(la.bn.beta, lb.bn.beta)
                    and np.array_equal(la.bn.running_mean, lb.bn.running_mean)
                    and np.array_equal(la.bn.running_var, lb.bn.running_var)):
                return False
    return True


# ---------------------------------------------------------------------------
# checkpoint I/O


def _layer_arrays(layer: Layer):
    arrays = [("w", layer.w), ("b", layer.b)]
    if layer.bn is not None:
        arrays += [("gamma", layer.bn.gamma), ("beta", layer.bn.beta),
                   ("running_mean", layer.bn.running_mean),
                   ("running_var", layer.bn.running_var)]
    return arrays


def save_checkpoint(params: FeatureExtractorParams, path):
    manifest = {
        "layers": [
            {
                "in_dim": ls.in_dim,
                "out_dim": ls.out_dim,
                "has_batchnorm": ls.has_batchnorm,
                "has_relu": ls.has_relu,
            }
            for ls in params.spec
        ],
        "feature_dim": params.feature_dim,
        "seed": params.seed,
        "arrays": [
            [name for name, _ in _layer_arrays(layer)] for layer in params.layers
        ],
    }
    blob = json.dumps(manifest, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for layer in params.layers:
            for _, arr in _layer_arrays(layer):
                fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path) -> FeatureExtractorParams:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e
    if len(raw) < len(MAGIC) + 4 or raw[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: bad magic (not a checkpoint file)")
    off = len(MAGIC)
    (mlen,) = struct.unpack_from("<I", raw, off)
    off += 4
    if off + mlen > len(raw):
        raise CheckpointError(f"{path}: truncated manifest")
    try:
        manifest = json.loads(raw[off:off + mlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{path}: unreadable manifest: {e}") from e
    off += mlen

    spec = [LayerSpec(l["in_dim"], l["out_dim"], l["has_batchnorm"], l["has_relu"])
            for l in manifest["layers"]]
    try:
        _validate_spec(spec)
    except ShapeError as e:
        raise CheckpointError(f"{path}: invalid manifest spec: {e}") from e

    payload = raw[off:]
    need = 0
    shapes = []  # (layer_idx, name, shape)
    for i, ls in enumerate(spec):
        per = [("w", (ls.in_dim, ls.out_dim)), ("b", (ls.out_dim,))]
        if ls.has_batchnorm:
            per += [(n, (ls.out_dim,)) for n in
                    ("gamma", "beta", "running_mean", "running_var")]
        declared = manifest["arrays"][i]
        if [n for n, _ in per] != declared:
            raise CheckpointError(f"{path}: layer {i} declares arrays {declared}, "
                                  f"expected {[n for n, _ in per]}")
        for name, shape in per:
            shapes.append((i, name, shape))
            need += int(np.prod(shape))
    if len(payload) != need * 8:
        raise CheckpointError(
            f"{path}: payload holds {len(payload) // 8} floats, manifest declares {need}")

    flat = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    layers = [Layer(None, None, None) for _ in spec]
    pos = 0
    for i, name, shape in shapes:
        size = int(np.prod(shape))
        arr = flat[pos:pos + size].reshape(shape).copy()
        pos += size
        if name == "w":
            layers[i].w = arr
        elif name == "b":
            layers[i].b = arr
        else:
            if layers[i].bn is None:
                layers[i].bn = BatchNormState(None, None, None, None)
            setattr(layers[i].bn, {"gamma": "gamma", "beta": "beta",
                                   "running_mean": "running_mean",
                                   "running_var": "running_var"}[name], arr)
    return FeatureExtractorParams(layers, spec, manifest["feature_dim"], manifest.get("seed"))
