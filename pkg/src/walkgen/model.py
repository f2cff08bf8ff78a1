"""One-step reverse predictor for walk trajectories.

A length-n vector becomes a length-n token sequence (one scalar per node).
Each token embeds as ``v_i * value_emb[bin(v_i)]`` plus a shared conditioning
embedding for the start-function id and the step index. A stack of
bidirectional attention blocks (pre-layer-norm, no positional encodings, no
masking) keeps the map permutation-equivariant and length-agnostic; a final
per-token affine projection returns a scalar per node.

All gradients are exact reverse-mode derivatives written out by hand; there
is no external learning framework, so the whole model is checkable against
finite differences.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import CheckpointError, TrainingDivergedError
from .rwt import BinningStats, bin_index

_ADAM_BETA1 = 0.9
_ADAM_BETA2 = 0.999
_ADAM_EPS = 1e-8
_LN_EPS = 1e-5
_CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    dim: int = 64
    n_layers: int = 2
    n_heads: int = 4
    ffn_dim: int = 128
    n_bins: int = 1
    n_functions: int = 4
    max_step: int = 10
    seed: int = 0

    def __post_init__(self):
        for name in ("dim", "n_layers", "n_heads", "ffn_dim", "n_bins", "n_functions", "max_step"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.dim % self.n_heads != 0:
            raise ValueError(f"dim={self.dim} not divisible by n_heads={self.n_heads}")

    @property
    def head_dim(self):
        return self.dim // self.n_heads


class ModelParams:
    """Named parameter tensors plus the config that shaped them."""

    def __init__(self, config: ModelConfig, tensors):
        self.config = config
        self.tensors = tensors  # dict name -> ndarray, fixed insertion order

    def copy(self):
        return ModelParams(self.config, {k: v.copy() for k, v in self.tensors.items()})

    def checksum(self):
        digest = hashlib.sha256()
        for name, arr in self.tensors.items():
            digest.update(name.encode())
            digest.update(np.ascontiguousarray(arr).tobytes())
        return digest.hexdigest()


def init_model(config: ModelConfig) -> ModelParams:
    """Deterministic initialization: weights ~ N(0,1)/sqrt(fan_in),
    embeddings ~ 0.02 N(0,1), norms at identity, biases zero."""
    rng = np.random.default_rng(config.seed)
    m, f = config.dim, config.ffn_dim
    t = {}
    t["value_emb"] = 0.02 * rng.standard_normal((config.n_bins, m))
    t["exp_emb"] = 0.02 * rng.standard_normal((config.n_functions, m))
    t["step_emb"] = 0.02 * rng.standard_normal((config.max_step, m))
    for i in range(config.n_layers):
        p = f"layers.{i}."
        t[p + "ln1.gain"] = np.ones(m)
        t[p + "ln1.bias"] = np.zeros(m)
        for w in ("wq", "wk", "wv", "wo"):
            t[p + "attn." + w] = rng.standard_normal((m, m)) / np.sqrt(m)
        t[p + "ln2.gain"] = np.ones(m)
        t[p + "ln2.bias"] = np.zeros(m)
        t[p + "ffn.w1"] = rng.standard_normal((m, f)) / np.sqrt(m)
        t[p + "ffn.b1"] = np.zeros(f)
        t[p + "ffn.w2"] = rng.standard_normal((f, m)) / np.sqrt(f)
        t[p + "ffn.b2"] = np.zeros(m)
    t["final_ln.gain"] = np.ones(m)
    t["final_ln.bias"] = np.zeros(m)
    t["proj.weight"] = rng.standard_normal(m) / np.sqrt(m)
    t["proj.bias"] = np.zeros(())
    return ModelParams(config, t)


def _ln_forward(x, gain, bias):
    mean = x.mean(-1, keepdims=True)
    var = x.var(-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + _LN_EPS)
    xhat = (x - mean) * inv
    return gain * xhat + bias, (xhat, inv)


def _ln_backward(dy, cache, gain):
    xhat, inv = cache
    dgain = (dy * xhat).sum((0, 1))
    dbias = dy.sum((0, 1))
    dxhat = dy * gain
    m1 = dxhat.mean(-1, keepdims=True)
    m2 = (dxhat * xhat).mean(-1, keepdims=True)
    dx = inv * (dxhat - m1 - xhat * m2)
    return dx, dgain, dbias


def _split_heads(x, n_heads):
    b, n, m = x.shape
    return x.reshape(b, n, n_heads, m // n_heads).transpose(0, 2, 1, 3)


def _merge_heads(x):
    b, h, n, hd = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, n, h * hd)


def _forward_batch(params: ModelParams, values, bins, exponent_ids, steps, want_cache=False):
    """Batched forward pass over sequences of a common length.

    values: (B, n) float; bins: (B, n) int table indices; exponent_ids,
    steps: (B,) int. Returns (predictions, cache).
    """
    cfg = params.config
    t = params.tensors
    emb = t["value_emb"][bins]
    cond = t["exp_emb"][exponent_ids] + t["step_emb"][steps - 1]
    x = values[:, :, None] * emb + cond[:, None, :]

    scale = 1.0 / np.sqrt(cfg.head_dim)
    layer_caches = []
    for i in range(cfg.n_layers):
        p = f"layers.{i}."
        a1, c_ln1 = _ln_forward(x, t[p + "ln1.gain"], t[p + "ln1.bias"])
        qh = _split_heads(a1 @ t[p + "attn.wq"], cfg.n_heads)
        kh = _split_heads(a1 @ t[p + "attn.wk"], cfg.n_heads)
        vh = _split_heads(a1 @ t[p + "attn.wv"], cfg.n_heads)
        scores = (qh @ kh.transpose(0, 1, 3, 2)) * scale
        scores -= scores.max(-1, keepdims=True)
        expd = np.exp(scores)
        attn = expd / expd.sum(-1, keepdims=True)
        ctx = _merge_heads(attn @ vh)
        x2 = x + ctx @ t[p + "attn.wo"]

        a2, c_ln2 = _ln_forward(x2, t[p + "ln2.gain"], t[p + "ln2.bias"])
        h1 = a2 @ t[p + "ffn.w1"] + t[p + "ffn.b1"]
        relu = np.maximum(h1, 0.0)
        x3 = x2 + relu @ t[p + "ffn.w2"] + t[p + "ffn.b2"]

        if want_cache:
            layer_caches.append((x, a1, c_ln1, qh, kh, vh, attn, ctx, x2, a2, c_ln2, h1, relu))
        x = x3

    fin, c_fin = _ln_forward(x, t["final_ln.gain"], t["final_ln.bias"])
    preds = fin @ t["proj.weight"] + t["proj.bias"]
    cache = None
    if want_cache:
        cache = (values, bins, exponent_ids, steps, layer_caches, fin, c_fin)
    return preds, cache


def _backward_batch(params: ModelParams, cache, dpreds):
    """Gradients of a scalar loss w.r.t. every tensor, given d(loss)/d(preds)."""
    cfg = params.config
    t = params.tensors
    values, bins, exponent_ids, steps, layer_caches, fin, c_fin = cache
    grads = {name: np.zeros_like(arr) for name, arr in t.items()}

    grads["proj.weight"] += (fin * dpreds[:, :, None]).sum((0, 1))
    grads["proj.bias"] += dpreds.sum()
    dfin = dpreds[:, :, None] * t["proj.weight"]
    dx, dg, db = _ln_backward(dfin, c_fin, t["final_ln.gain"])
    grads["final_ln.gain"] += dg
    grads["final_ln.bias"] += db

    scale = 1.0 / np.sqrt(cfg.head_dim)
    m = cfg.dim
    for i in reversed(range(cfg.n_layers)):
        p = f"layers.{i}."
        x, a1, c_ln1, qh, kh, vh, attn, ctx, x2, a2, c_ln2, h1, relu = layer_caches[i]

        # feed-forward branch (x3 = x2 + relu @ w2 + b2)
        dff = dx
        grads[p + "ffn.w2"] += relu.reshape(-1, relu.shape[-1]).T @ dff.reshape(-1, m)
        grads[p + "ffn.b2"] += dff.sum((0, 1))
        dh1 = (dff @ t[p + "ffn.w2"].T) * (h1 > 0)
        grads[p + "ffn.w1"] += a2.reshape(-1, m).T @ dh1.reshape(-1, dh1.shape[-1])
        grads[p + "ffn.b1"] += dh1.sum((0, 1))
        da2 = dh1 @ t[p + "ffn.w1"].T
        dx2_ln, dg, db = _ln_backward(da2, c_ln2, t[p + "ln2.gain"])
        grads[p + "ln2.gain"] += dg
        grads[p + "ln2.bias"] += db
        dx2 = dx + dx2_ln

        # attention branch (x2 = x + ctx @ wo)
        grads[p + "attn.wo"] += ctx.reshape(-1, m).T @ dx2.reshape(-1, m)
        dctxh = _split_heads(dx2 @ t[p + "attn.wo"].T, cfg.n_heads)
        dattn = dctxh @ vh.transpose(0, 1, 3, 2)
        dvh = attn.transpose(0, 1, 3, 2) @ dctxh
        dscores = attn * (dattn - (dattn * attn).sum(-1, keepdims=True))
        dqh = (dscores @ kh) * scale
        dkh = (dscores.transpose(0, 1, 3, 2) @ qh) * scale
        dq = _merge_heads(dqh)
        dk = _merge_heads(dkh)
        dv = _merge_heads(dvh)
        a1_flat = a1.reshape(-1, m)
        grads[p + "attn.wq"] += a1_flat.T @ dq.reshape(-1, m)
        grads[p + "attn.wk"] += a1_flat.T @ dk.reshape(-1, m)
        grads[p + "attn.wv"] += a1_flat.T @ dv.reshape(-1, m)
        da1 = dq @ t[p + "attn.wq"].T + dk @ t[p + "attn.wk"].T + dv @ t[p + "attn.wv"].T
        dx_ln, dg, db = _ln_backward(da1, c_ln1, t[p + "ln1.gain"])
        grads[p + "ln1.gain"] += dg
        grads[p + "ln1.bias"] += db
        dx = dx2 + dx_ln

    np.add.at(grads["value_emb"], bins, dx * values[:, :, None])
    dcond = dx.sum(1)
    np.add.at(grads["exp_emb"], exponent_ids, dcond)
    np.add.at(grads["step_emb"], steps - 1, dcond)
    return grads


def forward(params: ModelParams, v, exponent_id, step, stats: BinningStats):
    """Predict the previous walk vector for a single input vector."""
    cfg = params.config
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size < 1:
        raise ValueError("input must be a non-empty 1-d vector")
    if not 0 <= exponent_id < cfg.n_functions:
        raise ValueError(f"exponent_id {exponent_id} out of range")
    if not 1 <= step <= cfg.max_step:
        raise ValueError(f"step {step} outside [1, {cfg.max_step}]")
    if stats.n_bins != cfg.n_bins:
        raise ValueError(f"binning stats have {stats.n_bins} bins, model expects {cfg.n_bins}")
    bins = bin_index(v, stats)[None, :]
    preds, _ = _forward_batch(params, v[None, :], bins,
                              np.array([exponent_id]), np.array([step]))
    return preds[0]


@dataclass(frozen=True)
class TrainingOptions:
    learning_rate: float = 1e-3
    epochs: int = 200
    batch_size: int = 8
    seed: int = 0


@dataclass
class TrainReport:
    train_mse: list = field(default_factory=list)       # one entry per epoch
    holdout_mse: list = field(default_factory=list)     # pre-training entry first
    epochs_run: int = 0
    best_epoch: int = 0            # epoch whose weights are returned
    best_holdout_mse: float = float("inf")
    param_checksum: str = ""


def _stack_group(pairs, indices, stats):
    values = np.stack([pairs[i].inputs for i in indices])
    targets = np.stack([pairs[i].target for i in indices])
    bins = np.stack([bin_index(pairs[i].inputs, stats) for i in indices])
    eids = np.array([pairs[i].exponent_id for i in indices])
    steps = np.array([pairs[i].step for i in indices])
    return values, targets, bins, eids, steps


def _mse_over_groups(params, groups):
    total_sq, total_count = 0.0, 0
    for values, targets, bins, eids, steps in groups:
        preds, _ = _forward_batch(params, values, bins, eids, steps)
        total_sq += float(((preds - targets) ** 2).sum())
        total_count += preds.size
    return total_sq / total_count


def train(params: ModelParams, pairs, stats: BinningStats,
          hyper: TrainingOptions = TrainingOptions()):
    """Minimize mean squared prediction error with Adam.

    Every 10th pair (by index) is held out; the remaining pairs are grouped
    by vector length so each batch is rectangular, and batches are visited
    in a seeded order that is reproducible across runs. The returned weights
    are those of the epoch with the lowest held-out MSE (the optimizer is
    run for the full epoch budget, but long runs overfit the small pair
    sets this pipeline sees, so the holdout picks the checkpoint).
    Raises TrainingDivergedError on a non-finite loss, keeping the weights
    from the last finite epoch.
    """
    if not pairs:
        raise ValueError("cannot train on an empty pair list")
    holdout_idx = [i for i in range(len(pairs)) if i % 10 == 9]
    train_idx = [i for i in range(len(pairs)) if i % 10 != 9]
    if not train_idx:
        raise ValueError("training split is empty")

    by_n = {}
    for i in train_idx:
        by_n.setdefault(pairs[i].n, []).append(i)
    train_groups = {n: _stack_group(pairs, idx, stats) for n, idx in sorted(by_n.items())}

    hold_by_n = {}
    for i in holdout_idx:
        hold_by_n.setdefault(pairs[i].n, []).append(i)
    hold_groups = [_stack_group(pairs, idx, stats) for _, idx in sorted(hold_by_n.items())]
    if not hold_groups:  # tiny datasets: fall back to scoring on the train split
        hold_groups = list(train_groups.values())

    params = params.copy()
    rng = np.random.default_rng(hyper.seed)
    adam_m = {k: np.zeros_like(v) for k, v in params.tensors.items()}
    adam_v = {k: np.zeros_like(v) for k, v in params.tensors.items()}
    adam_t = 0

    report = TrainReport()
    report.holdout_mse.append(_mse_over_groups(params, hold_groups))
    report.best_holdout_mse = report.holdout_mse[0]
    best_params = params.copy()
    last_good = params.copy()

    for epoch in range(hyper.epochs):
        epoch_sq, epoch_count = 0.0, 0
        for n in sorted(train_groups):
            values, targets, bins, eids, steps = train_groups[n]
            order = rng.permutation(len(values))
            for lo in range(0, len(order), hyper.batch_size):
                sel = order[lo:lo + hyper.batch_size]
                preds, cache = _forward_batch(params, values[sel], bins[sel],
                                              eids[sel], steps[sel], want_cache=True)
                err = preds - targets[sel]
                epoch_sq += float((err ** 2).sum())
                epoch_count += err.size
                grads = _backward_batch(params, cache, 2.0 * err / err.size)
                adam_t += 1
                bc1 = 1.0 - _ADAM_BETA1 ** adam_t
                bc2 = 1.0 - _ADAM_BETA2 ** adam_t
                for name, g in grads.items():
                    adam_m[name] = _ADAM_BETA1 * adam_m[name] + (1 - _ADAM_BETA1) * g
                    adam_v[name] = _ADAM_BETA2 * adam_v[name] + (1 - _ADAM_BETA2) * g * g
                    step_val = hyper.learning_rate * (adam_m[name] / bc1) / (
                        np.sqrt(adam_v[name] / bc2) + _ADAM_EPS)
                    params.tensors[name] -= step_val

        train_loss = epoch_sq / max(epoch_count, 1)
        holdout_loss = _mse_over_groups(params, hold_groups)
        if not (np.isfinite(train_loss) and np.isfinite(holdout_loss)):
            report.epochs_run = epoch
            report.param_checksum = last_good.checksum()
            raise TrainingDivergedError(
                f"non-finite loss at epoch {epoch} (train={train_loss}, holdout={holdout_loss})",
                params=last_good, report=report)
        report.train_mse.append(train_loss)
        report.holdout_mse.append(holdout_loss)
        if holdout_loss < report.best_holdout_mse:
            report.best_holdout_mse = holdout_loss
            report.best_epoch = epoch + 1
            best_params = params.copy()
        last_good = params.copy()

    report.epochs_run = hyper.epochs
    report.param_checksum = best_params.checksum()
    return best_params, report


@dataclass(frozen=True)
class CheckpointBundle:
    """Everything needed to run the reverse predictor after loading."""

    params: ModelParams
    stats: BinningStats
    exponents: tuple
    alpha: float
    steps: int


def _encode_array(arr):
    return {"shape": list(arr.shape), "data": [x.hex() for x in np.asarray(arr, dtype=float).ravel().tolist()]}


def _decode_array(doc):
    try:
        flat = np.array([float.fromhex(s) for s in doc["data"]], dtype=float)
        return flat.reshape(doc["shape"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"bad tensor payload: {exc}") from exc


def save_checkpoint(path, bundle: CheckpointBundle) -> None:
    """Write a checkpoint whose round-trip is bit-exact (hex float strings)."""
    cfg = bundle.params.config
    doc = {
        "format_version": _CHECKPOINT_VERSION,
        "config": {
            "dim": cfg.dim, "n_layers": cfg.n_layers, "n_heads": cfg.n_heads,
            "ffn_dim": cfg.ffn_dim, "n_bins": cfg.n_bins,
            "n_functions": cfg.n_functions, "max_step": cfg.max_step, "seed": cfg.seed,
        },
        "binning_stats": {
            "mean": float(bundle.stats.mean).hex(),
            "std": float(bundle.stats.std).hex(),
            "bins_per_sigma": float(bundle.stats.bins_per_sigma).hex(),
            "bin_lo": bundle.stats.bin_lo,
            "bin_hi": bundle.stats.bin_hi,
        },
        "exponents": [int(b) for b in bundle.exponents],
        "alpha": float(bundle.alpha).hex(),
        "steps": int(bundle.steps),
        "tensors": {name: _encode_array(arr) for name, arr in bundle.params.tensors.items()},
    }
    with open(path, "w", encoding="ascii") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path) -> CheckpointBundle:
    try:
        with open(path, "r", encoding="ascii") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    try:
        if doc["format_version"] != _CHECKPOINT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {doc['format_version']}")
        config = ModelConfig(**doc["config"])
        sdoc = doc["binning_stats"]
        stats = BinningStats(mean=float.fromhex(sdoc["mean"]), std=float.fromhex(sdoc["std"]),
                             bins_per_sigma=float.fromhex(sdoc["bins_per_sigma"]),
                             bin_lo=int(sdoc["bin_lo"]), bin_hi=int(sdoc["bin_hi"]))
        tensors = {name: _decode_array(tdoc) for name, tdoc in doc["tensors"].items()}
        reference = init_model(config)
        missing = set(reference.tensors) - set(tensors)
        if missing:
            raise CheckpointError(f"checkpoint missing tensors: {sorted(missing)}")
        ordered = {}
        for name, ref in reference.tensors.items():
            if tuple(tensors[name].shape) != ref.shape:
                raise CheckpointError(
                    f"tensor {name} has shape {tensors[name].shape}, expected {ref.shape}")
            ordered[name] = tensors[name]
        params = ModelParams(config, ordered)
        return CheckpointBundle(params=params, stats=stats,
                                exponents=tuple(int(b) for b in doc["exponents"]),
                                alpha=float.fromhex(doc["alpha"]), steps=int(doc["steps"]))
    except CheckpointError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"malformed checkpoint {path}: {exc}") from exc
