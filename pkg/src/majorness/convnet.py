"""Small fully convolutional regressor for majorness from mel-spectrograms.

One Inception-style block: an input average pool, a strided stem convolution,
three parallel branches with kernel widths 1, 3 and 5 over (mel x time),
channel concatenation, global average pooling, batch normalization of the
pooled features and an affine head producing a scalar. Global pooling makes
the network accept any frame count at or above the input pool size; the
batch norm is what lets gradient descent cope with the tiny across-item
spread that pooling leaves (a few informative rows averaged over tens of
thousands of positions). Training is minibatch gradient descent with
momentum on MSE.

Checkpoints use a versioned binary container: magic "MJRN", a JSON config
block, the float32 weight blob and a CRC32 trailer.
"""
from __future__ import annotations

import json
import struct
import zlib
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .errors import (
    ParameterError,
    ShapeError,
    TrainingDivergedError,
    UnsupportedFormatError,
)
from .features import MelSpectrogram

LEAK = 0.01      # leaky-ReLU slope; keeps gradient flow when units go negative
BN_EPS = 1e-12   # pooled features can legitimately have variance below 1e-6
BN_MOMENTUM = 0.98
MJRN_MAGIC = b"MJRN"
MJRN_VERSION = 1
BRANCH_KERNELS = (1, 3, 5)


@dataclass(frozen=True)
class ArchConfig:
    n_mels: int = 299
    pool_mel: int = 1
    pool_time: int = 12
    stem_channels: int = 4
    stem_kernel: int = 3
    stem_stride_mel: int = 2
    stem_stride_time: int = 1
    branch_channels: int = 8
    input_shift: float = 0.0   # applied as (x - shift) * scale before the net
    input_scale: float = 1.0

    def __post_init__(self):
        if self.n_mels < 1 or self.pool_mel < 1 or self.pool_time < 1:
            raise ParameterError("n_mels and pool factors must be >= 1")
        if self.stem_channels < 1 or self.branch_channels < 1:
            raise ParameterError("zero-width stem or branch is not a valid architecture")
        if self.stem_kernel % 2 == 0 or self.stem_kernel < 1:
            raise ParameterError("stem kernel must be odd")
        if self.stem_stride_mel < 1 or self.stem_stride_time < 1:
            raise ParameterError("strides must be >= 1")
        if self.n_mels // self.pool_mel < 1:
            raise ParameterError("pool_mel leaves no mel rows")

    @property
    def concat_channels(self) -> int:
        return len(BRANCH_KERNELS) * self.branch_channels

    @property
    def min_frames(self) -> int:
        return self.pool_time


# Wide preset mirroring the intended production block (~54k weights); the
# default above is deliberately small so desk-scale training stays in CPU budget.
INCEPTION_50K = ArchConfig(stem_channels=16, branch_channels=96, pool_time=8)

WEIGHT_ORDER = (
    "stem_w", "stem_b", "b1_w", "b1_b", "b3_w", "b3_b", "b5_w", "b5_b",
    "bn_gamma", "bn_beta", "head_w", "head_b",
)


@dataclass
class ModelParams:
    arch: ArchConfig
    weights: dict[str, np.ndarray]
    seed: int = 0
    # Batch-norm running statistics (non-trainable, persisted in checkpoints).
    bn_mean: np.ndarray | None = None
    bn_var: np.ndarray | None = None

    def __post_init__(self):
        c = self.arch.concat_channels
        if self.bn_mean is None:
            self.bn_mean = np.zeros(c)
        if self.bn_var is None:
            self.bn_var = np.ones(c)

    def n_weights(self) -> int:
        return sum(w.size for w in self.weights.values())

    def flat(self) -> np.ndarray:
        return np.concatenate([self.weights[k].ravel() for k in WEIGHT_ORDER])

    def assign_flat(self, values: np.ndarray) -> None:
        pos = 0
        for k in WEIGHT_ORDER:
            w = self.weights[k]
            w[...] = values[pos : pos + w.size].reshape(w.shape)
            pos += w.size

    def copy(self) -> "ModelParams":
        return ModelParams(
            self.arch,
            {k: v.copy() for k, v in self.weights.items()},
            self.seed,
            self.bn_mean.copy(),
            self.bn_var.copy(),
        )


def _weight_shapes(arch: ArchConfig) -> dict[str, tuple]:
    shapes = {
        "stem_w": (arch.stem_channels, 1, arch.stem_kernel, arch.stem_kernel),
        "stem_b": (arch.stem_channels,),
    }
    for k in BRANCH_KERNELS:
        shapes[f"b{k}_w"] = (arch.branch_channels, arch.stem_channels, k, k)
        shapes[f"b{k}_b"] = (arch.branch_channels,)
    shapes["bn_gamma"] = (arch.concat_channels,)
    shapes["bn_beta"] = (arch.concat_channels,)
    shapes["head_w"] = (arch.concat_channels,)
    shapes["head_b"] = (1,)
    return shapes


def init_model(arch: ArchConfig, seed: int = 0, head_bias: float | None = None) -> ModelParams:
    """He-scaled Gaussian init, bit-deterministic for a given seed. When the
    training-set mean rating is known, pass it as head_bias."""
    rng = np.random.default_rng(seed)
    weights: dict[str, np.ndarray] = {}
    for name, shape in _weight_shapes(arch).items():
        if name == "bn_gamma":
            weights[name] = np.ones(shape)
        elif name.endswith("_b") or name == "bn_beta":
            # Small positive conv bias keeps units alive and off the exact
            # ReLU kink (which breaks finite-difference checks).
            fill = 0.0 if name in ("head_b", "bn_beta") else 0.01
            weights[name] = np.full(shape, fill)
        else:
            fan_in = int(np.prod(shape[1:])) if len(shape) > 1 else shape[0]
            weights[name] = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)
    if head_bias is not None:
        weights["head_b"][0] = float(head_bias)
    return ModelParams(arch, weights, seed)


def _prepare_input(params: ModelParams, mel) -> np.ndarray:
    values = mel.values if isinstance(mel, MelSpectrogram) else np.asarray(mel, dtype=float)
    if values.ndim != 2:
        raise ShapeError(f"expected a (frames, n_mels) grid, got shape {values.shape}")
    frames, n_mels = values.shape
    arch = params.arch
    if n_mels != arch.n_mels:
        raise ShapeError(f"model expects {arch.n_mels} mel bands, input has {n_mels}")
    if frames < arch.min_frames:
        raise ShapeError(f"need at least {arch.min_frames} frames, input has {frames}")
    x = (values.T - arch.input_shift) * arch.input_scale  # (n_mels, frames)
    return x[None, :, :]


def _gap_forward(params: ModelParams, x: np.ndarray) -> tuple[np.ndarray, dict]:
    """Convolutional trunk up to the pooled feature vector."""
    arch, w = params.arch, params.weights
    pooled = kernels.avg_pool2d_forward(x, arch.pool_mel, arch.pool_time)
    pad = arch.stem_kernel // 2
    stem_pre = kernels.conv2d_forward(
        pooled, w["stem_w"], w["stem_b"],
        arch.stem_stride_mel, arch.stem_stride_time, pad, pad,
    )
    stem = np.where(stem_pre > 0, stem_pre, LEAK * stem_pre)
    branch_pre = []
    for k in BRANCH_KERNELS:
        p = k // 2
        branch_pre.append(
            kernels.conv2d_forward(stem, w[f"b{k}_w"], w[f"b{k}_b"], 1, 1, p, p)
        )
    concat_pre = np.concatenate(branch_pre, axis=0)
    concat = np.where(concat_pre > 0, concat_pre, LEAK * concat_pre)
    gap = concat.mean(axis=(1, 2))
    cache = {
        "pooled": pooled, "stem_pre": stem_pre, "stem": stem,
        "concat_pre": concat_pre, "concat": concat, "gap": gap,
    }
    return gap, cache


def _gap_backward(params: ModelParams, cache: dict, d_gap: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of the trunk given the gradient at the pooled features."""
    arch, w = params.arch, params.weights
    grads: dict[str, np.ndarray] = {}
    c, h, wd = cache["concat"].shape
    d_concat = np.broadcast_to(
        (d_gap / (h * wd))[:, None, None], (c, h, wd)
    ) * np.where(cache["concat_pre"] > 0, 1.0, LEAK)
    d_stem = np.zeros_like(cache["stem"])
    for bi, k in enumerate(BRANCH_KERNELS):
        p = k // 2
        sl = slice(bi * arch.branch_channels, (bi + 1) * arch.branch_channels)
        dxb, dwb, dbb = kernels.conv2d_backward(
            cache["stem"], w[f"b{k}_w"], np.ascontiguousarray(d_concat[sl]), 1, 1, p, p
        )
        grads[f"b{k}_w"], grads[f"b{k}_b"] = dwb, dbb
        d_stem += dxb
    d_stem_pre = d_stem * np.where(cache["stem_pre"] > 0, 1.0, LEAK)
    pad = arch.stem_kernel // 2
    _, dws, dbs = kernels.conv2d_backward(
        cache["pooled"], w["stem_w"], d_stem_pre,
        arch.stem_stride_mel, arch.stem_stride_time, pad, pad,
    )
    grads["stem_w"], grads["stem_b"] = dws, dbs
    return grads


def _head(params: ModelParams, feat: np.ndarray) -> float:
    w = params.weights
    return float(w["head_w"] @ feat + w["head_b"][0])


def _bn_inference(params: ModelParams, gap: np.ndarray) -> np.ndarray:
    w = params.weights
    x_hat = (gap - params.bn_mean) / np.sqrt(params.bn_var + BN_EPS)
    return w["bn_gamma"] * x_hat + w["bn_beta"]


def forward(params: ModelParams, mel) -> float:
    """Scalar majorness prediction for one spectrogram (any frame count at or
    above the pool size). Uses the running batch-norm statistics."""
    gap, _ = _gap_forward(params, _prepare_input(params, mel))
    return _head(params, _bn_inference(params, gap))


def calibrate_features(params: ModelParams, mels: list) -> ModelParams:
    """Seed the batch-norm running statistics from a calibration set (normally
    the training items), so inference is sensibly normalized from the first
    step. Mutates and returns params."""
    if not mels:
        raise ParameterError("calibration needs at least one spectrogram")
    gaps = np.array([
        _gap_forward(params, _prepare_input(params, mel))[0] for mel in mels
    ])
    params.bn_mean = gaps.mean(axis=0)
    params.bn_var = gaps.var(axis=0)
    return params


def loss_and_grads(
    params: ModelParams,
    mels: list,
    targets: np.ndarray,
    train_mode: bool = False,
) -> tuple[float, dict]:
    """Mean squared error over a batch and its parameter gradients.

    In train_mode (batch size >= 2) the batch-norm layer uses batch
    statistics and updates the running ones; otherwise it applies the fixed
    running statistics, which also makes single-sample gradients exact.
    """
    w = params.weights
    n = len(mels)
    gaps, caches = [], []
    for mel in mels:
        gap, cache = _gap_forward(params, _prepare_input(params, mel))
        gaps.append(gap)
        caches.append(cache)
    gap_mat = np.array(gaps)  # (n, C)

    use_batch_stats = train_mode and n >= 2
    if use_batch_stats:
        mu = gap_mat.mean(axis=0)
        var = gap_mat.var(axis=0)
        params.bn_mean = BN_MOMENTUM * params.bn_mean + (1 - BN_MOMENTUM) * mu
        params.bn_var = BN_MOMENTUM * params.bn_var + (1 - BN_MOMENTUM) * var
    else:
        mu, var = params.bn_mean, params.bn_var
    inv_std = 1.0 / np.sqrt(var + BN_EPS)
    x_hat = (gap_mat - mu) * inv_std  # (n, C)
    feats = w["bn_gamma"] * x_hat + w["bn_beta"]
    preds = feats @ w["head_w"] + w["head_b"][0]
    errs = preds - targets
    loss = float(np.mean(errs * errs))

    d_pred = 2.0 * errs / n  # (n,)
    total: dict[str, np.ndarray] = {k: np.zeros_like(v) for k, v in w.items()}
    total["head_w"] = feats.T @ d_pred
    total["head_b"] = np.array([d_pred.sum()])
    d_feat = np.outer(d_pred, w["head_w"])  # (n, C)
    total["bn_gamma"] = (d_feat * x_hat).sum(axis=0)
    total["bn_beta"] = d_feat.sum(axis=0)
    d_xhat = d_feat * w["bn_gamma"]
    if use_batch_stats:
        # standard batch-norm backward through the batch statistics
        d_gap_mat = (
            d_xhat
            - d_xhat.mean(axis=0)
            - x_hat * (d_xhat * x_hat).mean(axis=0)
        ) * inv_std
    else:
        d_gap_mat = d_xhat * inv_std
    for cache, d_gap in zip(caches, d_gap_mat):
        grads = _gap_backward(params, cache, d_gap)
        for k, g in grads.items():
            total[k] += g
    return loss, total


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    batch_size: int = 16
    epochs: int = 20
    seed: int = 0
    momentum: float = 0.9        # 0 gives plain gradient descent
    clip_norm: float = 5.0       # global gradient-norm cap; 0 disables

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ParameterError("learning_rate must be >= 0")
        if self.batch_size < 1 or self.epochs < 0:
            raise ParameterError("batch_size must be >= 1 and epochs >= 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ParameterError("momentum must be in [0, 1)")
        if self.clip_norm < 0:
            raise ParameterError("clip_norm must be >= 0")


def train(
    params: ModelParams,
    dataset: list[tuple],
    config: TrainConfig,
) -> tuple[ModelParams, list[float]]:
    """Minibatch gradient descent on MSE; mutates and returns the params.

    Shuffling is seeded, so the run is deterministic. Returns the per-epoch
    mean training loss. Divergence (non-finite or absurd loss) aborts with
    diagnostics.
    """
    if not dataset:
        raise ParameterError("training dataset is empty")
    targets = np.array([float(t) for _, t in dataset])
    if np.any(targets < 1.0) or np.any(targets > 10.0):
        raise ParameterError("targets must lie in the 1..10 rating range")
    rng = np.random.default_rng(config.seed)
    trace: list[float] = []
    n = len(dataset)
    velocity = {k: np.zeros_like(v) for k, v in params.weights.items()}
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            mels = [dataset[i][0] for i in idx]
            batch_t = targets[idx]
            loss, grads = loss_and_grads(params, mels, batch_t, train_mode=True)
            if not np.isfinite(loss) or loss > 1e12:
                raise TrainingDivergedError(
                    f"training diverged (loss={loss:.3g}) at epoch {epoch}, "
                    f"learning_rate={config.learning_rate}"
                )
            if config.clip_norm > 0:
                norm = np.sqrt(sum(float((g * g).sum()) for g in grads.values()))
                if norm > config.clip_norm:
                    scale = config.clip_norm / norm
                    grads = {k: g * scale for k, g in grads.items()}
            for k, g in grads.items():
                velocity[k] = config.momentum * velocity[k] - config.learning_rate * g
                params.weights[k] += velocity[k]
            epoch_loss += loss * len(idx)
        trace.append(epoch_loss / n)
    if config.epochs > 0 and n >= 2:
        # Re-estimate the batch-norm statistics under the final weights.
        # Batch norm makes the loss invariant to the trunk's output scale, so
        # that scale drifts during training and the lagging running averages
        # would leave inference mis-normalized.
        calibrate_features(params, [m for m, _ in dataset])
    return params, trace


def grad_check(
    params: ModelParams,
    sample: tuple,
    epsilon: float = 1e-4,
    n_weights: int = 120,
    seed: int = 0,
) -> float:
    """Max relative error between analytic MSE gradients and central finite
    differences on randomly selected weights (at least 100 when available).
    Runs with fixed batch-norm statistics so the loss is a clean function of
    the weights."""
    if epsilon <= 0:
        raise ParameterError("epsilon must be positive")
    mel, target = sample
    targets = np.array([float(target)])

    _, analytic = loss_and_grads(params, [mel], targets, train_mode=False)
    flat_grad = np.concatenate([analytic[k].ravel() for k in WEIGHT_ORDER])

    total = params.n_weights()
    rng = np.random.default_rng(seed)
    picks = rng.choice(total, size=min(max(n_weights, 100), total), replace=False)
    probe = params.copy()
    flat = probe.flat()
    max_rel = 0.0
    for idx in picks:
        orig = flat[idx]
        flat[idx] = orig + epsilon
        probe.assign_flat(flat)
        up, _ = loss_and_grads(probe, [mel], targets, train_mode=False)
        flat[idx] = orig - epsilon
        probe.assign_flat(flat)
        down, _ = loss_and_grads(probe, [mel], targets, train_mode=False)
        flat[idx] = orig
        numeric = (up - down) / (2.0 * epsilon)
        analytic_v = flat_grad[idx]
        denom = max(abs(numeric), abs(analytic_v), 1e-6)
        max_rel = max(max_rel, abs(numeric - analytic_v) / denom)
    probe.assign_flat(flat)
    return max_rel


def save_checkpoint(params: ModelParams, path: str | Path) -> None:
    config_json = json.dumps(
        {
            "arch": asdict(params.arch),
            "seed": params.seed,
            "version": MJRN_VERSION,
            "bn_mean": params.bn_mean.tolist(),
            "bn_var": params.bn_var.tolist(),
        },
        sort_keys=True,
    ).encode("utf-8")
    blob = params.flat().astype("<f4").tobytes()
    body = (
        MJRN_MAGIC
        + struct.pack("<II", MJRN_VERSION, len(config_json))
        + config_json
        + struct.pack("<I", params.n_weights())
        + blob
    )
    checksum = struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)
    Path(path).write_bytes(body + checksum)


def load_checkpoint(path: str | Path) -> ModelParams:
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:4] != MJRN_MAGIC:
        raise UnsupportedFormatError(f"{path} is not an MJRN checkpoint")
    if zlib.crc32(data[:-4]) & 0xFFFFFFFF != struct.unpack("<I", data[-4:])[0]:
        raise UnsupportedFormatError(f"{path}: checksum mismatch")
    version, cfg_len = struct.unpack("<II", data[4:12])
    if version != MJRN_VERSION:
        raise UnsupportedFormatError(f"{path}: unsupported checkpoint version {version}")
    cfg = json.loads(data[12 : 12 + cfg_len].decode("utf-8"))
    pos = 12 + cfg_len
    (count,) = struct.unpack("<I", data[pos : pos + 4])
    values = np.frombuffer(data[pos + 4 : pos + 4 + 4 * count], dtype="<f4").astype(np.float64)
    arch = ArchConfig(**cfg["arch"])
    params = init_model(arch, seed=int(cfg["seed"]))
    if params.n_weights() != count:
        raise UnsupportedFormatError(f"{path}: weight count mismatch")
    params.assign_flat(values)
    params.bn_mean = np.array(cfg["bn_mean"])
    params.bn_var = np.array(cfg["bn_var"])
    return params
