"""Attentive conditional neural process for predicting oracle improvements.

Pointwise encoders are shared between context and target points; a multihead
cross-attention (targets as queries, context as keys) builds a target-specific
representation that a Gaussian decoder turns into per-target (mu, sigma).
Predictions factorize over targets: there is no target-target interaction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import AdamState, Tensor
from .data import ALState, Dataset
from .scenario import SimulatedScenario


@dataclass
class NPConfig:
    hidden_dim: int = 32
    attention_heads: int = 8
    epochs: int = 100
    batch_size: int = 64
    lr: float = 1e-3
    sigma_floor: float = 0.01

    def __post_init__(self):
        if min(self.hidden_dim, self.attention_heads, self.epochs,
               self.batch_size) < 1 or self.lr <= 0 or self.sigma_floor <= 0:
            raise ValueError("NP config fields must be positive")
        if self.hidden_dim % self.attention_heads != 0:
            raise ValueError("hidden_dim must be divisible by attention_heads")


@dataclass
class NPParams:
    feature_dim: int
    cfg: NPConfig
    tensors: dict[str, Tensor]

    def parameter_count(self) -> int:
        return sum(t.data.size for t in self.tensors.values())

    def parameters(self) -> list[Tensor]:
        return [self.tensors[k] for k in sorted(self.tensors)]


@dataclass
class PredictiveOutput:
    mu: np.ndarray
    sigma: np.ndarray


def _linear_init(rng, fan_in, fan_out):
    bound = math.sqrt(1.0 / fan_in)
    w = Tensor(rng.uniform(-bound, bound, size=(fan_in, fan_out)), requires_grad=True)
    b = Tensor(rng.uniform(-bound, bound, size=(fan_out,)), requires_grad=True)
    return w, b


def init_np(feature_dim: int, cfg: NPConfig, seed: int) -> NPParams:
    """Build all layers; the point encoder is weight-shared between context
    (features + a zero improvement-label channel) and target points."""
    if feature_dim < 1:
        raise ValueError("feature_dim must be >= 1")
    rng = np.random.default_rng(seed)
    h = cfg.hidden_dim
    t: dict[str, Tensor] = {}
    # shared point encoder: (K + 1 label channel) -> h -> h, 1 hidden ReLU layer
    t["enc_w1"], t["enc_b1"] = _linear_init(rng, feature_dim + 1, h)
    t["enc_w2"], t["enc_b2"] = _linear_init(rng, h, h)
    # context-side encoder: 2-layer ReLU MLP h -> h -> h
    t["ctx_w1"], t["ctx_b1"] = _linear_init(rng, h, h)
    t["ctx_w2"], t["ctx_b2"] = _linear_init(rng, h, h)
    # value MLP on context encodings: h -> h -> h -> h (2 hidden layers)
    t["val_w1"], t["val_b1"] = _linear_init(rng, h, h)
    t["val_w2"], t["val_b2"] = _linear_init(rng, h, h)
    t["val_w3"], t["val_b3"] = _linear_init(rng, h, h)
    # multihead attention projections
    for name in ("q", "k", "v", "o"):
        t[f"att_{name}_w"], t[f"att_{name}_b"] = _linear_init(rng, h, h)
    # decoder on concat(target-specific representation, target encoding)
    t["dec_w1"], t["dec_b1"] = _linear_init(rng, 2 * h, h)
    t["dec_w2"], t["dec_b2"] = _linear_init(rng, h, 2)
    return NPParams(feature_dim, cfg, t)


def _affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    return ad.linear(x, w, b)


def _shared_encoder(t, x: Tensor) -> Tensor:
    return _affine(ad.relu(_affine(x, t["enc_w1"], t["enc_b1"])), t["enc_w2"], t["enc_b2"])


def _with_label_channel(features: np.ndarray, labels: np.ndarray | None) -> np.ndarray:
    if labels is None:
        channel = np.zeros(features.shape[:-1] + (1,))
    else:
        channel = np.asarray(labels, dtype=np.float64)[..., None]
    return np.concatenate([features, channel], axis=-1)


def np_forward_graph(params: NPParams, ctx_feats: np.ndarray,
                     ctx_labels: np.ndarray | None,
                     tgt_feats: np.ndarray) -> tuple[Tensor, Tensor]:
    """Differentiable forward pass; inputs may carry a leading batch axis.

    Returns (mu, sigma) tensors of shape (..., m).
    """
    t = params.tensors
    cfg = params.cfg
    h = cfg.hidden_dim
    heads = cfg.attention_heads
    dh = h // heads
    if ctx_feats.shape[-1] != params.feature_dim or tgt_feats.shape[-1] != params.feature_dim:
        raise ValueError(
            f"expected feature dim {params.feature_dim}, got context "
            f"{ctx_feats.shape[-1]} and target {tgt_feats.shape[-1]}"
        )
    ctx_in = Tensor(_with_label_channel(ctx_feats, ctx_labels))
    tgt_in = Tensor(_with_label_channel(tgt_feats, None))
    e_ctx = _shared_encoder(t, ctx_in)  # (..., n, h)
    e_tgt = _shared_encoder(t, tgt_in)  # (..., m, h)
    k_base = _affine(ad.relu(_affine(e_ctx, t["ctx_w1"], t["ctx_b1"])), t["ctx_w2"], t["ctx_b2"])
    v1 = ad.relu(_affine(e_ctx, t["val_w1"], t["val_b1"]))
    v2 = ad.relu(_affine(v1, t["val_w2"], t["val_b2"]))
    v_base = _affine(v2, t["val_w3"], t["val_b3"])
    q = _affine(e_tgt, t["att_q_w"], t["att_q_b"])
    k = _affine(k_base, t["att_k_w"], t["att_k_b"])
    v = _affine(v_base, t["att_v_w"], t["att_v_b"])
    scale = Tensor(1.0 / math.sqrt(dh))

    def split_heads(x: Tensor) -> Tensor:
        # (..., p, h) -> (..., heads, p, dh)
        out_shape = x.shape[:-1] + (heads, dh)
        return ad.swap_axes(ad.reshape(x, out_shape), -2, -3)

    qh, kh, vh = split_heads(q), split_heads(k), split_heads(v)
    scores = ad.mul(ad.matmul(qh, ad.transpose_last2(kh)), scale)
    heads_out = ad.matmul(ad.softmax(scores), vh)  # (..., heads, m, dh)
    merged = ad.reshape(ad.swap_axes(heads_out, -2, -3),
                        heads_out.shape[:-3] + (tgt_feats.shape[-2], h))
    attended = _affine(merged, t["att_o_w"], t["att_o_b"])
    rep = ad.layer_norm(ad.add(attended, e_tgt))  # residual + layer norm
    dec_in = ad.concat([rep, e_tgt], axis=-1)
    dec_h = ad.relu(_affine(dec_in, t["dec_w1"], t["dec_b1"]))
    out = _affine(dec_h, t["dec_w2"], t["dec_b2"])  # (..., m, 2)
    mu = ad.slice_last(out, 0, 1)
    raw = ad.slice_last(out, 1, 2)
    floor = cfg.sigma_floor
    sigma = ad.add(Tensor(floor), ad.mul(Tensor(1.0 - floor), ad.softplus(raw)))
    return mu, sigma


def np_forward(params: NPParams, context: tuple[np.ndarray, np.ndarray],
               targets: np.ndarray) -> PredictiveOutput:
    """Predict (mu, sigma) per target point for a single context set."""
    ctx_feats, ctx_labels = context
    mu, sigma = np_forward_graph(params, np.asarray(ctx_feats, dtype=np.float64),
                                 ctx_labels, np.asarray(targets, dtype=np.float64))
    return PredictiveOutput(mu.data[..., 0].copy(), sigma.data[..., 0].copy())


def gaussian_nll(mu: Tensor, sigma: Tensor, targets: np.ndarray) -> Tensor:
    """Mean Gaussian negative log likelihood over all targets."""
    y = Tensor(np.asarray(targets, dtype=np.float64))
    resid = ad.sub(y, mu)
    var2 = ad.mul(Tensor(2.0), ad.square(sigma))
    per_point = ad.add(
        ad.add(Tensor(0.5 * math.log(2.0 * math.pi)), ad.log(sigma)),
        ad.div(ad.square(resid), var2),
    )
    return ad.reduce_mean(per_point)


def gaussian_nll_value(out: PredictiveOutput, targets) -> float:
    """NLL of a finished prediction (no graph)."""
    y = np.asarray(targets, dtype=np.float64)
    return float(np.mean(0.5 * np.log(2.0 * np.pi * out.sigma ** 2)
                         + (y - out.mu) ** 2 / (2.0 * out.sigma ** 2)))


def _scenario_batches(scenarios, batch_size, rng):
    """Group scenarios by (|s_annot|, |s_pool|) and chunk each group."""
    groups: dict[tuple[int, int], list[SimulatedScenario]] = {}
    for sc in scenarios:
        groups.setdefault((len(sc.s_annot), len(sc.s_pool)), []).append(sc)
    batches = []
    for key in sorted(groups):
        members = groups[key]
        order = rng.permutation(len(members))
        for start in range(0, len(members), batch_size):
            batches.append([members[i] for i in order[start:start + batch_size]])
    return batches


def train_np(scenarios: list[SimulatedScenario], dataset: Dataset, cfg: NPConfig,
             seed: int) -> tuple[NPParams, list[float]]:
    """Fit the model on labeled scenarios; returns params and per-epoch NLL."""
    if not scenarios:
        raise ValueError("no scenarios to train on")
    if any(sc.targets is None for sc in scenarios):
        raise ValueError("scenarios must be labeled before training")
    params = init_np(dataset.n_features, cfg, seed)
    opt = AdamState(params.parameters(), lr=cfg.lr)
    rng = np.random.default_rng(seed + 1)
    prepared = []
    for batch in _scenario_batches(scenarios, cfg.batch_size, rng):
        ctx = np.stack([dataset.features[sc.s_annot] for sc in batch])
        tgt = np.stack([dataset.features[sc.s_pool] for sc in batch])
        labels = np.zeros(ctx.shape[:2])
        y = np.stack([sc.targets for sc in batch])[..., None]
        prepared.append((ctx, labels, tgt, y, len(batch)))
    loss_curve = []
    for epoch in range(cfg.epochs):
        lr = cfg.lr * 10.0 ** (-epoch / cfg.epochs)
        total = 0.0
        count = 0
        for ctx, labels, tgt, y, batch_len in prepared:
            mu, sigma = np_forward_graph(params, ctx, labels, tgt)
            loss = gaussian_nll(mu, sigma, y)
            if not np.isfinite(loss.data):
                raise RuntimeError(
                    f"NaN/inf training loss at epoch {epoch} "
                    f"(batch of {batch_len} scenarios, shape {ctx.shape})"
                )
            ad.zero_grads(opt.params)
            ad.backward(loss, leaves=opt.params)
            opt.step(lr)
            total += float(loss.data) * y.size
            count += y.size
        loss_curve.append(total / count)
    return params, loss_curve


def select_np(params: NPParams, state: ALState) -> int:
    """Pool position with the largest predicted mean improvement."""
    if len(state.pool) == 0:
        raise ValueError("empty pool")
    ctx_labels = np.zeros(len(state.annotated))
    out = np_forward(params, (state.annotated_features, ctx_labels),
                     state.pool_features)
    return int(np.argmax(out.mu))


def save_checkpoint(params: NPParams, path):
    """Flat binary parameter blob with a JSON shape manifest (debugging)."""
    import json
    from pathlib import Path

    path = Path(path)
    names = sorted(params.tensors)
    blob = np.concatenate([params.tensors[n].data.reshape(-1) for n in names])
    blob.tofile(path)
    manifest = {
        "feature_dim": params.feature_dim,
        "shapes": {n: list(params.tensors[n].shape) for n in names},
    }
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(manifest, indent=2))
