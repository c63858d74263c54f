"""Cross-space alignment model and its max-margin training.

The model maps a term representation onto the concept embedding space:

    x = concat(branch outputs)        branches: raw | transform | mla
    p = W x + b, rectified when configured

where a transform branch applies [W' v + b']_+ to its input vector and
an mla branch fuses an L x d layer stack with attention weights
softmax([B_i . A]_+). Training minimizes the summed hinge

    sum_i max(0, alpha - s(p_i, t_i) + s(p_i, t_bar_i))

with s = cosine and t_bar_i the hardest in-batch target whose gold
concept differs from example i's. All gradients are analytic; the
optimizer is adaptive moments with decoupled weight decay.

Conventions: cosine with a zero vector is 0 with zero gradient;
rectifier and hinge subgradients at exactly 0 are 0.
"""

import math
from dataclasses import dataclass

import numpy as np

from medlink.errors import ConfigError, FormatError, TrainingDivergedError
from medlink.text import fmt_float

RAW = "raw"
TRANSFORM = "transform"
MLA = "mla"


@dataclass(frozen=True)
class BranchSpec:
    """One input branch. out_dim is meaningful for transform branches only."""

    kind: str
    in_dim: int
    out_dim: int = 0

    def __post_init__(self):
        if self.kind not in (RAW, TRANSFORM, MLA):
            raise ConfigError(f"unknown branch kind {self.kind!r}")
        if self.in_dim < 1:
            raise ConfigError(f"branch in_dim must be >= 1, got {self.in_dim}")
        if self.kind == TRANSFORM and self.out_dim < 1:
            raise ConfigError("transform branch needs a positive out_dim")

    @property
    def width(self):
        """Contribution to the concatenated input of the alignment map."""
        return self.out_dim if self.kind == TRANSFORM else self.in_dim


@dataclass(frozen=True)
class ModelConfig:
    branches: tuple
    out_dim: int
    use_relu: bool = True

    def __post_init__(self):
        if not self.branches:
            raise ConfigError("model needs at least one branch")
        if self.out_dim < 1:
            raise ConfigError(f"out_dim must be >= 1, got {self.out_dim}")

    @property
    def in_dim(self):
        return sum(b.width for b in self.branches)


@dataclass
class AlignModel:
    config: ModelConfig
    params: dict[str, np.ndarray]
    seed: int = 0

    def copy_params(self):
        return {name: value.copy() for name, value in self.params.items()}


def _glorot(rng, fan_in, fan_out, shape):
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def init_model(config, seed=0):
    """Glorot-uniform weights, zero biases, in a fixed parameter order."""
    rng = np.random.default_rng(seed)
    params = {}
    for i, branch in enumerate(config.branches):
        if branch.kind == TRANSFORM:
            params[f"W{i}"] = _glorot(
                rng, branch.in_dim, branch.out_dim, (branch.out_dim, branch.in_dim)
            )
            params[f"b{i}"] = np.zeros(branch.out_dim)
        elif branch.kind == MLA:
            params[f"A{i}"] = _glorot(rng, branch.in_dim, 1, branch.in_dim)
    params["W"] = _glorot(rng, config.in_dim, config.out_dim, (config.out_dim, config.in_dim))
    params["b"] = np.zeros(config.out_dim)
    return AlignModel(config=config, params=params, seed=seed)


def _check_inputs(config, inputs):
    if len(inputs) != len(config.branches):
        raise ConfigError(
            f"model has {len(config.branches)} branches, got {len(inputs)} input arrays"
        )
    batch = None
    for branch, arr in zip(config.branches, inputs):
        if branch.kind == MLA:
            if arr.ndim != 3 or arr.shape[2] != branch.in_dim:
                raise ConfigError(
                    f"mla branch expects (batch, L, {branch.in_dim}), got {arr.shape}"
                )
        else:
            if arr.ndim != 2 or arr.shape[1] != branch.in_dim:
                raise ConfigError(
                    f"{branch.kind} branch expects (batch, {branch.in_dim}), got {arr.shape}"
                )
        if batch is None:
            batch = arr.shape[0]
        elif arr.shape[0] != batch:
            raise ConfigError("branch inputs disagree on batch size")
    return batch


def _mla_batch(stacks, attention):
    """Batched MLA: returns (fused, weights, pre-activations)."""
    raw = stacks @ attention
    active = np.maximum(raw, 0.0)
    shifted = active - active.max(axis=1, keepdims=True)
    expo = np.exp(shifted)
    weights = expo / expo.sum(axis=1, keepdims=True)
    fused = np.einsum("bl,bld->bd", weights, stacks)
    return fused, weights, raw


def mla_forward(stack, attention):
    """Attention-fuse one L x d layer stack: weights softmax([B_i . A]_+)."""
    layers = stack.layers if hasattr(stack, "layers") else np.asarray(stack)
    fused, weights, _ = _mla_batch(layers[None, :, :], np.asarray(attention))
    return fused[0], weights[0]


def forward(model, inputs):
    """Batch forward pass; returns (predictions, cache for backward)."""
    config = model.config
    _check_inputs(config, inputs)
    parts = []
    cache = {"inputs": inputs, "branch": []}
    for i, (branch, arr) in enumerate(zip(config.branches, inputs)):
        if branch.kind == RAW:
            parts.append(arr)
            cache["branch"].append(None)
        elif branch.kind == TRANSFORM:
            pre = arr @ model.params[f"W{i}"].T + model.params[f"b{i}"]
            parts.append(np.maximum(pre, 0.0))
            cache["branch"].append(pre)
        else:
            fused, weights, raw = _mla_batch(arr, model.params[f"A{i}"])
            parts.append(fused)
            cache["branch"].append((weights, raw))
    x = np.concatenate(parts, axis=1)
    z = x @ model.params["W"].T + model.params["b"]
    p = np.maximum(z, 0.0) if config.use_relu else z
    cache.update(x=x, z=z)
    return p, cache


def predict(model, inputs):
    return forward(model, inputs)[0]


def _cosine_matrix(preds, targets):
    """All-pairs cosine with the zero-vector-scores-0 convention."""
    pn = np.linalg.norm(preds, axis=1)
    tn = np.linalg.norm(targets, axis=1)
    denom = np.outer(pn, tn)
    sims = np.zeros((preds.shape[0], targets.shape[0]))
    np.divide(preds @ targets.T, denom, out=sims, where=denom > 0)
    return sims


def hardest_negatives(sims, golds):
    """Per-example hardest in-batch negative index, or -1 when none exists.

    Negatives are targets whose gold concept differs from the example's,
    so a duplicated concept never serves as its own negative.
    """
    golds = list(golds)
    n = len(golds)
    out = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        best, best_sim = -1, -np.inf
        for j in range(n):
            if golds[j] == golds[i]:
                continue
            if sims[i, j] > best_sim:
                best, best_sim = j, sims[i, j]
        out[i] = best
    return out


def triplet_loss(preds, targets, alpha, golds=None):
    """Summed hinge over the batch; returns (loss, negative indices).

    When golds is omitted, target-row equality stands in for gold
    identity. Batches of size 1 have no negative and are rejected.
    """
    preds = np.asarray(preds, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if len(preds) != len(targets):
        raise ConfigError("predictions and targets must pair up")
    if len(preds) < 2:
        raise ConfigError("triplet loss needs a batch of at least 2")
    if golds is None:
        golds = [targets[i].tobytes() for i in range(len(targets))]
    sims = _cosine_matrix(preds, targets)
    negatives = hardest_negatives(sims, golds)
    loss = 0.0
    for i, j in enumerate(negatives):
        if j < 0:
            continue
        loss += max(0.0, alpha - sims[i, i] + sims[i, j])
    return float(loss), negatives


def _cosine_grad(p, t, sim):
    """d cos(p, t) / d p; zero under the zero-vector convention."""
    np_norm = np.linalg.norm(p)
    nt_norm = np.linalg.norm(t)
    if np_norm == 0.0 or nt_norm == 0.0:
        return np.zeros_like(p)
    return (t / nt_norm - sim * p / np_norm) / np_norm


def loss_and_grads(model, inputs, targets, golds, alpha):
    """Analytic gradients of the batch triplet loss for every parameter."""
    preds, cache = forward(model, inputs)
    targets = np.asarray(targets, dtype=np.float64)
    if len(preds) < 2:
        raise ConfigError("triplet loss needs a batch of at least 2")
    sims = _cosine_matrix(preds, targets)
    negatives = hardest_negatives(sims, golds)

    loss = 0.0
    dP = np.zeros_like(preds)
    for i, j in enumerate(negatives):
        if j < 0:
            continue
        hinge = alpha - sims[i, i] + sims[i, j]
        if hinge <= 0.0:
            continue
        loss += hinge
        dP[i] -= _cosine_grad(preds[i], targets[i], sims[i, i])
        dP[i] += _cosine_grad(preds[i], targets[j], sims[i, j])

    config = model.config
    grads = {name: np.zeros_like(value) for name, value in model.params.items()}
    dZ = dP * (cache["z"] > 0.0) if config.use_relu else dP
    grads["W"] = dZ.T @ cache["x"]
    grads["b"] = dZ.sum(axis=0)
    dX = dZ @ model.params["W"]

    offset = 0
    for i, branch in enumerate(config.branches):
        seg = dX[:, offset:offset + branch.width]
        if branch.kind == TRANSFORM:
            pre = cache["branch"][i]
            dpre = seg * (pre > 0.0)
            grads[f"W{i}"] = dpre.T @ cache["inputs"][i]
            grads[f"b{i}"] = dpre.sum(axis=0)
        elif branch.kind == MLA:
            weights, raw = cache["branch"][i]
            stacks = cache["inputs"][i]
            dw = np.einsum("bld,bd->bl", stacks, seg)
            dsoft = weights * (dw - (weights * dw).sum(axis=1, keepdims=True))
            draw = dsoft * (raw > 0.0)
            grads[f"A{i}"] = np.einsum("bl,bld->d", draw, stacks)
        offset += branch.width

    for name, grad in grads.items():
        if not np.all(np.isfinite(grad)):
            raise TrainingDivergedError(f"non-finite gradient in {name}")
    return float(loss), grads, preds


@dataclass(frozen=True)
class TrainConfig:
    alpha: float = 0.2
    batch_size: int = 64
    epochs: int = 50
    learning_rate: float = 1e-4
    weight_decay: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.alpha <= 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")
        if self.batch_size < 2:
            raise ConfigError("batch_size must be >= 2 (an in-batch negative is needed)")
        if self.epochs < 1 or self.learning_rate < 0:
            raise ConfigError("epochs must be >= 1 and learning_rate non-negative")


class AdamW:
    """Adaptive moments with decoupled weight decay."""

    def __init__(self, params, cfg):
        self.cfg = cfg
        self.step_count = 0
        self.m = {name: np.zeros_like(value) for name, value in params.items()}
        self.v = {name: np.zeros_like(value) for name, value in params.items()}

    def step(self, params, grads):
        cfg = self.cfg
        self.step_count += 1
        t = self.step_count
        for name, param in params.items():
            g = grads[name]
            self.m[name] = cfg.beta1 * self.m[name] + (1 - cfg.beta1) * g
            self.v[name] = cfg.beta2 * self.v[name] + (1 - cfg.beta2) * g * g
            m_hat = self.m[name] / (1 - cfg.beta1 ** t)
            v_hat = self.v[name] / (1 - cfg.beta2 ** t)
            param -= cfg.learning_rate * (
                m_hat / (np.sqrt(v_hat) + cfg.eps) + cfg.weight_decay * param
            )


@dataclass
class AlignData:
    """A set of examples: per-branch input arrays, targets, gold ids."""

    inputs: list
    targets: np.ndarray
    golds: list

    def __post_init__(self):
        sizes = {arr.shape[0] for arr in self.inputs}
        sizes.add(self.targets.shape[0])
        sizes.add(len(self.golds))
        if len(sizes) != 1:
            raise ConfigError(f"inconsistent example counts across fields: {sorted(sizes)}")

    def __len__(self):
        return len(self.golds)

    def take(self, idx):
        return AlignData(
            inputs=[arr[idx] for arr in self.inputs],
            targets=self.targets[idx],
            golds=[self.golds[i] for i in idx],
        )


def rank_candidates(preds, candidate_ids, candidate_matrix, k=10):
    """Top-k candidate ids per prediction by cosine, ascending-id tie-break."""
    sims = _cosine_matrix(np.atleast_2d(preds), candidate_matrix)
    order_key = np.array([int(c) for c in candidate_ids])
    ranked = []
    for row in sims:
        order = np.lexsort((order_key, -row))[:k]
        ranked.append([(candidate_ids[j], float(row[j])) for j in order])
    return ranked


def dev_accuracy(model, data, candidate_ids, candidate_matrix):
    """Dev Acc@1 against a fixed candidate set."""
    if len(data) == 0:
        return 0.0
    preds = predict(model, data.inputs)
    ranked = rank_candidates(preds, candidate_ids, candidate_matrix, k=1)
    hits = sum(1 for top, gold in zip(ranked, data.golds) if top and top[0][0] == gold)
    return hits / len(data)


def train(model, train_data, dev_data, candidate_ids, candidate_matrix, cfg):
    """Mini-batch training with epoch-level best-dev-Acc@1 selection.

    Batches are fixed-size after a seeded shuffle each epoch; a ragged
    final batch is kept unless it has fewer than 2 examples. Returns the
    model carrying the best parameters plus the per-epoch dev trace.
    """
    if len(train_data) < cfg.batch_size:
        raise ConfigError(
            f"need at least batch_size={cfg.batch_size} training examples, "
            f"got {len(train_data)}"
        )
    rng = np.random.default_rng(cfg.seed)
    optimizer = AdamW(model.params, cfg)
    trace = []
    best_acc = -1.0
    best_params = model.copy_params()
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(train_data))
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            if len(idx) < 2:
                continue
            batch = train_data.take(idx)
            loss, grads, _ = loss_and_grads(
                model, batch.inputs, batch.targets, batch.golds, cfg.alpha
            )
            if not math.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch} batch {start // cfg.batch_size}"
                )
            optimizer.step(model.params, grads)
        acc = dev_accuracy(model, dev_data, candidate_ids, candidate_matrix)
        trace.append(acc)
        if acc > best_acc:
            best_acc = acc
            best_params = model.copy_params()
    model.params = best_params
    return model, trace


CHECKPOINT_MAGIC = "medlink-align 1"


def save_model(model, path):
    """Versioned text checkpoint; floats carry full round-trip precision."""
    config = model.config
    lines = [CHECKPOINT_MAGIC]
    lines.append(f"use_relu {int(config.use_relu)}")
    lines.append(f"out_dim {config.out_dim}")
    lines.append(f"seed {model.seed}")
    lines.append(f"branches {len(config.branches)}")
    for branch in config.branches:
        lines.append(f"branch {branch.kind} {branch.in_dim} {branch.out_dim}")
    for name in sorted(model.params):
        value = np.atleast_2d(model.params[name])
        lines.append(f"param {name} {value.shape[0]} {value.shape[1]}")
        for row in value:
            lines.append(" ".join(fmt_float(v) for v in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("".join(line + "\n" for line in lines))


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != CHECKPOINT_MAGIC:
        raise FormatError(f"not a {CHECKPOINT_MAGIC!r} checkpoint", path=path, line=1)
    try:
        use_relu = bool(int(lines[1].split()[1]))
        out_dim = int(lines[2].split()[1])
        seed = int(lines[3].split()[1])
        n_branches = int(lines[4].split()[1])
        branches = []
        cursor = 5
        for _ in range(n_branches):
            _, kind, in_dim, b_out = lines[cursor].split()
            branches.append(BranchSpec(kind=kind, in_dim=int(in_dim), out_dim=int(b_out)))
            cursor += 1
        config = ModelConfig(branches=tuple(branches), out_dim=out_dim, use_relu=use_relu)
        params = {}
        while cursor < len(lines):
            _, name, rows, cols = lines[cursor].split()
            rows, cols = int(rows), int(cols)
            cursor += 1
            block = [
                [float(v) for v in lines[cursor + r].split(" ")] for r in range(rows)
            ]
            cursor += rows
            value = np.array(block, dtype=np.float64)
            params[name] = value[0] if name.startswith(("b", "A")) else value
    except (IndexError, ValueError) as exc:
        raise FormatError(f"corrupt checkpoint: {exc}", path=path)
    model = AlignModel(config=config, params=params, seed=seed)
    expected = set(init_model(config, seed=0).params)
    if set(params) != expected:
        raise FormatError(
            f"checkpoint parameters {sorted(params)} do not match the "
            f"declared shape (expected {sorted(expected)})",
            path=path,
        )
    return model


def make_branch_config(kinds, dims, out_dim, use_relu=True):
    """Convenience builder: kinds like ['raw', 'mla'], dims aligned with kinds.

    Each dim is an int except for transform branches, which take
    (in_dim, out_dim) pairs.
    """
    branches = []
    for kind, dim in zip(kinds, dims):
        if kind == TRANSFORM:
            branches.append(BranchSpec(kind=kind, in_dim=dim[0], out_dim=dim[1]))
        else:
            branches.append(BranchSpec(kind=kind, in_dim=dim))
    return ModelConfig(branches=tuple(branches), out_dim=out_dim, use_relu=use_relu)
