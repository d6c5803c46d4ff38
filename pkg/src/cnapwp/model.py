"""Prompt-augmented multi-head self-attention predictor with exact gradients.

The backbone feeds one-hot prefixes straight into per-layer QKV projections,
runs scaled dot-product attention with row softmax and dropout, flattens, and
classifies through a dense layer plus softmax head. Prompts attach in one of
two ways:

* prefix mode: learned key/value rows are prepended to K and V of a layer, so
  queries and the output length are untouched;
* prompt mode: learned token rows are prepended to the layer input, extending
  the sequence (the dense head is sized for the extended length).

The shared prompt attaches at the shallow layers, the expert (per-task plus
per-bucket) prompts at the deeper ones. All math is float64 and every
gradient is written out by hand against a forward cache, so finite
differences can check it exactly.

Vocabulary growth zero-extends the first projection's input rows and the
classifier's output columns (token rows of prompt-mode blocks on the first
layer grow too). The internal attention width is fixed at construction, so
growth leaves previous logits unchanged up to float roundoff and gives new
classes a logit of exactly zero.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigurationError, NumericError
from .preprocessing import EncodedSample

PREFIX_MODE = "prefix"
PROMPT_MODE = "prompt"
LOG_FLOOR = 1e-12
CHECKPOINT_MAGIC = b"CNAPWP1\n"


class Parameter:
    """A trainable float64 tensor with an accumulated gradient."""

    __slots__ = ("name", "value", "grad", "trainable")

    def __init__(self, value: np.ndarray, name: str = "", trainable: bool = True):
        self.value = np.array(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)
        self.name = name
        self.trainable = trainable

    def zero_grad(self) -> None:
        self.grad[...] = 0.0

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.value.shape}, trainable={self.trainable})"


@dataclass(frozen=True)
class ModelConfig:
    """Backbone and prompt layout. ``use_general``/``use_expert`` declare which
    prompt kinds this model instance will ever see, which fixes the dense head
    size in prompt mode."""

    max_len: int
    heads: int = 4
    layers: int = 2
    dropout: float = 0.1
    prompt_len: int = 5
    general_layers: tuple[int, ...] = (0,)
    expert_layers: tuple[int, ...] = (1,)
    prompt_mode: str = PREFIX_MODE
    use_general: bool = True
    use_expert: bool = True

    def __post_init__(self):
        if self.max_len < 1:
            raise ConfigurationError("max_len must be >= 1")
        if self.heads < 1 or self.layers < 1:
            raise ConfigurationError("heads and layers must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigurationError("dropout must be in [0, 1)")
        if self.prompt_len < 0:
            raise ConfigurationError("prompt_len must be >= 0")
        if self.prompt_mode not in (PREFIX_MODE, PROMPT_MODE):
            raise ConfigurationError(f"unknown prompt mode {self.prompt_mode!r}")
        for layer in (*self.general_layers, *self.expert_layers):
            if not 0 <= layer < self.layers:
                raise ConfigurationError(f"prompt layer {layer} outside [0, {self.layers})")

    def rows_attached_at(self, layer: int) -> int:
        """Prompt rows contributed at a layer given the declared prompt kinds."""
        rows = 0
        if self.use_general and layer in self.general_layers:
            rows += self.prompt_len
        if self.use_expert and layer in self.expert_layers:
            rows += 2 * self.prompt_len
        return rows


@dataclass
class PromptBlock:
    """One layer's prompt parameters: key/value rows (prefix mode) or token rows."""

    key: Parameter | None = None
    value: Parameter | None = None
    tokens: Parameter | None = None

    def parameters(self) -> list[Parameter]:
        return [p for p in (self.key, self.value, self.tokens) if p is not None]


class GeneralPrompt:
    """Task-invariant prompt blocks, keyed by layer."""

    def __init__(self, blocks: dict[int, PromptBlock]):
        self.blocks = blocks

    def parameters(self) -> list[Parameter]:
        out = []
        for block in self.blocks.values():
            out.extend(block.parameters())
        return out


class ExpertPromptSet:
    """One task's prompt parameters: a task block plus one block per bucket, per layer."""

    def __init__(self, task_blocks: dict[int, PromptBlock], bucket_blocks: dict[int, dict[int, PromptBlock]]):
        self.task_blocks = task_blocks
        self.bucket_blocks = bucket_blocks

    def parameters(self, active_bucket: int | None = None) -> list[Parameter]:
        """Task parameters plus, when given, only the active bucket's parameters."""
        out = []
        for block in self.task_blocks.values():
            out.extend(block.parameters())
        buckets = self.bucket_blocks if active_bucket is None else {active_bucket: self.bucket_blocks[active_bucket]}
        for per_layer in buckets.values():
            for block in per_layer.values():
                out.extend(block.parameters())
        return out


def _make_block(cfg: ModelConfig, layer: int, d_model: int, layer_width: int, rng: np.random.Generator, name: str) -> PromptBlock:
    if cfg.prompt_mode == PREFIX_MODE:
        return PromptBlock(
            key=Parameter(rng.uniform(-0.1, 0.1, (cfg.prompt_len, d_model)), f"{name}.key"),
            value=Parameter(rng.uniform(-0.1, 0.1, (cfg.prompt_len, d_model)), f"{name}.value"),
        )
    return PromptBlock(tokens=Parameter(rng.uniform(-0.1, 0.1, (cfg.prompt_len, layer_width)), f"{name}.tokens"))


def init_general_prompt(cfg: ModelConfig, d_model: int, layer_widths: Sequence[int], seed: int) -> GeneralPrompt:
    rng = np.random.default_rng([seed, 101])
    blocks = {
        layer: _make_block(cfg, layer, d_model, layer_widths[layer], rng, f"general.l{layer}")
        for layer in sorted(cfg.general_layers)
    }
    return GeneralPrompt(blocks)


def init_expert_prompts(
    cfg: ModelConfig,
    bucket_ids: Sequence[int],
    d_model: int,
    layer_widths: Sequence[int],
    seed: int,
    task_id: int,
) -> ExpertPromptSet:
    """Fresh expert blocks, i.i.d. uniform [-0.1, 0.1], deterministic per (seed, task_id)."""
    rng = np.random.default_rng([seed, 211, task_id])
    task_blocks = {
        layer: _make_block(cfg, layer, d_model, layer_widths[layer], rng, f"task{task_id}.l{layer}")
        for layer in sorted(cfg.expert_layers)
    }
    bucket_blocks = {
        bucket: {
            layer: _make_block(cfg, layer, d_model, layer_widths[layer], rng, f"task{task_id}.b{bucket}.l{layer}")
            for layer in sorted(cfg.expert_layers)
        }
        for bucket in bucket_ids
    }
    return ExpertPromptSet(task_blocks, bucket_blocks)


class ForwardCache:
    """Everything the backward pass needs from one forward pass."""

    __slots__ = ("layers", "flat", "dense_out", "probs", "batch_size", "layer_output_lengths")

    def __init__(self):
        self.layers: list[dict] = []
        self.flat = None
        self.dense_out = None
        self.probs = None
        self.batch_size = 0
        self.layer_output_lengths: list[int] = []


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def attach_prefix(
    prompt_key: np.ndarray, prompt_value: np.ndarray, keys: np.ndarray, values: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Prepend prompt rows to batched keys and values; queries stay untouched."""
    if prompt_key.shape != prompt_value.shape:
        raise ValueError(f"prompt key/value shapes differ: {prompt_key.shape} vs {prompt_value.shape}")
    if prompt_key.ndim != 2 or prompt_key.shape[1] != keys.shape[-1]:
        raise ValueError(f"prompt width {prompt_key.shape} does not match keys width {keys.shape[-1]}")
    batch = keys.shape[0]
    pk = np.broadcast_to(prompt_key, (batch, *prompt_key.shape))
    pv = np.broadcast_to(prompt_value, (batch, *prompt_value.shape))
    return np.concatenate((pk, keys), axis=1), np.concatenate((pv, values), axis=1)


def _fan_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    """Fan-balanced uniform weight init; biases start at zero."""
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, (fan_in, fan_out))


class AttentionPredictor:
    """The backbone: layered prompt-aware attention, dense head, classifier.

    ``input_width`` tracks the one-hot width (vocabulary size plus padding) and
    may grow; the internal width ``d_model`` is the smallest multiple of
    ``heads`` covering the initial input width and never changes.
    """

    def __init__(self, cfg: ModelConfig, input_width: int, n_classes: int, seed: int):
        if input_width < 1:
            raise ConfigurationError("input_width must be >= 1")
        if n_classes < 1:
            raise ConfigurationError("n_classes must be >= 1")
        self.cfg = cfg
        self.seed = seed
        self.input_width = input_width
        self.n_classes = n_classes
        self.d_model = math.ceil(input_width / cfg.heads) * cfg.heads
        self.d_head = self.d_model // cfg.heads

        # Sequence length entering each layer; prompt mode prepends rows that persist.
        self.layer_seq_lens = []
        seq = cfg.max_len
        for layer in range(cfg.layers):
            self.layer_seq_lens.append(seq)
            if cfg.prompt_mode == PROMPT_MODE:
                seq += cfg.rows_attached_at(layer)
        self.final_seq_len = seq

        rng = np.random.default_rng([seed, 97])
        self.layers_qkv: list[tuple[Parameter, Parameter]] = []
        for layer in range(cfg.layers):
            w_in = self.layer_widths[layer]
            w = Parameter(_fan_uniform(rng, w_in, 3 * self.d_model), f"layer{layer}.wqkv")
            b = Parameter(np.zeros(3 * self.d_model), f"layer{layer}.bqkv")
            self.layers_qkv.append((w, b))
        head_width = self.final_seq_len * self.d_model
        self.dense_w = Parameter(_fan_uniform(rng, head_width, head_width), "dense.w")
        self.dense_b = Parameter(np.zeros(head_width), "dense.b")
        self.cls_w = Parameter(_fan_uniform(rng, head_width, n_classes), "classifier.w")
        self.cls_b = Parameter(np.zeros(n_classes), "classifier.b")

    @property
    def layer_widths(self) -> list[int]:
        """Feature width entering each layer's projection."""
        return [self.input_width if layer == 0 else self.d_model for layer in range(self.cfg.layers)]

    def parameters(self) -> list[Parameter]:
        out = []
        for w, b in self.layers_qkv:
            out.extend((w, b))
        out.extend((self.dense_w, self.dense_b, self.cls_w, self.cls_b))
        return out

    def classifier_parameters(self) -> list[Parameter]:
        return [self.cls_w, self.cls_b]

    def named_parameters(self) -> dict[str, Parameter]:
        return {p.name: p for p in self.parameters()}

    # -- forward / backward ------------------------------------------------

    def _gather_sources(self, layer: int, general, expert, bucket_id) -> list[tuple[str, PromptBlock]]:
        cfg = self.cfg
        sources: list[tuple[str, PromptBlock]] = []
        if cfg.use_general and general is not None and layer in cfg.general_layers and cfg.prompt_len > 0:
            sources.append(("general", general.blocks[layer]))
        if cfg.use_expert and expert is not None and layer in cfg.expert_layers and cfg.prompt_len > 0:
            if bucket_id is None:
                raise ConfigurationError("expert prompts need a bucket id")
            if bucket_id not in expert.bucket_blocks:
                raise ConfigurationError(f"no bucket {bucket_id} in expert prompt set")
            sources.append(("task", expert.task_blocks[layer]))
            sources.append(("bucket", expert.bucket_blocks[bucket_id][layer]))
        return sources

    def _pad_input(self, x: np.ndarray) -> np.ndarray:
        if x.shape[-1] > self.input_width:
            raise ConfigurationError(
                f"input width {x.shape[-1]} exceeds model width {self.input_width}; grow the model first"
            )
        if x.shape[-1] < self.input_width:
            pad = np.zeros((*x.shape[:-1], self.input_width - x.shape[-1]))
            x = np.concatenate((x, pad), axis=-1)
        return x

    def forward(
        self,
        x: np.ndarray,
        general: GeneralPrompt | None = None,
        expert: ExpertPromptSet | None = None,
        bucket_id: int | None = None,
        train: bool = False,
        rng: np.random.Generator | None = None,
        want_cache: bool = True,
    ) -> tuple[np.ndarray, ForwardCache | None]:
        """Run a batch [B, max_len, width] (or one sample [max_len, width]) to class probabilities.

        Narrow inputs encoded under an older vocabulary are zero-padded, which
        is exactly the grown model's semantics for them.
        """
        single = x.ndim == 2
        if single:
            x = x[np.newaxis]
        x = self._pad_input(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.cfg.max_len:
            raise ConfigurationError(f"expected {self.cfg.max_len} input rows, got {x.shape[1]}")
        batch = x.shape[0]
        cfg = self.cfg
        scale = 1.0 / math.sqrt(self.d_head)
        use_dropout = train and cfg.dropout > 0.0
        if use_dropout and rng is None:
            raise ConfigurationError("training with dropout needs an rng")

        cache = ForwardCache() if want_cache else None
        if cache is not None:
            cache.batch_size = batch

        h = x
        for layer in range(cfg.layers):
            sources = self._gather_sources(layer, general, expert, bucket_id)
            prepended = 0
            if cfg.prompt_mode == PROMPT_MODE and sources:
                tokens = np.concatenate([src.tokens.value for _, src in sources], axis=0)
                prepended = tokens.shape[0]
                h = np.concatenate((np.broadcast_to(tokens, (batch, *tokens.shape)), h), axis=1)
            w, b = self.layers_qkv[layer]
            proj = h @ w.value + b.value
            d = self.d_model
            q, k, v = proj[..., :d], proj[..., d : 2 * d], proj[..., 2 * d :]
            if cfg.prompt_mode == PREFIX_MODE and sources:
                pk = np.concatenate([src.key.value for _, src in sources], axis=0)
                pv = np.concatenate([src.value.value for _, src in sources], axis=0)
                k_full, v_full = attach_prefix(pk, pv, k, v)
            else:
                k_full, v_full = k, v
            t_q = q.shape[1]
            t_k = k_full.shape[1]
            qh = q.reshape(batch, t_q, cfg.heads, self.d_head).transpose(0, 2, 1, 3)
            kh = k_full.reshape(batch, t_k, cfg.heads, self.d_head).transpose(0, 2, 1, 3)
            vh = v_full.reshape(batch, t_k, cfg.heads, self.d_head).transpose(0, 2, 1, 3)
            scores = (qh @ kh.swapaxes(-1, -2)) * scale
            attn = softmax(scores, axis=-1)
            out_h = attn @ vh
            out = out_h.transpose(0, 2, 1, 3).reshape(batch, t_q, d)
            if not np.isfinite(out).all():
                raise NumericError(f"non-finite activation in layer {layer}")
            mask = None
            if use_dropout:
                mask = (rng.random(out.shape) >= cfg.dropout).astype(np.float64)
                out = out * mask / (1.0 - cfg.dropout)
            if cache is not None:
                cache.layers.append(
                    {
                        "h_in": h,
                        "qh": qh,
                        "kh": kh,
                        "vh": vh,
                        "attn": attn,
                        "mask": mask,
                        "sources": sources,
                        "prepended": prepended,
                        "prompt_rows": t_k - t_q,
                    }
                )
                cache.layer_output_lengths.append(t_q)
            h = out

        flat = h.reshape(batch, -1)
        dense_out = flat @ self.dense_w.value + self.dense_b.value
        logits = dense_out @ self.cls_w.value + self.cls_b.value
        probs = softmax(logits, axis=-1)
        if not np.isfinite(probs).all():
            raise NumericError("non-finite probabilities in the classifier head")
        if cache is not None:
            cache.flat = flat
            cache.dense_out = dense_out
            cache.probs = probs
        return (probs[0] if single else probs), cache

    def backward(self, cache: ForwardCache, targets: np.ndarray) -> None:
        """Accumulate gradients of the mean cross-entropy into every trainable parameter."""
        cfg = self.cfg
        batch = cache.batch_size
        targets = np.asarray(targets)
        if targets.shape != (batch,):
            raise ConfigurationError(f"expected {batch} targets, got shape {targets.shape}")
        if np.any(targets < 1) or np.any(targets > self.n_classes):
            raise ConfigurationError("targets must be ordinal activity indices in [1, n_classes]")

        rows = np.arange(batch)
        dz = cache.probs.copy()
        dz[rows, targets - 1] -= 1.0
        dz /= batch
        # Clamped samples contribute a constant loss, hence no gradient.
        floored = cache.probs[rows, targets - 1] <= LOG_FLOOR
        dz[floored] = 0.0

        if self.cls_w.trainable:
            self.cls_w.grad += cache.dense_out.T @ dz
        if self.cls_b.trainable:
            self.cls_b.grad += dz.sum(axis=0)
        d_dense = dz @ self.cls_w.value.T
        if self.dense_w.trainable:
            self.dense_w.grad += cache.flat.T @ d_dense
        if self.dense_b.trainable:
            self.dense_b.grad += d_dense.sum(axis=0)
        d_flat = d_dense @ self.dense_w.value.T
        dh = d_flat.reshape(batch, self.final_seq_len, self.d_model)

        scale = 1.0 / math.sqrt(self.d_head)
        for layer in reversed(range(cfg.layers)):
            entry = cache.layers[layer]
            if entry["mask"] is not None:
                dh = dh * entry["mask"] / (1.0 - cfg.dropout)
            t_q = dh.shape[1]
            d_out_h = dh.reshape(batch, t_q, cfg.heads, self.d_head).transpose(0, 2, 1, 3)
            attn, qh, kh, vh = entry["attn"], entry["qh"], entry["kh"], entry["vh"]
            d_attn = d_out_h @ vh.swapaxes(-1, -2)
            d_vh = attn.swapaxes(-1, -2) @ d_out_h
            d_scores = (d_attn - (d_attn * attn).sum(axis=-1, keepdims=True)) * attn
            d_qh = (d_scores @ kh) * scale
            d_kh = (d_scores.swapaxes(-1, -2) @ qh) * scale

            t_k = kh.shape[2]
            dq = d_qh.transpose(0, 2, 1, 3).reshape(batch, t_q, self.d_model)
            dk_full = d_kh.transpose(0, 2, 1, 3).reshape(batch, t_k, self.d_model)
            dv_full = d_vh.transpose(0, 2, 1, 3).reshape(batch, t_k, self.d_model)

            prompt_rows = entry["prompt_rows"]
            if prompt_rows:
                dk_prompt = dk_full[:, :prompt_rows].sum(axis=0)
                dv_prompt = dv_full[:, :prompt_rows].sum(axis=0)
                offset = 0
                for _, block in entry["sources"]:
                    n = block.key.value.shape[0]
                    if block.key.trainable:
                        block.key.grad += dk_prompt[offset : offset + n]
                    if block.value.trainable:
                        block.value.grad += dv_prompt[offset : offset + n]
                    offset += n
                dk = dk_full[:, prompt_rows:]
                dv = dv_full[:, prompt_rows:]
            else:
                dk, dv = dk_full, dv_full

            d_proj = np.concatenate((dq, dk, dv), axis=-1)
            w, b = self.layers_qkv[layer]
            h_in = entry["h_in"]
            if w.trainable:
                w.grad += np.einsum("btw,btk->wk", h_in, d_proj)
            if b.trainable:
                b.grad += d_proj.sum(axis=(0, 1))
            dh = d_proj @ w.value.T

            if entry["prepended"]:
                d_tokens = dh[:, : entry["prepended"]].sum(axis=0)
                offset = 0
                for _, block in entry["sources"]:
                    n = block.tokens.value.shape[0]
                    if block.tokens.trainable:
                        block.tokens.grad += d_tokens[offset : offset + n]
                    offset += n
                dh = dh[:, entry["prepended"] :]

    def predict(
        self,
        sample: EncodedSample,
        general: GeneralPrompt | None = None,
        expert: ExpertPromptSet | None = None,
    ) -> tuple[np.ndarray, int]:
        """Evaluate one sample; returns (probabilities, predicted ordinal index).

        Argmax ties resolve to the lowest class index.
        """
        probs, _ = self.forward(
            sample.input, general=general, expert=expert, bucket_id=sample.bucket, train=False, want_cache=False
        )
        return probs, int(np.argmax(probs)) + 1

    # -- growth ------------------------------------------------------------

    def grow(self, input_width: int | None = None, n_classes: int | None = None) -> None:
        if input_width is not None:
            if input_width < self.input_width:
                raise ConfigurationError(f"cannot shrink input width {self.input_width} -> {input_width}")
            if input_width > self.input_width:
                w, _ = self.layers_qkv[0]
                extra = input_width - self.input_width
                w.value = np.concatenate((w.value, np.zeros((extra, w.value.shape[1]))), axis=0)
                w.grad = np.zeros_like(w.value)
                self.input_width = input_width
        if n_classes is not None:
            if n_classes < self.n_classes:
                raise ConfigurationError(f"cannot shrink classes {self.n_classes} -> {n_classes}")
            if n_classes > self.n_classes:
                extra = n_classes - self.n_classes
                self.cls_w.value = np.concatenate((self.cls_w.value, np.zeros((self.cls_w.value.shape[0], extra))), axis=1)
                self.cls_w.grad = np.zeros_like(self.cls_w.value)
                self.cls_b.value = np.concatenate((self.cls_b.value, np.zeros(extra)))
                self.cls_b.grad = np.zeros_like(self.cls_b.value)
                self.n_classes = n_classes


def grow_vocabulary(
    model: AttentionPredictor,
    input_width: int,
    n_classes: int,
    general: GeneralPrompt | None = None,
    expert_sets: Iterable[ExpertPromptSet] = (),
) -> None:
    """Zero-extend the model (and any prompt-mode first-layer token blocks) for a larger vocabulary.

    On inputs encoded under the old vocabulary the zero extensions cancel, so
    previous logits survive up to float roundoff (the widened contraction axis
    can regroup the sums), and growing in several steps equals growing once.
    """
    old_width = model.input_width
    model.grow(input_width=input_width, n_classes=n_classes)
    grown = model.input_width - old_width
    if grown and model.cfg.prompt_mode == PROMPT_MODE:
        def widen(block: PromptBlock):
            if block.tokens is not None and block.tokens.value.shape[1] == old_width:
                block.tokens.value = np.concatenate(
                    (block.tokens.value, np.zeros((block.tokens.value.shape[0], grown))), axis=1
                )
                block.tokens.grad = np.zeros_like(block.tokens.value)

        if general is not None and 0 in general.blocks:
            widen(general.blocks[0])
        for expert in expert_sets:
            if 0 in expert.task_blocks:
                widen(expert.task_blocks[0])
            for per_layer in expert.bucket_blocks.values():
                if 0 in per_layer:
                    widen(per_layer[0])


# -- loss and optimization --------------------------------------------------


def cross_entropy(probabilities: np.ndarray, target: int) -> float:
    """Negative log likelihood of the target ordinal, with a floor before log."""
    if not 1 <= target <= probabilities.shape[-1]:
        raise ConfigurationError(f"target {target} outside [1, {probabilities.shape[-1]}]")
    return -math.log(max(float(probabilities[target - 1]), LOG_FLOOR))


def mean_cross_entropy(probabilities: np.ndarray, targets: np.ndarray) -> float:
    targets = np.asarray(targets)
    if np.any(targets < 1) or np.any(targets > probabilities.shape[-1]):
        raise ConfigurationError("targets outside the class range")
    picked = probabilities[np.arange(len(targets)), targets - 1]
    return float(-np.log(np.maximum(picked, LOG_FLOOR)).mean())


def sgd_step(parameters: Iterable[Parameter], lr: float) -> None:
    """Plain SGD on trainable parameters; zeroes all passed gradients."""
    for p in parameters:
        if p.trainable:
            p.value -= lr * p.grad
        p.grad[...] = 0.0


def stack_samples(samples: Sequence[EncodedSample], input_width: int, max_len: int) -> tuple[np.ndarray, np.ndarray]:
    """Stack samples into one batch, zero-padding older narrow encodings."""
    x = np.zeros((len(samples), max_len, input_width))
    for i, s in enumerate(samples):
        x[i, :, : s.input.shape[1]] = s.input
    targets = np.array([s.target for s in samples], dtype=np.int64)
    return x, targets


def train_window(
    model: AttentionPredictor,
    batches: Sequence[tuple[int, Sequence[Sequence[EncodedSample]]]],
    epochs: int,
    lr: float,
    general: GeneralPrompt | None = None,
    expert: ExpertPromptSet | None = None,
    rng: np.random.Generator | None = None,
) -> None:
    """SGD over bucketed batches: backbone, general and task prompts learn on every
    batch; a bucket's prompt learns only on its own batches."""
    if not batches:
        return
    for _ in range(epochs):
        for bucket_id, chunks in batches:
            for chunk in chunks:
                x, targets = stack_samples(chunk, model.input_width, model.cfg.max_len)
                _, cache = model.forward(
                    x, general=general, expert=expert, bucket_id=bucket_id, train=True, rng=rng
                )
                model.backward(cache, targets)
                params = list(model.parameters())
                if general is not None:
                    params.extend(general.parameters())
                if expert is not None:
                    params.extend(expert.parameters(active_bucket=bucket_id))
                sgd_step(params, lr)


# -- checkpointing ------------------------------------------------------------


def save_checkpoint(path, named_tensors: Mapping[str, np.ndarray]) -> None:
    """Binary dump: magic, tensor count, then per tensor a name line, a shape
    line, and raw little-endian float64 bytes in C order."""
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(named_tensors)))
        for name, tensor in named_tensors.items():
            # asarray keeps 0-d shapes; ascontiguousarray would promote them to 1-d
            arr = np.asarray(tensor, dtype="<f8", order="C")
            fh.write(name.encode("utf-8") + b"\n")
            fh.write(" ".join(str(d) for d in arr.shape).encode("ascii") + b"\n")
            fh.write(arr.tobytes())


def load_checkpoint(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ConfigurationError(f"bad checkpoint magic {magic!r}")
        (count,) = struct.unpack("<I", fh.read(4))
        out: dict[str, np.ndarray] = {}
        for _ in range(count):
            name = _read_line(fh).decode("utf-8")
            shape_text = _read_line(fh).decode("ascii").strip()
            shape = tuple(int(t) for t in shape_text.split()) if shape_text else ()
            n = int(np.prod(shape)) if shape else 1
            raw = fh.read(8 * n)
            if len(raw) != 8 * n:
                raise ConfigurationError(f"truncated checkpoint tensor {name!r}")
            out[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
        return out


def _read_line(fh) -> bytes:
    chunks = []
    while True:
        c = fh.read(1)
        if not c:
            raise ConfigurationError("truncated checkpoint header")
        if c == b"\n":
            return b"".join(chunks)
        chunks.append(c)
