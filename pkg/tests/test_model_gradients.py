"""Finite-difference verification of the hand-written backward pass."""
import numpy as np

from cnapwp.model import (
    PREFIX_MODE,
    PROMPT_MODE,
    AttentionPredictor,
    ModelConfig,
    init_expert_prompts,
    init_general_prompt,
)

from gradcheck import gradient_errors, trainable_parameters

# Central differences with step 1e-5 carry ~1e-9 absolute noise, which turns
# into ~1e-5 relative error on near-zero coordinates; 1e-4 keeps headroom.
TOL = 1e-4


def build(mode, input_width=5, n_classes=4, seed=7, **cfg_kwargs):
    defaults = dict(max_len=3, heads=2, layers=2, dropout=0.0, prompt_len=2,
                    general_layers=(0,), expert_layers=(1,), prompt_mode=mode)
    defaults.update(cfg_kwargs)
    cfg = ModelConfig(**defaults)
    model = AttentionPredictor(cfg, input_width, n_classes, seed)
    general = init_general_prompt(cfg, model.d_model, model.layer_widths, seed)
    expert = init_expert_prompts(cfg, (1, 2), model.d_model, model.layer_widths, seed, task_id=1)
    return model, general, expert


def batch_for(model, seed=3, batch=3):
    rng = np.random.default_rng(seed)
    x = np.zeros((batch, model.cfg.max_len, model.input_width))
    idx = rng.integers(0, model.input_width, size=(batch, model.cfg.max_len))
    x[np.arange(batch)[:, None], np.arange(model.cfg.max_len)[None, :], idx] = 1.0
    targets = rng.integers(1, model.n_classes + 1, size=batch)
    return x, targets


def test_prefix_mode_gradients_every_coordinate():
    model, general, expert = build(PREFIX_MODE)
    x, targets = batch_for(model)
    errors = gradient_errors(model, x, targets, general=general, expert=expert, bucket_id=1)
    assert max(errors) < TOL


def test_prompt_mode_gradients_sampled():
    model, general, expert = build(PROMPT_MODE)
    x, targets = batch_for(model)
    errors = gradient_errors(
        model, x, targets, general=general, expert=expert, bucket_id=2, n_coords=600, seed=1
    )
    assert max(errors) < TOL


def test_promptless_gradients_every_coordinate():
    model, _, _ = build(PREFIX_MODE, use_general=False, use_expert=False)
    x, targets = batch_for(model, seed=9)
    errors = gradient_errors(model, x, targets)
    assert max(errors) < TOL


def test_single_layer_shared_attachment_gradients():
    """General and expert prompts on the same layer still check out."""
    model, general, expert = build(
        PREFIX_MODE, layers=1, general_layers=(0,), expert_layers=(0,), prompt_len=1
    )
    x, targets = batch_for(model, seed=11)
    errors = gradient_errors(model, x, targets, general=general, expert=expert, bucket_id=1)
    assert max(errors) < TOL


def test_gradients_under_replayed_dropout():
    """With the mask sequence replayed per evaluation, dropout is differentiable."""
    model, general, expert = build(PREFIX_MODE, dropout=0.3)
    x, targets = batch_for(model, seed=5)
    errors = gradient_errors(
        model,
        x,
        targets,
        general=general,
        expert=expert,
        bucket_id=1,
        n_coords=150,
        seed=2,
        rng_factory=lambda: np.random.default_rng(123),
    )
    assert max(errors) < TOL


def test_frozen_parameters_accumulate_no_gradient():
    model, general, expert = build(PREFIX_MODE)
    model.cls_w.trainable = False
    x, targets = batch_for(model)
    _, cache = model.forward(x, general=general, expert=expert, bucket_id=1)
    model.backward(cache, targets)
    assert np.array_equal(model.cls_w.grad, np.zeros_like(model.cls_w.grad))
    assert np.abs(model.dense_w.grad).max() > 0


def test_inactive_bucket_gets_no_gradient():
    model, general, expert = build(PREFIX_MODE)
    x, targets = batch_for(model)
    _, cache = model.forward(x, general=general, expert=expert, bucket_id=1)
    model.backward(cache, targets)
    for per_layer in (expert.bucket_blocks[2],):
        for block in per_layer.values():
            for p in block.parameters():
                assert np.array_equal(p.grad, np.zeros_like(p.grad))
    active = [p for block in expert.bucket_blocks[1].values() for p in block.parameters()]
    assert any(np.abs(p.grad).max() > 0 for p in active)


def test_floored_probability_contributes_no_gradient():
    """Samples whose target probability hit the log floor are constant-loss."""
    model, general, expert = build(PREFIX_MODE)
    x, targets = batch_for(model)
    # Push every target class far below the floor.
    for t in np.unique(targets):
        model.cls_b.value[t - 1] = -2000.0
    _, cache = model.forward(x, general=general, expert=expert, bucket_id=1)
    model.backward(cache, targets)
    for p in trainable_parameters(model, general, expert, bucket_id=1):
        assert np.array_equal(p.grad, np.zeros_like(p.grad))


def test_floored_sample_drops_out_of_the_batch_mean():
    """A floored sample contributes nothing; the rest keep their share."""
    model, general, expert = build(PREFIX_MODE)
    x, targets = batch_for(model, batch=2)
    targets = np.array([1, 2])
    model.cls_b.value[1] = -2000.0  # floors the second sample only

    _, cache = model.forward(x, general=general, expert=expert, bucket_id=1)
    model.backward(cache, targets)
    paired = {p.name: p.grad.copy() for p in trainable_parameters(model, general, expert, 1)}

    for p in trainable_parameters(model, general, expert, 1):
        p.zero_grad()
    _, cache = model.forward(x[:1], general=general, expert=expert, bucket_id=1)
    model.backward(cache, np.array([1]))
    for p in trainable_parameters(model, general, expert, 1):
        assert np.allclose(paired[p.name] * 2.0, p.grad, rtol=1e-12, atol=1e-15), p.name
