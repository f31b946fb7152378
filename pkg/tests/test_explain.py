import numpy as np
import pytest
import torch
from torch import nn

from mriseq.augment import SliceStack, central_subgroups, standardize
from mriseq.errors import ChannelMismatch, InvalidSteps
from mriseq.explain import integrated_gradients, render_overlay, save_attributions
from mriseq.manifest import Split
from mriseq.model import Checkpoint, ModelConfig, build_model


class LinearModel(nn.Module):
    """F(x) = W @ flatten(x) + b; attributions have a closed form."""

    def __init__(self, in_shape, num_classes=3, seed=0):
        super().__init__()
        torch.manual_seed(seed)
        self.in_shape = in_shape
        self.fc = nn.Linear(int(np.prod(in_shape)), num_classes)

    def forward(self, x):
        return self.fc(x.reshape(x.shape[0], -1))


class TanhModel(nn.Module):
    """Small smooth nonlinear model; midpoint IG converges as steps grow."""

    def __init__(self, in_shape, num_classes=3, seed=0):
        super().__init__()
        torch.manual_seed(seed)
        self.net = nn.Sequential(
            nn.Flatten(), nn.Linear(int(np.prod(in_shape)), 16), nn.Tanh(),
            nn.Linear(16, num_classes),
        )

    def forward(self, x):
        return self.net(x)


def random_stack(shape=(2, 8, 8), seed=0):
    rng = np.random.default_rng(seed)
    return SliceStack(
        pixels=rng.normal(0, 1, shape).astype(np.float32), start_index=0
    )


class TestIntegratedGradients:
    def test_linear_model_exact(self):
        stack = random_stack()
        model = LinearModel(stack.pixels.shape)
        target = 1
        saliency = integrated_gradients(model, stack, target=target, steps=16)
        weights = model.fc.weight[target].detach().numpy().reshape(stack.pixels.shape)
        expected = weights * stack.pixels
        np.testing.assert_allclose(saliency.attributions, expected, atol=1e-5)

    def test_linear_model_nonzero_baseline(self):
        stack = random_stack(seed=1)
        baseline = np.full_like(stack.pixels, 0.5)
        model = LinearModel(stack.pixels.shape, seed=1)
        saliency = integrated_gradients(model, stack, target=0, steps=8, baseline=baseline)
        weights = model.fc.weight[0].detach().numpy().reshape(stack.pixels.shape)
        np.testing.assert_allclose(
            saliency.attributions, weights * (stack.pixels - baseline), atol=1e-5
        )

    def test_linear_completeness_is_exact(self):
        stack = random_stack(seed=2)
        model = LinearModel(stack.pixels.shape, seed=2)
        saliency = integrated_gradients(model, stack, target=2, steps=4)
        assert saliency.completeness_gap < 1e-4

    def test_zero_weight_model_all_zero(self):
        stack = random_stack(seed=3)
        model = LinearModel(stack.pixels.shape)
        with torch.no_grad():
            for p in model.parameters():
                p.zero_()
        saliency = integrated_gradients(model, stack, target=0, steps=4)
        np.testing.assert_array_equal(saliency.attributions, 0.0)
        assert saliency.completeness_gap == 0.0

    def test_gap_shrinks_with_steps(self):
        stack = random_stack(seed=4)
        model = TanhModel(stack.pixels.shape, seed=4)
        coarse = integrated_gradients(model, stack, target=0, steps=2)
        fine = integrated_gradients(model, stack, target=0, steps=256)
        assert fine.completeness_gap < coarse.completeness_gap

    def test_metadata_recorded(self):
        stack = random_stack()
        model = LinearModel(stack.pixels.shape)
        saliency = integrated_gradients(model, stack, target=1, steps=32)
        assert saliency.steps == 32
        assert saliency.target_class == 1
        assert saliency.attributions.shape == stack.pixels.shape

    def test_chunking_does_not_change_result(self):
        stack = random_stack(seed=5)
        model = TanhModel(stack.pixels.shape, seed=5)
        a = integrated_gradients(model, stack, target=1, steps=64, chunk_size=64)
        b = integrated_gradients(model, stack, target=1, steps=64, chunk_size=7)
        np.testing.assert_allclose(a.attributions, b.attributions, atol=1e-6)

    @pytest.mark.parametrize("steps", [0, 1])
    def test_invalid_steps(self, steps):
        stack = random_stack()
        model = LinearModel(stack.pixels.shape)
        with pytest.raises(InvalidSteps):
            integrated_gradients(model, stack, target=0, steps=steps)

    def test_checkpoint_channel_mismatch(self):
        cfg = ModelConfig(in_channels=4, num_classes=5, init_seed=0)
        model = build_model(cfg)
        checkpoint = Checkpoint(
            state_dict=model.state_dict(),
            config=cfg,
            epoch=0,
            val_macro_accuracy=0.0,
            class_order=cfg.class_order,
            manifest_hash="",
        )
        with pytest.raises(ChannelMismatch):
            integrated_gradients(checkpoint, random_stack(shape=(3, 200, 200)), target=0)

    def test_baseline_shape_mismatch(self):
        stack = random_stack()
        model = LinearModel(stack.pixels.shape)
        with pytest.raises(ChannelMismatch):
            integrated_gradients(
                model, stack, target=0, steps=4, baseline=np.zeros((1, 8, 8))
            )


class TestOverfitModelCompleteness:
    def test_gap_within_one_percent(self, overfit_run):
        store, manifest, checkpoint, _ = overfit_run
        record = manifest.records_for(Split.TRAIN)[0]
        stack = standardize(central_subgroups(store[record.volume_ref], 4)[0])
        model = checkpoint.build()
        with torch.no_grad():
            logits = model(torch.from_numpy(stack.pixels[None]))
        target = int(logits.argmax())
        saliency = integrated_gradients(checkpoint, stack, target=target, steps=128)
        with torch.no_grad():
            f_x = float(model(torch.from_numpy(stack.pixels[None]))[0, target])
            f_base = float(model(torch.zeros(1, *stack.pixels.shape))[0, target])
        assert saliency.completeness_gap <= 0.01 * abs(f_x - f_base)


class TestArtifacts:
    def test_save_attributions_roundtrip(self, tmp_path):
        import json

        stack = random_stack()
        model = LinearModel(stack.pixels.shape)
        saliency = integrated_gradients(model, stack, target=0, steps=8)
        out = tmp_path / "attr.raw"
        save_attributions(saliency, out)
        descriptor = json.loads((tmp_path / "attr.raw.json").read_text())
        loaded = np.fromfile(out, dtype=np.float32).reshape(descriptor["shape"])
        np.testing.assert_allclose(loaded, saliency.attributions, atol=1e-7)
        assert descriptor["steps"] == 8

    def test_render_overlay_one_png_per_slice(self, tmp_path):
        stack = random_stack(shape=(3, 16, 16))
        model = LinearModel(stack.pixels.shape)
        saliency = integrated_gradients(model, stack, target=0, steps=4)
        paths = render_overlay(saliency, stack, tmp_path, prefix="s")
        assert [p.name for p in paths] == ["s_00.png", "s_01.png", "s_02.png"]
        for p in paths:
            assert p.stat().st_size > 0
            assert p.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    def test_render_overlay_shape_mismatch(self, tmp_path):
        stack = random_stack(shape=(3, 16, 16))
        model = LinearModel(stack.pixels.shape)
        saliency = integrated_gradients(model, stack, target=0, steps=4)
        with pytest.raises(ValueError):
            render_overlay(saliency, random_stack(shape=(2, 16, 16)), tmp_path)
