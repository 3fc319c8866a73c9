"""Architecture fidelity: parameter budgets, shapes, probability outputs."""

import pytest
import torch
from torch import nn

from refmodels import (
    ACNN,
    ARCHITECTURES,
    Autoencoder,
    StackedHourglass,
    UNet1,
    UNet2,
    UNetPP,
    UnknownArchitectureError,
    build,
    parameter_count,
)

# Every segmentation architecture and the exact size of its parameter vector.
EXPECTED_PARAMETERS = {
    "unet1": 1_976_644,
    "unet2": 17_466_532,
    "acnn": 2_221_346,
    "shg": 4_442_772,
    "unetpp": 1_055_586,
    "autoencoder": 244_702,
}

SEGMENTERS = ("unet1", "unet2", "acnn", "shg", "unetpp")


def modules_of(model, kind):
    return [m for m in model.modules() if isinstance(m, kind)]


class TestRegistry:
    def test_registry_and_expectations_cover_the_same_names(self):
        assert set(ARCHITECTURES) == set(EXPECTED_PARAMETERS)

    def test_build_unknown_name(self):
        with pytest.raises(UnknownArchitectureError, match="unknown architecture"):
            build("resnet")

    def test_unknown_architecture_is_a_value_error(self):
        with pytest.raises(ValueError):
            build("resnet")

    def test_build_returns_independent_instances(self):
        a, b = build("unet1"), build("unet1")
        assert a is not b
        first_a = next(iter(a.parameters()))
        first_b = next(iter(b.parameters()))
        assert first_a.data_ptr() != first_b.data_ptr()

    def test_tolerance_band_requires_declared_count(self):
        with pytest.raises(ValueError, match="no declared parameter count"):
            ARCHITECTURES["autoencoder"].tolerance_band()


class TestParameterBudgets:
    @pytest.mark.parametrize("name", sorted(EXPECTED_PARAMETERS))
    def test_exact_parameter_count(self, name):
        assert parameter_count(build(name)) == EXPECTED_PARAMETERS[name]

    @pytest.mark.parametrize(
        "name", [n for n in sorted(ARCHITECTURES) if ARCHITECTURES[n].declared_parameters]
    )
    def test_count_within_five_percent_of_declared(self, name):
        low, high = ARCHITECTURES[name].tolerance_band(rel=0.05)
        assert low <= parameter_count(build(name)) <= high

    def test_parameter_count_sums_all_tensors(self):
        model = build("autoencoder")
        assert parameter_count(model) == sum(p.numel() for p in model.parameters())

    def test_acnn_is_backbone_plus_shape_prior(self):
        assert (
            EXPECTED_PARAMETERS["acnn"]
            == EXPECTED_PARAMETERS["unet1"] + EXPECTED_PARAMETERS["autoencoder"]
        )


class TestForwardContract:
    @pytest.mark.parametrize("name", SEGMENTERS)
    def test_probability_output(self, name):
        torch.manual_seed(0)
        model = build(name).eval()
        with torch.inference_mode():
            out = model(torch.randn(2, 1, 64, 64))
        assert out.shape == (2, 4, 64, 64)
        assert torch.isfinite(out).all()
        assert (out >= 0).all() and (out <= 1).all()
        sums = out.sum(dim=1)
        assert (sums - 1).abs().max() < 1e-5

    @pytest.mark.parametrize("name", SEGMENTERS)
    def test_rejects_size_not_divisible_by_32(self, name):
        model = build(name).eval()
        with pytest.raises(ValueError, match="divisible by 32"):
            model(torch.randn(1, 1, 100, 100))

    @pytest.mark.parametrize("name", SEGMENTERS)
    def test_rejects_multichannel_input(self, name):
        model = build(name).eval()
        with pytest.raises(ValueError, match=r"expected \(N, 1, H, W\)"):
            model(torch.randn(1, 3, 64, 64))


class TestUNet1:
    def test_upsampling_repeats_pixels(self):
        model = build("unet1")
        assert not modules_of(model, nn.ConvTranspose2d)
        upsamplers = modules_of(model, nn.Upsample)
        assert upsamplers and all(u.mode == "nearest" for u in upsamplers)

    def test_no_batch_norm(self):
        assert not modules_of(build("unet1"), nn.BatchNorm2d)

    def test_encoder_widths(self):
        assert UNet1._DOWN == ((1, 32), (32, 32), (32, 64), (64, 128), (128, 128))


class TestUNet2:
    def test_transposed_conv_upsampling(self):
        assert modules_of(build("unet2"), nn.ConvTranspose2d)

    def test_batch_norm_after_every_conv(self):
        model = build("unet2")
        convs = modules_of(model, nn.Conv2d)
        transposed = modules_of(model, nn.ConvTranspose2d)
        norms = modules_of(model, nn.BatchNorm2d)
        # every conv except the 1x1 head is followed by a norm layer
        assert len(norms) == len(convs) + len(transposed) - 1


class TestAutoencoder:
    def test_code_size_is_exactly_32(self):
        model = build("autoencoder")
        assert isinstance(model.bottleneck, nn.Linear)
        assert model.bottleneck.out_features == 32

    def test_encode_decode_shapes(self):
        torch.manual_seed(0)
        model = build("autoencoder").eval()
        masks = torch.softmax(torch.randn(2, 4, 96, 64), dim=1)
        with torch.inference_mode():
            code = model.encode(masks)
            recon = model.decode(code, size=(96, 64))
        assert code.shape == (2, 32)
        assert recon.shape == (2, 4, 96, 64)
        assert ((recon.sum(dim=1) - 1).abs().max()) < 1e-5

    def test_forward_reconstructs_at_input_size(self):
        torch.manual_seed(0)
        model = build("autoencoder").eval()
        masks = torch.softmax(torch.randn(1, 4, 128, 128), dim=1)
        with torch.inference_mode():
            out = model(masks)
        assert out.shape == masks.shape

    def test_encode_rejects_wrong_channel_count(self):
        model = build("autoencoder")
        with pytest.raises(ValueError, match=r"expected \(N, 4, H, W\)"):
            model.encode(torch.randn(1, 3, 64, 64))


class TestACNN:
    def test_composition(self):
        model = build("acnn")
        assert isinstance(model.backbone, UNet1)
        assert isinstance(model.shape_prior, Autoencoder)

    def test_forward_is_the_backbone_alone(self):
        torch.manual_seed(0)
        model = build("acnn").eval()
        x = torch.randn(1, 1, 64, 64)
        with torch.inference_mode():
            expected = torch.softmax(model.backbone.logits(x), dim=1)
            assert torch.equal(model(x), expected)

    def test_code_shape(self):
        model = build("acnn").eval()
        probabilities = torch.softmax(torch.randn(3, 4, 64, 64), dim=1)
        with torch.inference_mode():
            assert model.code(probabilities).shape == (3, 32)


class TestStackedHourglass:
    def test_three_supervised_stages(self):
        torch.manual_seed(0)
        model = build("shg").eval()
        x = torch.randn(1, 1, 64, 64)
        with torch.inference_mode():
            stages = model.forward_stages(x)
            final = model(x)
        assert len(stages) == StackedHourglass.STAGES == 3
        for stage in stages:
            assert stage.shape == (1, 4, 64, 64)
            assert ((stage.sum(dim=1) - 1).abs().max()) < 1e-5
        assert torch.equal(final, stages[-1])

    def test_stages_differ(self):
        torch.manual_seed(0)
        model = build("shg").eval()
        with torch.inference_mode():
            stages = model.forward_stages(torch.randn(1, 1, 64, 64))
        assert not torch.allclose(stages[0], stages[-1])

    def test_remaps_exist_only_between_stages(self):
        model = build("shg")
        assert len(model.feature_remap) == 2
        assert len(model.prediction_remap) == 2


class TestUNetPP:
    def test_dense_grid_has_ten_nodes(self):
        model = build("unetpp")
        assert len(model.nodes) == 10  # 4 + 3 + 2 + 1

    def test_node_input_widths_grow_with_column(self):
        model = build("unetpp")
        first_convs = {
            name: block[0].in_channels for name, block in model.nodes.items()
        }
        # X(0, j) consumes j same-level maps of width 22 plus one upsampled
        # map of width 44 from below.
        assert first_convs["x00"] == 1
        assert first_convs["x01"] == 1 * 22 + 44
        assert first_convs["x02"] == 2 * 22 + 44
        assert first_convs["x03"] == 3 * 22 + 44
