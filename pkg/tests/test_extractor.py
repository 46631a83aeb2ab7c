import numpy as np
import pytest

from gaitfuse.autodiff import Tape, Tensor, backward, mean_all, ssum
from gaitfuse.errors import ConfigError, DataError
from gaitfuse.extractor import (
    DEFAULT_STAGE_BLOCKS,
    RESNET50_STAGE_BLOCKS,
    ExtractorConfig,
    build_extractor,
)

from gradcheck import check_gradients


def desk_config(input_channels=4):
    return ExtractorConfig(stem_channels=16, stage_blocks=DEFAULT_STAGE_BLOCKS,
                           input_channels=input_channels)


def param_bytes(extractor):
    return b"".join(p.values.tobytes() for p in extractor.parameters())


class TestConfig:
    def test_zero_stages_rejected(self):
        with pytest.raises(ConfigError, match="stage"):
            ExtractorConfig(stem_channels=8, stage_blocks=(), input_channels=2)

    def test_negative_width_rejected(self):
        with pytest.raises(ConfigError):
            ExtractorConfig(stem_channels=8, stage_blocks=((1, 0, 1),), input_channels=2)

    def test_resnet50_plan_expressible(self):
        config = ExtractorConfig(stem_channels=64, stage_blocks=RESNET50_STAGE_BLOCKS,
                                 input_channels=3)
        assert config.out_channels == 2048
        assert sum(c for c, _, _ in config.stage_blocks) == 16  # 3+4+6+3 blocks

    def test_output_shape_closed_form(self):
        # matrix of stage settings vs explicit conv arithmetic
        cases = [
            ((8, ((1, 8, 1),), 2), (10, 16), (8, 10, 16)),
            ((8, ((2, 8, 2),), 2), (10, 16), (8, 5, 8)),
            ((16, DEFAULT_STAGE_BLOCKS, 4), (24, 16), (32, 12, 8)),
            ((16, DEFAULT_STAGE_BLOCKS, 4), (48, 16), (32, 24, 8)),
            ((4, ((1, 4, 2), (1, 6, 2), (1, 8, 2)), 3), (40, 16), (8, 5, 2)),
        ]
        for (stem, stages, c_in), (h, w), expected in cases:
            config = ExtractorConfig(stem, stages, c_in)
            assert config.output_shape(h, w) == expected


class TestBuildForward:
    def test_desk_default_shape(self):
        rng = np.random.default_rng(0)
        extractor = build_extractor(desk_config(), rng)
        x = Tensor(np.random.default_rng(1).normal(size=(1, 4, 24, 16)))
        y = extractor.forward(x)
        assert y.values.shape == (1, 32, 12, 8)

    def test_same_seed_identical_bytes(self):
        a = build_extractor(desk_config(), np.random.default_rng(7))
        b = build_extractor(desk_config(), np.random.default_rng(7))
        assert param_bytes(a) == param_bytes(b)
        c = build_extractor(desk_config(), np.random.default_rng(8))
        assert param_bytes(a) != param_bytes(c)

    def test_parameter_names_stable(self):
        extractor = build_extractor(desk_config(), np.random.default_rng(0), prefix="extractor.x")
        names = [p.name for p in extractor.parameters()]
        assert names[0] == "extractor.x.stem.kernel"
        assert "extractor.x.stage0.block0.reduce.kernel" in names
        assert "extractor.x.stage1.block0.proj.kernel" in names
        assert len(names) == len(set(names))

    def test_channel_mismatch(self):
        extractor = build_extractor(desk_config(4), np.random.default_rng(0))
        with pytest.raises(DataError, match="channels"):
            extractor.forward(Tensor(np.zeros((1, 3, 24, 16))))

    def test_finite_output_fuzz(self):
        for seed in range(25):
            rng = np.random.default_rng(seed)
            config = ExtractorConfig(stem_channels=int(rng.integers(2, 8)),
                                     stage_blocks=((1, int(rng.integers(4, 12)), 1),),
                                     input_channels=3)
            extractor = build_extractor(config, rng)
            x = Tensor(rng.normal(scale=3.0, size=(2, 3, 12, 10)))
            y = extractor.forward(x)
            assert np.all(np.isfinite(y.values))


class TestResidualProperties:
    def zeroed_identity_extractor(self):
        # one stage, one block, width equal to stem channels: no projection
        config = ExtractorConfig(stem_channels=6, stage_blocks=((1, 6, 1),),
                                 input_channels=2)
        extractor = build_extractor(config, np.random.default_rng(0))
        block = extractor.blocks[0]
        assert block.projection is None
        for p in (block.reduce, block.conv, block.expand):
            p.values = np.zeros_like(p.values)
        return extractor, block

    def test_zero_residual_identity(self):
        extractor, block = self.zeroed_identity_extractor()
        x = Tensor(np.abs(np.random.default_rng(2).normal(size=(2, 6, 8, 8))))
        y = block.forward(x)
        np.testing.assert_array_equal(y.values, x.values)

    def test_zero_residual_gradient_passes_skip(self):
        extractor, block = self.zeroed_identity_extractor()
        values = np.random.default_rng(3).normal(size=(1, 6, 5, 5))
        x = Tensor(values, requires_grad=True)
        with Tape() as tape:
            loss = ssum(block.forward(x))
        backward(loss, tape)
        np.testing.assert_array_equal(x.grad, (values > 0).astype(float))

    def test_stem_gradient_finite_differences(self):
        config = ExtractorConfig(stem_channels=3, stage_blocks=((1, 4, 2),),
                                 input_channels=2)
        rng = np.random.default_rng(4)
        extractor = build_extractor(config, rng)
        x = Tensor(rng.normal(size=(1, 2, 10, 16)) + 1.0)
        check_gradients(lambda: mean_all(extractor.forward(x)),
                        extractor.parameters(), rng=rng, max_coords=4)
