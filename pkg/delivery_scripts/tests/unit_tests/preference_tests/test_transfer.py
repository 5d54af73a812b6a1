import numpy as np
import pytest

from coop_delivery.config.schema import PreferenceConfig
from coop_delivery.core.errors import DimensionMismatch
from coop_delivery.preference.features import N_FEATURES
from coop_delivery.preference.mlp import Architecture, Mlp, bce_loss, train
from coop_delivery.preference.transfer import TransferMode, attach_specific, transfer_finetune


@pytest.fixture
def source():
    return Mlp.initialize([N_FEATURES, 16, 8, 1], seed=4)


@pytest.fixture
def dataset():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(64, N_FEATURES))
    return x, (x[:, 1] > 0).astype(float)


class TestAttachSpecific:
    def test_replaces_the_head(self, source):
        model = attach_specific(source, [32])
        assert model.architecture is Architecture.SHARED_PLUS_SPECIFIC
        assert model.n_shared == 2
        assert model.sizes == [N_FEATURES, 16, 8, 32, 1]
        for (w, b), (w0, b0) in zip(model.layers[:2], source.layers[:2]):
            assert np.array_equal(w, w0) and np.array_equal(b, b0)


class TestTransferFinetune:
    def test_zero_epochs_keeps_source(self, source, dataset):
        cfg = PreferenceConfig(finetune_epochs=0)
        model = transfer_finetune(source, *dataset, TransferMode.GV_FINE_TUNE, cfg)
        assert all(np.array_equal(a, b) for a, b in zip(model.parameters(), source.parameters()))

    def test_source_untouched(self, source, dataset):
        before = [p.copy() for p in source.parameters()]
        transfer_finetune(source, *dataset, TransferMode.GV_FINE_TUNE, PreferenceConfig(finetune_epochs=3))
        assert all(np.array_equal(a, b) for a, b in zip(before, source.parameters()))

    def test_uav_specific_moves_the_head_more(self, source, dataset):
        cfg = PreferenceConfig(finetune_epochs=5, specific=[8])
        start = attach_specific(source, cfg.specific, seed=0)
        model = transfer_finetune(source, *dataset, TransferMode.UAV_SPECIFIC, cfg, seed=0)
        shared_shift = max(np.abs(a - b).max() for a, b in zip(model.parameters()[:4], start.parameters()[:4]))
        head_shift = max(np.abs(a - b).max() for a, b in zip(model.parameters()[4:], start.parameters()[4:]))
        assert head_shift > shared_shift > 0

    def test_dimension_mismatch(self, source):
        with pytest.raises(DimensionMismatch):
            transfer_finetune(source, np.zeros((3, N_FEATURES - 1)), np.zeros(3), TransferMode.GV_FINE_TUNE, PreferenceConfig())


class TestTransferLowersLoss:
    CFG = PreferenceConfig(lr=1e-2, finetune_lr_scale=0.5, finetune_epochs=30, batch_size=64, specific=[8])

    @pytest.fixture
    def courier_model(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(256, N_FEATURES))
        return train(Mlp.initialize([N_FEATURES, 16, 8, 1], seed=1), x, (x[:, 1] > 0).astype(float), epochs=40, lr=1e-2).model

    @pytest.fixture
    def related_task(self):
        # same leading feature, shifted boundary and a second feature
        rng = np.random.default_rng(5)
        x = rng.normal(size=(256, N_FEATURES))
        return x, (x[:, 1] + 0.8 * x[:, 2] > 0.3).astype(float)

    @pytest.mark.parametrize("mode", [TransferMode.GV_FINE_TUNE, TransferMode.UAV_SPECIFIC])
    def test_loss_drops(self, courier_model, related_task, mode):
        x, y = related_task
        start = courier_model if mode is TransferMode.GV_FINE_TUNE else attach_specific(courier_model, self.CFG.specific)
        before = bce_loss(start.forward(x), y)
        after = bce_loss(transfer_finetune(courier_model, x, y, mode, self.CFG).forward(x), y)
        assert after < before, f"{mode.value}: {before:.4f} -> {after:.4f}"
