import json

import numpy as np
import pytest

from coop_delivery.core.errors import MalformedRecord
from coop_delivery.preference.features import N_FEATURES
from coop_delivery.preference.mlp import Mlp
from coop_delivery.preference.store import ModelBundle, load_model, model_from_dict, model_to_dict, save_model
from coop_delivery.preference.transfer import attach_specific


class TestModelStore:
    def test_file_round_trip(self, tmp_path):
        model = attach_specific(Mlp.initialize([N_FEATURES, 8, 4, 1], seed=1), [6], seed=2)
        path = tmp_path / "f_uav.json"
        save_model(model, str(path), fingerprint="abc")
        loaded = load_model(str(path))
        assert loaded.architecture is model.architecture and loaded.n_shared == model.n_shared
        x = np.random.default_rng(0).normal(size=(10, N_FEATURES))
        assert np.array_equal(loaded.forward(x), model.forward(x))
        assert json.loads(path.read_text())["fingerprint"] == "abc"

    @pytest.mark.parametrize("field,value", [("format", "something-else"), ("version", 99)])
    def test_rejects_foreign_dumps(self, field, value):
        data = model_to_dict(Mlp.zeros([N_FEATURES, 1]))
        data[field] = value
        with pytest.raises(MalformedRecord):
            model_from_dict(data)

    def test_bundle(self, tmp_path):
        courier = Mlp.initialize([N_FEATURES, 4, 1], seed=0)
        bundle = ModelBundle(courier, courier.copy(), attach_specific(courier, [3]), fingerprint="f00")
        bundle.save(str(tmp_path))
        assert sorted(p.name for p in tmp_path.iterdir()) == ["bundle.json", "f_courier.json", "f_gv.json", "f_uav.json"]
        loaded = ModelBundle.load(str(tmp_path))
        assert loaded.fingerprint == "f00"
        for name in ModelBundle.NAMES:
            assert getattr(loaded, name).sizes == getattr(bundle, name).sizes
