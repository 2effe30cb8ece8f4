import pytest

from dsovt.errors import ManifestError
from dsovt.manifest import ExperimentManifest, TRAINING_DEFAULTS, load_manifest


def test_defaults_are_explicit():
    m = ExperimentManifest(seed=1)
    for k, v in TRAINING_DEFAULTS.items():
        assert m.training_spec[k] == v
    assert m.to_dict()["training_spec"] == TRAINING_DEFAULTS


def test_round_trip(tmp_path):
    m = ExperimentManifest(seed=3, dataset_paths=["a.dsvt"], split={"train_count": 1, "test_count": 0},
                           model_spec={"latent": 64}, training_spec={"epochs": 7})
    p = m.save(tmp_path / "m.toml")
    (tmp_path / "a.dsvt").write_bytes(b"")
    back = load_manifest(p)
    assert back == m
    assert back.train_paths == [tmp_path / "a.dsvt"]


def test_overrides_parse_literals():
    m = ExperimentManifest(seed=0).with_overrides(["training_spec.epochs=3", "sensor_spec.kind=random",
                                                   "evaluate.seeds=[1, 2]"])
    assert m.training_spec["epochs"] == 3
    assert m.sensor_spec["kind"] == "random"
    assert m.evaluate["seeds"] == [1, 2]


@pytest.mark.parametrize("bad", [{"s_in": 0}, {"lambda_energy": -1.0}, {"epochs": 0}, {"learning_rate": 0.0}])
def test_validation(bad):
    with pytest.raises(ManifestError):
        ExperimentManifest(training_spec=bad).validate(check_paths=False)


def test_missing_paths_and_unknown_keys(tmp_path):
    with pytest.raises(ManifestError):
        ExperimentManifest(dataset_paths=["nope.dsvt"], base_dir=tmp_path).validate()
    with pytest.raises(ManifestError):
        ExperimentManifest.from_dict({"bogus": 1})
    with pytest.raises(ManifestError):
        load_manifest(tmp_path / "missing.toml")
