import json

import numpy as np
import pytest

from vinegen import __version__
from vinegen.autoencoder import DenseAutoencoder
from vinegen.bicop import BicopFamily, BivariateCopula
from vinegen.bundle import (
    BUNDLE_FORMAT_VERSION,
    ModelBundle,
    build_metadata,
    load_bundle,
    load_model,
    save_model,
)
from vinegen.csv_io import fnv1a_64
from vinegen.errors import BundleFormatError
from vinegen.joint import fit_joint
from vinegen.marginals import fit_marginal


@pytest.fixture
def joint():
    x = np.random.default_rng(81).multivariate_normal([0, 0], [[1, 0.5], [0.5, 1]], size=300)
    return fit_joint(x, "gaussian")


def test_metadata_with_pinned_clock(tmp_path):
    data = tmp_path / "train.csv"
    data.write_bytes(b"x0,x1\n1,2\n")
    metadata = build_metadata(seed=4, data_path=data, source_date_epoch=1700000000, columns=["x0", "x1"], extra=None)
    assert metadata == {
        "created_at": "2023-11-14T22:13:20+00:00",
        "vinegen_version": __version__,
        "seed": 4,
        "data_file": "train.csv",
        "data_fnv1a64": fnv1a_64(b"x0,x1\n1,2\n"),
        "columns": ["x0", "x1"],
    }


def test_joint_model_round_trip(tmp_path, joint):
    path = save_model(tmp_path / "vine.json", "vine", joint, build_metadata(seed=1))
    restored = load_model(path, expected_kind="vine")
    points = np.random.default_rng(82).normal(size=(20, 2))
    assert np.array_equal(restored.log_density(points), joint.log_density(points))


def test_small_models_round_trip(tmp_path):
    copula = BivariateCopula(BicopFamily.GAUSSIAN, rho=0.3)
    assert load_model(save_model(tmp_path / "c.json", "bicop", copula)).rho == 0.3
    marginal = fit_marginal(np.random.default_rng(83).normal(size=100))
    restored = load_model(save_model(tmp_path / "m.json", "marginal", marginal))
    assert restored.bandwidth == marginal.bandwidth
    ae = DenseAutoencoder.initialize((6, 3, 2, 3, 6), seed=0)
    back = load_model(save_model(tmp_path / "ae.json", "ae", ae))
    x = np.random.default_rng(84).uniform(size=(4, 6))
    assert np.array_equal(back.reconstruct(x), ae.reconstruct(x))


def test_saving_is_byte_reproducible(tmp_path, joint):
    metadata = build_metadata(seed=2, source_date_epoch=0)
    first = save_model(tmp_path / "a.json", "vine", joint, metadata).read_bytes()
    second = save_model(tmp_path / "b.json", "vine", joint, metadata).read_bytes()
    assert first == second
    document = json.loads(first)
    assert document["format_version"] == BUNDLE_FORMAT_VERSION
    assert document["kind"] == "vine"


def test_wrap_checks_the_model_type(joint):
    with pytest.raises(BundleFormatError, match="expects DenseAutoencoder"):
        ModelBundle.wrap("ae", joint)
    with pytest.raises(BundleFormatError, match="Unknown bundle kind"):
        ModelBundle.wrap("gan", joint)


def test_reading_rejects_bad_documents(tmp_path, joint):
    with pytest.raises(BundleFormatError, match="byte offset"):
        ModelBundle.from_json('{"kind": ')
    with pytest.raises(BundleFormatError, match="JSON object"):
        ModelBundle.from_json("[1, 2]")
    document = json.loads(ModelBundle.wrap("vine", joint).to_json())
    document["format_version"] = 99
    with pytest.raises(BundleFormatError, match="format_version"):
        ModelBundle.from_json(json.dumps(document))
    path = save_model(tmp_path / "v.json", "vine", joint)
    with pytest.raises(BundleFormatError, match="Expected a 'vcae' bundle"):
        load_bundle(path, expected_kind="vcae")


def test_corrupt_payload_is_reported(tmp_path, joint):
    document = json.loads(ModelBundle.wrap("vine", joint).to_json())
    del document["payload"]["vine"]["structure"]
    path = tmp_path / "broken.json"
    path.write_text(json.dumps(document))
    with pytest.raises(BundleFormatError):
        load_model(path)
