import numpy as np
import pytest

from reltucker import checkpoint
from reltucker.bilinear import BilinearModelKind, mixing_matrix
from reltucker.checkpoint import CheckpointError
from reltucker.rtucker import MODEL_KINDS, constrained_view, init_model


def models(rng):
    for kind in MODEL_KINDS:
        if kind == "constrained":
            yield constrained_view(rng.normal(size=(5, 4)), rng.normal(size=(2, 4, 4)))
            ck = BilinearModelKind("complex", 4)
            yield constrained_view(rng.normal(size=(5, 4)), mixing_matrix(ck, rng.normal(size=(2, 4))), ck)
        else:
            d_r = 3 if kind in ("drt", "srt") else None
            yield init_model(kind, 5, 2, 5 if kind == "analogy" else 4, d_r, rng=rng)


def test_round_trip_bytes(rng):
    for model in models(rng):
        data = checkpoint.dumps(model)
        back = checkpoint.loads(data)
        assert back.kind == model.kind
        np.testing.assert_array_equal(back.E, model.E)
        np.testing.assert_array_equal(back.R, model.R)
        assert checkpoint.dumps(back) == data


def test_file_round_trip(tmp_path, rng):
    model = init_model("srt", 5, 2, 4, 3, rng=rng)
    path = tmp_path / "m.rtk"
    checkpoint.save(model, path)
    back = checkpoint.load(path)
    np.testing.assert_array_equal(back.gates.log_alpha, model.gates.log_alpha)
    np.testing.assert_array_equal(back.core.slices, model.core.slices)


def test_fixed_core_omits_core(rng):
    data = checkpoint.dumps(init_model("complex", 5, 2, 4, rng=rng))
    assert b"array = G " not in data


@pytest.mark.parametrize("mutate", [
    lambda d: b"garbage" + d,
    lambda d: d[:-8],
    lambda d: d + b"\0" * 8,
    lambda d: d.replace(b"version = 1", b"version = 9"),
    lambda d: d.replace(b"\nend\n", b"\n"),
    lambda d: d.replace(b"d_e = 4", b"d_e = 5"),
    lambda d: d.replace(b"kind = drt", b"kind = srt"),
    lambda d: d.replace(b"N = 5", b"N = x"),
    lambda d: b"",
])
def test_corrupt(mutate, rng):
    data = checkpoint.dumps(init_model("drt", 5, 2, 4, 3, rng=rng))
    with pytest.raises(CheckpointError):
        checkpoint.loads(mutate(data))
