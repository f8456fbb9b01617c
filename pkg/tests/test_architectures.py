import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from deeplbp.architectures import (
    DeepModel, MultiscaleModel, decision_fuse, downscale, dumps_model, extract, features_deep,
    loads_model, model_from_dict, run_deep, run_multiscale, scale_pyramid,
)
from deeplbp.encoding import NeighborhoodSpec, lbp_encode
from deeplbp.ordering import code_features, ordering_from_lex, parse_arrangement

SPEC = NeighborhoodSpec(8, 3.0)


def lex_ordering():
    table = code_features(8)
    return ordering_from_lex(table, parse_arrangement(table, "transitions,largest-run,imbalance"))


def model(layers, **kw):
    return DeepModel.with_shared_ordering(SPEC, layers, lex_ordering(), **kw)


def test_depth_one_is_lbp(rng):
    img = rng.random((20, 20))
    (only,) = run_deep(img, model(1))
    np.testing.assert_array_equal(only.codes, lbp_encode(img, SPEC).codes)


@pytest.mark.parametrize("layers", [1, 2, 4])
def test_constant_image_all_layers_zero(layers):
    for layer in run_deep(np.full((30, 30), 9.0), model(layers)):
        assert not layer.codes.any()


def test_layers_shrink_and_count(rng):
    layers = run_deep(rng.random((40, 33)), model(4))
    assert [c.layer for c in layers] == [1, 2, 3, 4]
    assert [c.codes.shape for c in layers] == [(34, 27), (28, 21), (22, 15), (16, 9)]


def test_run_deep_names_exhausted_layer(rng):
    with pytest.raises(ValueError, match="layer 3"):
        run_deep(rng.random((16, 16)), model(3))


def test_deep_model_validation():
    with pytest.raises(ValueError, match="need 2 orderings"):
        DeepModel(SPEC, 3, (lex_ordering(),))
    with pytest.raises(ValueError, match="does not match"):
        DeepModel(NeighborhoodSpec(4, 1.0), 2, (lex_ordering(),))
    with pytest.raises(ValueError):
        DeepModel(SPEC, 1, (), fusion="late")
    with pytest.raises(ValueError):
        DeepModel(SPEC, 0, ())


@pytest.mark.parametrize("layers, fusion, code_map, length", [
    (1, "final-only", "raw", 256),
    (3, "feature-fusion", "raw", 768),
    (2, "feature-fusion", "uniform", 118),
    (3, "final-only", "rotation-invariant", 36),
    (2, "decision-fusion", "raw", 512),
])
def test_feature_lengths(layers, fusion, code_map, length, rng):
    m = model(layers, fusion=fusion, code_map=code_map)
    fv = features_deep(rng.random((30, 30)), m)
    assert len(fv) == length == m.feature_length()
    for _, block in fv.blocks():
        assert abs(block.sum() - 1) <= 1e-9


def test_final_only_uses_last_layer(rng):
    img = rng.random((30, 30))
    fused = features_deep(img, model(3))
    final = features_deep(img, model(3, fusion="final-only"))
    np.testing.assert_array_equal(final.values, fused.values[512:])
    assert final.layout == (("l3", 256),)


# --- affine invariance ------------------------------------------------------------------

@given(st.integers(0, 2 ** 32 - 1), st.floats(0.01, 100), st.floats(-1000, 1000))
def test_deep_features_affine_invariant(seed, k1, k2):
    img = np.random.default_rng(seed).random((40, 40)) * 255
    m = MultiscaleModel(model(3), 2)
    np.testing.assert_array_equal(extract(k1 * img + k2, m).values, extract(img, m).values)


# --- decision fusion ----------------------------------------------------------------------

def test_decision_fuse_examples():
    np.testing.assert_array_equal(decision_fuse([[0.2, 0.8]]), [0.2, 0.8])
    np.testing.assert_allclose(decision_fuse([[0.3, 0.7], [0.3, 0.7]]), [0.3, 0.7])
    np.testing.assert_array_equal(decision_fuse([[1, 0], [0, 1]]), [0.5, 0.5])
    with pytest.raises(ValueError):
        decision_fuse([[1, 0], [0, 0, 1]])
    with pytest.raises(ValueError):
        decision_fuse([[0.5, 0.2]])


@given(st.lists(st.lists(st.floats(0.01, 1), min_size=4, max_size=4), min_size=1, max_size=5))
def test_decision_fuse_sums_to_one(rows):
    probs = [np.array(r) / np.sum(r) for r in rows]
    assert abs(decision_fuse(probs).sum() - 1) <= 1e-9


# --- scaling ------------------------------------------------------------------------------------

def test_downscale_identity_and_checker():
    img = np.indices((6, 6)).sum(0) % 2 * 255.0
    np.testing.assert_array_equal(downscale(img, 1.0), img)
    np.testing.assert_array_equal(downscale(img, 0.5), np.full((3, 3), 127.5))


def test_downscale_area_average_oracle(rng):
    img = rng.random((10, 10))
    expected = img.reshape(5, 2, 5, 2).mean(axis=(1, 3))
    np.testing.assert_allclose(downscale(img, 0.5), expected, atol=1e-12)


def test_downscale_non_integer_ratio_preserves_mean(rng):
    img = rng.random((9, 7))
    out = downscale(img, 0.6)
    assert out.shape == (5, 4)
    assert out.mean() == pytest.approx(img.mean(), abs=0.1)
    with pytest.raises(ValueError):
        downscale(img, 0.01)
    with pytest.raises(ValueError):
        downscale(img, 1.5)


def test_pyramid_shapes(rng):
    shapes = [p.shape for p in scale_pyramid(rng.random((100, 100)), 3, 0.5)]
    assert shapes == [(100, 100), (50, 50), (25, 25)]


def test_multiscale_lengths(rng):
    img = rng.random((100, 100))
    single = MultiscaleModel(model(3), 1)
    np.testing.assert_array_equal(run_multiscale(img, single).values, features_deep(img, model(3)).values)
    fv = run_multiscale(img, MultiscaleModel(model(3), 3))
    assert len(fv) == 3 * 3 * 256
    assert fv.layout[0] == ("s0_l1", 256) and fv.layout[-1] == ("s2_l3", 256)


def test_multiscale_too_small(rng):
    with pytest.raises(ValueError, match="scale 2"):
        run_multiscale(rng.random((60, 60)), MultiscaleModel(model(3), 3))


# --- serialisation -------------------------------------------------------------------------------

def test_model_json_roundtrip(rng):
    mm = MultiscaleModel(model(3, code_map="uniform"), 2, 0.5)
    text = dumps_model(mm)
    assert set(json.loads(text)) == {"spec", "layers", "orderings", "fusion", "code_map",
                                     "scales", "scale_factor"}
    back = loads_model(text)
    assert dumps_model(back) == text
    img = rng.random((60, 60))
    np.testing.assert_array_equal(extract(img, back).values, extract(img, mm).values)


def test_model_json_rejects_unknown():
    with pytest.raises(ValueError, match="unknown"):
        model_from_dict({"layers": 1, "depth": 3})
