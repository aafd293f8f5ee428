import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import hesselm.linalg as linalg
from hesselm.elm import (
    LAMBDA_FLOOR,
    ElmModel,
    default_lambda_grid,
    dumps_model,
    encode_targets,
    hat_diagonal,
    hidden_output,
    init_hidden,
    load_model,
    loads_model,
    predict,
    press_mse,
    ridge_weights,
    save_model,
    train,
)
from hesselm.errors import (
    DegenerateLeverageError,
    DimensionError,
    FormatVersionError,
    ModelFormatError,
    ValidationError,
)

from conftest import brute_force_loo, rel_err


def clusters(rng, n=40, sep=4.0):
    half = n // 2
    x = np.vstack([rng.normal(-sep, 0.3, (half, 2)), rng.normal(sep, 0.3, (n - half, 2))])
    labels = ["CHF"] * half + ["NORMAL"] * (n - half)
    return x / (2 * sep), labels


# --- hidden layer ---

def test_init_hidden_deterministic():
    v1, b1 = init_hidden(5, 7, seed=42)
    v2, b2 = init_hidden(5, 7, seed=42)
    assert v1.tobytes() == v2.tobytes() and b1.tobytes() == b2.tobytes()
    assert v1.shape == (5, 7) and b1.shape == (7,)


def test_init_hidden_minimal():
    v, b = init_hidden(1, 1, seed=0)
    assert v.shape == (1, 1) and b.shape == (1,)
    assert -1 <= v[0, 0] <= 1 and -1 <= b[0] <= 1


def test_init_hidden_distribution():
    v, _ = init_hidden(1000, 100, seed=3)
    assert abs(v.mean()) <= 0.01
    assert v.min() >= -1.0 and v.max() <= 1.0


def test_init_hidden_validation():
    with pytest.raises(ValidationError):
        init_hidden(3, 0)
    with pytest.raises(ValidationError):
        init_hidden(0, 3)
    with pytest.raises(ValidationError):
        init_hidden(3, 3, activation="relu")


def test_hidden_output_at_zero():
    x = np.zeros((3, 2))
    v, b = np.ones((2, 4)), np.zeros(4)
    np.testing.assert_array_equal(hidden_output(x, v, b, "sigmoid"), 0.5)
    np.testing.assert_array_equal(hidden_output(x, v, b, "tanh"), 0.0)


def test_hidden_output_loop_oracle(rng):
    x = rng.standard_normal((3, 2))
    v = np.array([[0.5, -1.0, 0.25], [2.0, 0.0, -0.75]])
    b = np.array([0.1, -0.2, 0.3])
    expected = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            z = b[j] + sum(x[i, k] * v[k, j] for k in range(2))
            expected[i, j] = 1.0 / (1.0 + np.exp(-z))
    np.testing.assert_allclose(hidden_output(x, v, b), expected, rtol=1e-12, atol=0)


def test_hidden_output_dimension_checks():
    with pytest.raises(DimensionError):
        hidden_output(np.zeros((2, 3)), np.zeros((2, 4)), np.zeros(4))
    with pytest.raises(DimensionError):
        hidden_output(np.zeros((2, 2)), np.zeros((2, 4)), np.zeros(3))


def test_encode_targets():
    np.testing.assert_array_equal(encode_targets(["a"], ["a", "b"]), [[1, -1]])
    np.testing.assert_array_equal(encode_targets(["b"], ["a", "b"]), [[-1, 1]])
    np.testing.assert_array_equal(encode_targets([2], [0, 1, 2]), [[-1, -1, 1]])
    with pytest.raises(ValidationError):
        encode_targets(["z"], ["a", "b"])


def test_default_grid():
    grid = default_lambda_grid()
    assert grid.size == 20
    np.testing.assert_allclose(np.log(grid), np.arange(-20, 0))


# --- ridge paths and PRESS ---

PATHS = ("direct", "gram-eigen", "hessenberg")


@pytest.mark.parametrize("n,m", [(30, 5), (20, 19), (15, 15), (10, 40)])
@pytest.mark.parametrize("lam", [np.exp(-12), np.exp(-6), np.exp(-1), 1.0])
def test_paths_agree(n, m, lam, rng):
    h = 1.0 / (1.0 + np.exp(-rng.standard_normal((n, m))))
    t = np.sign(rng.standard_normal((n, 2)))
    ref_w = ridge_weights(h, t, lam, "direct")
    ref_hat = hat_diagonal(h, lam, "direct")
    for path in PATHS[1:]:
        assert rel_err(ridge_weights(h, t, lam, path), ref_w) <= 1e-8
        assert rel_err(hat_diagonal(h, lam, path), ref_hat) <= 1e-8


def test_press_matches_loo_random_problem(rng):
    x = rng.standard_normal((30, 5))
    h = hidden_output(x, *init_hidden(5, 12, seed=1))
    t = encode_targets(rng.integers(0, 2, 30), [0, 1])
    for lam in default_lambda_grid():
        oracle = brute_force_loo(h, t, lam)
        for path in ("gram-eigen", "hessenberg"):
            assert abs(press_mse(h, t, lam, path) - oracle) <= 1e-8 * oracle


def test_press_small_oracle(rng):
    h = rng.standard_normal((20, 4))
    t = rng.standard_normal(20)
    lam = np.exp(-3)
    assert press_mse(h, t, lam) == pytest.approx(brute_force_loo(h, t, lam), rel=1e-8)


def test_press_large_lambda_limit(rng):
    h = rng.standard_normal((15, 6))
    t = np.sign(rng.standard_normal((15, 2)))
    expected = np.sum(t ** 2) / (15 * 2)
    for path in PATHS:
        assert press_mse(h, t, 1e12, path) == pytest.approx(expected, rel=1e-6)


def test_press_degenerate_leverage(rng):
    h = rng.standard_normal((8, 8))
    t = rng.standard_normal(8)
    for path in PATHS:
        with pytest.raises(DegenerateLeverageError):
            press_mse(h, t, LAMBDA_FLOOR, path)


def test_press_input_checks(rng):
    with pytest.raises(ValidationError):
        press_mse(np.eye(3), np.ones(3), -1.0)
    with pytest.raises(DimensionError):
        press_mse(np.eye(3), np.ones(4), 1.0)
    with pytest.raises(ValidationError):
        ridge_weights(np.eye(3), np.ones(3), 1.0, path="svd")


def test_hat_symmetric_with_unit_spectrum(rng):
    h = rng.standard_normal((12, 5))
    for lam in (1e-3, 1.0):
        # HAT = H W where W solves the ridge problem for T = I
        hat = h @ ridge_weights(h, np.eye(12), lam)
        assert np.max(np.abs(hat - hat.T)) <= 1e-9
        eig = np.linalg.eigvalsh(0.5 * (hat + hat.T))
        assert eig.min() >= -1e-12 and eig.max() <= 1.0 + 1e-12
        np.testing.assert_allclose(np.diag(hat), hat_diagonal(h, lam), rtol=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.integers(10, 30), st.integers(3, 60), st.integers(1, 2), st.integers(0, 2**32 - 1))
def test_press_identity_property(n, m, c, seed):
    rng = np.random.default_rng(seed)
    h = 1.0 / (1.0 + np.exp(-rng.standard_normal((n, m))))
    t = np.sign(rng.standard_normal((n, c)))
    for lam in (np.exp(-6), 1.0):
        oracle = brute_force_loo(h, t, lam)
        assert abs(press_mse(h, t, lam) - oracle) <= 1e-8 * oracle


# --- training ---

@pytest.mark.parametrize("variant", ["elm", "r-elm", "hesselm", "r-hesselm"])
def test_separable_clusters(variant, rng):
    x, labels = clusters(rng)
    model, sweep = train(x, labels, variant=variant, m=20, seed=0)
    predicted, scores = predict(model, x)
    assert predicted == labels
    assert scores.shape == (40, 2)
    assert (sweep is None) == (variant in ("elm", "hesselm"))
    if sweep is None:
        assert model.lam == 0.0
    else:
        assert model.lam == sweep.best_lambda
        assert sweep.best_press == min(p for _, p in sweep.candidates)


def test_regularized_variants_agree_at_forced_lambda(rng):
    x = rng.standard_normal((35, 4))
    labels = list(rng.integers(0, 2, 35))
    lam = [np.exp(-4)]
    a, _ = train(x, labels, "r-hesselm", m=15, lambda_candidates=lam, seed=9)
    b, _ = train(x, labels, "r-elm", m=15, lambda_candidates=lam, seed=9)
    assert rel_err(a.output_weights, b.output_weights) <= 1e-8


def test_sweep_press_equals_loo(rng):
    x = rng.standard_normal((30, 5))
    labels = list(rng.integers(0, 2, 30))
    model, sweep = train(x, labels, "r-hesselm", m=10, seed=2)
    h = hidden_output(x, model.input_weights, model.biases)
    t = encode_targets(labels, model.class_labels)
    for lam, press in sweep.candidates:
        oracle = brute_force_loo(h, t, lam)
        assert abs(press - oracle) <= 1e-8 * oracle


def test_single_decomposition_per_training(monkeypatch, rng):
    calls = []
    original = linalg.hessenberg_decompose

    def counting(a):
        calls.append(a.shape)
        return original(a)

    monkeypatch.setattr(linalg, "hessenberg_decompose", counting)
    x = rng.standard_normal((60, 6))
    train(x, list(rng.integers(0, 2, 60)), "r-hesselm", m=20, seed=0)
    assert len(calls) == 1


def test_tie_goes_to_larger_lambda(monkeypatch, rng):
    import hesselm.elm as elm

    monkeypatch.setattr(elm, "_press", lambda residuals, complement, lam: 1.0)
    x = rng.standard_normal((20, 3))
    model, sweep = train(x, list(rng.integers(0, 2, 20)), "r-hesselm", m=5, lambda_candidates=[0.1, 0.5, 0.2])
    assert model.lam == 0.5


def test_degenerate_candidates_are_skipped(rng):
    x = rng.standard_normal((10, 3))
    labels = [0, 1] * 5
    with pytest.warns(UserWarning):
        model, sweep = train(x, labels, "r-hesselm", m=10, lambda_candidates=[1e-13, 0.5], seed=0)
    assert sweep.excluded == (1e-13,)
    assert model.lam == 0.5


def test_training_validation(rng):
    x = rng.standard_normal((10, 3))
    with pytest.raises(ValidationError):
        train(x, [0] * 10)
    with pytest.raises(DimensionError):
        train(x, [0, 1] * 4)
    with pytest.raises(ValidationError):
        train(x, [0, 1] * 5, variant="kelm")
    with pytest.raises(ValidationError):
        train(x, [0, 1] * 5, m=4, lambda_candidates=[-1.0])
    with pytest.warns(UserWarning, match="minimum-norm"):
        train(x, [0, 1] * 5, m=12, seed=0)


def test_training_is_deterministic(rng):
    x = rng.standard_normal((25, 4))
    labels = list(rng.integers(0, 2, 25))
    a, sa = train(x, labels, m=10, seed=5)
    b, sb = train(x, labels, m=10, seed=5)
    assert dumps_model(a) == dumps_model(b)
    assert sa == sb


# --- prediction ---

def make_model(w, classes=("CHF", "NORMAL")):
    return ElmModel("elm", "sigmoid", 0.0, classes, 0, np.zeros((1, 1)), np.zeros(1), np.asarray(w, dtype=float))


def test_argmax_and_ties():
    # hidden output is 0.5 for every input
    labels, scores = predict(make_model([[1.8, -1.6]]), np.ones((1, 1)))
    np.testing.assert_allclose(scores, [[0.9, -0.8]])
    assert labels == ["CHF"]
    labels, _ = predict(make_model([[1.0, 1.0]]), np.ones((2, 1)))
    assert labels == ["CHF", "CHF"]


def test_predict_dimension_error():
    with pytest.raises(DimensionError, match="expects 1 features, got 3"):
        predict(make_model([[1.0, 0.0]]), np.ones((2, 3)))


def test_model_shape_validation():
    with pytest.raises(DimensionError):
        make_model([[1.0, 0.0, 0.0]])
    with pytest.raises(ValidationError):
        make_model([[1.0]], classes=("only",))


# --- persistence ---

def test_round_trip(tmp_path, rng):
    x = rng.standard_normal((30, 4))
    labels = [("CHF", "NORMAL")[i] for i in rng.integers(0, 2, 30)]
    model, _ = train(x, labels, m=9, seed=11, extractor={"kind": "grid"})
    save_model(model, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    probe = rng.standard_normal((17, 4))
    assert predict(back, probe)[0] == predict(model, probe)[0]
    np.testing.assert_array_equal(predict(back, probe)[1], predict(model, probe)[1])
    np.testing.assert_array_equal(back.output_weights, model.output_weights)
    assert back.extractor == {"kind": "grid"}
    assert dumps_model(back) == dumps_model(model)


def test_floats_have_17_digits(rng):
    model, _ = train(rng.standard_normal((12, 2)), [0, 1] * 6, m=3, seed=1)
    doc = json.loads(dumps_model(model))
    assert doc["format_version"] == 1
    assert doc["lambda"] == float(format(model.lam, ".17g"))


def test_truncated_file(tmp_path, rng):
    model, _ = train(rng.standard_normal((12, 2)), [0, 1] * 6, m=3, seed=1)
    text = dumps_model(model)
    (tmp_path / "m.json").write_text(text[: len(text) // 2])
    with pytest.raises(ModelFormatError):
        load_model(tmp_path / "m.json")


def test_newer_version_rejected(rng):
    model, _ = train(rng.standard_normal((12, 2)), [0, 1] * 6, m=3, seed=1)
    doc = json.loads(dumps_model(model))
    doc["format_version"] = 2
    with pytest.raises(FormatVersionError, match="newer"):
        loads_model(json.dumps(doc))


def test_malformed_documents():
    with pytest.raises(ModelFormatError):
        loads_model('{"format": "something-else"}')
    with pytest.raises(ModelFormatError):
        loads_model('{"format": "hesselm-model"}')
    with pytest.raises(ModelFormatError):
        loads_model('{"format": "hesselm-model", "format_version": 1}')


def test_unregularized_variants_agree(rng):
    x, labels = clusters(rng)
    a, _ = train(x, labels, "elm", m=20, seed=4)
    b, _ = train(x, labels, "hesselm", m=20, seed=4)
    assert predict(a, x)[0] == predict(b, x)[0]
    assert json.loads(dumps_model(a))["lambda"] == 0.0
