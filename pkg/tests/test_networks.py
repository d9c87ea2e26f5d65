import json
import warnings

import numpy as np
import pytest

from homsym.dilation import Dilation, DomainError
from homsym.networks import (Activation, HomNet, LabeledDataset, RankDeficiencyWarning, ShallowNet,
                             eval_hom, eval_shallow, homogenize, model_from_dict, model_to_dict,
                             random_features, sample_annulus, solve_ridge, sup_error, train_hom,
                             train_output_layer)


def small_net(rng, n=2, N=5, m=1):
    A, b = random_features(n, N, rng)
    return ShallowNet(A, b, rng.normal(size=(m, N)))


def test_activation():
    assert Activation("sigmoid")(0.0) == 0.5
    assert Activation.TANH(0.0) == 0.0
    with pytest.raises(ValueError):
        Activation("relu")


def test_shallow_eval_by_hand():
    net = ShallowNet(A=[[1.0, 0.0], [0.0, 2.0]], b=[0.0, -1.0], C=[[1.0, -1.0]])
    x = np.array([0.3, 0.4])
    expected = 1 / (1 + np.exp(-0.3)) - 1 / (1 + np.exp(-(0.8 - 1.0)))
    assert eval_shallow(net, x)[0] == pytest.approx(expected, rel=1e-14)


def test_shape_checks():
    with pytest.raises(ValueError):
        ShallowNet(np.ones((3, 2)), np.ones(2), np.ones((1, 3)))
    with pytest.raises(ValueError):
        ShallowNet(np.ones((3, 2)), np.ones(3), np.ones((1, 3)))(np.ones(4))
    with pytest.raises(ValueError):
        HomNet(ShallowNet(np.ones((3, 2)), np.ones(3), np.ones((1, 3))), Dilation.standard(3), 1.0)


def test_ridge_matches_normal_equations():
    rng = np.random.default_rng(0)
    Phi, Y = rng.normal(size=(50, 8)), rng.normal(size=(50, 3))
    for ridge in (0.0, 1e-3, 1.0):
        W = solve_ridge(Phi, Y, ridge)
        ref = np.linalg.solve(Phi.T @ Phi + ridge * np.eye(8), Phi.T @ Y)
        np.testing.assert_allclose(W, ref, rtol=1e-9, atol=1e-12)


def test_ridge_optimality():
    rng = np.random.default_rng(1)
    Phi, Y = rng.normal(size=(40, 6)), rng.normal(size=40)
    W = solve_ridge(Phi, Y, 0.1)
    obj = lambda w: np.sum((Phi @ w - Y) ** 2) + 0.1 * np.sum(w**2)
    for _ in range(20):
        assert obj(W) <= obj(W + 1e-3 * rng.normal(size=6))


def test_rank_deficiency_warning():
    Phi = np.ones((10, 3))
    with pytest.warns(RankDeficiencyWarning):
        W = solve_ridge(Phi, np.ones(10), 0.0)
    np.testing.assert_allclose(W, [1 / 3] * 3)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        solve_ridge(Phi, np.ones(10), 1e-6)
    with pytest.raises(ValueError):
        solve_ridge(Phi, np.ones(10), -1.0)


def test_train_recovers_exact_output_layer():
    rng = np.random.default_rng(2)
    teacher = small_net(rng, n=3, N=10, m=2)
    X = rng.normal(size=(200, 3))
    student = train_output_layer(teacher.A, teacher.b, "sigmoid", LabeledDataset(X, teacher(X)), ridge=0.0)
    np.testing.assert_allclose(student.C, teacher.C, atol=1e-8)


def test_train_deterministic():
    data = LabeledDataset(np.random.default_rng(3).normal(size=(50, 2)), np.ones(50))
    nets = [train_output_layer(*random_features(2, 8, np.random.default_rng(4)), "tanh", data) for _ in range(2)]
    np.testing.assert_array_equal(nets[0].C, nets[1].C)


def test_empty_dataset():
    A, b = random_features(2, 3, np.random.default_rng(0))
    with pytest.raises(ValueError):
        train_output_layer(A, b, "sigmoid", LabeledDataset(np.empty((0, 2)), np.empty((0, 1))))


def test_hom_net_homogeneity():
    rng = np.random.default_rng(5)
    dil = Dilation.weighted([1.0, 2.0])
    h = homogenize(small_net(rng, m=2), dil, 1.5)
    X = rng.normal(size=(20, 2))
    for s in (-1.0, 0.4, 2.0):
        np.testing.assert_allclose(h(dil.apply(s, X)), np.exp(1.5 * s) * h(X), rtol=1e-9)


def test_homogenize_agrees_on_sphere():
    rng = np.random.default_rng(6)
    net = small_net(rng, n=3, m=2)
    dil = Dilation.standard(3)
    h = homogenize(net, dil, 2.0, region=(0.95, 1.05))
    S = dil.project(rng.normal(size=(30, 3)))
    np.testing.assert_allclose(eval_hom(h, S), net(S), rtol=1e-10)
    assert h.meta["training_region"] == [0.95, 1.05]


def test_hom_origin():
    rng = np.random.default_rng(7)
    dil = Dilation.standard(2)
    net = small_net(rng)
    assert np.all(homogenize(net, dil, 1.0)(np.zeros(2)) == 0)
    with pytest.raises(DomainError):
        homogenize(net, dil, 0.0)(np.zeros(2))
    with pytest.raises(DomainError):
        train_hom(net.A, net.b, "sigmoid", dil, 1.0, LabeledDataset(np.zeros((1, 2)), np.ones(1)))


def test_train_hom_fits_homogeneous_target():
    rng = np.random.default_rng(8)
    dil = Dilation.weighted([1.0, 2.0])
    target = lambda X: X[:, 0] ** 2 + X[:, 1]   # degree 2 for diag(1, 2)
    X = sample_annulus(rng, 2000, 2, 0.5, 1.5)
    A, b = random_features(2, 40, rng)
    h = train_hom(A, b, "sigmoid", dil, 2.0, LabeledDataset(X, target(X)))
    far = sample_annulus(rng, 500, 2, 5.0, 10.0)
    rel = np.abs(h(far)[:, 0] - target(far)) / np.maximum(np.abs(target(far)), 1.0)
    assert np.max(rel) < 1e-3


def test_custom_norm_is_used():
    rng = np.random.default_rng(9)
    dil = Dilation.standard(2)
    net = small_net(rng)
    h = HomNet(net, dil, 1.0, norm=lambda X: 2 * np.linalg.norm(X, axis=-1))
    x = np.array([0.6, 0.8])
    assert h(x)[0] == pytest.approx(2 * net(x / 2)[0])


def test_sup_error_and_annulus():
    rng = np.random.default_rng(10)
    X = sample_annulus(rng, 5000, 3, 0.5, 2.0)
    r = np.linalg.norm(X, axis=1)
    assert r.min() >= 0.5 and r.max() <= 2.0
    # uniform volume: the fraction inside radius 1 is (1 - 0.125) / (8 - 0.125)
    assert np.mean(r < 1) == pytest.approx(0.875 / 7.875, abs=0.02)
    net = small_net(rng)
    assert sup_error(net, net, 0.0, 1.0, samples=100) == 0.0
    shifted = lambda X: net(X) + 0.25
    assert sup_error(shifted, net, 0.0, 1.0, samples=100) == pytest.approx(0.25)
    with pytest.raises(ValueError):
        sample_annulus(rng, 10, 2, 2.0, 1.0)


def test_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(11)
    data = LabeledDataset(rng.normal(size=(7, 3)), rng.normal(size=(7, 2)))
    data.to_csv(tmp_path / "d.csv")
    back = LabeledDataset.from_csv(tmp_path / "d.csv")
    np.testing.assert_array_equal(back.inputs, data.inputs)
    np.testing.assert_array_equal(back.outputs, data.outputs)


@pytest.mark.parametrize("text", ["a,b\n1,2\n", "x1,y1\n1\n", "x1,y1\n", "", "x1,y1\n1,nan\n"])
def test_csv_errors(tmp_path, text):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(ValueError):
        LabeledDataset.from_csv(p)


def test_model_dict_roundtrip():
    rng = np.random.default_rng(12)
    net = small_net(rng, n=2, m=3)
    h = homogenize(net, Dilation.weighted([1.0, 3.0]), 2.0, region=(1, 2))
    for model in (net, h):
        back = model_from_dict(json.loads(json.dumps(model_to_dict(model))))
        X = rng.normal(size=(5, 2))
        np.testing.assert_array_equal(back(X), model(X))
    with pytest.raises(ValueError):
        model_from_dict({"type": "deep", "A": [[1.0]], "b": [0.0], "C": [[1.0]]})
    with pytest.raises(ValueError):
        model_to_dict(HomNet(net, Dilation.standard(2), 1.0, norm=np.linalg.norm))
