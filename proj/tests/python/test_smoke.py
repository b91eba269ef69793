import json
import math

import numpy as np
import pytest

import protonet as pn


def separable():
    return pn.synthetic(super_spread=1.0, leaf_spread=0.35, noise=0.15, seed=2024)


def test_mobius_inverse_and_distance_closed_form():
    rng = np.random.default_rng(3)
    for c in (0.01, 1.0):
        for _ in range(50):
            x = rng.normal(size=4)
            y = rng.normal(size=4)
            x *= 0.9 * rng.random() / (math.sqrt(c) * np.linalg.norm(x))
            y *= 0.9 * rng.random() / (math.sqrt(c) * np.linalg.norm(y))
            assert np.linalg.norm(pn.mobius_add(-x, x, c)) < 1e-12
            num = 2 * c * np.sum((x - y) ** 2)
            den = (1 - c * x @ x) * (1 - c * y @ y)
            expected = math.acosh(1 + num / den) / math.sqrt(c)
            assert pn.distance(x, y, c) == pytest.approx(expected, rel=1e-9)
            assert pn.distance(x, y, c) == pn.distance(y, x, c)


def test_maps_and_midpoint():
    v = np.array([0.3, -0.4])
    b = pn.exp_map0(v, 1.0)
    assert np.linalg.norm(b) == pytest.approx(math.tanh(0.5), abs=1e-15)
    assert np.allclose(pn.klein_to_poincare(pn.poincare_to_klein(b, 1.0), 1.0), b, atol=1e-14)
    mid = pn.einstein_midpoint(np.array([[0.8, 0.0], [0.0, 0.0]]), 1.0)
    assert mid == pytest.approx([0.5, 0.0], abs=1e-15)
    assert np.linalg.norm(pn.clip(np.array([3.0, 4.0]), 1.0)) == pytest.approx(1.0)


def test_errors_carry_code_and_category():
    with pytest.raises(pn.ProtonetError) as info:
        pn.distance(np.array([1.0, 0.0]), np.array([0.0, 0.0]), 1.0)
    assert info.value.code == "invalid-point"
    assert info.value.category == "numeric"
    with pytest.raises(pn.ProtonetError) as info:
        pn.ClassHierarchy.from_edges([("a", "b"), ("b", "a")])
    assert info.value.code in ("cycle-detected", "empty-hierarchy")


def test_hierarchy_and_level_weights():
    h = pn.ClassHierarchy.from_edges([("root", "A"), ("root", "B"), ("A", "a0"), ("A", "a1"), ("B", "b0")])
    assert h.height == 3
    assert h.root == "root"
    assert sorted(h.leaves) == ["a0", "a1", "b0"]
    assert h.ancestor_at_level("a1", 2) == "A"
    w = pn.level_weights(0.5, 3)
    assert w[2] == pytest.approx(2 / 3) and w[3] == pytest.approx(1 / 3)


def test_probabilities_match_numpy_oracle():
    data, h, split = separable()
    ep = pn.sample_episode(data, split["novel"], ways=4, shots=3, queries=2, seed=5, index=1)
    (nodes, probs), = pn.class_probabilities(ep, h, "euclidean", tau=0.7).values()
    assert nodes == ep.classes
    labels = np.array(ep.support_labels)
    protos = np.stack([ep.support[labels == n].mean(axis=0) for n in nodes])
    for q, row in zip(ep.query, probs):
        logits = -np.linalg.norm(protos - q, axis=1) / 0.7
        e = np.exp(logits - logits.max())
        assert np.abs(row - e / e.sum()).max() < 1e-12
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-12)


def test_evaluate_separable():
    data, h, split = separable()
    eucl = pn.evaluate(data, split["novel"], h, episodes=200, seed=1)
    hyp = pn.evaluate(data, split["novel"], h, metric="hyperbolic", c=0.01, r=1.0, episodes=200, seed=1)
    assert eucl["overall"]["mean"] >= 95.0
    assert abs(hyp["overall"]["mean"] - eucl["overall"]["mean"]) <= 3.0
    assert eucl["queries_per_episode"] == 75
    hier = pn.evaluate(data, split["novel"], h, metric="hierarchical", episodes=200, seed=1)
    assert set(hier["level"]) == {2, 3}


def test_gradcheck_and_training():
    data, h, split = pn.synthetic(dim=8, samples_per_leaf=12, seed=9)
    ep = pn.sample_episode(data, split["base"], ways=3, shots=2, queries=2, seed=0)
    for metric in ("euclidean", "cosine", "hierarchical", "hyperbolic"):
        assert pn.gradcheck(ep, h, metric)["passed"], metric
    out = pn.train(data, split, h, epochs=3, episodes_per_epoch=40, val_episodes=20, seed=4, ways=3, shots=2,
                   queries=3)
    assert len(out["curve"]) == 3
    assert out["best"]["weight"].shape == (8, 8)
    projected = pn.project(out["best"]["weight"], out["best"]["bias"], data.vectors)
    assert projected.shape == data.vectors.shape


def test_run_cli_selftest():
    code, out, err = pn.run_cli(["selftest"])
    assert code == 0, err
    assert json.loads(out)["format"] == "protonet-selftest-report"
    code, _, err = pn.run_cli(["eval", "--bogus"])
    assert code == 1
