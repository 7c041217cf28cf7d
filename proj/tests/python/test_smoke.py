import math

import pytest

import hierrec


def test_learning_effect_and_returns():
    assert hierrec.learning_effect(5, 2, 10) == pytest.approx(0.375)
    assert hierrec.returns([0.0, 0.0, 1.0], 1.0) == [1.0, 1.0, 1.0]
    with pytest.raises(hierrec.HierrecError):
        hierrec.learning_effect(3, 3, 3)


def test_curriculum_union():
    cmap = hierrec.CurriculumMap.build(2, 3, [(0, 0), (1, 0), (1, 1), (2, 1)])
    assert cmap.num_questions == 3
    assert cmap.num_concepts == 2
    assert hierrec.questions_for_concepts(cmap, [0, 1]) == [0, 1, 2]
    assert hierrec.questions_for_concepts(cmap, [1]) == [1, 2]


def test_reference_simulator_session():
    sim = hierrec.KssSimulator.reference()
    session = sim.reset([1, 2, 3], 5, 7)
    assert len(session.warmup) == 5
    before = session.mastery([1, 2, 3])
    for q in range(sim.max_steps):
        assert session.answer(q % 10) in (0, 1)
    assert session.steps == sim.max_steps
    assert session.mastery([1, 2, 3]) >= before
    with pytest.raises(hierrec.HierrecError):
        session.answer(0)


def test_roc_auc():
    assert hierrec.roc_auc([0.1, 0.9], [0, 1]) == pytest.approx(1.0)
    assert hierrec.roc_auc([0.5, 0.5], [1, 1]) is None


def test_config_resolution_and_errors():
    cfg = hierrec.resolve_config({"training": {"episodes": 5}}, ["seed=3"])
    assert cfg["training"]["episodes"] == 5
    assert cfg["seed"] == 3
    assert hierrec.default_config()["training"]["learning_rate"] == pytest.approx(1e-4)
    with pytest.raises(hierrec.ConfigError):
        hierrec.resolve_config({"nope": 1})
    with pytest.raises(hierrec.ConfigError):
        hierrec.resolve_config(None, ["training.learning_rate=0.3"])


def test_train_and_evaluate_round_trip(tmp_path):
    overrides = [
        f"output_dir={tmp_path}",
        "training.episodes=8",
        "training.batch_size=4",
        "encoder.d_m=16",
        "encoder.d_h=16",
        "evaluation.n_students=4",
        "evaluation.seeds=[0]",
    ]
    summary = hierrec.train(None, overrides)
    assert summary["episodes"] == 8
    assert (tmp_path / "checkpoints" / "policy.ckpt").exists()
    assert (tmp_path / "metrics" / "train.csv").read_text().splitlines()[0] == (
        "episode,delta_u,loss_h,loss_l,loss_p,loss_total"
    )
    results = hierrec.evaluate(None, overrides)["results"]
    names = {r["policy"] for r in results}
    assert names == {"hierrec", "random"}
    for r in results:
        for cell in r["cells"]:
            assert len(cell["samples"]) == 4
            assert math.isfinite(cell["mean"])
    with pytest.raises(hierrec.CheckpointMismatch):
        hierrec.evaluate(None, overrides[:-3] + ["encoder.d_m=32", "evaluation.n_students=4", "evaluation.seeds=[0]"])
