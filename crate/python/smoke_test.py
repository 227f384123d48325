"""Smoke test for the alqueue_py extension module.

Build first, e.g. `pip install --no-build-isolation ./crates/python`
or copy target/release/libalqueue_py.so next to this file as alqueue_py.so.
Run with `python python/smoke_test.py` or `pytest python/smoke_test.py`.
"""

import math
import tempfile

import alqueue_py as aq


def small_world():
    return aq.World.make(seed=11, n_reference=400, n_holdout=200, n_pool=400)


def test_tanimoto():
    a = aq.fingerprint([1, 2, 3])
    b = aq.fingerprint([2, 3, 4])
    assert aq.tanimoto(a, b) == 0.5
    assert aq.tanimoto(a, a) == 0.0


def test_rank():
    assert aq.rank([5, 3, 9], [0.2, 0.2, 0.1]) == [2, 1, 0]


def test_presets():
    names = {name for name, _, _ in aq.presets()}
    assert {"basic-al", "basic-control", "ucb-small"} <= names


def test_model_round_trip():
    w = small_world()
    m = aq.Model.fit_world(w, seed=1, n_trees=10)
    x, y = w.labelled("holdout")
    assert len(x[0]) == w.embedding_dim
    preds = m.predict_many(x)
    rmse = math.sqrt(sum((p[0] - t) ** 2 for p, t in zip(preds, y)) / len(y))
    assert abs(rmse - m.holdout_rmse(w)) < 1e-9
    with tempfile.TemporaryDirectory() as d:
        path = f"{d}/model_0.trees"
        m.save(path)
        assert aq.Model.load(path).predict(x[0]) == m.predict(x[0])


def test_run_and_replay():
    w = small_world()
    with tempfile.TemporaryDirectory() as d:
        out = aq.run_preset(
            "basic-al", w, seed=1, out_dir=d,
            overrides=[("n_target", "30"), ("surrogate.n_trees", "8")],
        )
        assert out["summary"]["counters.simulated"] == "30"
        assert out["metrics"][-1]["n_simulated"] == 30
        assert aq.replay(d)


def test_reorder():
    w = small_world()
    rows = aq.reorder("random", w, seed=0, batch=100, warm=100, n_trees=8)
    assert rows[-1]["n_simulated"] == w.n_pool
    assert rows[-1]["cum_stable"] == w.stable_count("pool")


if __name__ == "__main__":
    for name, fn in list(globals().items()):
        if name.startswith("test_") and callable(fn):
            fn()
            print(f"ok {name}")
