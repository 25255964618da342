"""Smoke test for the `hyena` extension module.

Build the shared library and put it on the path as `hyena.so`, e.g.

    cargo build --release -p hyena-py
    cp target/release/libhyena.so crates/py/python/hyena.so
    python3 crates/py/python/smoke_test.py
"""

import math
import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import hyena  # noqa: E402

SMALL = """
version = 1
seed = 3
models = ["hong_vanilla", "hyena"]

[data.synthetic]
n_days = 60

[features]
screen_trees = 5

[neural]
hidden_dim = 4
max_epochs = 2
"""


def main():
    cfg = hyena.PipelineConfig.from_toml(SMALL)
    assert cfg.seed == 3
    assert cfg.models == ["hong_vanilla", "hyena"]
    ranges = dict(cfg.ranges())
    assert set(ranges) == {"stage1", "stage2", "test"}
    assert len(cfg.fingerprint()) == 64
    assert hyena.PipelineConfig.from_toml(cfg.to_toml()).fingerprint() == cfg.fingerprint()

    with tempfile.TemporaryDirectory() as out:
        assert sorted(hyena.train(cfg, out)) == ["hong_vanilla", "hyena"]
        rows = hyena.evaluate(cfg, out)
        assert [r[0] for r in rows] == ["hong_vanilla", "hyena"]
        for name, m, r in rows:
            assert math.isfinite(m) and m > 0, (name, m)
            assert math.isfinite(r) and r > 0, (name, r)
            print(f"{name:<14} MAPE {m:7.3f}%  RMSE {r:9.2f} MW")

        model = hyena.Model.load(os.path.join(out, "models", "hyena.artifact"))
        assert model.name == "hyena"
        assert model.fingerprint == cfg.fingerprint()
        first = ranges["test"][0]
        pred = model.predict(cfg, first)
        assert len(pred) == 48
        train_loss, val_loss, best = model.train_losses()
        assert len(train_loss) == len(val_loss) >= 1 and best >= 1

        fc = hyena.forecast(cfg, os.path.join(out, "models", "hyena.artifact"),
                            os.path.join(out, "fc.csv"), first)
        assert fc == pred

        try:
            hyena.Model.load(os.path.join(out, "models", "missing.artifact"))
        except hyena.ArtifactError:
            pass
        else:
            raise AssertionError("missing artifact did not raise")

    try:
        hyena.PipelineConfig.from_toml("version = 2\n")
    except hyena.ConfigError:
        pass
    else:
        raise AssertionError("bad version did not raise")

    assert hyena.residual([100.0], [90.0]) == [10.0]
    assert hyena.recompose([100.0], [10.0]) == [90.0]
    assert abs(hyena.mape([100.0, 200.0], [110.0, 180.0]) - 10.0) < 1e-12
    assert abs(hyena.rmse([0.0, 0.0], [3.0, 4.0]) - math.sqrt(12.5)) < 1e-12
    try:
        hyena.mape([0.0], [1.0])
    except hyena.DataError:
        pass
    else:
        raise AssertionError("zero actual did not raise")
    print("smoke test ok")


if __name__ == "__main__":
    main()
