"""Training-loop behavior: loss trajectory, divergence, spec validation."""
import numpy as np
import pytest

from nabtrain.specs import TrainSpec
from nabtrain.systems import builtin_names, builtin_system
from nabtrain.training import TrainingDiverged, train_abstraction

SMALL_BENCHMARKS = ["water_tank", "jet_engine", "steam_governor",
                    "exponential", "nl1", "nl2"]


def _quick_spec(name, **kw):
    base = dict(hidden=[8], iterations=600, batch_size=256, pool_size=20_000,
                eval_size=4000, eval_every=300, seed=1)
    base.update(kw)
    return TrainSpec(name, **base)


@pytest.mark.parametrize("name", SMALL_BENCHMARKS)
def test_loss_decreases(name):
    result = train_abstraction(_quick_spec(name), log=lambda msg: None)
    head = float(np.mean(result.loss_history[:50]))
    tail = float(np.mean(result.loss_history[-50:]))
    assert tail < head, f"{name}: loss went {head:.4f} -> {tail:.4f}"


def test_divergence_aborts_with_diagnostics():
    # an absurd learning rate sends the weights to 1e100 after one adam
    # step, so the next loss overflows to inf and the run must abort
    spec = _quick_spec("jet_engine", lr=1e100, iterations=300, grad_clip=0.0)
    with pytest.raises(TrainingDiverged) as exc:
        train_abstraction(spec, log=lambda msg: None)
    assert exc.value.step >= 0
    assert "lr" in str(exc.value)


def test_spec_validation_rejects_bad_fields():
    with pytest.raises(ValueError):
        TrainSpec("water_tank", lambda_max=-0.1)
    with pytest.raises(ValueError):
        TrainSpec("water_tank", batch_size=0)
    with pytest.raises(ValueError):
        TrainSpec("water_tank", activation="tanh")
    with pytest.raises(ValueError):
        TrainSpec("water_tank", hidden=[])
    with pytest.raises(ValueError):
        TrainSpec("water_tank", dtype="float16")
    with pytest.raises(ValueError):
        TrainSpec("water_tank", hard_fraction=1.0)


def test_unknown_system_rejected():
    with pytest.raises(KeyError):
        TrainSpec("does_not_exist").resolve()


def test_builtin_catalog_evaluates(rng):
    for name in builtin_names():
        sys_ = builtin_system(name)
        out = sys_.evaluate(sys_.sample(rng, 32))
        assert out.shape == (32, sys_.m)
        assert np.isfinite(out).all()
