import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lficonflict.models import (
    PoissonModel,
    RickerModel,
    SimulationModel,
    StereoModel,
    SummaryPartition,
    TrainingSet,
    build_training_set,
    make_model,
)
from lficonflict.priors import PriorSpec, UniformMarginal


# --- partitions --------------------------------------------------------------

def test_partition_basic():
    p = SummaryPartition((0, 2), (1,))
    s = np.array([10.0, 20.0, 30.0])
    kept, dropped = p.split(s)
    assert np.array_equal(kept, [10.0, 30.0])
    assert np.array_equal(dropped, [20.0])
    assert np.array_equal(p.merge(kept, dropped), s)


def test_partition_rejects_overlap_and_empty():
    with pytest.raises(ValueError):
        SummaryPartition((0, 1), (1, 2))
    with pytest.raises(ValueError):
        SummaryPartition((), (0,))
    with pytest.raises(ValueError):
        SummaryPartition((0,), ())
    with pytest.raises(ValueError):
        SummaryPartition((0, 0), (1,))


def test_partition_validate_covers_all():
    p = SummaryPartition((0,), (1,))
    p.validate(2)
    with pytest.raises(ValueError):
        p.validate(3)


def test_partition_from_names():
    p = SummaryPartition.from_names(["var"], ("mean", "var"))
    assert p.keep == (1,)
    assert p.drop == (0,)
    with pytest.raises(ValueError):
        SummaryPartition.from_names(["nope"], ("mean", "var"))


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_partition_split_merge_round_trip(data):
    q = data.draw(st.integers(min_value=2, max_value=12))
    n_keep = data.draw(st.integers(min_value=1, max_value=q - 1))
    keep = data.draw(
        st.permutations(range(q)).map(lambda p: tuple(sorted(p[:n_keep])))
    )
    drop = tuple(sorted(set(range(q)) - set(keep)))
    part = SummaryPartition(keep, drop)
    s = np.array(data.draw(st.lists(
        st.floats(allow_nan=False, allow_infinity=False, width=32),
        min_size=q, max_size=q,
    )))
    kept, dropped = part.split(s)
    assert np.array_equal(part.merge(kept, dropped), s)


# --- training sets -------------------------------------------------------------

def test_training_set_consistency_checks():
    with pytest.raises(ValueError):
        TrainingSet(np.zeros((3, 1)), np.zeros((4, 2)), ("a",), ("x", "y"), "m", 0)
    with pytest.raises(ValueError):
        TrainingSet(np.zeros((3, 2)), np.zeros((3, 2)), ("a",), ("x", "y"), "m", 0)
    with pytest.raises(ValueError):
        TrainingSet(
            np.zeros((3, 1)), np.full((3, 2), np.nan), ("a",), ("x", "y"), "m", 0
        )


def test_param_column():
    ts = TrainingSet(
        np.array([[1.0, 2.0], [3.0, 4.0]]), np.zeros((2, 1)),
        ("a", "b"), ("s",), "m", 0,
    )
    assert np.array_equal(ts.param_column("b"), [2.0, 4.0])
    with pytest.raises(ValueError):
        ts.param_column("c")


def test_build_training_set_deterministic():
    model = PoissonModel()
    a = build_training_set(model, 60, seed=5)
    b = build_training_set(model, 60, seed=5)
    assert np.array_equal(a.params, b.params)
    assert np.array_equal(a.summaries, b.summaries)


def test_row_streams_are_independent_of_n():
    # the first rows do not change when more rows are requested
    model = PoissonModel()
    small = build_training_set(model, 20, seed=9)
    large = build_training_set(model, 50, seed=9)
    assert np.array_equal(small.params, large.params[:20])
    assert np.array_equal(small.summaries, large.summaries[:20])


class FussyModel(SimulationModel):
    """Rejects simulations whose first datum is below a cutoff."""

    model_id = "fussy"
    param_names = ("u",)
    summary_names = ("first",)

    def __init__(self, cutoff):
        super().__init__(PriorSpec(("u",), (UniformMarginal(0.0, 1.0),)))
        self.cutoff = cutoff

    def simulate(self, theta, rng):
        return rng.uniform(0.0, 1.0, size=1)

    def summarize(self, data):
        return data if data[0] >= self.cutoff else None


def test_discard_accounting():
    # 15% discard rate stays safely below the 50% abort line
    model = FussyModel(cutoff=0.15)
    ts = build_training_set(model, 200, seed=11)
    assert ts.n == 200
    assert ts.n_discarded > 0
    assert np.all(ts.summaries[:, 0] >= 0.15)


def test_always_invalid_aborts():
    model = FussyModel(cutoff=2.0)
    with pytest.raises(RuntimeError):
        build_training_set(model, 50, seed=12)


# --- model registry ------------------------------------------------------------

def test_poisson_model_shapes():
    model = PoissonModel(data_size=7)
    rng = np.random.default_rng(0)
    theta = model.prior.sample_one(rng)
    d = model.simulate(theta, rng)
    assert d.shape == (7,)
    assert model.summarize(d).shape == (2,)


def test_poisson_data_size_minimum():
    with pytest.raises(ValueError):
        PoissonModel(data_size=1)


def test_stereo_model_summary_names():
    model = StereoModel()
    assert model.summary_names[0] == "n_incl"
    assert len(model.summary_names) == 9


def test_ricker_setar_needs_threshold():
    with pytest.raises(ValueError):
        RickerModel(summaries="setar")


def test_ricker_raw_names_follow_length():
    model = make_model("ricker", {"summaries": "raw", "n_obs": 12})
    assert model.summary_names == tuple(f"t{i:03d}" for i in range(12))
    counts = np.arange(12.0)
    assert np.array_equal(model.summarize(counts), counts)


def test_make_model_registry():
    assert make_model("poisson", {"data_size": 9}).data_size == 9
    assert make_model("stereo", {"threshold": 4.0}).threshold == 4.0
    with pytest.raises(ValueError):
        make_model("unknown")


def test_make_model_prior_override():
    spec = [{"name": "eta", "kind": "gamma", "shape": 2.0, "rate": 2.0}]
    model = make_model("poisson", {"prior": spec})
    assert model.prior.marginals[0].shape == 2.0
