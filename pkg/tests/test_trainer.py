from unittest.mock import patch

import numpy as np
import numpy.testing as npt
import pytest


class Recorder:
    """Collects the output of a training run."""

    def __init__(self):
        self.rows = []
        self.checkpoints = []
        self.snapshots = []

    def write_metrics(self, row):
        self.rows.append(row)

    def checkpoint(self, step, params, state):
        self.checkpoints.append((step, params.theta.copy(), state.t))

    def snapshot(self, step, params):
        self.snapshots.append(step)


@pytest.fixture
def setup(plate):
    from bilayer.boundary import edge_lift
    from bilayer.energy import EnergyConfig
    from bilayer.network import Architecture, init_params

    params = init_params(Architecture(blocks=1, width=4), seed=0)
    return params, edge_lift(plate), EnergyConfig(Z=-1.0 * np.eye(2), beta=10.0)


def test_optimizer_state():
    from bilayer.trainer import OptimizerState

    state = OptimizerState.zeros(5, lr=1e-2)
    assert state.size == 5
    assert state.lr == 1e-2
    assert state.t == 0
    fresh = state.checksum()

    state.m += 1.0
    state.t = 3
    assert state.checksum() != fresh
    state.reset()
    assert state.checksum() == fresh

    with pytest.raises(ValueError, match="same length"):
        OptimizerState(np.zeros(3), np.zeros(4))
    with pytest.raises(ValueError, match="nonnegative"):
        OptimizerState(np.zeros(3), np.zeros(3), t=-1)


def test_adam_step():
    from bilayer.core import NumericalError
    from bilayer.network import Architecture, init_params
    from bilayer.trainer import OptimizerState, adam_step

    params = init_params(Architecture(blocks=1, width=4), seed=1)
    state = OptimizerState.zeros(params.size)

    grad = np.zeros(params.size)
    grad[:10] = np.linspace(-5, 5, 10)
    grad[4] = 0.0
    state, new = adam_step(state, params, grad)
    assert state.t == 1
    delta = new.theta - params.theta
    # the first step moves every parameter by the learning rate
    nonzero = grad != 0
    npt.assert_allclose(np.abs(delta[nonzero]), 1e-3, rtol=1e-6)
    npt.assert_array_equal(np.sign(delta[nonzero]), -np.sign(grad[nonzero]))
    npt.assert_array_equal(delta[~nonzero], 0.0)

    with pytest.raises(ValueError, match="gradient has shape"):
        adam_step(state, params, np.zeros(3))

    grad[2] = np.inf
    with pytest.raises(NumericalError) as excinfo:
        adam_step(state, params, grad, step=9)
    assert excinfo.value.context["step"] == 9
    assert excinfo.value.context["first_index"] == 2


def test_schedule(plate):
    from bilayer.geometry import decompose
    from bilayer.trainer import Schedule

    schedule = Schedule()
    assert schedule.batch_for(plate) == 640
    assert Schedule(batch_size=64).batch_for(plate) == 64
    assert Schedule(batch_density=0.01).batch_for(plate) == 1
    assert schedule.stages(plate) == [("main", plate, 1_000_000)]
    assert schedule.total_steps == 1_000_000

    chain = decompose(plate, 5)
    schedule = Schedule(chain=chain, epochs_pre=100, epochs=50)
    stages = schedule.stages(plate)
    assert [s[0] for s in stages] == ["pre-1", "pre-2", "pre-3", "pre-4", "main"]
    assert [s[2] for s in stages] == [100, 100, 100, 100, 50]
    assert schedule.pretraining_steps == 400
    assert schedule.total_steps == 450
    assert schedule.batch_for(stages[0][1]) == 128

    with pytest.raises(ValueError, match="epochs must be nonnegative"):
        Schedule(epochs=-1)
    with pytest.raises(ValueError, match="metrics_every must be positive"):
        Schedule(metrics_every=0)
    with pytest.raises(ValueError, match="batch size"):
        Schedule(batch_size=0)
    with pytest.raises(ValueError, match="batch density"):
        Schedule(batch_density=0.0)


def test_batch_rng():
    from bilayer.trainer import batch_rng

    a = batch_rng(3, 10).uniform(size=5)
    npt.assert_array_equal(a, batch_rng(3, 10).uniform(size=5))
    assert not np.array_equal(a, batch_rng(3, 11).uniform(size=5))
    assert not np.array_equal(a, batch_rng(4, 10).uniform(size=5))


def test_zero_epochs(plate, setup):
    from bilayer.trainer import Schedule, run_schedule, train_on_domain

    params, bc, cfg = setup
    new, rows = train_on_domain(params, plate, bc, cfg, Schedule(), 0)
    assert new is params
    assert rows == []

    new, rows = run_schedule(params, plate, bc, cfg, Schedule(epochs=0))
    npt.assert_array_equal(new.theta, params.theta)
    assert rows == []


def test_train_on_domain(plate, setup):
    from bilayer.trainer import OptimizerState, Schedule, train_on_domain

    params, bc, cfg = setup
    schedule = Schedule(
        epochs=12,
        batch_size=8,
        metrics_every=4,
        checkpoint_every=6,
        export_every=12,
    )
    out = Recorder()
    state = OptimizerState.zeros(params.size)
    new, rows = train_on_domain(
        params, plate, bc, cfg, schedule, 12, state=state, out=out
    )

    assert state.t == 12
    assert not np.array_equal(new.theta, params.theta)
    assert [row.step for row in rows] == [4, 8, 12]
    assert out.rows == rows
    assert all(row.phase == "main" for row in rows)
    assert all(row.elapsed is None for row in rows)
    assert all(row.C >= 0 for row in rows)
    assert [c[0] for c in out.checkpoints] == [6, 12]
    assert out.snapshots == [12]
    npt.assert_array_equal(out.checkpoints[-1][1], new.theta)

    with pytest.raises(ValueError, match="does not match"):
        train_on_domain(
            params, plate, bc, cfg, schedule, 1, state=OptimizerState.zeros(3)
        )


def test_training_is_deterministic(plate, setup):
    from bilayer.trainer import Schedule, run_schedule

    params, bc, cfg = setup
    schedule = Schedule(epochs=10, batch_size=8, seed=5)
    a, rows_a = run_schedule(params, plate, bc, cfg, schedule)
    b, rows_b = run_schedule(params, plate, bc, cfg, schedule)
    npt.assert_array_equal(a.theta, b.theta)
    assert rows_a == rows_b

    other = Schedule(epochs=10, batch_size=8, seed=6)
    c, _ = run_schedule(params, plate, bc, cfg, other)
    assert not np.array_equal(a.theta, c.theta)


def test_resume_is_exact(plate, setup):
    from bilayer.geometry import decompose
    from bilayer.trainer import OptimizerState, Schedule, run_schedule, train_on_domain

    params, bc, cfg = setup
    chain = decompose(plate, 2)
    schedule = Schedule(
        chain=chain, epochs_pre=6, epochs=6, batch_size=8, metrics_every=1
    )

    state = OptimizerState.zeros(params.size)
    full, rows = run_schedule(params, plate, bc, cfg, schedule, state=state)
    assert [row.step for row in rows] == list(range(1, 13))
    assert [row.phase for row in rows] == ["pre-1"] * 6 + ["main"] * 6

    # interrupt pre-training after four steps
    resumed_state = OptimizerState.zeros(params.size)
    partial, _ = train_on_domain(
        params,
        chain[0],
        bc,
        cfg,
        schedule,
        4,
        state=resumed_state,
        phase="pre-1",
    )
    resumed, more = run_schedule(
        partial,
        plate,
        bc,
        cfg,
        schedule,
        state=resumed_state,
        start_step=4,
    )
    assert [row.step for row in more] == list(range(5, 13))
    npt.assert_array_equal(resumed.theta, full.theta)
    assert resumed_state.checksum() == state.checksum()
    assert more == rows[4:]


def test_pretraining_samples_subdomains(plate, setup):
    from bilayer.geometry import decompose, sample_interior
    from bilayer.trainer import Schedule, run_schedule

    params, bc, cfg = setup
    chain = decompose(plate, 5)
    schedule = Schedule(chain=chain, epochs_pre=100, epochs=3, batch_size=4)

    calls = []

    def spy(domain, n, rng):
        x = sample_interior(domain, n, rng)
        calls.append((domain, x))
        return x

    with patch("bilayer.trainer.sample_interior", side_effect=spy):
        run_schedule(params, plate, bc, cfg, schedule)

    assert len(calls) == 403
    for i, sub in enumerate(chain.stages):
        for domain, x in calls[100 * i : 100 * (i + 1)]:
            assert domain == sub
            assert np.all(sub.contains(x))
            assert np.all(x[:, 0] < -5.0 + 2.0 * (i + 1))
    assert all(domain == plate for domain, _ in calls[400:])


def test_moments_across_stages(plate, setup):
    from bilayer.geometry import decompose
    from bilayer.trainer import OptimizerState, Schedule, run_schedule

    params, bc, cfg = setup
    chain = decompose(plate, 3)

    state = OptimizerState.zeros(params.size)
    schedule = Schedule(chain=chain, epochs_pre=2, epochs=3, batch_size=4)
    run_schedule(params, plate, bc, cfg, schedule, state=state)
    assert state.t == 7

    state = OptimizerState.zeros(params.size)
    schedule = Schedule(
        chain=chain, epochs_pre=2, epochs=3, batch_size=4, carry_moments=False
    )
    run_schedule(params, plate, bc, cfg, schedule, state=state)
    assert state.t == 3


def test_chain_must_match_domain(plate, oshape, setup):
    from bilayer.geometry import decompose
    from bilayer.trainer import Schedule, run_schedule

    params, bc, cfg = setup
    schedule = Schedule(chain=decompose(oshape, 3), epochs=1)
    with pytest.raises(ValueError, match="does not end"):
        run_schedule(params, plate, bc, cfg, schedule)


def test_numerical_failure_checkpoints(plate, setup):
    from bilayer.autodiff import loss_gradient
    from bilayer.core import NumericalError
    from bilayer.trainer import Schedule, train_on_domain

    params, bc, cfg = setup

    def failing(params, build, **context):
        if context["step"] == 3:
            msg = "non-finite loss"
            raise NumericalError(msg, loss=float("nan"))
        return loss_gradient(params, build, **context)

    out = Recorder()
    schedule = Schedule(epochs=5, batch_size=4)
    with patch("bilayer.trainer.loss_gradient", side_effect=failing):
        with pytest.raises(NumericalError) as excinfo:
            train_on_domain(params, plate, bc, cfg, schedule, 5, out=out)
    assert excinfo.value.context["step"] == 3
    assert excinfo.value.context["phase"] == "main"
    assert [c[0] for c in out.checkpoints] == [2]
    assert out.checkpoints[0][2] == 2


def test_threads_agree(plate, setup):
    from bilayer.trainer import OptimizerState, Schedule, train_on_domain

    params, bc, cfg = setup
    one, _ = train_on_domain(
        params,
        plate,
        bc,
        cfg,
        Schedule(batch_size=16),
        3,
        state=OptimizerState.zeros(params.size),
    )
    two, _ = train_on_domain(
        params,
        plate,
        bc,
        cfg,
        Schedule(batch_size=16, nthreads=2),
        3,
        state=OptimizerState.zeros(params.size),
    )
    npt.assert_allclose(two.theta, one.theta, rtol=1e-10, atol=1e-12)


@pytest.mark.slow
def test_training_smoke(plate):
    from bilayer.boundary import deformation, edge_lift
    from bilayer.energy import EnergyConfig, estimate
    from bilayer.network import Architecture, init_params
    from bilayer.trainer import Schedule, run_schedule

    # unit isotropic curvature on the standard plate, shortened run
    params = init_params(Architecture(), seed=0)
    bc = edge_lift(plate)
    cfg = EnergyConfig(Z=-np.eye(2), beta=500.0)
    schedule = Schedule(epochs=20_000, batch_size=640, metrics_every=200)

    params, rows = run_schedule(params, plate, bc, cfg, schedule)

    u = deformation(params, bc)
    est = estimate(u, plate, cfg, 40_000, np.random.default_rng(1))
    assert est.energy <= 30.0
    assert est.tolerance <= 0.2

    # energy trends downwards over the last quarter of logged steps
    main = [row for row in rows if row.phase == "main"]
    tail = main[-(len(main) // 4) :]
    slope = np.polyfit([row.step for row in tail], [row.E for row in tail], 1)[0]
    assert slope <= 0.0
