import numpy as np
import pytest

from chfdiff import dataset as ds, diffusion, noisenet, synthetic
from chfdiff.errors import CheckpointError, ConfigError, NonFiniteError, ShapeError
from chfdiff.schedule import DiffusionSchedule, sigmoid_schedule

import desk


def test_published_recipes():
    dm = diffusion.TrainConfig.published("dm")
    assert (dm.T, dm.epochs, dm.batch_size, dm.lr, dm.ema_mu) == (100, 1200, 64, 1e-3, 0.9)
    assert (dm.beta_min, dm.beta_max, dm.schedule) == (1e-5, 1e-2, "sigmoid")
    cdm = diffusion.TrainConfig.published("cdm")
    assert (cdm.T, cdm.epochs, cdm.batch_size, cdm.lr, len(cdm.hidden)) == (200, 7500, 300, 1e-4, 6)
    assert cdm.data_columns == ("chf",) and cdm.cond_columns == ("P", "G", "D", "L", "x_out")
    assert dm.data_columns == ("P", "G", "D", "L", "x_out", "chf") and dm.cond_columns == ()


@pytest.mark.parametrize("kw", [dict(mode="gan"), dict(epochs=0), dict(lr=0.0), dict(ema_mu=2.0),
                                dict(feature_mode="q"), dict(batch_size=1.5)])
def test_config_rejects(kw):
    with pytest.raises(ConfigError):
        diffusion.TrainConfig(**kw)


def test_forward_noise_reductions():
    sch = sigmoid_schedule(10)
    x0 = np.array([0.5, -1.0, 2.0])
    np.testing.assert_array_equal(diffusion.forward_noise(x0, 4, np.zeros(3), sch),
                                  np.sqrt(sch.alpha_bar[3]) * x0)
    ident = DiffusionSchedule(np.zeros(3), np.ones(3), np.ones(3), np.zeros(3))
    np.testing.assert_array_equal(diffusion.forward_noise(x0, 2, np.ones(3), ident), x0)
    with pytest.raises(ConfigError):
        diffusion.forward_noise(x0, 11, np.zeros(3), sch)
    with pytest.raises(ShapeError):
        diffusion.forward_noise(x0, 1, np.zeros(2), sch)


@pytest.mark.parametrize("T, lo, hi", [(100, 1e-5, 1e-2), (200, 1e-4, 0.05), (7, 0.01, 0.5)])
def test_closed_form_matches_composed_kernel(T, lo, hi):
    sch = sigmoid_schedule(T, lo, hi)
    x0 = 1.7
    mean, var = x0, 0.0
    for t in range(1, T + 1):
        # one-step kernel N(sqrt(1 - beta) x, beta) composed with the running Gaussian
        mean = np.sqrt(1.0 - sch.beta[t - 1]) * mean
        var = (1.0 - sch.beta[t - 1]) * var + sch.beta[t - 1]
        assert abs(mean - np.sqrt(sch.alpha_bar[t - 1]) * x0) < 1e-12
        assert abs(var - (1.0 - sch.alpha_bar[t - 1])) < 1e-12


def test_smoke_training_loss_decreases():
    recs = synthetic.chf_records(500, 2)
    cfg = diffusion.TrainConfig.published("cdm", epochs=50, batch_size=64, lr=1e-3, hidden=(32, 32), seed=1)
    seen = []
    ckpt, losses = diffusion.train(recs, cfg, progress=lambda e, l: seen.append(e))
    assert len(losses) == 50 and seen == list(range(1, 51))
    smooth = np.array([np.median(losses[max(0, i - 2):i + 3]) for i in range(50)])
    assert smooth[-1] < smooth[0]
    assert ckpt.ema.params is not None and ckpt.scaler.columns == (*cfg.cond_columns, "chf")


def test_training_is_deterministic():
    recs = synthetic.chf_records(100, 2)
    cfg = diffusion.TrainConfig.published("cdm", epochs=3, batch_size=32, lr=1e-3, hidden=(8,), seed=4)
    (a, la), (b, lb) = diffusion.train(recs, cfg), diffusion.train(recs, cfg)
    assert np.array_equal(la, lb)
    assert all(np.array_equal(p, q) for p, q in zip(a.model.params(), b.model.params()))


def test_non_finite_loss_aborts_with_location(monkeypatch):
    def broken(*args, **kw):
        raise NonFiniteError("non-finite loss nan")
    monkeypatch.setattr(noisenet, "loss_and_grads", broken)
    cfg = diffusion.TrainConfig.published("cdm", epochs=2, hidden=(4,))
    with pytest.raises(NonFiniteError, match="epoch 1, batch 0"):
        diffusion.train(synthetic.chf_records(20, 0), cfg)


def test_zero_model_without_noise_is_pure_rescaling():
    sch = sigmoid_schedule(30, 1e-3, 0.1)
    m = noisenet.init(0, 6, 0, (4,))
    m = m.with_params([np.zeros_like(p) for p in m.params()])
    noise = np.zeros((2, 30, 6))
    noise[:, 0, :] = np.random.default_rng(0).standard_normal((2, 6))
    x0, snaps = diffusion.reverse_chain(m, sch, noise, snapshot_steps=(30, 10))
    np.testing.assert_allclose(x0, noise[:, 0, :] / np.sqrt(sch.alpha_bar[-1]), rtol=1e-12)
    np.testing.assert_allclose(snaps[10], noise[:, 0, :] / np.sqrt(np.prod(sch.alpha[10:])), rtol=1e-12)
    np.testing.assert_array_equal(snaps[30], noise[:, 0, :])


def test_last_step_adds_no_noise():
    sch = sigmoid_schedule(5, 1e-3, 0.1)
    m = noisenet.init(1, 1, 0, (3,))
    base = np.random.default_rng(2).standard_normal((1, 5, 1))
    # row j of the block feeds step t = T - j + 1, so row 5 would be step 0 and is never used
    got, _ = diffusion.reverse_chain(m, sch, base)
    assert base.shape[1] == 5
    x = base[:, 0, :]
    for t in range(5, 0, -1):
        b, a, ab, s = sch.at(t)
        x = (x - b / np.sqrt(1 - ab) * noisenet.forward(m, x, t)) / np.sqrt(a)
        if t > 1:
            x = x + s * base[:, 5 - t + 1, :]
    np.testing.assert_allclose(got, x, rtol=1e-13)


def test_reverse_chain_shape_check():
    with pytest.raises(ShapeError):
        diffusion.reverse_chain(noisenet.init(0, 1, 0, (3,)), sigmoid_schedule(5), np.zeros((1, 4, 1)))


@pytest.fixture(scope="module")
def tiny_cdm():
    recs = synthetic.chf_records(120, 8)
    cfg = diffusion.TrainConfig.published("cdm", epochs=2, batch_size=40, lr=1e-3, hidden=(8, 8), T=20, seed=2)
    return diffusion.train(recs, cfg)[0], recs


@pytest.fixture(scope="module")
def tiny_dm():
    recs = synthetic.mixture_records(100, 3)
    cfg = diffusion.TrainConfig.published("dm", epochs=2, hidden=(8,), T=15)
    return diffusion.train(recs, cfg)[0]


def test_sample_dm_deterministic(tiny_dm):
    a = diffusion.sample_dm(tiny_dm, 7, seed=3)
    assert a.shape == (7, 6)
    assert np.array_equal(a, diffusion.sample_dm(tiny_dm, 7, seed=3))
    # row i depends only on seed + i
    assert np.array_equal(a[2:], diffusion.sample_dm(tiny_dm, 5, seed=5))
    assert diffusion.sample_dm(tiny_dm, 0).shape == (0, 6)
    with pytest.raises(CheckpointError):
        diffusion.sample_cdm(tiny_dm, np.zeros((1, 5)))


def test_sample_cdm_rows_and_errors(tiny_cdm):
    ckpt, recs = tiny_cdm
    cond, _ = ds.select_features(recs[:3], "x")
    twice = np.vstack([cond[:1], cond[:1]])
    a = diffusion.sample_cdm(ckpt, twice, seeds=[9, 9])
    assert a[0] == a[1]
    full = diffusion.sample_cdm(ckpt, cond, seed=4)
    assert full.shape == (3,) and np.array_equal(full, diffusion.sample_cdm(ckpt, cond, seed=4))
    assert full[1] == diffusion.sample_cdm(ckpt, cond[1:2], seed=5)[0]
    with pytest.raises(CheckpointError):
        diffusion.sample_cdm(ckpt, cond[:, :4])
    with pytest.raises(CheckpointError):
        diffusion.sample_dm(ckpt, 3)


def test_live_and_ema_weights_differ(tiny_cdm):
    ckpt, recs = tiny_cdm
    cond, _ = ds.select_features(recs[:4], "x")
    assert not np.array_equal(diffusion.sample_cdm(ckpt, cond, use_ema=True),
                              diffusion.sample_cdm(ckpt, cond, use_ema=False))


def test_summarize_draws_arithmetic():
    e = diffusion.summarize_draws([1.0], [90.0, 110.0])
    assert (e.mu_samples, e.sigma_samples, e.relative_std, e.n) == (100.0, 10.0, 10.0, 2)
    assert diffusion.summarize_draws([1.0], [-1.0, 1.0]).relative_std is None
    assert diffusion.summarize_draws([1.0], [3.0, 4.0], retain=False).draws is None


def test_uq_constant_sampler_and_seed_layout():
    calls = []

    def sampler(conditions, seeds):
        calls.append((conditions.copy(), seeds.copy()))
        return np.full(len(seeds), 2500.0)

    cond = np.arange(10.0).reshape(2, 5)
    ens = diffusion.uq_ensemble(None, cond, n=4, seed=100, sampler=sampler)
    assert [e.sigma_samples for e in ens] == [0.0, 0.0]
    assert [e.relative_std for e in ens] == [0.0, 0.0]
    (c, seeds), = calls
    assert seeds.tolist() == [100, 101, 102, 103, 104, 105, 106, 107]
    np.testing.assert_array_equal(c[4:], np.repeat(cond[1:], 4, axis=0))
    with pytest.raises(ConfigError):
        diffusion.uq_ensemble(None, cond, n=1, sampler=sampler)


def test_uq_matches_independent_chains(tiny_cdm):
    ckpt, recs = tiny_cdm
    cond, _ = ds.select_features(recs[:3], "x")
    ens = diffusion.uq_ensemble(ckpt, cond, n=6, seed=10)
    for r, e in enumerate(ens):
        direct = diffusion.sample_cdm(ckpt, np.repeat(cond[r:r + 1], 6, axis=0), seed=10 + 6 * r)
        np.testing.assert_array_equal(e.draws, direct)
        assert abs(e.mu_samples - e.draws.mean()) <= 1e-12 * abs(e.mu_samples)
        assert abs(e.sigma_samples - np.sqrt(np.mean((e.draws - e.draws.mean()) ** 2))) <= 1e-12 * e.sigma_samples
    parallel = diffusion.uq_ensemble(ckpt, cond, n=6, seed=10, workers=3)
    assert all(np.array_equal(a.draws, b.draws) for a, b in zip(ens, parallel))


def test_trajectory_steps():
    assert diffusion.trajectory_steps(200, 40) == [200, 160, 120, 80, 40, 0]
    assert diffusion.trajectory_steps(200, 200) == [200, 0]
    assert diffusion.trajectory_steps(10, 4) == [10, 6, 2, 0]
    with pytest.raises(ConfigError):
        diffusion.trajectory_steps(10, 0)


def test_trajectory_consistent_with_samplers(tiny_cdm, tiny_dm):
    ckpt, recs = tiny_cdm
    cond, _ = ds.select_features(recs[:5], "x")
    traj = diffusion.trajectory(ckpt, cond, stride=8, seed=3)
    assert traj.steps == [20, 12, 4, 0]
    assert np.array_equal(traj.snapshots[-1][1], diffusion.sample_cdm(ckpt, cond, seed=3))
    start = diffusion.chain_noise(3 + np.arange(5), 20, 1)[:, 0, :]
    np.testing.assert_allclose(traj.snapshots[0][1], ckpt.scaler.subset(["chf"]).inverse_transform(start)[:, 0])
    dm_traj = diffusion.trajectory(tiny_dm, stride=15, seed=1, n=4)
    assert dm_traj.steps == [15, 0]
    assert np.array_equal(dm_traj.snapshots[-1][1], diffusion.sample_dm(tiny_dm, 4, seed=1))
    with pytest.raises(ConfigError):
        diffusion.trajectory(ckpt, None)


def test_desk_dm_moments_match_truth():
    """Generated mixture moments in standardized units: means 0.15, covariances 0.2."""
    run = desk.dm_run()
    gen = diffusion.sample_dm(run.ckpt, 2000, seed=11)
    truth = synthetic.gaussian_mixture(200000, 99)
    scale = truth.std(axis=0)
    zg, zt = gen / scale, truth / scale
    assert np.max(np.abs(zg.mean(axis=0) - zt.mean(axis=0))) < 0.15
    assert np.max(np.abs(np.cov(zg.T) - np.cov(zt.T))) < 0.2
