import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import solve_discrete_lyapunov

from conftest import random_stable_model
from ouarea._resample import (
    MIN_BLOCKS,
    default_block_len,
    relaxation_time,
    resample_indices,
    resampled_sums,
)
from ouarea.errors import (
    ConfigError,
    DimensionMismatch,
    InvalidBlock,
    InvalidInit,
    InvalidParams,
    TooShort,
    UnstableDrift,
    UnstableStep,
)
from ouarea.io import parse_run_config, read_trajectory_csv, write_trajectory_csv
from ouarea.model import build_model, steady_state
from ouarea.simulate import (
    SimConfig,
    Trajectory,
    default_threads,
    ensemble,
    euler_step_kernel,
    exact_step_kernel,
    iter_ensemble,
    simulate,
)
from ouarea.twodim import StandardParams2D, canonical_model


@pytest.fixture
def planar():
    return canonical_model(StandardParams2D(1.0, 0.5, 1.0))


class TestKernels:
    def test_exact_vs_eigendecomposition(self, rng):
        for d in (2, 3, 4):
            m = random_stable_model(rng, d)
            Phi, Q = exact_step_kernel(m, 0.37)
            w, V = np.linalg.eig(-m.A * 0.37)
            ref = (V @ np.diag(np.exp(w)) @ np.linalg.inv(V)).real
            np.testing.assert_allclose(Phi, ref, rtol=1e-10, atol=1e-12)
            S = steady_state(m).sigma
            np.testing.assert_allclose(Phi @ S @ Phi.T + Q, S, atol=1e-12)
            assert np.linalg.eigvalsh(Q).min() >= -1e-14

    def test_small_step_covariance(self, planar):
        dt = 1e-5
        _, Q = exact_step_kernel(planar, dt)
        np.testing.assert_allclose(Q / dt, planar.D, rtol=1e-4, atol=1e-8)

    def test_euler_guard(self, planar):
        euler_step_kernel(planar, 0.01)
        with pytest.raises(UnstableStep):
            euler_step_kernel(planar, 0.5 / np.linalg.norm(planar.A, 2))

    def test_negative_step(self, planar):
        with pytest.raises(InvalidParams):
            exact_step_kernel(planar, -1.0)


class TestConfig:
    @pytest.mark.parametrize(
        "kw",
        [{"dt": 0.0, "n_steps": 10}, {"dt": 0.1, "n_steps": 0}, {"dt": 0.1, "n_steps": 5, "scheme": "rk4"}],
    )
    def test_invalid(self, kw):
        with pytest.raises(InvalidParams):
            SimConfig(**kw)

    @pytest.mark.parametrize(
        "init",
        ["warm", ("point", [1.0]), ("point", [np.nan, 0.0]), ("gaussian", [[1, 2], [0, 1]]), ("gaussian", -np.eye(2)), ("box", 1), 3],
    )
    def test_bad_init(self, planar, init):
        with pytest.raises(InvalidInit):
            simulate(planar, SimConfig(0.1, 5, init=init))

    def test_point_init(self, planar):
        tr = simulate(planar, SimConfig(0.1, 5, init=("point", [2.0, -1.0])))
        np.testing.assert_array_equal(tr.states[0], [2.0, -1.0])

    def test_trajectory_validation(self):
        with pytest.raises(InvalidParams):
            Trajectory(0.0, np.zeros((3, 2)))
        with pytest.raises(InvalidParams):
            Trajectory(0.1, [[0.0, np.inf]])
        with pytest.raises(DimensionMismatch):
            Trajectory(0.1, np.zeros((2, 2, 2)))

    def test_segment(self, planar):
        tr = simulate(planar, SimConfig(0.1, 20))
        seg = tr.segment(5, 10)
        assert seg.n_steps == 5 and seg.t0 == pytest.approx(0.5)
        np.testing.assert_array_equal(seg.states, tr.states[5:11])


class TestDeterminism:
    def test_same_seed(self, planar):
        cfg = SimConfig(0.01, 500, seed=7)
        np.testing.assert_array_equal(simulate(planar, cfg).states, simulate(planar, cfg).states)

    def test_different_seed(self, planar):
        a = simulate(planar, SimConfig(0.01, 50, seed=7)).states
        b = simulate(planar, SimConfig(0.01, 50, seed=8)).states
        assert not np.array_equal(a, b)

    def test_threads_do_not_matter(self, planar):
        cfg = SimConfig(0.01, 300, seed=3)
        one = ensemble(planar, cfg, 7, threads=1)
        many = ensemble(planar, cfg, 7, threads=3)
        for a, b in zip(one, many):
            np.testing.assert_array_equal(a.states, b.states)
        np.testing.assert_array_equal(one[0].states, simulate(planar, cfg).states)
        np.testing.assert_array_equal(one[4].states, simulate(planar, cfg, replica=4).states)

    def test_map(self, planar):
        out = list(iter_ensemble(planar, SimConfig(0.01, 10), 4, fn=lambda tr: tr.states[-1, 0], threads=2))
        assert len(out) == 4 and all(isinstance(v, float) for v in out)

    def test_env_threads(self, monkeypatch):
        monkeypatch.delenv("OUAREA_THREADS", raising=False)
        assert default_threads() == 1
        monkeypatch.setenv("OUAREA_THREADS", "3")
        assert default_threads() == 3
        for bad in ("0", "x"):
            monkeypatch.setenv("OUAREA_THREADS", bad)
            with pytest.raises(InvalidParams):
                default_threads()


class TestStatistics:
    def test_stationary_moments(self, rng):
        # batch means over independent trajectories
        m = random_stable_model(rng, 3)
        S = steady_state(m).sigma
        cfg = SimConfig(0.05, 2000, seed=11)
        covs = np.array([np.cov(tr.states.T, bias=True) for tr in ensemble(m, cfg, 40)])
        z = (covs.mean(0) - S) / (covs.std(0, ddof=1) / np.sqrt(len(covs)))
        assert np.abs(z).max() < 4.5

    def test_lag_one_transition(self, planar):
        cfg = SimConfig(0.1, 200_000, seed=2)
        tr = simulate(planar, cfg)
        X0, X1 = tr.states[:-1], tr.states[1:]
        Phi_hat = np.linalg.solve(X0.T @ X0, X0.T @ X1).T
        Phi, _ = exact_step_kernel(planar, 0.1)
        np.testing.assert_allclose(Phi_hat, Phi, atol=0.01)

    def test_euler_stationary_bias(self, planar):
        # the Euler chain's own stationary covariance differs from Sigma by O(dt)
        S = steady_state(planar).sigma
        errs = []
        for dt in (0.04, 0.02, 0.01, 0.005):
            F, Q = euler_step_kernel(planar, dt)
            errs.append(np.abs(solve_discrete_lyapunov(F, Q) - S).max())
        slope = np.polyfit(np.log([0.04, 0.02, 0.01, 0.005]), np.log(errs), 1)[0]
        assert slope == pytest.approx(1.0, abs=0.1)

    def test_euler_simulation_moments(self, planar):
        dt = 0.01
        F, Q = euler_step_kernel(planar, dt)
        target = solve_discrete_lyapunov(F, Q)
        tr = simulate(planar, SimConfig(dt, 400_000, scheme="euler", seed=5))
        np.testing.assert_allclose(np.cov(tr.states.T), target, atol=0.03)


class TestResample:
    def test_indices_circular(self):
        rng = np.random.default_rng(0)
        idx = resample_indices(10, 4, rng)
        assert idx.shape == (10,) and idx.min() >= 0 and idx.max() < 10
        d = np.diff(idx)
        assert np.all((d == 1) | (d == -9) | np.isin(np.arange(1, 10), [4, 8]))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(5, 200), st.integers(1, 5), st.integers(0, 2**31))
    def test_sums_match_explicit_gather(self, n, b, seed):
        b = min(b, n)
        x = np.random.default_rng(seed).normal(size=n)
        sums = resampled_sums(x, b, 5, np.random.default_rng(seed))
        rng = np.random.default_rng(seed)
        n_blocks = -(-n // b)
        starts = rng.integers(0, n, size=(5, n_blocks))
        for k in range(5):
            idx = ((starts[k][:, None] + np.arange(b)).ravel()[:n]) % n
            assert sums[k] == pytest.approx(x[idx].sum(), rel=1e-9, abs=1e-9)

    def test_invalid_block(self):
        with pytest.raises(InvalidBlock):
            resampled_sums(np.ones(10), 0, 5, np.random.default_rng(0))
        with pytest.raises(InvalidBlock):
            resampled_sums(np.ones(10), 11, 5, np.random.default_rng(0))

    def test_iid_variance(self):
        x = np.random.default_rng(1).normal(size=5000)
        sums = resampled_sums(x, 1, 4000, np.random.default_rng(2))
        assert sums.std() == pytest.approx(np.sqrt(5000), rel=0.05)

    def test_relaxation_time(self, planar):
        tr = simulate(planar, SimConfig(0.01, 200_000, seed=1))
        # slowest rate is the real part of the eigenvalues of A
        tau = 1.0 / np.linalg.eigvals(planar.A).real.min()
        assert relaxation_time(tr.states, 0.01) == pytest.approx(tau, rel=0.1)

    def test_block_bounds(self, planar):
        tr = simulate(planar, SimConfig(0.01, 50_000, seed=1))
        b, capped = default_block_len(tr.states, 0.01)
        assert np.ceil(50_000 ** (1 / 3)) <= b <= 50_000 // MIN_BLOCKS and not capped
        short = simulate(planar, SimConfig(0.01, 200, seed=1))
        b, capped = default_block_len(short.states, 0.01)
        assert b == 20 and capped


class TestCsv:
    def test_round_trip(self, planar, tmp_path):
        tr = simulate(planar, SimConfig(1e-3, 1000, seed=4))
        path = tmp_path / "x.csv"
        write_trajectory_csv(tr, path)
        back = read_trajectory_csv(path)
        np.testing.assert_array_equal(back.states, tr.states)
        assert back.dt == 1e-3
        assert path.read_text().splitlines()[0] == "t,x1,x2"

    def test_long_time_grid(self, tmp_path):
        tr = Trajectory(0.01, np.zeros((200_001, 1)), t0=1e4)
        write_trajectory_csv(tr, tmp_path / "long.csv")
        assert read_trajectory_csv(tmp_path / "long.csv").dt == 0.01

    @pytest.mark.parametrize(
        "text, exc",
        [
            ("t,y1\n0,1\n1,2\n", ConfigError),
            ("t,x1\n0,1\n1,2\n3,4\n", ConfigError),
            ("t,x1\n0,1\n1,nan\n", ConfigError),
            ("t,x1\n0,1\n1,2,3\n", ConfigError),
            ("t,x1\n0,1\n", TooShort),
            ("t,x1\n", TooShort),
        ],
    )
    def test_rejects(self, tmp_path, text, exc):
        path = tmp_path / "bad.csv"
        path.write_text(text)
        with pytest.raises(exc):
            read_trajectory_csv(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            read_trajectory_csv(tmp_path / "nope.csv")


class TestRunConfig:
    def test_standard_params(self):
        model, params, cfg = parse_run_config(
            {"model": {"lambda_bar": 1, "mu": 0.5, "omega": 1}, "sim": {"dt": 0.01, "T": 2, "seed": 3}}
        )
        assert cfg.n_steps == 200 and cfg.seed == 3 and params.omega == 1.0
        np.testing.assert_allclose(model.A, [[1.5, 2.0], [-2.0, 0.5]])

    def test_init_forms(self):
        base = {"model": {"A": [[1, 0], [0, 1]], "G": [[1, 0], [0, 1]]}}
        _, _, cfg = parse_run_config({**base, "sim": {"dt": 0.1, "n_steps": 3, "init": {"point": [1, 2]}}})
        assert cfg.init == ("point", [1, 2])

    @pytest.mark.parametrize(
        "obj",
        [
            {"model": {"lambda_bar": 1, "mu": 0.5, "omega": 1}},
            {"model": {"lambda_bar": 1, "mu": 0.5, "omega": 1}, "sim": {"T": 1}},
            {"model": {"lambda_bar": 1, "mu": 0.5, "omega": 1}, "sim": {"dt": "x", "T": 1}},
            {"model": {"lambda_bar": 1, "mu": 0.5, "omega": 1, "A": [[1]]}, "sim": {"dt": 1, "T": 1}},
            {"model": {"lambda_bar": 1, "mu": 0.5, "omega": 1}, "sim": {"dt": 1, "T": 1, "init": "hot"}},
            [],
        ],
    )
    def test_rejects(self, obj):
        with pytest.raises(ConfigError):
            parse_run_config(obj)

    def test_unstable(self):
        with pytest.raises(UnstableDrift):
            parse_run_config({"model": {"A": [[1, 0], [0, -1]], "G": [[1, 0], [0, 1]]}, "sim": {"dt": 1, "T": 1}})

    def test_shipped_configs(self):
        import pathlib

        root = pathlib.Path(__file__).resolve().parents[1] / "configs"
        for name in ("canonical", "equilibrium", "strong_circulation", "three_dim"):
            model, _, cfg = parse_run_config(json.loads((root / f"{name}.json").read_text()))
            assert cfg.n_steps > 0
