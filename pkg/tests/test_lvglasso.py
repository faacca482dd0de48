import numpy as np
import pytest

from dcldecor.glasso import GlassoConfig
from dcldecor.glasso import fit as glasso_fit
from dcldecor.linalg import cholesky_spd, symmetrize
from dcldecor.lvglasso import (
    LocalityRegularizer,
    LvglassoConfig,
    PrecisionSplit,
    fit,
)
from dcldecor.simulate import (
    GroundTruthModel,
    SimConfig,
    generate,
    population_components,
    simulate_model,
)


def objective(sigma, s, low, lam_s, lam_star):
    theta = s - low
    lower = cholesky_spd(theta)
    logdet = 2.0 * np.log(np.diagonal(lower)).sum()
    l1 = np.abs(s).sum() - np.abs(np.diagonal(s)).sum()
    return -logdet + (sigma * theta).sum() + lam_s * l1 + lam_star * np.trace(low)


def assert_feasible(split: PrecisionSplit):
    assert np.linalg.eigvalsh(split.S_x)[0] > 0
    assert np.linalg.eigvalsh(split.L_x)[0] >= -1e-8
    assert np.linalg.eigvalsh(split.S_x - split.L_x)[0] > 0


def test_identity_input_no_latent_structure():
    split = fit(np.eye(6), config=LvglassoConfig(lambda_star=10.0))
    assert split.converged
    assert np.allclose(split.S_x, np.eye(6), atol=1e-5)
    assert np.abs(split.L_x).max() <= 1e-8
    assert_feasible(split)


def test_pure_pervasive_model_rank_and_support():
    # one strong dense factor, no localized confounding
    cfg = SimConfig(p=8, edge_density=0.25, r_s=0, s_active=1, q_p=1, u_d=2.0,
                    seed=13)
    rng = np.random.default_rng(cfg.seed)
    model = simulate_model(cfg, rng)
    pop = population_components(model)
    data = generate(model, 100_000, rng)
    sigma_hat = data.X.T @ data.X / data.n
    # at p=8 the trace/l1 trade-off needs lambda_star/lambda_s below ~2p/pi-1,
    # so the p=40 default ratio of 5 is dropped to 3 here
    split = fit(sigma_hat, config=LvglassoConfig(lambda_s=0.001,
                                                 lambda_star=0.003,
                                                 max_iter=3000))
    assert split.converged
    assert_feasible(split)
    ev = np.linalg.eigvalsh(split.L_x)
    assert np.sum(ev > 0.05 * ev[-1]) == 1
    strong = (np.abs(pop.S_x) > 0.1) & ~np.eye(8, dtype=bool)
    recovered = np.abs(split.S_x) > 1e-8
    assert np.all(recovered[strong])


def test_large_trace_penalty_matches_plain_glasso():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((9, 9))
    sigma = symmetrize(a @ a.T / 9 + np.eye(9))
    lam_s = 0.05
    split = fit(sigma, LocalityRegularizer(weight=lam_s),
                LvglassoConfig(lambda_s=lam_s, lambda_star=1e3))
    assert np.abs(split.L_x).max() <= 1e-8
    ref = glasso_fit(sigma, GlassoConfig(lambda_off=lam_s)).precision
    assert np.abs(split.S_x - ref).max() <= 1e-4


def test_objective_not_above_initialization():
    rng = np.random.default_rng(4)
    a = rng.standard_normal((7, 7))
    sigma = symmetrize(a @ a.T / 7 + np.eye(7))
    cfg = LvglassoConfig()
    split = fit(sigma, config=cfg)
    s0 = np.diag(1.0 / np.diagonal(sigma))
    f0 = objective(sigma, s0, np.zeros((7, 7)), cfg.lambda_s, cfg.lambda_star)
    f1 = objective(sigma, split.S_x, split.L_x, cfg.lambda_s, cfg.lambda_star)
    assert f1 <= f0 + 1e-9


def test_stationarity_gap_small_on_converged_runs():
    rng = np.random.default_rng(5)
    for _ in range(5):
        a = rng.standard_normal((6, 6))
        sigma = symmetrize(a @ a.T / 6 + np.eye(6))
        split = fit(sigma, config=LvglassoConfig())
        assert split.converged
        assert split.final_gap <= 1e-3


def test_population_recovery_disjoint_supports():
    # strong pervasive signal; lambdas tuned over a documented 3x3 grid
    p = 12
    rng = np.random.default_rng(6)
    v = np.zeros((p, 3))
    for k in range(3):
        v[4 * k:4 * k + 3, k] = rng.uniform(0.4, 0.7, 3) * np.sign(rng.standard_normal(3))
    u = rng.normal(0.0, 2.0 / np.sqrt(p), size=(p, 1))
    b = np.zeros((p, p))
    b[3, 11] = 1.0  # one edge away from all confounder supports
    model = GroundTruthModel(p=p, B=b, W=np.full(p, 0.6), V=v, U=u)
    model.validate()
    pop = population_components(model)
    # documented 3x3 grid: lambda_s levels x trace/l1 ratios
    best = np.inf
    for lam_s in (3e-4, 1e-3, 3e-3):
        for ratio in (2.0, 4.0, 6.0):
            split = fit(pop.Sigma,
                        config=LvglassoConfig(lambda_s=lam_s,
                                              lambda_star=ratio * lam_s,
                                              max_iter=3000))
            err = np.linalg.norm(split.S_x - pop.S_x) / np.linalg.norm(pop.S_x)
            best = min(best, err)
    assert best <= 0.05


def test_banded_regularizer_masks_support():
    rng = np.random.default_rng(7)
    a = rng.standard_normal((8, 8))
    sigma = symmetrize(a @ a.T / 8 + np.eye(8))
    reg = LocalityRegularizer(kind="banded", bandwidth=1, weight=0.01)
    split = fit(sigma, reg, LvglassoConfig(lambda_star=1e3))
    idx = np.arange(8)
    outside = np.abs(idx[:, None] - idx[None, :]) > 1
    assert np.abs(split.S_x[outside]).max() == 0.0
    assert_feasible(split)


def test_block_regularizer_masks_support():
    rng = np.random.default_rng(8)
    a = rng.standard_normal((6, 6))
    sigma = symmetrize(a @ a.T / 6 + np.eye(6))
    reg = LocalityRegularizer(kind="block", partition=((0, 1, 2), (3, 4, 5)),
                              weight=0.01)
    split = fit(sigma, reg, LvglassoConfig(lambda_star=1e3))
    assert np.abs(split.S_x[:3, 3:]).max() == 0.0
    assert_feasible(split)


def test_partition_validation():
    with pytest.raises(ValueError):
        LocalityRegularizer(kind="block", partition=((0, 1), (1, 2))).validate(3)
    with pytest.raises(ValueError):
        LocalityRegularizer(kind="nope").validate(3)


def test_feasibility_on_nonconverged_runs():
    rng = np.random.default_rng(9)
    a = rng.standard_normal((10, 10))
    sigma = symmetrize(a @ a.T / 10 + np.eye(10))
    split = fit(sigma, config=LvglassoConfig(max_iter=3))
    assert not split.converged
    assert_feasible(split)
