"""Synthetic linear Gaussian SEMs with mixed (pervasive + localized) latent confounding."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .linalg import NotSpd, inv_spd, symmetrize


@dataclass
class SimConfig:
    """Generator settings for one ground-truth model and dataset.

    Loadings: each localized-confounder column of V has exactly `s_active`
    nonzeros drawn N(0, v_loading_sd^2); pervasive loadings U are dense
    N(0, (u_d / sqrt(p))^2), so one pervasive factor contributes covariance
    mass on the order of u_d^2 overall.
    """

    p: int = 40
    edge_density: float = 0.08
    weight_range: tuple[float, float] = (0.5, 2.0)
    idio_variance: float = 0.36
    r_s: int = 15
    s_active: int = 6
    v_loading_sd: float = 0.3
    q_p: int = 3
    u_d: float = 1.0
    n: int = 600
    seed: int = 0

    def validate(self):
        if not (0.0 <= self.edge_density <= 1.0):
            raise ValueError("edge_density must lie in [0, 1]")
        if self.idio_variance <= 0:
            raise ValueError("idio_variance must be positive")
        if self.p < 1 or self.n < 0:
            raise ValueError("p must be >= 1 and n >= 0")
        if self.r_s < 0 or self.q_p < 0:
            raise ValueError("factor counts must be nonnegative")
        if not (1 <= self.s_active <= self.p):
            raise ValueError("s_active must lie in [1, p]")
        lo, hi = self.weight_range
        if not (0 < lo <= hi):
            raise ValueError("weight_range must satisfy 0 < lo <= hi")


@dataclass
class GroundTruthModel:
    """Generating tuple (B, W, V, U): DAG weights, idiosyncratic standard
    deviations (vector), localized loadings, pervasive loadings."""

    p: int
    B: np.ndarray
    W: np.ndarray
    V: np.ndarray
    U: np.ndarray
    seed: int = 0

    def validate(self):
        if self.B.shape != (self.p, self.p):
            raise ValueError("B must be p x p")
        if np.any(np.diagonal(self.B) != 0):
            raise ValueError("diag(B) must be zero")
        if np.any(self.W <= 0):
            raise ValueError("idiosyncratic standard deviations must be positive")
        if topological_order(self.B) is None:
            raise ValueError("support of B must be acyclic")
        for k in range(self.V.shape[1]):
            sup = np.flatnonzero(self.V[:, k])
            sub = self.B[np.ix_(sup, sup)]
            if np.any(sub != 0):
                raise ValueError(
                    "bow-freeness w.r.t. V violated: localized confounder "
                    f"column {k} co-supports a directed edge"
                )

    @property
    def T(self) -> np.ndarray:
        return np.eye(self.p) - self.B


@dataclass
class Dataset:
    X: np.ndarray
    n: int
    model: GroundTruthModel | None = None
    grid_cell: tuple | None = None


@dataclass(frozen=True)
class PopulationComponents:
    """Population matrices implied by a ground-truth model.

    Noise-level: Omega (noise covariance), D_eps (diagonal idiosyncratic
    precision), A (localized overlap matrix), C_eps (localized coupling),
    S_eps (structured non-pervasive precision), L_eps (pervasive low-rank
    correction). Observed-level: Sigma, Theta, S_x, L_x, Sigma_cond.
    """

    Omega: np.ndarray
    Sigma: np.ndarray
    Theta: np.ndarray
    D_eps: np.ndarray
    A: np.ndarray
    C_eps: np.ndarray
    S_eps: np.ndarray
    L_eps: np.ndarray
    S_x: np.ndarray
    L_x: np.ndarray
    Sigma_cond: np.ndarray


def topological_order(b) -> np.ndarray | None:
    """A topological order of support(B), or None if the support has a cycle."""
    b = np.asarray(b)
    p = b.shape[0]
    adj = b != 0
    indeg = adj.sum(axis=0)
    order = []
    ready = sorted(np.flatnonzero(indeg == 0).tolist())
    indeg = indeg.astype(int)
    while ready:
        i = ready.pop(0)
        order.append(i)
        for j in np.flatnonzero(adj[i]):
            indeg[j] -= 1
            if indeg[j] == 0:
                ready.append(int(j))
        ready.sort()
    if len(order) != p:
        return None
    return np.array(order, dtype=int)


def sample_dag(config: SimConfig, rng: np.random.Generator) -> np.ndarray:
    """Random-order DAG: each order-respecting pair enters independently with
    probability edge_density; weights get random sign and Unif(lo, hi) magnitude."""
    config.validate()
    p = config.p
    order = rng.permutation(p)
    upper = np.triu(np.ones((p, p), dtype=bool), k=1)
    include = (rng.random((p, p)) < config.edge_density) & upper
    lo, hi = config.weight_range
    mags = rng.uniform(lo, hi, size=(p, p))
    signs = rng.integers(0, 2, size=(p, p)) * 2 - 1
    b_ordered = np.where(include, signs * mags, 0.0)
    b = np.zeros((p, p))
    b[np.ix_(order, order)] = b_ordered
    return b


def sample_loadings(config: SimConfig, rng: np.random.Generator):
    """Localized loadings V (column-sparse, s_active rows each) and dense
    pervasive loadings U."""
    config.validate()
    p = config.p
    v = np.zeros((p, config.r_s))
    for k in range(config.r_s):
        rows = rng.choice(p, size=config.s_active, replace=False)
        v[rows, k] = rng.normal(0.0, config.v_loading_sd, size=config.s_active)
    u = rng.normal(0.0, config.u_d / np.sqrt(p), size=(p, config.q_p))
    return v, u


def enforce_bow_free_localized(b, v) -> np.ndarray:
    """Drop directed edges between any pair co-supported by a V column.

    Edge deletion preserves acyclicity; V is the design quantity and is kept.
    """
    b = np.array(b, dtype=float, copy=True)
    for k in range(v.shape[1]):
        sup = np.flatnonzero(v[:, k])
        b[np.ix_(sup, sup)] = 0.0
    return b


def simulate_model(config: SimConfig, rng: np.random.Generator | None = None) -> GroundTruthModel:
    """Draw a full ground-truth model from config (DAG, loadings, bow repair)."""
    config.validate()
    if rng is None:
        rng = np.random.default_rng(config.seed)
    b = sample_dag(config, rng)
    v, u = sample_loadings(config, rng)
    b = enforce_bow_free_localized(b, v)
    w = np.full(config.p, np.sqrt(config.idio_variance))
    model = GroundTruthModel(p=config.p, B=b, W=w, V=v, U=u, seed=config.seed)
    model.validate()
    return model


def generate(model: GroundTruthModel, n: int, rng: np.random.Generator | None = None) -> Dataset:
    """Sample n rows of x = T^{-T} eps with eps = W w + V v + U u."""
    if rng is None:
        rng = np.random.default_rng(model.seed)
    p = model.p
    if n == 0:
        return Dataset(X=np.zeros((0, p)), n=0, model=model)
    eps = rng.standard_normal((n, p)) * model.W
    if model.V.shape[1]:
        eps = eps + rng.standard_normal((n, model.V.shape[1])) @ model.V.T
    if model.U.shape[1]:
        eps = eps + rng.standard_normal((n, model.U.shape[1])) @ model.U.T
    x = np.linalg.solve(model.T.T, eps.T).T
    return Dataset(X=x, n=n, model=model)


def simulate_dataset(config: SimConfig) -> Dataset:
    """Model + data from a single seeded stream (model draws first, then rows)."""
    rng = np.random.default_rng(config.seed)
    model = simulate_model(config, rng)
    return generate(model, config.n, rng)


def population_components(model: GroundTruthModel) -> PopulationComponents:
    """All population matrices of the diagonal - coupling - low-rank split.

    S_eps = D_eps - C_eps equals (W W^T + V V^T)^{-1} by Sherman-Morrison-
    Woodbury; a second application against U U^T yields Omega^{-1} =
    S_eps - L_eps, and congruence by T carries the split to the observed
    precision Theta = S_x - L_x.
    """
    p = model.p
    w2 = model.W ** 2
    d_eps = np.diag(1.0 / w2)
    v, u = model.V, model.U
    dv = v / w2[:, None]
    a = np.eye(v.shape[1]) + v.T @ dv
    if v.shape[1]:
        c_eps = symmetrize(dv @ np.linalg.solve(a, dv.T))
    else:
        c_eps = np.zeros((p, p))
    s_eps = d_eps - c_eps
    if u.shape[1]:
        su = s_eps @ u
        m = np.eye(u.shape[1]) + u.T @ su
        l_eps = symmetrize(su @ np.linalg.solve(m, su.T))
    else:
        l_eps = np.zeros((p, p))
    t = model.T
    s_x = symmetrize(t @ s_eps @ t.T)
    l_x = symmetrize(t @ l_eps @ t.T)
    omega = np.diag(w2) + v @ v.T + u @ u.T
    t_inv = np.linalg.inv(t)
    sigma = symmetrize(t_inv.T @ omega @ t_inv)
    try:
        theta = inv_spd(sigma)
        sigma_cond = inv_spd(s_x)
    except NotSpd as exc:
        raise NotSpd("degenerate model: population inverse failed",
                     min_eigenvalue=exc.min_eigenvalue) from None
    return PopulationComponents(
        Omega=omega, Sigma=sigma, Theta=theta, D_eps=d_eps, A=a,
        C_eps=c_eps, S_eps=s_eps, L_eps=l_eps, S_x=s_x, L_x=l_x,
        Sigma_cond=sigma_cond,
    )


def config_for_cell(base: SimConfig, q_p: float, u_d: float, l_d: float, seed: int) -> SimConfig:
    """Config for one experiment grid cell.

    The localized density l_d maps to the number of localized confounders as
    r_s = round(l_d * 5 * p); l_d = 0.075 reproduces the default r_s = 15 at
    p = 40, and l_d = 0 removes localized confounding entirely.
    """
    r_s = int(round(l_d * 5 * base.p))
    return replace(base, q_p=int(q_p), u_d=float(u_d), r_s=r_s, seed=int(seed))
