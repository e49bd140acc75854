"""Alternating SGD-GD trainer.

Each outer iteration runs an inner stochastic-gradient phase on the convex
theta-subproblem (prox steps onto the ball ||theta|| <= R/2, with
beta-weighted iterate averaging and optional early exit once the objective
improves on the incoming theta), then takes a single full-gradient descent
step on the hidden layer W.

Step-size policies:
  * beta: "constant_opt" uses beta = min(1/(2 L_theta), sqrt(1/(N_i sigma^2)))
    with the exact data-dependent L_theta; "fixed" must satisfy
    0 < beta <= 1/(2 L_theta).
  * gamma: "one_over_L" uses 1/L with L the W-smoothness bound evaluated at
    the worst case over the feasible ball (constant across iterations);
    "fixed" must satisfy 0 < gamma < 2/L.
  * theorem2_preset derives N_i = N_o, sigma = 1/sqrt(N_i), gamma = 1/L.

Runs are bit-reproducible from (config, dataset): all randomness flows from
one seeded generator, drawn in a fixed order.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Optional

import numpy as np

from .activations import ActivationFunction
from .diagnostics import (column_sigma_extremes, lipschitz_ball_bound,
                          lipschitz_estimates, theta_smoothness)
from .errors import ConfigError, NumericsError, ShapeError
from .model import (NetworkParams, grad_theta, grad_W, loss,
                    stationarity_system)

if TYPE_CHECKING:  # pragma: no cover
    from .dataset import Dataset

BETA_POLICIES = ("constant_opt", "fixed")
GAMMA_POLICIES = ("one_over_L", "fixed")


@dataclass(frozen=True)
class RunConfig:
    """All SGD-GD hyperparameters.

    R is the ball *diameter* parameter: the feasible set for theta is the
    origin-centred ball of radius R/2.  sigma is the total noise scale, split
    evenly over coordinates so that E||xi||^2 = sigma^2.
    """

    n_outer: int
    n_inner: int
    R: float = 4.0
    sigma: float = 0.0
    beta_policy: str = "constant_opt"
    beta: Optional[float] = None
    gamma_policy: str = "one_over_L"
    gamma: Optional[float] = None
    theorem2_preset: bool = False
    early_exit: bool = False
    seed: int = 0
    init_w_scale: float = 1.0
    init_theta_scale: float = 1.0

    def __post_init__(self):
        if self.n_outer < 0:
            raise ConfigError(f"n_outer must be >= 0, got {self.n_outer}")
        if self.n_inner < 1:
            raise ConfigError(f"n_inner must be >= 1, got {self.n_inner}")
        if not self.R > 0:
            raise ConfigError(f"R must be positive, got {self.R}")
        if self.sigma < 0:
            raise ConfigError(f"sigma must be >= 0, got {self.sigma}")
        if self.beta_policy not in BETA_POLICIES:
            raise ConfigError(f"unknown beta_policy {self.beta_policy!r}")
        if self.gamma_policy not in GAMMA_POLICIES:
            raise ConfigError(f"unknown gamma_policy {self.gamma_policy!r}")
        if self.beta_policy == "fixed" and (self.beta is None or self.beta <= 0):
            raise ConfigError("fixed beta policy needs beta > 0")
        if self.gamma_policy == "fixed" and (self.gamma is None or self.gamma <= 0):
            raise ConfigError("fixed gamma policy needs gamma > 0")
        if self.theorem2_preset and self.beta_policy != "constant_opt":
            raise ConfigError("theorem2_preset requires the constant_opt beta policy")
        if self.theorem2_preset and self.n_outer < 1:
            raise ConfigError("theorem2_preset needs n_outer >= 1")

    def to_dict(self) -> dict:
        return {
            "N_o": self.n_outer, "N_i": self.n_inner, "R": self.R,
            "sigma": self.sigma,
            "beta_policy": self.beta_policy, "beta": self.beta,
            "gamma_policy": self.gamma_policy, "gamma": self.gamma,
            "theorem2_preset": self.theorem2_preset,
            "early_exit": self.early_exit, "seed": self.seed,
            "init": {"W_scale": self.init_w_scale,
                     "theta_scale": self.init_theta_scale},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        init = data.get("init", {})
        try:
            return cls(
                n_outer=int(data["N_o"]), n_inner=int(data["N_i"]),
                R=float(data.get("R", 4.0)), sigma=float(data.get("sigma", 0.0)),
                beta_policy=data.get("beta_policy", "constant_opt"),
                beta=None if data.get("beta") is None else float(data["beta"]),
                gamma_policy=data.get("gamma_policy", "one_over_L"),
                gamma=None if data.get("gamma") is None else float(data["gamma"]),
                theorem2_preset=bool(data.get("theorem2_preset", False)),
                early_exit=bool(data.get("early_exit", False)),
                seed=int(data.get("seed", 0)),
                init_w_scale=float(init.get("W_scale", 1.0)),
                init_theta_scale=float(init.get("theta_scale", 1.0)),
            )
        except KeyError as exc:
            raise ConfigError(f"run config is missing key {exc}") from None


@dataclass
class InnerSummary:
    steps: int
    final_f: float
    beta: float
    l_theta: float
    early_exit: bool = False


TRAJECTORY_COLUMNS = ("k", "f", "grad_norm_F", "sigma_min_W", "sigma_min_D",
                      "resid_norm", "inner_steps", "inner_final_f")


@dataclass
class TrajectoryRecord:
    """Per-outer-iteration telemetry; row k < n_outer holds the quantities
    at (W_k, theta_{k+1}), the final row holds the returned iterate."""

    k: np.ndarray
    f: np.ndarray
    grad_norm: np.ndarray
    sigma_min_w: np.ndarray
    sigma_min_d: np.ndarray
    resid_norm: np.ndarray
    inner_steps: np.ndarray
    inner_final_f: np.ndarray
    derived: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.k)

    def columns(self) -> dict:
        return {
            "k": self.k, "f": self.f, "grad_norm_F": self.grad_norm,
            "sigma_min_W": self.sigma_min_w, "sigma_min_D": self.sigma_min_d,
            "resid_norm": self.resid_norm, "inner_steps": self.inner_steps,
            "inner_final_f": self.inner_final_f,
        }


def prox_ball(x, y, radius: float) -> np.ndarray:
    """Prox-mapping P_x(y) over the origin-centred ball: the projection of
    x - y onto {z : ||z||_2 <= radius}."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ShapeError(f"x and y must be equal-length vectors, got {x.shape}, {y.shape}")
    if not radius > 0:
        raise ValueError(f"radius must be positive, got {radius}")
    z = x - y
    norm = float(np.linalg.norm(z))
    if norm <= radius:
        return z
    return z * (radius / norm)


def _project_ball(x: np.ndarray, radius: float) -> np.ndarray:
    norm = float(np.linalg.norm(x))
    return x if norm <= radius else x * (radius / norm)


def stochastic_theta_grad(p: NetworkParams, a: ActivationFunction, ds: "Dataset",
                          sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Exact theta-gradient plus Gaussian noise with E||xi||^2 = sigma^2
    (coordinates i.i.d. N(0, sigma^2/n))."""
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    g = grad_theta(p, a, ds)
    if sigma == 0.0:
        return g
    return g + rng.normal(0.0, sigma / np.sqrt(g.size), size=g.size)


def _resolve_beta(cfg: RunConfig, l_theta: float, n_inner: int) -> float:
    cap = np.inf if l_theta == 0.0 else 1.0 / (2.0 * l_theta)
    if cfg.beta_policy == "fixed":
        if cfg.beta > cap:
            raise ConfigError(
                f"beta={cfg.beta} violates the step bound 1/(2 L_theta)={cap}")
        return cfg.beta
    noise_cap = np.inf if cfg.sigma == 0.0 else 1.0 / np.sqrt(n_inner * cfg.sigma ** 2)
    beta = min(cap, noise_cap)
    return 1.0 if not np.isfinite(beta) else beta  # zero-gradient degenerate case


def inner_sgd(p: NetworkParams, a: ActivationFunction, ds: "Dataset",
              cfg: RunConfig, rng: np.random.Generator,
              n_inner: Optional[int] = None, sigma: Optional[float] = None):
    """Inner stochastic phase at fixed W; returns (theta_new, InnerSummary).

    theta_new is the beta-weighted average of the prox iterates (or the
    first average that already improves on the incoming theta, when
    early_exit is on).  n_inner/sigma override the config (used by the
    theorem2 preset).
    """
    n_inner = cfg.n_inner if n_inner is None else n_inner
    sigma = cfg.sigma if sigma is None else sigma
    radius = cfg.R / 2.0

    U = np.asarray(ds.inputs, dtype=float)
    if U.shape[1] != p.d:
        raise ShapeError(f"dataset dim {U.shape[1]} != model d={p.d}")
    v = np.asarray(ds.labels, dtype=float)
    N = len(v)
    H = np.asarray(a.eval(U @ p.W.T), dtype=float)   # fixed during the phase

    def f_of(theta):
        r = v - H @ theta
        return float(r @ r / (2.0 * N))

    l_theta = theta_smoothness(H)
    beta = _resolve_beta(cfg, l_theta, n_inner)
    coord_scale = sigma / np.sqrt(p.n) if sigma > 0 else 0.0

    f_incoming = f_of(p.theta)
    theta_bar = p.theta
    sum_w = 0.0
    sum_wtheta = np.zeros_like(p.theta)
    theta_avg = p.theta
    steps = 0
    exited = False
    for _ in range(n_inner):
        g = -(H.T @ (v - H @ theta_bar)) / N
        if coord_scale > 0.0:
            g = g + rng.normal(0.0, coord_scale, size=p.n)
        theta_bar = _project_ball(theta_bar - beta * g, radius)
        sum_w += beta
        sum_wtheta = sum_wtheta + beta * theta_bar
        theta_avg = sum_wtheta / sum_w
        steps += 1
        if cfg.early_exit and f_of(theta_avg) <= f_incoming:
            exited = True
            break
    return theta_avg, InnerSummary(steps=steps, final_f=f_of(theta_avg),
                                   beta=beta, l_theta=l_theta,
                                   early_exit=exited)


def outer_step(p: NetworkParams, a: ActivationFunction, ds: "Dataset",
               gamma: float, lipschitz_bound: Optional[float] = None) -> NetworkParams:
    """One full-gradient descent step on W (theta unchanged).

    gamma must satisfy 0 < gamma < 2/L; by default L is the data-dependent
    W-smoothness bound at the current theta.
    """
    if lipschitz_bound is None:
        lipschitz_bound = lipschitz_estimates(p, a, ds).l_w_bound
    cap = np.inf if lipschitz_bound == 0.0 else 2.0 / lipschitz_bound
    if not 0.0 < gamma < cap:
        raise ConfigError(f"gamma={gamma} outside (0, 2/L) with L={lipschitz_bound}")
    return replace(p, W=p.W - gamma * grad_W(p, a, ds))


def solve_theta_star(p: NetworkParams, a: ActivationFunction, ds: "Dataset",
                     radius: float, tol: float = 1e-12,
                     max_iter: int = 200_000) -> np.ndarray:
    """Deterministic reference minimizer of the convex theta-subproblem over
    the ball, by projected gradient run to gradient-map norm <= tol.

    Warm-started at the (projected) least-squares solution, so convergence
    is typically immediate.
    """
    U = np.asarray(ds.inputs, dtype=float)
    v = np.asarray(ds.labels, dtype=float)
    H = np.asarray(a.eval(U @ p.W.T), dtype=float)
    N = len(v)
    l_theta = theta_smoothness(H)
    if l_theta == 0.0:
        return np.zeros(p.n)
    eta = 1.0 / l_theta
    theta = _project_ball(np.linalg.lstsq(H, v, rcond=None)[0], radius)
    for _ in range(max_iter):
        g = -(H.T @ (v - H @ theta)) / N
        nxt = _project_ball(theta - eta * g, radius)
        if np.linalg.norm(theta - nxt) / eta <= tol:
            return nxt
        theta = nxt
    raise NumericsError(
        f"theta-subproblem solver did not reach gradient-map tol {tol} "
        f"in {max_iter} iterations")


def _sigma_min_w(W: np.ndarray) -> float:
    return float(np.linalg.svd(W, compute_uv=False)[-1])


def run(a: ActivationFunction, ds: "Dataset", cfg: RunConfig):
    """Full SGD-GD run; returns (NetworkParams, TrajectoryRecord).

    Requires square W (n = d) so the trajectory rank diagnostics are
    well-defined.  The record has n_outer + 1 rows: one per outer iteration
    evaluated at (W_k, theta_{k+1}), plus a final row for the returned
    iterate.
    """
    d = ds.dim
    rng = np.random.default_rng(cfg.seed)

    n_outer = cfg.n_outer
    if cfg.theorem2_preset:
        n_inner = n_outer
        sigma = 1.0 / np.sqrt(n_inner)
    else:
        n_inner, sigma = cfg.n_inner, cfg.sigma

    L_ball = lipschitz_ball_bound(a, ds, cfg.R)
    gamma_cap = np.inf if L_ball == 0.0 else 2.0 / L_ball
    if cfg.theorem2_preset or cfg.gamma_policy == "one_over_L":
        gamma = 1.0 if L_ball == 0.0 else 1.0 / L_ball
    else:
        gamma = cfg.gamma
    if not 0.0 < gamma < gamma_cap:
        raise ConfigError(f"gamma={gamma} outside (0, 2/L) with L={L_ball}")

    W = rng.normal(0.0, cfg.init_w_scale / np.sqrt(d), size=(d, d))
    theta = _project_ball(rng.normal(0.0, cfg.init_theta_scale, size=d), cfg.R / 2.0)
    params = NetworkParams(W, theta)
    f_init = loss(params, a, ds)

    names = ("k", "f", "grad", "smw", "smd", "resid", "isteps", "ifinal")
    rows = {name: [] for name in names}

    def record(k, p, steps, inner_final):
        sys = stationarity_system(p, a, ds)
        g = grad_W(p, a, ds)
        s_norm = float(np.linalg.norm(sys.s))
        f_val = float(sys.s @ sys.s / (2.0 * len(sys.s)))
        smd, _ = column_sigma_extremes(sys.D)
        vals = (k, f_val, float(np.linalg.norm(g)), _sigma_min_w(p.W), smd,
                s_norm, steps, inner_final if inner_final is not None else f_val)
        for name, val in zip(names, vals):
            rows[name].append(val)
        if not all(np.isfinite(v) for v in vals[1:6]):
            raise NumericsError(f"non-finite iterate at outer iteration {k}")
        return g

    for k in range(n_outer):
        theta, summary = inner_sgd(params, a, ds, cfg, rng,
                                   n_inner=n_inner, sigma=sigma)
        params = replace(params, theta=theta)
        g = record(k, params, summary.steps, summary.final_f)
        params = replace(params, W=params.W - gamma * g)
        if not np.all(np.isfinite(params.W)):
            raise NumericsError(f"non-finite W after outer iteration {k}")

    record(n_outer, params, 0, None)

    trajectory = TrajectoryRecord(
        k=np.array(rows["k"], dtype=int),
        f=np.array(rows["f"]),
        grad_norm=np.array(rows["grad"]),
        sigma_min_w=np.array(rows["smw"]),
        sigma_min_d=np.array(rows["smd"]),
        resid_norm=np.array(rows["resid"]),
        inner_steps=np.array(rows["isteps"], dtype=int),
        inner_final_f=np.array(rows["ifinal"]),
        derived={
            "n_outer": n_outer, "n_inner": n_inner, "sigma": sigma,
            "gamma": gamma, "L_ball": L_ball, "R": cfg.R,
            "f_init": f_init, "seed": cfg.seed,
        },
    )
    return params, trajectory
