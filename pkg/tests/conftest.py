import numpy as np
import pytest

from twolayer_opt import Dataset, NetworkParams, Provenance, model


def fd_gradients(params, act, ds, step=1e-5):
    """Independent oracle: central finite differences of the loss in every
    entry of W and theta."""
    def fd_array(base, rebuild):
        g = np.zeros_like(base)
        it = np.nditer(base, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            hi = base.copy()
            hi[idx] += step
            lo = base.copy()
            lo[idx] -= step
            g[idx] = (model.loss(rebuild(hi), act, ds)
                      - model.loss(rebuild(lo), act, ds)) / (2.0 * step)
        return g

    fd_W = fd_array(params.W, lambda W: NetworkParams(W, params.theta))
    fd_theta = fd_array(params.theta, lambda t: NetworkParams(params.W, t))
    return fd_W, fd_theta


def rel_err(approx, exact):
    scale = max(float(np.linalg.norm(exact)), 1e-12)
    return float(np.linalg.norm(np.asarray(approx) - np.asarray(exact))) / scale


def fitted_labels(params, act, inputs):
    """Labels on the loss's own arithmetic path, so residuals are exactly 0."""
    H = np.asarray(act.eval(np.asarray(inputs) @ params.W.T), dtype=float)
    return H @ params.theta


def random_instance(rng, d=None, n=None, N=None, square=False):
    """Random (params, dataset) pair with uniform-cube inputs and Gaussian
    labels."""
    d = int(rng.integers(2, 6)) if d is None else d
    n = d if square else (int(rng.integers(1, d + 1)) if n is None else n)
    N = int(rng.integers(2, 26)) if N is None else N
    params = NetworkParams(rng.normal(size=(n, d)), rng.normal(size=n))
    ds = Dataset(rng.uniform(-1.0, 1.0, size=(N, d)), rng.normal(size=N),
                 Provenance("uniform_cube", None))
    return params, ds


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
