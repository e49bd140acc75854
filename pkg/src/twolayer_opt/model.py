"""Two-layer network: forward map, squared loss, exact gradients, and the
stationarity system D s.

The network is phi(u) = theta^T h(W u) with hidden matrix W (n x d) and
output vector theta (n).  The training objective is

    f(W, theta) = (1/2N) sum_i (v_i - phi(u_i))^2

and its W-gradient factors through the (n*d) x N matrix D whose column i is
vect(h'(W u_i) u_i^T) scaled rowwise by theta:

    vect(grad_W f) = -(1/N) D s,      s_i = v_i - phi(u_i).

vect() stacks gradient rows (row-major), so block j of D (rows j*d..j*d+d-1)
belongs to hidden row j.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from .activations import ActivationFunction
from .errors import FormatError, IoError, NumericsError, ShapeError

if TYPE_CHECKING:  # pragma: no cover
    from .dataset import Dataset


@dataclass(frozen=True)
class NetworkParams:
    """Hidden layer W (n x d) and output layer theta (n,), with 1 <= n <= d."""

    W: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        W = np.asarray(self.W, dtype=float)
        theta = np.asarray(self.theta, dtype=float)
        if W.ndim != 2 or theta.ndim != 1:
            raise ShapeError(f"W must be 2-d and theta 1-d, got {W.shape}, {theta.shape}")
        n, d = W.shape
        if not 1 <= n <= d:
            raise ShapeError(f"need 1 <= n <= d, got n={n}, d={d}")
        if theta.shape[0] != n:
            raise ShapeError(f"theta has length {theta.shape[0]}, expected {n}")
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(theta))):
            raise NumericsError("non-finite entries in network parameters")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "theta", theta)

    @property
    def n(self) -> int:
        return self.W.shape[0]

    @property
    def d(self) -> int:
        return self.W.shape[1]


@dataclass(frozen=True)
class StationaritySystem:
    """Matrix D ((n*d) x N), residual vector s (N,), and the row layout."""

    D: np.ndarray
    s: np.ndarray
    row_block_map: str


def _check_input_dims(p: NetworkParams, inputs: np.ndarray) -> np.ndarray:
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim != 2 or inputs.shape[1] != p.d:
        raise ShapeError(
            f"inputs of shape {inputs.shape} incompatible with d={p.d}")
    return inputs


def forward(p: NetworkParams, a: ActivationFunction, u) -> float:
    """theta^T h(W u) for a single input vector."""
    u = np.asarray(u, dtype=float)
    if u.shape != (p.d,):
        raise ShapeError(f"input of shape {u.shape}, expected ({p.d},)")
    return float(p.theta @ np.asarray(a.eval(p.W @ u), dtype=float))


def _features(p: NetworkParams, a: ActivationFunction, ds: "Dataset"):
    """Pre-activations Z = U W^T and features H = h(Z), both (N, n)."""
    U = _check_input_dims(p, ds.inputs)
    Z = U @ p.W.T
    return U, Z, np.asarray(a.eval(Z), dtype=float)


def residuals(p: NetworkParams, a: ActivationFunction, ds: "Dataset") -> np.ndarray:
    """s_i = v_i - theta^T h(W u_i)."""
    _, _, H = _features(p, a, ds)
    return np.asarray(ds.labels, dtype=float) - H @ p.theta


def loss(p: NetworkParams, a: ActivationFunction, ds: "Dataset") -> float:
    s = residuals(p, a, ds)
    return float(s @ s / (2.0 * len(s)))


def grad_theta(p: NetworkParams, a: ActivationFunction, ds: "Dataset") -> np.ndarray:
    """Exact gradient of f in theta: -(1/N) sum_i s_i h(W u_i)."""
    _, _, H = _features(p, a, ds)
    s = np.asarray(ds.labels, dtype=float) - H @ p.theta
    return -(H.T @ s) / len(s)


def grad_W(p: NetworkParams, a: ActivationFunction, ds: "Dataset") -> np.ndarray:
    """Exact gradient of f in W, entry (j,k) = -(1/N) sum_i s_i h'(z_ij) theta_j u_ik."""
    U, Z, H = _features(p, a, ds)
    s = np.asarray(ds.labels, dtype=float) - H @ p.theta
    A = np.asarray(a.deriv(Z), dtype=float) * p.theta[None, :] * s[:, None]
    return -(A.T @ U) / len(s)


def stationarity_system(p: NetworkParams, a: ActivationFunction,
                        ds: "Dataset") -> StationaritySystem:
    """Assemble D and s so that vect(grad_W f) = -(1/N) D s."""
    U, Z, H = _features(p, a, ds)
    s = np.asarray(ds.labels, dtype=float) - H @ p.theta
    scaled = np.asarray(a.deriv(Z), dtype=float) * p.theta[None, :]  # (N, n)
    # column i is vect of the rank-one matrix scaled[i]^T u_i^T
    D = np.einsum("ij,ik->jki", scaled, U).reshape(p.n * p.d, len(s))
    return StationaritySystem(
        D=D, s=s,
        row_block_map=(
            "row j*d + k of D corresponds to entry (j, k) of W "
            "(hidden row j, input coordinate k); row-major blocks of size d"),
    )


def save_params(p: NetworkParams, path, activation: str) -> None:
    """Write W rows then theta as the final row, plus a JSON shape sidecar."""
    path = Path(path)
    try:
        with open(path, "w") as fh:
            for row in p.W:
                fh.write(",".join("%.17g" % x for x in row) + "\n")
            fh.write(",".join("%.17g" % x for x in p.theta) + "\n")
        with open(path.with_suffix(".meta.json"), "w") as fh:
            json.dump({"n": p.n, "d": p.d, "activation": activation}, fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write parameters to {path}: {exc}") from exc


def load_params(path):
    """Inverse of save_params; returns (NetworkParams, activation name)."""
    path = Path(path)
    meta_path = path.with_suffix(".meta.json")
    try:
        with open(meta_path) as fh:
            meta = json.load(fh)
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise IoError(f"cannot read parameters from {path}: {exc}") from exc
    n, d = int(meta["n"]), int(meta["d"])
    if len(lines) != n + 1:
        raise FormatError(f"expected {n + 1} rows, found {len(lines)}", line=len(lines))
    rows = []
    for i, line in enumerate(lines, start=1):
        fields = line.split(",")
        want = d if i <= n else n
        if len(fields) != want:
            raise FormatError(f"expected {want} columns, found {len(fields)}", line=i)
        try:
            rows.append([float(tok) for tok in fields])
        except ValueError:
            raise FormatError("non-numeric token", line=i) from None
    return NetworkParams(np.array(rows[:n]), np.array(rows[n])), meta["activation"]
