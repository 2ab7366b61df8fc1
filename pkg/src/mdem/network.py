"""Fully connected network shared by the solvers, and its output transforms.

The raw output ``z`` (2 wide, or 6 wide with a stress head) is mapped to

    u = A_u(X) + B_u(X) * z[:2]
    P = A_P(X) + B_P(X) * z[2:6]      (components 11, 12, 21, 22)

with ``A``/``B`` closed-form coordinate expressions. In ``trained`` mode
``u = z`` and Dirichlet data must be learned through a penalty.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import HESS_PAIRS, mlp_jets
from .expressions import vector_jets
from .io import atomic_write_text

CHECKPOINT_MAGIC = "mdem-network-params"
CHECKPOINT_VERSION = 1

_P = np.array([p for p, _ in HESS_PAIRS])
_Q = np.array([q for _, q in HESS_PAIRS])


class BadArchitecture(ValueError):
    pass


@dataclass
class NetworkParams:
    """Layer weights (out, in) and biases; entries may be tape variables."""

    weights: list
    biases: list
    activation: str = "tanh"

    @property
    def widths(self) -> list[int]:
        return [int(np.shape(self.weights[0])[1])] + [int(np.shape(W)[0]) for W in self.weights]

    @property
    def n_outputs(self) -> int:
        return self.widths[-1]

    @property
    def has_stress_head(self) -> bool:
        return self.n_outputs == 6

    @property
    def n_params(self) -> int:
        return sum(int(np.size(ad.value(W))) + int(np.size(ad.value(b)))
                   for W, b in zip(self.weights, self.biases))

    def to_vector(self) -> np.ndarray:
        parts = []
        for W, b in zip(self.weights, self.biases):
            parts.append(np.ravel(ad.value(W)))
            parts.append(np.ravel(ad.value(b)))
        return np.concatenate(parts)

    def unflatten(self, vec) -> "NetworkParams":
        """Same architecture with entries taken from flat ``vec`` (array or Var)."""
        weights, biases = [], []
        pos = 0
        for W, b in zip(self.weights, self.biases):
            shape_w, shape_b = np.shape(ad.value(W)), np.shape(ad.value(b))
            nw, nb = int(np.prod(shape_w)), int(np.prod(shape_b))
            weights.append(ad.reshape(vec[pos:pos + nw], shape_w))
            pos += nw
            biases.append(ad.reshape(vec[pos:pos + nb], shape_b))
            pos += nb
        if pos != np.shape(ad.value(vec))[0]:
            raise BadArchitecture(f"flat vector has {np.shape(ad.value(vec))[0]} entries, expected {pos}")
        return NetworkParams(weights, biases, self.activation)

    def copy(self) -> "NetworkParams":
        return self.unflatten(self.to_vector().copy())


def init_network(widths: Sequence[int], activation: str = "tanh", seed: int = 0) -> NetworkParams:
    """Glorot-uniform weights and zero biases, reproducible from ``seed``."""
    widths = [int(w) for w in widths]
    if len(widths) < 2 or any(w < 1 for w in widths):
        raise BadArchitecture(f"invalid widths {widths}")
    if widths[0] != 2:
        raise BadArchitecture(f"input width must be 2, got {widths[0]}")
    if activation not in ad.ACTIVATIONS:
        raise BadArchitecture(f"unknown activation {activation!r}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return NetworkParams(weights, biases, activation)


def zero_network(widths: Sequence[int], activation: str = "tanh") -> NetworkParams:
    p = init_network(widths, activation, seed=0)
    return p.unflatten(np.zeros(p.n_params))


@dataclass(frozen=True)
class OutputTransform:
    mode: str = "a-priori"
    u_shift: tuple = ("0", "0")
    u_scale: tuple = ("1", "1")
    p_shift: tuple = ("0", "0", "0", "0")
    p_scale: tuple = ("1", "1", "1", "1")

    def __post_init__(self):
        if self.mode not in ("a-priori", "trained"):
            raise ValueError(f"transform mode must be 'a-priori' or 'trained', got {self.mode!r}")
        if len(self.u_shift) != 2 or len(self.u_scale) != 2:
            raise ValueError("displacement shift/scale need 2 expressions")
        if len(self.p_shift) != 4 or len(self.p_scale) != 4:
            raise ValueError("stress shift/scale need 4 expressions")

    @property
    def a_priori(self) -> bool:
        return self.mode == "a-priori"

    def at(self, pts) -> "TransformAtPoints":
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        if self.a_priori:
            A = vector_jets(self.u_shift, pts)
            B = vector_jets(self.u_scale, pts)
        else:
            A = vector_jets(("0", "0"), pts)
            B = vector_jets(("1", "1"), pts)
        PA = vector_jets(self.p_shift, pts)[0]
        PB = vector_jets(self.p_scale, pts)[0]
        return TransformAtPoints(pts, *A, *B, PA, PB)


@dataclass
class TransformAtPoints:
    """Transform expressions and derivatives pre-evaluated on a point set."""

    pts: np.ndarray
    A: np.ndarray
    dA: np.ndarray
    d2A: np.ndarray
    B: np.ndarray
    dB: np.ndarray
    d2B: np.ndarray
    PA: np.ndarray
    PB: np.ndarray


@dataclass
class FieldJets:
    """Transformed outputs in derivative-major layout.

    ``u`` (N, 2); ``du[j][:, i] = d u_i / d X_j`` (2, N, 2);
    ``d2u`` (3, N, 2) in ``HESS_PAIRS`` order; ``p_hat`` (N, 4) or None.
    """

    u: object
    du: object
    d2u: object = None
    p_hat: object = None

    def F_components(self):
        du = self.du
        # F_iJ = delta_iJ + d u_i / d X_J
        return (1.0 + du[0][:, 0], du[1][:, 0], du[0][:, 1], 1.0 + du[1][:, 1])


def transformed_jets(params: NetworkParams, tr: TransformAtPoints, order: int = 1) -> FieldJets:
    z, dz, d2z = mlp_jets(params.weights, params.biases, params.activation, tr.pts, order)
    zu, dzu = z[:, 0:2], dz[:, :, 0:2]
    u = tr.A + tr.B * zu
    du = tr.dA + tr.dB * zu + tr.B * dzu
    d2u = None
    if order == 2:
        d2u = tr.d2A + tr.d2B * zu + tr.dB[_P] * dzu[_Q] + tr.dB[_Q] * dzu[_P] + tr.B * d2z[:, :, 0:2]
    p_hat = None
    if params.has_stress_head:
        p_hat = tr.PA + tr.PB * z[:, 2:6]
    return FieldJets(u, du, d2u, p_hat)


@dataclass
class Evaluation:
    """Network fields at points: ``grad_u[n, i, J] = d u_i / d X_J``."""

    u: np.ndarray
    grad_u: np.ndarray
    p_hat: np.ndarray | None = None
    hess_u: np.ndarray | None = None


def evaluate(params: NetworkParams, transform: OutputTransform, x, order: int = 1) -> Evaluation:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    jets = transformed_jets(params, transform.at(x), order)
    u = ad.value(jets.u)
    grad_u = np.moveaxis(ad.value(jets.du), 0, -1)
    p_hat = None if jets.p_hat is None else ad.value(jets.p_hat).reshape(-1, 2, 2)
    hess_u = None
    if order == 2:
        hxx, hxy, hyy = ad.value(jets.d2u)
        hess_u = np.stack([np.stack([hxx, hxy], -1), np.stack([hxy, hyy], -1)], -2)
    if single:
        return Evaluation(u[0], grad_u[0], None if p_hat is None else p_hat[0],
                          None if hess_u is None else hess_u[0])
    return Evaluation(u, grad_u, p_hat, hess_u)


# ---------------------------------------------------------------------------
# checkpoint files


def save_params(path, params: NetworkParams) -> None:
    """Write a text checkpoint (see ``docs/checkpoint.md`` for the layout)."""
    lines = [f"{CHECKPOINT_MAGIC} v{CHECKPOINT_VERSION}",
             f"activation {params.activation}",
             "widths " + " ".join(str(w) for w in params.widths)]
    for k, (W, b) in enumerate(zip(params.weights, params.biases)):
        W, b = np.asarray(ad.value(W)), np.asarray(ad.value(b))
        lines.append(f"W {k} {W.shape[0]} {W.shape[1]}")
        lines.append(" ".join(repr(float(v)) for v in W.ravel()))
        lines.append(f"b {k} {b.shape[0]}")
        lines.append(" ".join(repr(float(v)) for v in b))
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_params(path) -> NetworkParams:
    text = Path(path).read_text().splitlines()
    header = text[0].split()
    if len(header) != 2 or header[0] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a network checkpoint")
    if header[1] != f"v{CHECKPOINT_VERSION}":
        raise ValueError(f"{path}: unsupported checkpoint version {header[1]}")
    activation = text[1].split()[1]
    widths = [int(w) for w in text[2].split()[1:]]
    weights, biases = [], []
    pos = 3
    for k in range(len(widths) - 1):
        tag, idx, n_out, n_in = text[pos].split()
        if tag != "W" or int(idx) != k or (int(n_out), int(n_in)) != (widths[k + 1], widths[k]):
            raise ValueError(f"{path}: malformed weight block {k}")
        weights.append(np.array(text[pos + 1].split(), dtype=float).reshape(int(n_out), int(n_in)))
        tag, idx, n_b = text[pos + 2].split()
        if tag != "b" or int(idx) != k or int(n_b) != widths[k + 1]:
            raise ValueError(f"{path}: malformed bias block {k}")
        biases.append(np.array(text[pos + 3].split(), dtype=float))
        pos += 4
    return NetworkParams(weights, biases, activation)

