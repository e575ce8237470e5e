"""Entropy primitives and Eve's conditional state.

All entropies are in bits (base-2 logarithms), with 0 log 0 := 0.  The
central object is Eve's state conditioned on Alice's noisy key bit being
+1: a real symmetric 4x4 matrix whose diagonal carries the Bell weights L
and whose off-diagonal block is set by the key angle phi and the noise
parameter q = (1 - 2p)^2.
"""

import math
from dataclasses import dataclass

import numpy as np

from .correlators import BellDiagonalWeights
from .errors import DomainError, NumericalFailure

DOMAIN_TOL = 1e-12
EIG_NEG_TOL = 1e-10   # eigenvalues above -EIG_NEG_TOL are clipped to 0


def binary_entropy(z):
    """h(z) = -z log2 z - (1-z) log2(1-z), elementwise, with 0 log 0 = 0."""
    z = np.asarray(z, dtype=float)
    if np.any(z < -DOMAIN_TOL) or np.any(z > 1.0 + DOMAIN_TOL):
        raise DomainError("binary entropy argument outside [0, 1]")
    zc = np.clip(z, 0.0, 1.0)
    out = np.zeros_like(zc)
    mask = (zc > 0.0) & (zc < 1.0)
    zm = zc[mask]
    out[mask] = -zm * np.log2(zm) - (1.0 - zm) * np.log2(1.0 - zm)
    if out.ndim == 0:
        return float(out)
    return out


def n_q(z, q):
    """n_q(z) = (1 + sqrt(1 - 4 (1-q) z (1-z))) / 2, in [1/2, 1]."""
    z = np.asarray(z, dtype=float)
    rad = 1.0 - 4.0 * (1.0 - q) * z * (1.0 - z)
    res = (1.0 + np.sqrt(np.maximum(rad, 0.0))) / 2.0
    if res.ndim == 0:
        return float(res)
    return res


def h_q(z, q):
    """h_q(z) = h(z) - h(n_q(z)); symmetric about z = 1/2, decreasing on [1/2, 1]."""
    return binary_entropy(z) - binary_entropy(n_q(z, q))


def shannon_entropy(w) -> float:
    """Base-2 entropy of a probability vector (or BellDiagonalWeights)."""
    if isinstance(w, BellDiagonalWeights):
        p = np.asarray(w.L, dtype=float)
    else:
        p = np.asarray(w, dtype=float)
    p = np.clip(p, 0.0, 1.0)
    mask = p > 0.0
    return float(-(p[mask] * np.log2(p[mask])).sum())


@dataclass(frozen=True)
class ConditionalState:
    """Eve's 4x4 conditional state rho_{E | a=+1} with its generating parameters."""

    rho: np.ndarray
    L: tuple
    phi: float
    q: float

    def eigenvalues(self) -> np.ndarray:
        try:
            w = np.linalg.eigvalsh(self.rho)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure(f"eigensolver failed: {exc}") from exc
        if np.any(w < -EIG_NEG_TOL):
            raise NumericalFailure(f"conditional state not PSD: min eigenvalue {w.min()}")
        return np.clip(w, 0.0, 1.0)


def conditional_state(L, phi: float, q: float) -> ConditionalState:
    """Build rho_{E | a=+1} for weights L, key angle phi and noise q.

    Diagonal is L; off-diagonals couple (1,3), (1,4), (2,3), (2,4) with
    cos/sin(phi) times sqrt(L_i L_j q), the (2,4) entry carrying a minus
    sign.
    """
    if isinstance(L, BellDiagonalWeights):
        L = L.L
    l1, l2, l3, l4 = (max(0.0, float(v)) for v in L)
    cp, sp = math.cos(phi), math.sin(phi)
    sq = math.sqrt(max(q, 0.0))
    a = cp * math.sqrt(l1 * l3) * sq
    b = sp * math.sqrt(l1 * l4) * sq
    c = sp * math.sqrt(l2 * l3) * sq
    d = cp * math.sqrt(l2 * l4) * sq
    rho = np.array(
        [
            [l1, 0.0, a, b],
            [0.0, l2, c, -d],
            [a, c, l3, 0.0],
            [b, -d, 0.0, l4],
        ]
    )
    return ConditionalState(rho=rho, L=(l1, l2, l3, l4), phi=phi, q=q)


def eve_cond_entropy(L, phi: float, q: float) -> float:
    """H(rho_{E | a=+1}) via symmetric eigendecomposition."""
    state = conditional_state(L, phi, q)
    return shannon_entropy(state.eigenvalues())


def eve_cond_entropy_phi0(L, q: float) -> float:
    """Closed form of H(rho_{E | a=+1}) at phi = 0.

    The state is block diagonal in the (1,3) and (2,4) sectors, each block
    a 2x2 with explicit eigenvalues.
    """
    if isinstance(L, BellDiagonalWeights):
        L = L.L
    l1, l2, l3, l4 = (max(0.0, float(v)) for v in L)
    r13 = math.sqrt(4.0 * l1 * l3 * q + (l1 - l3) ** 2)
    r24 = math.sqrt(4.0 * l2 * l4 * q + (l2 - l4) ** 2)
    p = (
        (l1 + l3 + r13) / 2.0,
        (l1 + l3 - r13) / 2.0,
        (l2 + l4 + r24) / 2.0,
        (l2 + l4 - r24) / 2.0,
    )
    return shannon_entropy(np.clip(p, 0.0, 1.0))
