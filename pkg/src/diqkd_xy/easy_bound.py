"""Closed-form bound on Eve's information for tests with omega <= pi/4.

In this regime the score only constrains the state, never the key angle,
and the maximization over attacks has the closed-form solution

    I(beta; omega, q) = h_q(z),   z = (sqrt(beta^2 - cos^2 omega)/sin omega + 1)/2.

The CHSH entropy bound is the omega = pi/4 member.  For an observed pair
(X, Y) the best test in the family has cot(omega) = X Y / (4 - X^2),
which falls inside the regime iff (4 - X^2) <= X Y.
"""

import math
from dataclasses import dataclass

import numpy as np

from .correlators import Correlators, BellTest, beta_of
from .entropy import binary_entropy, h_q
from .errors import DegenerateInput, DomainError

BETA_TOL = 1e-9
SQRT2 = math.sqrt(2.0)


def info_local_bound(q: float) -> float:
    """I_L(q) = 1 - h((1 + sqrt(q))/2): Eve's information at the local bound."""
    return float(1.0 - binary_entropy((1.0 + math.sqrt(q)) / 2.0))


def z_of_beta(beta, omega):
    """Key-bit bias z(beta) for a test with angle omega; beta clamped to [cos omega, 1]."""
    c, s = np.cos(omega), np.sin(omega)
    b = np.clip(beta, c, 1.0)
    return (np.sqrt(np.maximum(b * b - c * c, 0.0)) / s + 1.0) / 2.0


def I_easy(beta: float, test: BellTest, q: float) -> float:
    """Eve's maximal information for omega <= pi/4 at score beta.

    Below the local bound the constraint is vacuous and the value is
    I_L(q); above 1 + tolerance the point is unphysical.
    """
    if test.omega > math.pi / 4 + 1e-12:
        raise DomainError(f"easy regime needs omega <= pi/4, got {test.omega}")
    if beta > 1.0 + BETA_TOL:
        raise DomainError(f"score beta = {beta} exceeds the quantum bound")
    return float(h_q(z_of_beta(beta, test.omega), q))


def chsh_entropy_bound(S: float, q: float = 1.0) -> float:
    """Entropy bound 1 - I(beta; pi/4, q) as a function of the CHSH score S."""
    if not 2.0 - 1e-9 <= S <= 2.0 * SQRT2 + BETA_TOL:
        raise DomainError(f"CHSH score must lie in [2, 2 sqrt(2)], got {S}")
    return 1.0 - I_easy(S / (2.0 * SQRT2), BellTest(math.pi / 4), q)


@dataclass(frozen=True)
class EasyRegionBound:
    """Optimal easy-regime test for a correlator pair."""

    omega_opt: float
    z: float
    I: float
    in_region: bool


def optimal_omega_easy(corr: Correlators, q: float = 1.0) -> EasyRegionBound:
    """Best test with omega <= pi/4 for the pair (X, Y).

    The unconstrained optimum is cot(omega) = X Y / (4 - X^2); it falls in
    the easy regime iff (4 - X^2)/(X Y) <= 1, where z takes the simple form
    z = (Y / sqrt(4 - X^2) + 1)/2.  Outside that region the best easy test
    is the CHSH one (omega = pi/4), and the hard-regime scan takes over.
    """
    X, Y = corr.X, corr.Y
    if X <= 0.0 or Y <= 0.0:
        raise DegenerateInput("optimal omega needs X > 0 and Y > 0")
    if X + Y <= 2.0:
        raise DegenerateInput("point is local (X + Y <= 2); no test is violated")
    if X >= 2.0:
        # 4 - X^2 = 0: formally omega -> pi/2, never in the easy region.
        raise DegenerateInput("X = 2 is degenerate; use the hard-regime scan")
    in_region = (4.0 - X * X) <= X * Y + 1e-15
    if in_region:
        omega = math.atan2(4.0 - X * X, X * Y)
        z = (Y / math.sqrt(4.0 - X * X) + 1.0) / 2.0
        z = min(z, 1.0)
    else:
        omega = math.pi / 4
        z = float(z_of_beta(beta_of(corr, BellTest(omega)), omega))
    return EasyRegionBound(omega_opt=omega, z=z, I=float(h_q(z, q)), in_region=in_region)
