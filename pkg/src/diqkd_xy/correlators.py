"""Core domain types and parametrizations.

The protocol summarizes the observed statistics by the pair of correlators

    X = <A0 (B0 + B1)>,    Y = <A1 (B0 - B1)>,

kept separate instead of collapsed into the CHSH score S = X + Y.  Attack
states are Bell-diagonal with weights L = (L1..L4), equivalently described
by the vector T = (T_z, T_x, T_p) or by four angles (alpha, mu, xi, phi).
"""

import math
from dataclasses import dataclass, field

from .errors import DomainError, InvariantViolation, QuantumSetViolation

CIRCLE_TOL = 1e-9      # slack on X^2 + Y^2 <= 4
SUM_TOL = 1e-12        # slack on sum(L) = 1 and linear-map round trips

ORDER_ANALYTIC = "analytic"    # L1 - L2 >= L3 - L4
ORDER_CERTIFIED = "certified"  # L1 + L2 >= L3 + L4


@dataclass(frozen=True)
class Correlators:
    """Sign-normalized correlator pair, constrained to the quantum set."""

    X: float
    Y: float

    def __post_init__(self):
        if self.X < 0 or self.Y < 0:
            raise InvariantViolation(
                f"correlators must be sign-normalized, got ({self.X}, {self.Y})"
            )
        r2 = self.X * self.X + self.Y * self.Y
        if r2 > 4.0 + CIRCLE_TOL:
            raise QuantumSetViolation(
                f"X^2 + Y^2 = {r2:.12g} exceeds the quantum circle bound 4"
            )

    @property
    def chsh(self) -> float:
        """CHSH score S = X + Y."""
        return self.X + self.Y


def normalize_signs(x_raw: float, y_raw: float) -> Correlators:
    """Map raw correlators into the positive quadrant.

    Flipping outcome labels of A1, B0, B1 changes the signs of X and Y at
    will without touching the key-generating measurement, so only the
    magnitudes matter.

    Raises QuantumSetViolation if the pair lies outside the quantum circle
    beyond tolerance; such points are rejected, not projected.
    """
    if abs(x_raw) > 2 + CIRCLE_TOL or abs(y_raw) > 2 + CIRCLE_TOL:
        raise QuantumSetViolation(f"|X|,|Y| must be <= 2, got ({x_raw}, {y_raw})")
    return Correlators(abs(x_raw), abs(y_raw))


@dataclass(frozen=True)
class BellTest:
    """Member of the one-parameter family of generalized CHSH tests.

    The score is beta = (cos(omega) X + sin(omega) Y) / 2.  Classical
    strategies obey beta <= max(cos omega, sin omega); quantum ones
    obey beta <= 1.
    """

    omega: float

    def __post_init__(self):
        if not 0.0 < self.omega <= math.pi / 2:
            raise DomainError(f"omega must lie in (0, pi/2], got {self.omega}")

    @property
    def cos(self) -> float:
        return math.cos(self.omega)

    @property
    def sin(self) -> float:
        return math.sin(self.omega)

    @property
    def local_bound(self) -> float:
        return max(self.cos, self.sin)

    @property
    def quantum_bound(self) -> float:
        return 1.0


def beta_of(corr: Correlators, test: BellTest) -> float:
    """Generalized CHSH score beta = (cos(omega) X + sin(omega) Y) / 2."""
    return (test.cos * corr.X + test.sin * corr.Y) / 2.0


@dataclass(frozen=True)
class NoiseParams:
    """Noisy-preprocessing flip probability p and its derived q = (1-2p)^2."""

    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 0.5:
            raise DomainError(f"flip probability must lie in [0, 1/2], got {self.p}")

    @property
    def q(self) -> float:
        return (1.0 - 2.0 * self.p) ** 2

    @staticmethod
    def from_q(q: float) -> "NoiseParams":
        if not 0.0 <= q <= 1.0:
            raise DomainError(f"q must lie in [0, 1], got {q}")
        return NoiseParams(p=(1.0 - math.sqrt(q)) / 2.0)


@dataclass(frozen=True)
class BellDiagonalWeights:
    """Eve's Bell-diagonal attack weights (L1, L2, L3, L4).

    Two partial orderings remove the basis-relabelling redundancy:
    'analytic' imposes L1 - L2 >= L3 - L4 (used by the closed-form
    sections), 'certified' imposes L1 + L2 >= L3 + L4 (used by the
    branch-and-bound domain).  Both keep L1 >= L2 and L3 >= L4.
    """

    L: tuple
    ordering: str = ORDER_ANALYTIC

    def __post_init__(self):
        L = tuple(float(v) for v in self.L)
        object.__setattr__(self, "L", L)
        if len(L) != 4:
            raise InvariantViolation("weights need exactly four entries")
        if any(v < -SUM_TOL for v in L):
            raise InvariantViolation(f"weights must be non-negative, got {L}")
        if abs(sum(L) - 1.0) > SUM_TOL:
            raise InvariantViolation(f"weights must sum to 1, got sum {sum(L)!r}")
        l1, l2, l3, l4 = L
        if l1 < l2 - SUM_TOL or l3 < l4 - SUM_TOL:
            raise InvariantViolation("need L1 >= L2 and L3 >= L4")
        if self.ordering == ORDER_ANALYTIC:
            if (l1 - l2) < (l3 - l4) - SUM_TOL:
                raise InvariantViolation("analytic ordering needs L1 - L2 >= L3 - L4")
        elif self.ordering == ORDER_CERTIFIED:
            if (l1 + l2) < (l3 + l4) - SUM_TOL:
                raise InvariantViolation("certified ordering needs L1 + L2 >= L3 + L4")
        else:
            raise InvariantViolation(f"unknown ordering {self.ordering!r}")


@dataclass(frozen=True)
class TVector:
    """Linear reparametrization (T_z, T_x, T_p) of the weight simplex."""

    T_z: float
    T_x: float
    T_p: float

    def __post_init__(self):
        ok = (
            -SUM_TOL <= self.T_x <= self.T_z + SUM_TOL
            and self.T_z <= 1.0 + SUM_TOL
            and self.T_z + self.T_x - 1.0 <= self.T_p + SUM_TOL
            and self.T_p <= 1.0 - (self.T_z - self.T_x) + SUM_TOL
        )
        if not ok:
            raise InvariantViolation(
                f"T vector outside its box: ({self.T_z}, {self.T_x}, {self.T_p})"
            )


def weights_to_t(w: BellDiagonalWeights) -> TVector:
    """Forward linear map; requires the analytic ordering (T_x >= 0)."""
    l1, l2, l3, l4 = w.L
    return TVector(
        T_z=(l1 - l2) + (l3 - l4),
        T_x=(l1 - l2) - (l3 - l4),
        T_p=l1 + l2 - l3 - l4,
    )


def t_to_weights(t: TVector) -> BellDiagonalWeights:
    """Inverse of weights_to_t, fixed by sum(L) = 1."""
    l1 = (1.0 + t.T_z + t.T_x + t.T_p) / 4.0
    l2 = (1.0 - t.T_z - t.T_x + t.T_p) / 4.0
    l3 = (1.0 + t.T_z - t.T_x - t.T_p) / 4.0
    l4 = (1.0 - t.T_z + t.T_x - t.T_p) / 4.0
    L = tuple(0.0 if -SUM_TOL <= v < 0.0 else v for v in (l1, l2, l3, l4))
    try:
        return BellDiagonalWeights(L=L, ordering=ORDER_ANALYTIC)
    except InvariantViolation as exc:
        raise InvariantViolation(f"inverse map left the simplex: {exc}") from exc


@dataclass(frozen=True)
class AngleModel:
    """Four-angle model (alpha, mu, xi, phi) of an attack.

    sqrt(L) = (cos a cos m, cos a sin m, sin a cos x, sin a sin x) is a unit
    vector, so the induced weights always sum to one.  alpha <= pi/4 encodes
    the certified ordering L1 + L2 >= L3 + L4; phi is the key-generating
    measurement angle.
    """

    alpha: float
    mu: float
    xi: float
    phi: float

    def __post_init__(self):
        qtr = math.pi / 4 + 1e-12
        if not (0.0 <= self.alpha <= qtr and 0.0 <= self.mu <= qtr and 0.0 <= self.xi <= qtr):
            raise DomainError("alpha, mu, xi must lie in [0, pi/4]")
        if not 0.0 <= self.phi <= math.pi / 2 + 1e-12:
            raise DomainError("phi must lie in [0, pi/2]")


def angles_to_weights(x: AngleModel) -> BellDiagonalWeights:
    """Weights induced by the four-angle model."""
    ca, sa = math.cos(x.alpha), math.sin(x.alpha)
    L = (
        (ca * math.cos(x.mu)) ** 2,
        (ca * math.sin(x.mu)) ** 2,
        (sa * math.cos(x.xi)) ** 2,
        (sa * math.sin(x.xi)) ** 2,
    )
    return BellDiagonalWeights(L=L, ordering=ORDER_CERTIFIED)


@dataclass(frozen=True)
class BoundResult:
    """An entropy lower bound on H(A0|E), tagged with how it was obtained."""

    value: float
    method: str           # analytic | ansatz | heuristic | certified | local
    omega: float
    beta: float
    q: float
    meta: dict = field(default_factory=dict)
