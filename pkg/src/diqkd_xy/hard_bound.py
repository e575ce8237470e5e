"""The omega > pi/4 regime: region S, ansatz, concave roof, combined bound.

For tests beyond pi/4 the observed score constrains the key-generating
angle as well as the state.  Eve's best information is found numerically
over three state parameters (I_heuristic), but is conjectured to be
attained by states with only two non-zero Bell weights (ansatz_I).  The
resulting curve is not concave in beta near the local bound, so the bound
actually used is its concave roof: a chord from the local-bound point
(sin omega, I_L) tangent to the closed-form curve at beta_star.

entropy_bound_xy combines the closed-form easy-regime candidate with a
scan of roofs over omega in (pi/4, pi/2] and returns the best bound.
"""

import math

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .correlators import BellTest, BoundResult, Correlators, TVector, beta_of
from .easy_bound import info_local_bound, optimal_omega_easy, z_of_beta
from .entropy import binary_entropy
from .errors import DegenerateInput, DomainError

INVPHI = (math.sqrt(5.0) - 1.0) / 2.0
OMEGA_GRID_N = 64
OMEGA_EPS = 1e-9          # open edge at pi/4
OMEGA_TOP_EPS = 1e-6      # sin(omega) = 1 is degenerate (local = quantum bound)
ROOF_XTOL = 1e-11
HEURISTIC_STARTS = 32

_roof_cache = {}
_roof_grid_cache = {}


def region_s_bounds(T: TVector, test: BellTest):
    """(lower, upper) of the region-S sandwich for beta^2."""
    c2, s2 = test.cos ** 2, test.sin ** 2
    tz2, tx2 = T.T_z ** 2, T.T_x ** 2
    return c2 * tz2 + s2 * tx2, s2 * tz2 + c2 * tx2


def in_region_s(T: TVector, test: BellTest, beta: float, tol: float = 1e-12) -> bool:
    lo, hi = region_s_bounds(T, test)
    return lo - tol <= beta * beta <= hi + tol


def _c_star_sq_raw(tz, tx, c2, s2, b2):
    """c*^2 formula, vectorized, clipped to [0, 1].

    Values outside [0, 1] arise at the vacuous-constraint corners
    (beta^2 <= sin^2 omega tz^2), where the true minimal angle is phi = 0,
    i.e. c*^2 = 1; clipping returns exactly that.
    """
    num = (b2 - s2 * tx * tx) * (c2 * tx * tx + s2 * tz * tz - b2)
    den = c2 * (tz * tz - tx * tx) * (s2 * tz * tz + s2 * tx * tx - b2)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = num / den
    return np.clip(np.nan_to_num(r, nan=1.0, posinf=1.0, neginf=0.0), 0.0, 1.0)


def c_star_sq(T: TVector, test: BellTest, beta: float) -> float:
    """Squared cosine of the minimal key angle compatible with score beta."""
    if T.T_z - T.T_x < 1e-10:
        raise DegenerateInput("T_z - T_x too small; key angle unconstrained")
    return float(
        _c_star_sq_raw(T.T_z, T.T_x, test.cos ** 2, test.sin ** 2, beta * beta)
    )


def _ansatz_interval(beta, c2, s2):
    lo = max(0.0, (beta * beta - s2) / c2)
    hi = (beta * beta - c2) / s2
    return lo, min(hi, 1.0)


def _ansatz_curve(tx, beta, c2, s2, q):
    """Objective of the two-coefficient ansatz at T_z = 1 (vectorized in tx)."""
    cs = _c_star_sq_raw(1.0, tx, c2, s2, beta * beta)
    inner = np.sqrt(np.clip(tx * tx + cs * q * (1.0 - tx * tx), 0.0, 1.0))
    return binary_entropy((1.0 + tx) / 2.0) - binary_entropy((1.0 + inner) / 2.0)


def ansatz_I(beta: float, test: BellTest, q: float, grid: int = 513) -> float:
    """Scalar maximization of the two-coefficient ansatz I~_anz(beta; omega, q)."""
    if test.omega <= math.pi / 4:
        raise DomainError("ansatz regime needs omega > pi/4")
    c2, s2 = test.cos ** 2, test.sin ** 2
    if beta > 1.0 + 1e-9 or beta < test.sin - 1e-9:
        raise DomainError(f"beta = {beta} outside [sin omega, 1]")
    lo2, hi2 = _ansatz_interval(min(beta, 1.0), c2, s2)
    if hi2 < lo2 - 1e-15:
        raise DomainError("empty T_x interval")
    lo, hi = math.sqrt(max(lo2, 0.0)), math.sqrt(max(hi2, 0.0))
    if hi - lo < 1e-14:
        return float(_ansatz_curve(np.array(hi), beta, c2, s2, q))
    tx = np.linspace(lo, hi, grid)
    vals = _ansatz_curve(tx, beta, c2, s2, q)
    i = int(np.argmax(vals))
    a, b = tx[max(i - 1, 0)], tx[min(i + 1, grid - 1)]
    best = float(vals[i])
    if b > a:
        res = minimize_scalar(
            lambda t: -float(_ansatz_curve(np.array(t), beta, c2, s2, q)),
            bounds=(a, b),
            method="bounded",
            options={"xatol": 1e-13},
        )
        best = max(best, -float(res.fun))
    return best


def _h_raw(z):
    zc = np.clip(z, 1e-300, 1.0)
    zd = np.clip(1.0 - z, 1e-300, 1.0)
    return -(zc * np.log2(zc) + zd * np.log2(zd))


def _hq_raw(z, q):
    n = (1.0 + np.sqrt(np.maximum(1.0 - 4.0 * (1.0 - q) * z * (1.0 - z), 0.0))) / 2.0
    return _h_raw(z) - _h_raw(n)


def I_ansatz_closed(beta, omega, q):
    """Closed-form ansatz branch: the easy-regime formula continued to omega > pi/4.

    Equals the full ansatz maximization for beta >= beta_star (the optimal
    T_x sits at the upper interval edge there); elementwise in all arguments.
    """
    return _hq_raw(z_of_beta(beta, omega), q)


def _roof_params_vec(omega, q):
    """Vectorized tangent-point search: beta*, I* for each omega (arrays).

    Golden-section minimization of the chord slope
    (I_L - I_anz(beta)) / (beta - sin omega) over beta in (sin omega, 1];
    ties break toward smaller beta.
    """
    omega = np.asarray(omega, dtype=float)
    s = np.sin(omega)
    IL = info_local_bound(q)

    def slope(b):
        return (IL - I_ansatz_closed(b, omega, q)) / (b - s)

    a = s + 1e-6
    b = np.ones_like(s)
    c = b - INVPHI * (b - a)
    d = a + INVPHI * (b - a)
    fc, fd = slope(c), slope(d)
    # ~70 iterations shrink the bracket below 1e-11
    for _ in range(70):
        left = fc <= fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        c = b - INVPHI * (b - a)
        d = a + INVPHI * (b - a)
        fc, fd = slope(c), slope(d)
    bs = (a + b) / 2.0
    return bs, I_ansatz_closed(bs, omega, q)


class RoofBound:
    """Concave roof I^(beta; omega, q) of the ansatz bound.

    A chord from the local-bound anchor (sin omega, I_L) to the tangent
    point (beta_star, I_star), continued by the closed-form ansatz branch
    for beta >= beta_star.
    """

    def __init__(self, omega: float, q: float, beta_star: float, I_star: float, I_L: float):
        self.omega = omega
        self.q = q
        self.beta_star = beta_star
        self.I_star = I_star
        self.I_L = I_L

    @property
    def slope(self) -> float:
        """Chord slope dI/dbeta on the linear section (non-positive)."""
        den = self.beta_star - math.sin(self.omega)
        if den <= 0.0:
            return 0.0
        return (self.I_star - self.I_L) / den

    def value(self, beta: float) -> float:
        """Roof value at score beta; I_L below the local bound."""
        s = math.sin(self.omega)
        if beta <= s:
            return self.I_L
        if beta >= self.beta_star:
            return float(I_ansatz_closed(min(beta, 1.0), self.omega, self.q))
        return self.I_L + self.slope * (beta - s)

    __call__ = value


def roof(test: BellTest, q: float) -> RoofBound:
    """Construct (and cache) the concave roof for one test."""
    key = (round(test.omega, 15), round(q, 15))
    hit = _roof_cache.get(key)
    if hit is not None:
        return hit
    IL = info_local_bound(q)
    if 1.0 - test.sin < OMEGA_TOP_EPS:
        # local bound meets the quantum bound: no test can be violated
        rb = RoofBound(test.omega, q, 1.0, IL, IL)
    else:
        bs, Is = _roof_params_vec(np.array([test.omega]), q)
        rb = RoofBound(test.omega, q, float(bs[0]), float(Is[0]), IL)
    if len(_roof_cache) > 100000:
        _roof_cache.clear()
    _roof_cache[key] = rb
    return rb


def _t_box(beta, c2, s2, u):
    """Map u in [0,1]^3 onto region S (T_z, T_x, T_p); beta <= T_z <= 1."""
    u = np.clip(u, 0.0, 1.0)
    tz = beta + u[0] * (1.0 - beta)
    xlo2 = max(0.0, (beta * beta - s2 * tz * tz) / c2)
    xhi2 = max(0.0, (beta * beta - c2 * tz * tz) / s2)
    xlo = math.sqrt(xlo2)
    xhi = min(math.sqrt(xhi2), tz)
    tx = xlo + u[1] * max(xhi - xlo, 0.0)
    plo = tz + tx - 1.0
    phi_ = 1.0 - (tz - tx)
    tp = plo + u[2] * (phi_ - plo)
    return tz, tx, tp


def _plogp(v):
    return -v * math.log2(v) if v > 1e-300 else 0.0


def _heuristic_objective(beta, c2, s2, q):
    b2 = beta * beta
    rank2 = q >= 1.0 - 1e-12

    def negobj(u):
        tz, tx, tp = _t_box(beta, c2, s2, u)
        l1 = min(max((1.0 + tz + tx + tp) / 4.0, 0.0), 1.0)
        l2 = min(max((1.0 - tz - tx + tp) / 4.0, 0.0), 1.0)
        l3 = min(max((1.0 + tz - tx - tp) / 4.0, 0.0), 1.0)
        l4 = min(max((1.0 - tz + tx - tp) / 4.0, 0.0), 1.0)
        if tz - tx > 1e-12:
            num = (b2 - s2 * tx * tx) * (c2 * tx * tx + s2 * tz * tz - b2)
            den = c2 * (tz * tz - tx * tx) * (s2 * tz * tz + s2 * tx * tx - b2)
            cs = min(max(num / den, 0.0), 1.0) if den > 1e-300 else 1.0
        else:
            cs = 1.0
        HL = _plogp(l1) + _plogp(l2) + _plogp(l3) + _plogp(l4)
        if rank2:
            # conditional state has rank <= 2: entropy from its purity
            pur = (l1 * l1 + l2 * l2 + l3 * l3 + l4 * l4
                   + 2.0 * (cs * (l1 * l3 + l2 * l4) + (1.0 - cs) * (l1 * l4 + l2 * l3)))
            lam = (1.0 + math.sqrt(max(2.0 * pur - 1.0, 0.0))) / 2.0
            Hc = _plogp(lam) + _plogp(1.0 - lam)
        else:
            cp = math.sqrt(cs)
            sp = math.sqrt(1.0 - cs)
            sq = math.sqrt(q)
            a = cp * math.sqrt(l1 * l3) * sq
            b = sp * math.sqrt(l1 * l4) * sq
            cc = sp * math.sqrt(l2 * l3) * sq
            d = cp * math.sqrt(l2 * l4) * sq
            rho = np.array([
                [l1, 0.0, a, b],
                [0.0, l2, cc, -d],
                [a, cc, l3, 0.0],
                [b, -d, 0.0, l4],
            ])
            w = np.linalg.eigvalsh(rho)
            Hc = (_plogp(min(max(w[0], 0.0), 1.0)) + _plogp(min(max(w[1], 0.0), 1.0))
                  + _plogp(min(max(w[2], 0.0), 1.0)) + _plogp(min(max(w[3], 0.0), 1.0)))
        return -(HL - Hc)

    return negobj


def I_heuristic(beta: float, test: BellTest, q: float,
                starts: int = HEURISTIC_STARTS, seed: int = 0) -> float:
    """Multi-start maximization of Eve's information over region S.

    Three free parameters (T_z, T_x, T_p) on a compact domain with the key
    angle fixed at its minimum arccos(c*).  Deterministic for a given seed.
    """
    if test.omega <= math.pi / 4:
        raise DomainError("heuristic regime needs omega > pi/4")
    if beta >= 1.0 - 1e-12:
        return 0.0
    if beta <= test.sin + 1e-12:
        # region collapses onto the local-bound boundary
        return info_local_bound(q)
    c2, s2 = test.cos ** 2, test.sin ** 2
    negobj = _heuristic_objective(beta, c2, s2, q)

    seeds = [
        np.array([1.0, 1.0, 1.0]),   # two-coefficient ansatz corner (upper edge)
        np.array([1.0, 0.5, 1.0]),
        np.array([1.0, 0.0, 1.0]),
        np.array([0.5, 0.5, 0.5]),
    ]
    # low-discrepancy filler starts: plastic-ratio additive recurrence,
    # phase-shifted by the seed
    g = 1.2207440846057596
    alpha = np.array([1.0 / g, 1.0 / g ** 2, 1.0 / g ** 3])
    phase = 0.5 + 0.6180339887498949 * seed
    k = 1
    while len(seeds) < starts:
        seeds.append((phase + alpha * k) % 1.0)
        k += 1
    best = -np.inf
    for u0 in seeds[:starts]:
        res = minimize(
            negobj,
            u0,
            method="Nelder-Mead",
            options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000, "maxfev": 4000},
        )
        best = max(best, -float(res.fun))
        res2 = minimize(
            negobj,
            res.x,
            method="Nelder-Mead",
            options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 2000, "maxfev": 2000},
        )
        best = max(best, -float(res2.fun))
    return best


def _omega_grid(q):
    """Cached roof parameters on the fixed omega grid for this q."""
    key = round(q, 15)
    hit = _roof_grid_cache.get(key)
    if hit is None:
        om = np.linspace(math.pi / 4 + OMEGA_EPS, math.pi / 2 - OMEGA_TOP_EPS, OMEGA_GRID_N)
        bs, Is = _roof_params_vec(om, q)
        hit = (om, bs, Is, info_local_bound(q))
        if len(_roof_grid_cache) > 4096:
            _roof_grid_cache.clear()
        _roof_grid_cache[key] = hit
    return hit


def roof_values_on_grid(X, Y, q):
    """Roof values I^(beta(omega); omega, q) on the cached omega grid."""
    om, bs, Is, IL = _omega_grid(q)
    s = np.sin(om)
    beta = (np.cos(om) * X + s * Y) / 2.0
    chord = IL + (Is - IL) / (bs - s) * (beta - s)
    anz = I_ansatz_closed(np.minimum(beta, 1.0), om, q)
    vals = np.where(beta <= s, IL, np.where(beta >= bs, anz, chord))
    return om, vals


def entropy_bound_xy(corr: Correlators, q: float = 1.0) -> BoundResult:
    """Best entropy bound 1 - min_omega I^(beta(omega); omega, q) for (X, Y).

    Evaluates the closed-form easy-regime candidate and a hard-regime scan
    (grid over omega in (pi/4, pi/2) plus golden-section refinement) and
    keeps the best.  Points at or below the local line get the trivial
    bound 1 - I_L(q).
    """
    X, Y = corr.X, corr.Y
    if X + Y <= 2.0 + 1e-15:
        IL = info_local_bound(q)
        return BoundResult(value=1.0 - IL, method="local", omega=math.pi / 4,
                           beta=beta_of(corr, BellTest(math.pi / 4)), q=q)
    # easy-regime candidate (exactly the CHSH bound when out of region)
    try:
        easy = optimal_omega_easy(corr, q)
        best_I, best_om, method = easy.I, easy.omega_opt, "analytic"
    except DegenerateInput:
        easy = None
        best_I, best_om, method = np.inf, math.pi / 4, "analytic"
    # hard-regime scan: cached grid, then vectorized window refinement
    om, vals = roof_values_on_grid(X, Y, q)
    i = int(np.argmin(vals))
    if vals[i] < best_I:
        best_I, best_om, method = float(vals[i]), float(om[i]), "ansatz"
    a = om[max(i - 1, 0)]
    b = om[min(i + 1, len(om) - 1)]
    for _ in range(3):
        w = np.linspace(a, b, 33)
        bs, Is = _roof_params_vec(w, q)
        s = np.sin(w)
        IL = info_local_bound(q)
        beta = (np.cos(w) * X + s * Y) / 2.0
        chord = IL + (Is - IL) / (bs - s) * (beta - s)
        anz = I_ansatz_closed(np.minimum(beta, 1.0), w, q)
        fv = np.where(beta <= s, IL, np.where(beta >= bs, anz, chord))
        j = int(np.argmin(fv))
        if fv[j] < best_I:
            best_I, best_om, method = float(fv[j]), float(w[j]), "ansatz"
        a, b = w[max(j - 1, 0)], w[min(j + 1, 32)]
    best_I = max(best_I, 0.0)
    return BoundResult(
        value=1.0 - best_I,
        method=method,
        omega=best_om,
        beta=beta_of(corr, BellTest(best_om)),
        q=q,
        meta={"easy_in_region": bool(easy.in_region) if easy else False},
    )
