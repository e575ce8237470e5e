"""Two-qubit experiment model, key rates, and critical detection efficiencies.

The source emits cos(theta)|00> + sin(theta)|11>; all measurements lie in
the x-z plane and are parametrized by one angle each.  Each side registers
a click with probability eta; no-clicks are assigned the outcome +1 for
the Bell estimation, so the observed correlators are

    E(a, b) = eta^2 E_q + eta (1 - eta) (m_a + m_b) cos-terms + (1 - eta)^2.

The asymptotic rate is r = H(A0|E) - H(A0|B2) with the entropy bound taken
either from the CHSH score or from the (X, Y) pair, optionally after noisy
preprocessing with flip probability p.  Error correction conditions on
Bob's actual key-setting outcome, which keeps the no-click as its own
symbol; the QBER-based variant instead prices error correction at h(Q)
with Q computed on +1-binned bits.

Critical efficiencies are located by continuation (descending eta while
re-optimizing the setup from the previous optimum) followed by bisection.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .correlators import BellTest, Correlators, beta_of, normalize_signs
from .easy_bound import I_easy, info_local_bound, z_of_beta
from .entropy import binary_entropy, h_q
from .errors import BracketFailure, DomainError
from .hard_bound import I_ansatz_closed, _roof_params_vec, entropy_bound_xy

RATE_EPS = 1e-9          # positivity threshold; degenerate setups give |r| ~ 1e-15
CHSH_ANGLES = (0.0, math.pi / 2, math.pi / 4, -math.pi / 4, 0.0)

METHODS = ("chsh-qber", "chsh", "chsh-noisy", "xy-noisy")
_BOUND_KIND = {"chsh-qber": "qber", "chsh": "chsh", "chsh-noisy": "chsh", "xy-noisy": "xy"}
_USES_NOISE = {"chsh-qber": False, "chsh": False, "chsh-noisy": True, "xy-noisy": True}


@dataclass(frozen=True)
class ExperimentSetup:
    """State angle, five measurement angles, efficiency and flip probability."""

    theta: float
    a0: float
    a1: float
    b0: float
    b1: float
    b2: float
    eta: float
    p: float = 0.0

    def __post_init__(self):
        for name in ("theta", "a0", "a1", "b0", "b1", "b2"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"angle {name} must be finite")
        if not 0.0 <= self.eta <= 1.0:
            raise DomainError(f"eta must lie in [0, 1], got {self.eta}")
        if not 0.0 <= self.p <= 0.5:
            raise DomainError(f"p must lie in [0, 1/2], got {self.p}")

    @property
    def q(self) -> float:
        return (1.0 - 2.0 * self.p) ** 2


def _corr_eff(a, b, theta, eta):
    """Binned two-outcome correlator with symmetric losses."""
    e_q = math.cos(a) * math.cos(b) + math.sin(2 * theta) * math.sin(a) * math.sin(b)
    m_a = math.cos(a) * math.cos(2 * theta)
    m_b = math.cos(b) * math.cos(2 * theta)
    return eta * eta * e_q + eta * (1 - eta) * (m_a + m_b) + (1 - eta) ** 2


def _key_joint(setup: ExperimentSetup):
    """Joint distribution of (noisy A0, B2) with B2 in {+1, -1, no-click}.

    Returns a 2x3 array, rows indexed by Alice's bit (+1, -1), columns by
    Bob's click outcomes (+1, -1) and the no-click symbol.
    """
    a, b, th, eta, p = setup.a0, setup.b2, setup.theta, setup.eta, setup.p
    e_q = math.cos(a) * math.cos(b) + math.sin(2 * th) * math.sin(a) * math.sin(b)
    m_a = math.cos(a) * math.cos(2 * th)
    m_b = math.cos(b) * math.cos(2 * th)
    P = np.zeros((2, 3))
    for i, xa in enumerate((1, -1)):
        p_a = (1 + xa * m_a) / 2.0
        for j, yb in enumerate((1, -1)):
            p_q = (1 + xa * m_a + yb * m_b + xa * yb * e_q) / 4.0
            p_b = (1 + yb * m_b) / 2.0
            P[i, j] = eta * (eta * p_q + (1 - eta) * (xa == 1) * p_b)
        P[i, 2] = (1 - eta) * (eta * p_a + (1 - eta) * (xa == 1))
    return (1 - p) * P + p * P[::-1]


def cond_entropy_AB(joint) -> float:
    """H(A|B) = H(joint) - H(B marginal), base 2, for a joint array."""
    P = np.asarray(joint, dtype=float)
    if np.any(P < -1e-12) or abs(P.sum() - 1.0) > 1e-9:
        raise DomainError("joint distribution must be non-negative and sum to 1")
    P = np.clip(P, 0.0, 1.0)
    pb = P.sum(axis=0)
    Hj = float(-(P[P > 0] * np.log2(P[P > 0])).sum())
    Hb = float(-(pb[pb > 0] * np.log2(pb[pb > 0])).sum())
    return Hj - Hb


def simulate(setup: ExperimentSetup):
    """Observed (X, Y), key conditional entropy H(A0|B2), and binned QBER."""
    x_raw = (_corr_eff(setup.a0, setup.b0, setup.theta, setup.eta)
             + _corr_eff(setup.a0, setup.b1, setup.theta, setup.eta))
    y_raw = (_corr_eff(setup.a1, setup.b0, setup.theta, setup.eta)
             - _corr_eff(setup.a1, setup.b1, setup.theta, setup.eta))
    corr = normalize_signs(x_raw, y_raw)
    P = _key_joint(setup)
    h_ab = cond_entropy_AB(P)
    qber = float(P[0, 1] + P[1, 0] + P[1, 2])   # no-click binned to +1
    return corr, h_ab, qber


# ----------------------------------------------------------------------
# fast interpolated bound for the optimizer's inner loop
# ----------------------------------------------------------------------

class _RoofTable:
    """Tangent-point table over (omega, p) for fast approximate xy bounds.

    Used only to steer the setup optimizer; accepted rates are always
    re-evaluated with the exact entropy_bound_xy.
    """

    N_P = 2049

    def __init__(self):
        from .hard_bound import OMEGA_EPS, OMEGA_GRID_N, OMEGA_TOP_EPS

        self.om = np.linspace(math.pi / 4 + OMEGA_EPS, math.pi / 2 - OMEGA_TOP_EPS,
                              OMEGA_GRID_N)
        self.ps = np.linspace(0.0, 0.5, self.N_P)
        bs = np.empty((self.N_P, len(self.om)))
        istar = np.empty_like(bs)
        il = np.empty(self.N_P)
        for k, p in enumerate(self.ps):
            q = (1 - 2 * p) ** 2
            bs[k], istar[k] = _roof_params_vec(self.om, q)
            il[k] = info_local_bound(q)
        self.bs, self.istar, self.il = bs, istar, il
        self.sin_om, self.cos_om = np.sin(self.om), np.cos(self.om)

    def bound(self, X, Y, p):
        """Approximate 1 - min_omega roof(beta(omega)); easy candidate exact."""
        q = (1 - 2 * p) ** 2
        if X + Y <= 2.0:
            return 1.0 - info_local_bound(q)
        # easy-regime candidate (exact closed form)
        if X < 2.0 and (4.0 - X * X) <= X * Y:
            z = min((Y / math.sqrt(4.0 - X * X) + 1.0) / 2.0, 1.0)
        else:
            z = float(z_of_beta((X + Y) / (2.0 * math.sqrt(2.0)), math.pi / 4))
        best = float(h_q(z, q))
        # hard-regime scan with p-interpolated roof parameters
        u = p / 0.5 * (self.N_P - 1)
        k0 = min(int(u), self.N_P - 2)
        w = u - k0
        bs = (1 - w) * self.bs[k0] + w * self.bs[k0 + 1]
        istar = (1 - w) * self.istar[k0] + w * self.istar[k0 + 1]
        il = (1 - w) * self.il[k0] + w * self.il[k0 + 1]
        beta = (self.cos_om * X + self.sin_om * Y) / 2.0
        chord = il + (istar - il) / (bs - self.sin_om) * (beta - self.sin_om)
        anz = I_ansatz_closed(np.minimum(beta, 1.0), self.om, q)
        vals = np.where(beta <= self.sin_om, il, np.where(beta >= bs, anz, chord))
        return 1.0 - min(best, float(vals.min()))


_roof_table = None


def _get_roof_table():
    global _roof_table
    if _roof_table is None:
        _roof_table = _RoofTable()
    return _roof_table


# ----------------------------------------------------------------------
# key rate
# ----------------------------------------------------------------------

def _entropy_bound(corr: Correlators, q: float, kind: str, omega=None, fast=False):
    if kind in ("chsh", "qber"):
        omega = math.pi / 4 if omega is None else omega
        beta = beta_of(corr, BellTest(omega))
        return 1.0 - I_easy(min(beta, 1.0), BellTest(omega), q)
    if kind == "xy":
        if omega is not None:
            test = BellTest(omega)
            beta = beta_of(corr, test)
            if omega <= math.pi / 4:
                return 1.0 - I_easy(min(beta, 1.0), test, q)
            from .hard_bound import roof
            return 1.0 - roof(test, q).value(beta)
        if fast:
            p = (1.0 - math.sqrt(max(q, 0.0))) / 2.0
            return _get_roof_table().bound(corr.X, corr.Y, p)
        return entropy_bound_xy(corr, q).value
    raise DomainError(f"unknown bound kind {kind!r}")


def key_rate(setup: ExperimentSetup, omega=None, q=None, method: str = "xy-noisy",
             fast: bool = False) -> float:
    """Asymptotic rate r = (entropy bound) - (error-correction cost).

    method selects both the bound (CHSH score or the (X, Y) pair, at a
    fixed test angle omega or optimized over it when omega is None) and
    the error-correction term (h(Q) for 'chsh-qber', H(A0|B2) otherwise).
    q defaults to the setup's own (1 - 2p)^2.
    """
    corr, h_ab, qber = simulate(setup)
    if q is None:
        q = setup.q
    kind = _BOUND_KIND.get(method, method)
    bound = _entropy_bound(corr, q, kind, omega=omega, fast=fast)
    ec = float(binary_entropy(qber)) if kind == "qber" else h_ab
    return bound - ec


@dataclass(frozen=True)
class KeyRatePoint:
    """Optimized key-rate point at one detection efficiency."""

    eta: float
    rate: float                 # clamped at 0
    rate_raw: float
    method: str
    setup: ExperimentSetup
    omega: float
    q: float


# ----------------------------------------------------------------------
# setup optimization
# ----------------------------------------------------------------------

def _unpack(v, model, use_p, eta):
    a0, a1, b0, b1, b2 = v[:5]
    idx = 5
    theta = math.pi / 4
    if model == "qubit":
        theta = float(np.clip(v[idx], 0.0, math.pi / 4))
        idx += 1
    p = float(np.clip(v[idx], 0.0, 0.49)) if use_p else 0.0
    return ExperimentSetup(theta=theta, a0=a0, a1=a1, b0=b0, b1=b1, b2=b2,
                           eta=eta, p=p)


def _base_vector(model, use_p):
    v = list(CHSH_ANGLES)
    if model == "qubit":
        v.append(math.pi / 4)
    if use_p:
        v.append(0.02)
    return np.array(v)


def _polish(neg, v0, restarts=2, maxiter=8000):
    v = np.asarray(v0, dtype=float)
    fbest = neg(v)
    for _ in range(restarts):
        res = minimize(neg, v, method="Nelder-Mead",
                       options={"xatol": 1e-13, "fatol": 1e-16,
                                "maxiter": maxiter, "maxfev": maxiter})
        if res.fun <= fbest:
            v, fbest = res.x, float(res.fun)
    return fbest, v


def optimize_rate(eta: float, model: str = "qubit", method: str = "xy-noisy",
                  starts: int = 8, seed: int = 0, warm=None) -> KeyRatePoint:
    """Maximize the key rate over the setup (and p where the method uses it).

    Deterministic multi-start Nelder-Mead seeded with the CHSH solution,
    any warm-start vectors provided, and small perturbations of the best
    candidate.  The search uses the fast interpolated bound; the returned
    rate is re-evaluated with the exact one.
    """
    if model not in ("singlet", "qubit"):
        raise DomainError(f"unknown model {model!r}")
    if method not in METHODS:
        raise DomainError(f"unknown method {method!r}; choose from {METHODS}")
    use_p = _USES_NOISE[method]
    rng = np.random.default_rng(seed)

    def neg(v):
        try:
            setup = _unpack(v, model, use_p, eta)
            return -key_rate(setup, method=method, fast=True)
        except Exception:
            return 2.0

    pool = [_base_vector(model, use_p)]
    if warm is not None:
        pool = [np.asarray(w, dtype=float) for w in warm] + pool
    best = (np.inf, pool[0])
    for v0 in pool[:5]:
        fv, v = _polish(neg, v0)
        if fv < best[0]:
            best = (fv, v)
    for _ in range(max(starts - 4, 0)):
        fv, v = _polish(neg, best[1] + rng.normal(0.0, 0.03, len(best[1])), restarts=1)
        if fv < best[0]:
            best = (fv, v)
    if abs(best[0]) < 5e-4:
        # near a threshold the optimum sits in a shallow narrowing valley;
        # spend extra polish there
        fv, v = _polish(neg, best[1], restarts=3, maxiter=15000)
        if fv < best[0]:
            best = (fv, v)
        if _BOUND_KIND[method] == "xy":
            # the xy bound dominates the CHSH one pointwise, so the CHSH
            # optimum is a guaranteed-feasible seed for the exact xy rate
            chsh_method = "chsh-noisy" if use_p else "chsh"

            def neg_chsh(u):
                try:
                    return -key_rate(_unpack(u, model, use_p, eta), method=chsh_method)
                except Exception:
                    return 2.0

            cand = [best[1]]
            fc, vc = _polish(neg_chsh, best[1], restarts=2, maxiter=10000)
            for w in pool[:2]:
                f2, v2 = _polish(neg_chsh, w, restarts=2, maxiter=10000)
                if f2 < fc:
                    fc, vc = f2, v2
            cand.append(vc)

            def neg_exact(u):
                try:
                    return -key_rate(_unpack(u, model, use_p, eta), method=method)
                except Exception:
                    return 2.0

            best = min(((neg_exact(v), v) for v in cand), key=lambda t: t[0])
            fv, v = _polish(neg_exact, best[1], restarts=1, maxiter=1500)
            if fv < best[0]:
                best = (fv, v)
    setup = _unpack(best[1], model, use_p, eta)
    rate_raw = key_rate(setup, method=method)   # exact bound
    if _BOUND_KIND[method] == "xy":
        br = entropy_bound_xy(simulate(setup)[0], setup.q)
        omega = br.omega
    else:
        omega = math.pi / 4
    return KeyRatePoint(eta=eta, rate=max(rate_raw, 0.0), rate_raw=rate_raw,
                        method=method, setup=setup, omega=omega, q=setup.q)


def _vector_of(point: KeyRatePoint, model, use_p):
    s = point.setup
    v = [s.a0, s.a1, s.b0, s.b1, s.b2]
    if model == "qubit":
        v.append(s.theta)
    if use_p:
        v.append(s.p)
    return np.array(v)


def critical_efficiency(model: str, method: str, tol_eta: float = 1e-3,
                        seed: int = 0, coarse_step: float = 0.01) -> float:
    """Smallest eta with positive optimized rate, by continuation + bisection.

    Descends from eta = 1 in coarse steps, warm-starting each optimization
    from the solutions found so far, until the rate turns non-positive;
    then bisects the bracketing interval down to width tol_eta.
    """
    if tol_eta < 1e-4:
        raise DomainError("tol_eta below 1e-4 is not supported")
    use_p = _USES_NOISE[method]
    warm = []
    # For the xy bound the chsh-based rate at the same setup is a valid
    # lower bound (the pi/4 test is one of the candidates in the omega
    # minimization), so a positive chsh-branch rate is sound evidence of a
    # positive xy rate; tracking that branch separately keeps the sign
    # test sharp where the xy search itself may lose the narrowing valley.
    aux_method = None
    if _BOUND_KIND[method] == "xy":
        aux_method = "chsh-noisy" if use_p else "chsh"
    warm_aux = []

    def rate_at(eta, starts=8):
        pt = optimize_rate(eta, model, method, starts=starts, seed=seed,
                           warm=(warm + warm_aux)[:6])
        best = pt.rate_raw
        if aux_method is not None:
            pa = optimize_rate(eta, model, aux_method, starts=starts, seed=seed,
                               warm=warm_aux[:5])
            if pa.rate_raw > RATE_EPS:
                warm_aux.insert(0, _vector_of(pa, model, use_p))
                if len(warm_aux) >= 2:
                    warm_aux.insert(0, 2.0 * warm_aux[0] - warm_aux[1])
            best = max(best, pa.rate_raw)
        if best <= RATE_EPS and warm:
            # near the threshold the optimal branch narrows quickly; retry
            # harder before accepting a sign change
            pt2 = optimize_rate(eta, model, method, starts=starts + 6,
                                seed=seed + 1, warm=(warm + warm_aux)[:6])
            if pt2.rate_raw > pt.rate_raw:
                pt = pt2
            best = max(best, pt.rate_raw)
        if pt.rate_raw > RATE_EPS:
            warm.insert(0, _vector_of(pt, model, use_p))
            if len(warm) >= 2:
                # linear continuation predictor for the next (lower) eta
                warm.insert(0, 2.0 * warm[0] - warm[1])
        return best

    if rate_at(1.0) <= RATE_EPS:
        raise BracketFailure("optimized rate not positive at eta = 1")
    lo, hi = None, 1.0
    eta = 1.0
    while eta > 0.7 + 1e-12:
        eta = max(eta - coarse_step, 0.7)
        if rate_at(eta) > RATE_EPS:
            hi = eta
        else:
            lo = eta
            break
    if lo is None:
        raise BracketFailure("rate still positive at eta = 0.7")
    while hi - lo > tol_eta:
        mid = (lo + hi) / 2.0
        if rate_at(mid, starts=10) > RATE_EPS:
            hi = mid
        else:
            lo = mid
    return (lo + hi) / 2.0
