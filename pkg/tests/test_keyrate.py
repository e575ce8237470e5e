import math

import numpy as np
import pytest

from diqkd_xy import (
    ExperimentSetup,
    cond_entropy_AB,
    critical_efficiency,
    key_rate,
    optimize_rate,
    simulate,
)
from diqkd_xy.errors import DomainError
from diqkd_xy.keyrate import CHSH_ANGLES, _key_joint

SQRT2 = math.sqrt(2.0)


def make_setup(eta, theta=math.pi / 4, p=0.0, angles=CHSH_ANGLES):
    a0, a1, b0, b1, b2 = angles
    return ExperimentSetup(theta=theta, a0=a0, a1=a1, b0=b0, b1=b1, b2=b2, eta=eta, p=p)


# ---------------------------------------------------------------- oracle

def povm_oracle(setup):
    """Density-matrix model with explicit click/no-click POVMs.

    Independent of the closed-form correlator expressions: builds the
    two-qubit state, binned +/-1 effects per side, and Bob's three-outcome
    key POVM, then takes traces.
    """
    th = setup.theta
    psi = np.array([math.cos(th), 0.0, 0.0, math.sin(th)])
    rho = np.outer(psi, psi)

    def proj(angle):
        n = np.array([[math.cos(angle), math.sin(angle)],
                      [math.sin(angle), -math.cos(angle)]])
        w, v = np.linalg.eigh(n)
        plus = np.outer(v[:, np.argmax(w)], v[:, np.argmax(w)])
        return plus, np.eye(2) - plus

    def binned_obs(angle, eta):
        plus, minus = proj(angle)
        m_plus = eta * plus + (1 - eta) * np.eye(2)
        m_minus = eta * minus
        return m_plus - m_minus

    def corr(a, b):
        A = binned_obs(a, setup.eta)
        B = binned_obs(b, setup.eta)
        return float(np.trace(rho @ np.kron(A, B)).real)

    X = corr(setup.a0, setup.b0) + corr(setup.a0, setup.b1)
    Y = corr(setup.a1, setup.b0) - corr(setup.a1, setup.b1)

    # Alice binned two-outcome, Bob three-outcome key POVM
    pa, ma = proj(setup.a0)
    A_plus = setup.eta * pa + (1 - setup.eta) * np.eye(2)
    A_minus = setup.eta * ma
    pb, mb = proj(setup.b2)
    B = [setup.eta * pb, setup.eta * mb, (1 - setup.eta) * np.eye(2)]
    P = np.zeros((2, 3))
    for i, A in enumerate((A_plus, A_minus)):
        for j, Bj in enumerate(B):
            P[i, j] = float(np.trace(rho @ np.kron(A, Bj)).real)
    P = (1 - setup.p) * P + setup.p * P[::-1]
    return abs(X), abs(Y), P


def test_simulate_ideal_singlet():
    corr, h_ab, qber = simulate(make_setup(1.0))
    assert corr.X == pytest.approx(SQRT2, abs=1e-12)
    assert corr.Y == pytest.approx(SQRT2, abs=1e-12)
    assert qber == pytest.approx(0.0, abs=1e-12)
    assert h_ab == pytest.approx(0.0, abs=1e-10)


def test_simulate_eta_zero_deterministic():
    corr, h_ab, qber = simulate(make_setup(0.0))
    assert corr.X == pytest.approx(2.0, abs=1e-12)
    assert corr.Y == pytest.approx(0.0, abs=1e-12)
    assert h_ab == pytest.approx(0.0, abs=1e-12)
    assert qber == pytest.approx(0.0, abs=1e-12)


def test_simulate_unit_efficiency_correlator_identity():
    # E(a, b) = cos a cos b + sin(2 theta) sin a sin b at eta = 1
    rng = np.random.default_rng(0)
    for _ in range(200):
        th = rng.uniform(0, math.pi / 4)
        a0, a1, b0, b1, b2 = rng.uniform(-math.pi, math.pi, 5)
        s = ExperimentSetup(theta=th, a0=a0, a1=a1, b0=b0, b1=b1, b2=b2, eta=1.0, p=0.0)
        corr, _, _ = simulate(s)

        def E(a, b):
            return math.cos(a) * math.cos(b) + math.sin(2 * th) * math.sin(a) * math.sin(b)

        assert corr.X == pytest.approx(abs(E(a0, b0) + E(a0, b1)), abs=1e-12)
        assert corr.Y == pytest.approx(abs(E(a1, b0) - E(a1, b1)), abs=1e-12)


def test_simulate_matches_povm_oracle():
    rng = np.random.default_rng(1)
    for _ in range(50):
        s = ExperimentSetup(
            theta=rng.uniform(0, math.pi / 4),
            a0=rng.uniform(-math.pi, math.pi),
            a1=rng.uniform(-math.pi, math.pi),
            b0=rng.uniform(-math.pi, math.pi),
            b1=rng.uniform(-math.pi, math.pi),
            b2=rng.uniform(-math.pi, math.pi),
            eta=rng.uniform(0.5, 1.0),
            p=rng.uniform(0, 0.4),
        )
        X, Y, P = povm_oracle(s)
        corr, h_ab, qber = simulate(s)
        assert corr.X == pytest.approx(X, abs=1e-10)
        assert corr.Y == pytest.approx(Y, abs=1e-10)
        assert np.allclose(_key_joint(s), P, atol=1e-10)
        assert h_ab == pytest.approx(cond_entropy_AB(P), abs=1e-10)
        assert qber == pytest.approx(P[0, 1] + P[1, 0] + P[1, 2], abs=1e-12)


def test_cond_entropy_AB_examples():
    assert cond_entropy_AB([[0.25, 0.25], [0.25, 0.25]]) == pytest.approx(1.0)
    assert cond_entropy_AB([[0.5, 0.0], [0.0, 0.5]]) == pytest.approx(0.0)
    eps = 0.11
    bsc = [[(1 - eps) / 2, eps / 2], [eps / 2, (1 - eps) / 2]]
    assert cond_entropy_AB(bsc) == pytest.approx(0.49992, abs=5e-6)
    with pytest.raises(DomainError):
        cond_entropy_AB([[0.9, 0.3], [0.1, 0.1]])


def test_key_rate_ideal_singlet():
    s = make_setup(1.0)
    for method in ("chsh", "chsh-qber", "xy-noisy"):
        assert key_rate(s, omega=math.pi / 4, method=method) == pytest.approx(1.0, abs=1e-9)
    assert key_rate(s, method="xy-noisy") == pytest.approx(1.0, abs=1e-9)


def test_key_rate_local_point_not_positive():
    s = make_setup(0.0)  # deterministic local point
    for method in ("chsh", "xy-noisy"):
        assert key_rate(s, method=method) <= 1e-12


def test_method_dominance_fixed_setup():
    # the (X, Y) bound dominates the CHSH one at the same q
    rng = np.random.default_rng(2)
    for _ in range(20):
        s = ExperimentSetup(
            theta=rng.uniform(0.3, math.pi / 4),
            a0=rng.normal(0, 0.3),
            a1=rng.normal(math.pi / 2, 0.3),
            b0=rng.normal(math.pi / 4, 0.3),
            b1=rng.normal(-math.pi / 4, 0.3),
            b2=rng.normal(0, 0.3),
            eta=rng.uniform(0.85, 1.0),
            p=rng.uniform(0, 0.2),
        )
        r_xy = key_rate(s, method="xy-noisy")
        r_chsh = key_rate(s, method="chsh-noisy")
        assert r_xy >= r_chsh - 1e-9


def test_optimize_rate_ideal():
    for method in ("chsh", "xy-noisy"):
        pt = optimize_rate(1.0, "singlet", method, starts=4, seed=0)
        assert pt.rate == pytest.approx(1.0, abs=1e-6)


def test_optimize_rate_qubit_examples():
    pt = optimize_rate(0.90, "qubit", "xy-noisy", starts=6, seed=0)
    assert pt.rate_raw > 0  # above the 0.826 threshold
    pt = optimize_rate(0.80, "qubit", "xy-noisy", starts=6, seed=0)
    assert pt.rate_raw <= 1e-8  # below every Table-I threshold


def test_optimized_rate_monotone_in_eta():
    rates = []
    warm = None
    for eta in (0.85, 0.90, 0.95, 1.0):
        pt = optimize_rate(eta, "qubit", "chsh", starts=6, seed=0, warm=warm)
        warm = [[pt.setup.a0, pt.setup.a1, pt.setup.b0, pt.setup.b1, pt.setup.b2,
                 pt.setup.theta]]
        rates.append(pt.rate)
    assert all(rates[i + 1] >= rates[i] - 1e-6 for i in range(len(rates) - 1))


def test_critical_efficiency_tolerance_guard():
    with pytest.raises(DomainError):
        critical_efficiency("qubit", "chsh", tol_eta=1e-5)
