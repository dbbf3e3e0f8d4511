import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rotorphonon import (
    BasisTruncation,
    ConvergenceError,
    DomainError,
    ProductLabel,
    ResonanceError,
    ValidationError,
    build_single_mode_hamiltonian,
    convergence_check,
    dressed_spectrum,
    pt_shift_mode,
    resonant_splitting_l0,
    resonant_splitting_two_level,
    symmetric_eigen,
)
from rotorphonon.constants import TWO_PI
from rotorphonon.spectrum import bare_energy

NU, B = 2.0e6, 7.0e6


def kron_oracle(nu, b, g_hz, form, trunc):
    """Complex-Hermitian H = H0 + 2 (g/2pi) (a + a^dag) x f(phi), f = cos or sin,
    with rotor elements from quadrature, in the unrotated |l> basis."""
    nn = trunc.n_max + 1
    a = np.diag(np.sqrt(np.arange(1, nn)), 1)
    x = a + a.T
    ls = np.arange(-trunc.l_max, trunc.l_max + 1)
    phi = np.linspace(0, 2 * np.pi, 512, endpoint=False)
    fn = np.cos(phi) if form == "cos" else np.sin(phi)
    f = np.array([[np.mean(np.exp(-1j * lp * phi) * fn * np.exp(1j * l * phi)) for l in ls] for lp in ls])
    h0 = np.kron(np.diag(b * ls.astype(float) ** 2), np.eye(nn)) + np.kron(np.eye(len(ls)), np.diag(nu * (np.arange(nn) + 0.5)))
    return h0 + 2 * g_hz * np.kron(f, x)


def test_hand_built_six_state_matrix():
    trunc = BasisTruncation(1, 1)
    g = TWO_PI * 1e4
    h = build_single_mode_hamiltonian(TWO_PI * NU, B, g, "cos", trunc)
    states = [(n, l) for l in (-1, 0, 1) for n in (0, 1)]
    expect = np.zeros((6, 6))
    for i, (n, l) in enumerate(states):
        expect[i, i] = NU * (n + 0.5) + B * l * l
        for j, (m, k) in enumerate(states):
            if abs(n - m) == 1 and abs(l - k) == 1:
                expect[i, j] = 1e4 * math.sqrt(max(n, m))
    np.testing.assert_allclose(h, expect, rtol=0, atol=1e-9)


@pytest.mark.parametrize("form", ["cos", "sin"])
def test_spectrum_matches_complex_hermitian_oracle(form):
    trunc = BasisTruncation(4, 3)
    g_hz = 3e5
    ours = np.linalg.eigvalsh(build_single_mode_hamiltonian(TWO_PI * NU, B, TWO_PI * g_hz, form, trunc))
    ref = np.linalg.eigvalsh(kron_oracle(NU, B, g_hz, form, trunc))
    np.testing.assert_allclose(ours, ref, rtol=1e-12, atol=1e-6)


def test_uncoupled_spectrum_is_bare_and_fully_labelled():
    trunc = BasisTruncation(3, 2)
    ds = dressed_spectrum(TWO_PI * NU, B, 0.0, "cos", trunc)
    assert len(set(ds.labels)) == trunc.dim
    for lab, e in zip(ds.labels, ds.eigenvalues):
        assert e == pytest.approx(bare_energy(lab.n, lab.l, TWO_PI * NU, B), rel=1e-15)
    assert not ds.strongly_mixed


def test_two_level_resonance_closed_form():
    # nu = 3B: |1, l=1> and |0, l=2> are degenerate; two-state block gives +-(g/2pi) sqrt(n)
    b, g_hz = 1e6, 10.0
    ds = dressed_spectrum(TWO_PI * 3 * b, b, TWO_PI * g_hz, "cos", BasisTruncation(6, 6))
    e = bare_energy(1, 1, TWO_PI * 3 * b, b)
    pair = sorted([ds.energy(1, 1), ds.energy(0, 2)])
    half = resonant_splitting_two_level(1, TWO_PI * g_hz)
    np.testing.assert_allclose(pair, [e - half, e + half], rtol=0, atol=1e-3 * g_hz)


def test_three_level_resonance_closed_form():
    b, g_hz = 1e6, 10.0
    ds = dressed_spectrum(TWO_PI * b, b, TWO_PI * g_hz, "cos", BasisTruncation(6, 6))
    e = bare_energy(2, 0, TWO_PI * b, b)
    trip = sorted([ds.energy(2, 0), ds.energy(1, 1), ds.energy(1, -1)])
    half = resonant_splitting_l0(2, TWO_PI * g_hz)
    np.testing.assert_allclose(trip, [e - half, e, e + half], rtol=0, atol=1e-3 * g_hz)


def test_pt_ground_state_closed_form():
    g = TWO_PI * 500.0
    assert pt_shift_mode(ProductLabel(0, 0), TWO_PI * NU, B, g) == pytest.approx(-2 * 500.0**2 / (NU + B), rel=1e-13)


def test_pt_sideband_shift_closed_form():
    g_hz = 500.0
    d = pt_shift_mode((1, 0), TWO_PI * NU, B, TWO_PI * g_hz) - pt_shift_mode((0, 0), TWO_PI * NU, B, TWO_PI * g_hz)
    assert d == pytest.approx(4 * B * g_hz**2 / (NU**2 - B**2), rel=1e-12)


def test_pt_agrees_with_exact_for_weak_coupling():
    g = TWO_PI * 2e3
    ds = dressed_spectrum(TWO_PI * NU, B, g, "cos", BasisTruncation(6, 6))
    # |l| = 1 pairs mix at second order through l = 0, so only l = 0 and |l| >= 2 are non-degenerate
    for lab in [(0, 0), (1, 0), (2, 2), (1, -3)]:
        assert ds.shift(*lab) == pytest.approx(pt_shift_mode(lab, TWO_PI * NU, B, g), rel=1e-3)


def test_pt_resonance_guard():
    with pytest.raises(ResonanceError):
        pt_shift_mode((1, 0), TWO_PI * B, B, TWO_PI * 10.0)
    with pytest.raises(DomainError):
        pt_shift_mode((-1, 0), TWO_PI * NU, B, 1.0)
    with pytest.raises(DomainError):
        resonant_splitting_two_level(0, 1.0)


def test_truncation_rules():
    t = BasisTruncation(10, 15)
    assert t.dim == 11 * 31
    assert t.index(0, -15) == 0 and t.index(10, 15) == t.dim - 1
    with pytest.raises(ValidationError):
        t.index(11, 0)
    with pytest.raises(ValidationError):
        BasisTruncation(0, 2)


def test_convergence_check_weak_coupling_keeps_basis():
    t = BasisTruncation(6, 4)
    assert convergence_check(TWO_PI * NU, B, TWO_PI * 1e3, t, [(0, 0), (1, 0)]) == t


def test_convergence_check_strong_coupling_fails():
    with pytest.raises(ConvergenceError):
        convergence_check(TWO_PI * 1e3, 1e3, TWO_PI * 1e5, BasisTruncation(4, 4), [(0, 0)], max_dim=3000)


def test_symmetric_eigen_random_50():
    rng = np.random.default_rng(12345)
    m = rng.standard_normal((50, 50))
    a = m + m.T
    w, v = symmetric_eigen(a)
    assert np.all(np.diff(w) >= 0)
    assert np.max(np.abs(a @ v - v * w)) < 1e-12 * np.abs(a).max() * 50
    np.testing.assert_allclose(v.T @ v, np.eye(50), atol=1e-12)
    with pytest.raises(ValidationError):
        symmetric_eigen(np.ones((2, 3)))


@settings(max_examples=25, deadline=None)
@given(st.floats(1e5, 1e7), st.floats(1e5, 1e7), st.floats(0.0, 1e5))
def test_gauge_equivalence_and_trace(nu, b, g_hz):
    trunc = BasisTruncation(4, 3)
    hc = build_single_mode_hamiltonian(TWO_PI * nu, b, TWO_PI * g_hz, "cos", trunc)
    hs = build_single_mode_hamiltonian(TWO_PI * nu, b, TWO_PI * g_hz, "sin", trunc)
    wc, ws = np.linalg.eigvalsh(hc), np.linalg.eigvalsh(hs)
    scale = np.abs(wc).max()
    np.testing.assert_allclose(wc, ws, rtol=0, atol=1e-12 * scale)
    assert wc.sum() == pytest.approx(np.trace(hc), rel=1e-12)
