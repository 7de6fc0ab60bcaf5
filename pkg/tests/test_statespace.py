from __future__ import annotations

import numpy as np
import pytest

import regretsynth as rs
from regretsynth.errors import DimensionError, SampleTimeError
from regretsynth.hinf import tustin_c2d, tustin_d2c

from conftest import random_stable_ss


def test_dimension_checks():
    with pytest.raises(DimensionError):
        rs.StateSpace([[1, 0]], [[1]], [[1]], [[1]])
    with pytest.raises(DimensionError):
        rs.StateSpace([[1]], [[1]], [[1]], [[1, 2]])
    with pytest.raises(SampleTimeError):
        rs.StateSpace([[0.5]], [[1]], [[1]], [[0]], sample_time=-1.0)


def test_immutability():
    g = rs.StateSpace([[0.5]], [[1.0]], [[1.0]], [[0.0]], 1.0)
    with pytest.raises(ValueError):
        g.A[0, 0] = 2.0


def test_schur_and_poles():
    g = rs.StateSpace([[0.5, 1.0], [0.0, -0.3]], np.eye(2), np.eye(2),
                      np.zeros((2, 2)), 1.0)
    assert g.is_schur()
    assert np.allclose(sorted(g.poles()), [-0.3, 0.5])
    bad = rs.StateSpace([[1.2]], [[1]], [[1]], [[0]], 1.0)
    assert not bad.is_schur()


def test_zoh_integrator_closed_form():
    # x' = u  ->  A = 1, B = Ts
    ss = rs.zoh_discretize([[0.0]], [[1.0]], [[1.0]], [[0.0]], 0.25)
    assert abs(ss.A[0, 0] - 1.0) < 1e-14
    assert abs(ss.B[0, 0] - 0.25) < 1e-14


def test_zoh_scalar_closed_form():
    ss = rs.zoh_discretize([[-1.0]], [[1.0]], [[1.0]], [[0.0]], 0.1)
    assert abs(ss.A[0, 0] - np.exp(-0.1)) < 1e-14
    assert abs(ss.B[0, 0] - (1.0 - np.exp(-0.1))) < 1e-14


def test_zoh_siso_plant_closed_form():
    # G(s) = 15 / (s + 5.6), Ts = 0.001
    Ac, Bc, Cc, Dc = rs.tf1_to_ss(0.0, 15.0, 1.0, 5.6)
    ss = rs.zoh_discretize(Ac, Bc, Cc, Dc, 0.001)
    assert abs(ss.A[0, 0] - np.exp(-0.0056)) < 1e-14
    # C B / |pole residue|: compare DC gain and the first Markov term
    markov1 = float(ss.C[0, 0] * ss.B[0, 0])
    assert abs(markov1 - (15.0 / 5.6) * (1 - np.exp(-0.0056))) < 1e-12
    assert abs(ss.dcgain()[0, 0] - 15.0 / 5.6) < 1e-9


def test_zoh_stable_stays_schur():
    rng = np.random.default_rng(0)
    for _ in range(20):
        n = int(rng.integers(1, 5))
        Ac = rng.standard_normal((n, n))
        Ac = Ac - (np.max(np.linalg.eigvals(Ac).real) + 0.5) * np.eye(n)
        ss = rs.zoh_discretize(Ac, rng.standard_normal((n, 1)),
                               rng.standard_normal((1, n)), [[0.0]], 0.05)
        assert ss.is_schur()


def test_series_frequency_oracle():
    rng = np.random.default_rng(1)
    g1 = random_stable_ss(rng, 3, 2, 2)
    g2 = random_stable_ss(rng, 2, 2, 3)
    cascade = rs.series(g1, g2)
    for th in np.linspace(0, np.pi, 9):
        z = np.exp(1j * th)
        assert np.allclose(cascade.at_z(z), g2.at_z(z) @ g1.at_z(z), atol=1e-12)


def test_invert_is_exact_inverse():
    rng = np.random.default_rng(2)
    g = random_stable_ss(rng, 3, 2, 2)
    gi = rs.invert(g)
    for th in [0.0, 0.7, 2.2]:
        z = np.exp(1j * th)
        assert np.allclose(g.at_z(z) @ gi.at_z(z), np.eye(2), atol=1e-10)


def test_sample_time_mismatch():
    a = rs.StateSpace([[0.1]], [[1]], [[1]], [[0]], 1.0)
    b = rs.StateSpace([[0.1]], [[1]], [[1]], [[0]], 0.5)
    with pytest.raises(SampleTimeError):
        rs.series(a, b)


def test_tustin_round_trip_and_mapping():
    rng = np.random.default_rng(3)
    g = random_stable_ss(rng, 4, 2, 3)
    Ac, Bc, Cc, Dc = tustin_d2c(g.A, g.B, g.C, g.D)
    A2, B2, C2, D2 = tustin_c2d(Ac, Bc, Cc, Dc)
    assert np.max(np.abs(A2 - g.A)) < 1e-12
    assert np.max(np.abs(D2 - g.D)) < 1e-12
    for th in [0.3, 1.1, 2.9]:
        z = np.exp(1j * th)
        s = (z - 1) / (z + 1)
        Gd = g.at_z(z)
        Gc = Cc @ np.linalg.solve(s * np.eye(4) - Ac, Bc) + Dc
        assert np.max(np.abs(Gd - Gc)) < 1e-10


def test_balanced_tf1():
    Ac, Bc, Cc, Dc = rs.tf1_to_ss(1000.0, 804.0, 1.0, 8040.0)
    assert abs(abs(Bc[0, 0]) - abs(Cc[0, 0])) < 1e-9
    assert Dc[0, 0] == 1000.0
