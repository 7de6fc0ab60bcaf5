from __future__ import annotations

import numpy as np
import pytest

import regretsynth as rs
from regretsynth.errors import UnstableSystem
from regretsynth.norms import sigma_max_on_grid

from conftest import random_stable_ss


def test_static_norm_is_sigma_max():
    D = np.array([[1.0, 2.0], [0.0, 0.5]])
    g = rs.static_gain(D, 1.0)
    assert abs(rs.hinf_norm(g) - np.linalg.svd(D, compute_uv=False)[0]) < 1e-12


def test_first_order_peak():
    g = rs.StateSpace([[0.5]], [[1.0]], [[1.0]], [[0.0]], 1.0)
    val, theta = rs.hinf_norm(g, return_theta=True)
    assert abs(val - 2.0) < 1e-6
    assert theta < 1e-4
    # confirm against a dense grid
    dense = sigma_max_on_grid(g, np.linspace(0, np.pi, 10**4)).max()
    assert val >= dense - 1e-9


def test_unstable_rejected():
    g = rs.StateSpace([[1.01]], [[1.0]], [[1.0]], [[0.0]], 1.0)
    with pytest.raises(UnstableSystem):
        rs.hinf_norm(g)


def test_induced_norm_consistency():
    # ||G d||_2 <= (1 + 1e-6) ||G||_inf ||d||_2 over random finite signals
    rng = np.random.default_rng(4)
    g = random_stable_ss(rng, 3, 2, 2, rho=0.85)
    bound = (1 + 1e-6) * rs.hinf_norm(g)
    for _ in range(1000):
        d = rs.Signal(0, rng.standard_normal((int(rng.integers(2, 30)), 2)))
        y = rs.simulate(g, d)
        assert y.norm() <= bound * d.norm() + 1e-12


def test_norm_catches_sharp_resonance():
    # pole very close to the circle at an interior angle
    r, th0 = 0.9995, 0.8
    A = r * np.array([[np.cos(th0), np.sin(th0)], [-np.sin(th0), np.cos(th0)]])
    g = rs.StateSpace(A, [[1.0], [0.0]], [[0.0, 1.0]], [[0.0]], 1.0)
    peak_direct = sigma_max_on_grid(g, np.linspace(th0 - 1e-3, th0 + 1e-3, 20001)).max()
    assert rs.hinf_norm(g) >= peak_direct * (1 - 1e-6)


def test_margins_no_crossover():
    m = rs.loop_margins(rs.static_gain([[0.5]], 1.0))
    assert not m.has_crossover


def test_margins_integrator():
    # k/s with unity crossover at k: PM ~ 90 degrees for small Ts * wc
    k = 2.0
    L = rs.zoh_discretize([[0.0]], [[1.0]], [[k]], [[0.0]], 0.01)
    m = rs.loop_margins(L)
    assert m.has_crossover
    assert abs(m.phase_margin_deg - 90.0) < 1.0
    assert abs(m.crossover_rad_s - k) < 0.05 * k


def test_frequency_grid_invariants():
    grid = rs.FrequencyGrid.default(128)
    th = grid.thetas
    assert th[0] == 0.0 and th[-1] == np.pi
    assert np.all(np.diff(th) > 0)
    fine = grid.refined_near([0.5])
    assert len(fine) > len(grid)
