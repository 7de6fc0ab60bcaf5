from __future__ import annotations

import numpy as np
import pytest

import regretsynth as rs
from regretsynth.errors import DimensionError, WellPosednessError

from conftest import random_generalized_plant, random_stable_ss


def test_partition_invariants_enforced():
    ss = rs.StateSpace([[0.5]], [[1.0, 1.0]], [[1.0], [1.0]],
                       [[0.3, 0.0], [0.0, 0.0]], 1.0)
    with pytest.raises(DimensionError):  # D_ed != 0
        rs.GeneralizedPlant(ss, n_d=1, n_u=1, n_e=1, n_y=1)


def test_lft_lower_zero_controller():
    P = random_generalized_plant(0)
    K = rs.static_gain(np.zeros((P.n_u, P.n_y)), 1.0)
    cl = rs.lft_lower(P, K)
    sub = P.ed_subsystem()
    for th in np.linspace(0, np.pi, 7):
        z = np.exp(1j * th)
        assert np.allclose(cl.at_z(z), sub.at_z(z), atol=1e-12)


def test_lft_lower_frequency_oracle():
    rng = np.random.default_rng(10)
    P = random_generalized_plant(5)
    K = random_stable_ss(rng, 2, P.n_y, P.n_u, rho=0.4)
    cl = rs.lft_lower(P, K)
    thetas = np.linspace(0, np.pi, 64)
    for th in thetas:
        z = np.exp(1j * th)
        Pz = P.ss.at_z(z)
        Kz = K.at_z(z)
        P11 = Pz[: P.n_e, : P.n_d]
        P12 = Pz[: P.n_e, P.n_d :]
        P21 = Pz[P.n_e :, : P.n_d]
        P22 = Pz[P.n_e :, P.n_d :]
        loop = np.eye(P.n_u) - Kz @ P22
        oracle = P11 + P12 @ Kz @ np.linalg.solve(
            np.eye(P.n_y) - P22 @ Kz, P21
        )
        rel = np.max(np.abs(cl.at_z(z) - oracle)) / max(1, np.max(np.abs(oracle)))
        assert rel < 1e-10


def test_lft_upper_zero_delta():
    rng = np.random.default_rng(11)
    M = random_stable_ss(rng, 3, 3, 3)
    Delta = rs.static_gain(np.zeros((1, 1)), 1.0)
    cl = rs.lft_upper(M, Delta, n_w=1, n_v=1)
    M22 = M.subsystem([1, 2], [1, 2])
    for th in np.linspace(0, np.pi, 7):
        z = np.exp(1j * th)
        assert np.allclose(cl.at_z(z), M22.at_z(z), atol=1e-12)


def test_matrix_lft_upper_formula():
    rng = np.random.default_rng(12)
    M = rng.standard_normal((4, 4))
    Delta = 0.3 * rng.standard_normal((2, 2))
    got = rs.matrix_lft_upper(M, Delta, 2, 2)
    M11, M12 = M[:2, :2], M[:2, 2:]
    M21, M22 = M[2:, :2], M[2:, 2:]
    expect = M22 + M21 @ Delta @ np.linalg.inv(np.eye(2) - M11 @ Delta) @ M12
    assert np.allclose(got, expect, atol=1e-12)


def test_lft_upper_forced_singularity():
    # D_vw = 0.5 and D_Delta = 2 make I - D_vw D_Delta singular
    M = rs.StateSpace(np.zeros((0, 0)), np.zeros((0, 2)), np.zeros((2, 0)),
                      np.array([[0.5, 1.0], [1.0, 0.0]]), 1.0)
    Delta = rs.static_gain([[2.0]], 1.0)
    with pytest.raises(WellPosednessError):
        rs.lft_upper(M, Delta, n_w=1, n_v=1)


def test_lft_upper_dynamic_oracle():
    rng = np.random.default_rng(13)
    M = random_stable_ss(rng, 3, 3, 3, rho=0.5)
    Delta = random_stable_ss(rng, 2, 1, 1, rho=0.4)
    cl = rs.lft_upper(M, Delta, n_w=1, n_v=1)
    for th in np.linspace(0, np.pi, 16):
        z = np.exp(1j * th)
        oracle = rs.matrix_lft_upper(M.at_z(z), Delta.at_z(z), 1, 1)
        assert np.max(np.abs(cl.at_z(z) - oracle)) < 1e-10


def test_weight_disturbance_frequency_oracle():
    rng = np.random.default_rng(14)
    P = random_generalized_plant(7)
    W = random_stable_ss(rng, 2, P.n_d, P.n_d, rho=0.5)
    Pw = rs.weight_disturbance(P, W)
    K = random_stable_ss(rng, 2, P.n_y, P.n_u, rho=0.3)
    cl_w = rs.lft_lower(Pw, K)
    cl = rs.lft_lower(P, K)
    chained = rs.series(W, cl)
    for th in np.linspace(0, np.pi, 9):
        z = np.exp(1j * th)
        assert np.allclose(cl_w.at_z(z), chained.at_z(z), atol=1e-10)


def test_structural_prune_exactness():
    rng = np.random.default_rng(15)
    g = random_stable_ss(rng, 3, 1, 1, rho=0.5)
    # append a state fed only by a removed input (nothing reaches it)
    A = np.zeros((4, 4))
    A[:3, :3] = g.A
    A[3, 3] = 0.5
    B = np.vstack([g.B, np.zeros((1, 1))])
    C = np.hstack([g.C, np.zeros((1, 1))])
    big = rs.StateSpace(A, B, C, g.D, 1.0)
    pruned = rs.structural_prune(big)
    assert pruned.n_x == 3
    for th in np.linspace(0, np.pi, 5):
        z = np.exp(1j * th)
        assert np.allclose(pruned.at_z(z), big.at_z(z), atol=1e-12)
