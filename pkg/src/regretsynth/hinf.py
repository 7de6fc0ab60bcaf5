"""Sub-optimal discrete-time H-infinity output-feedback synthesis.

The discrete problem is mapped through the bilinear transform
``z = (1 + s) / (1 - s)`` to an equivalent continuous-time problem,
solved with the two-Riccati central controller (general feedthrough
case), and mapped back.  The transform is an exact isomorphism of the
feasibility problems: the unit circle maps onto the imaginary axis, so
closed-loop norms and internal stability are preserved.

Nothing downstream trusts the synthesis internals: every returned
controller carries an a-posteriori certificate (closed-loop spectral
radius and independently computed H-infinity norm).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (
    NoFeasibleUpperBound,
    NotDetectable,
    NotStabilizable,
    RegretSynthError,
)
from .norms import hinf_norm
from .plants import GeneralizedPlant, lft_lower
from .riccati import pbh_detectable, pbh_stabilizable
from .statespace import StateSpace

_SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class SynthesisResult:
    """Controller plus an a-posteriori validated certificate."""

    controller: StateSpace | None
    gamma: float
    feasible: bool
    achieved_norm: float
    closed_loop: StateSpace | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def certificate(self) -> float:
        return self.achieved_norm


def tustin_d2c(A, B, C, D):
    """Bilinear discrete -> continuous map with s = (z - 1)/(z + 1)."""
    n = A.shape[0]
    if n == 0:
        return A.copy(), B.copy(), C.copy(), D.copy()
    eigs = np.linalg.eigvals(A)
    if np.min(np.abs(eigs + 1.0)) <= 1e-9 * (1.0 + np.max(np.abs(eigs))):
        raise RegretSynthError("bilinear transform singular: eigenvalue at z = -1")
    M = A + np.eye(n)
    Mi = np.linalg.inv(M)
    Ac = Mi @ (A - np.eye(n))
    Bc = _SQRT2 * (Mi @ B)
    Cc = _SQRT2 * (C @ Mi)
    Dc = D - C @ Mi @ B
    return Ac, Bc, Cc, Dc


def tustin_c2d(Ac, Bc, Cc, Dc):
    """Inverse bilinear map, exact round trip of :func:`tustin_d2c`."""
    n = Ac.shape[0]
    if n == 0:
        return Ac.copy(), Bc.copy(), Cc.copy(), Dc.copy()
    M = np.eye(n) - Ac
    Mi = np.linalg.inv(M)
    A = Mi @ (np.eye(n) + Ac)
    B = _SQRT2 * (Mi @ Bc)
    C = _SQRT2 * (Cc @ Mi)
    D = Dc + Cc @ Mi @ Bc
    return A, B, C, D


def care_sign(H: np.ndarray, polish: int = 2):
    """Stabilizing solution of the Riccati equation attached to a
    Hamiltonian matrix, via the matrix sign function.

    Returns the symmetric X with H [I; X] = [I; X] L and L Hurwitz, or
    None when H has eigenvalues on (or numerically at) the imaginary
    axis or the subspace does not define a solution.
    """
    m = H.shape[0]
    n = m // 2
    # Diagonal balancing (similarity) before eigenvalue work; the
    # invariant subspace transforms back exactly.
    Hb, T_bal = scipy.linalg.matrix_balance(H)
    eigs = np.linalg.eigvals(Hb)
    if np.min(np.abs(eigs.real) / (1.0 + np.abs(eigs))) <= 1e-9:
        return None
    Z = Hb.copy()
    best_err = np.inf
    stall = 0
    for _ in range(100):
        try:
            Zi = np.linalg.inv(Z)
        except np.linalg.LinAlgError:
            return None
        detz = abs(np.linalg.det(Z))
        c = detz ** (-1.0 / m) if detz > 0 and np.isfinite(detz) else 1.0
        Z_next = 0.5 * (c * Z + Zi / c)
        err = np.max(np.abs(Z_next - Z)) / max(1.0, np.max(np.abs(Z)))
        Z = Z_next
        if err < 1e-13:
            break
        # near-axis spectra flatten out at a roundoff floor; accept it
        if err < 0.5 * best_err:
            best_err, stall = err, 0
        else:
            stall += 1
            if stall >= 5 and err < 1e-6:
                break
    if np.max(np.abs(Z @ Z - np.eye(m))) > 1e-2:
        return None
    Z = T_bal @ Z @ np.linalg.inv(T_bal)
    P_stable = 0.5 * (np.eye(m) - Z)
    Qm, _, _ = scipy.linalg.qr(P_stable, pivoting=True)
    V = Qm[:, :n]
    V1, V2 = V[:n, :], V[n:, :]
    sv = np.linalg.svd(V1, compute_uv=False)
    if sv[-1] <= 1e-12 * max(1.0, sv[0]):
        return None
    X = np.linalg.solve(V1.T, V2.T).T
    X = 0.5 * (X + X.T)
    # Newton correction through the Sylvester equation
    H11, H12 = H[:n, :n], H[:n, n:]
    H21 = H[n:, :n]
    res_scale = max(1.0, float(np.max(np.abs(H21))),
                    float(np.max(np.abs(X)) * (1.0 + np.max(np.abs(H11)))))
    for _ in range(polish + 2):
        L = H11 + H12 @ X
        res = X @ H11 + H11.T @ X + X @ H12 @ X - H21
        if np.max(np.abs(res)) < 1e-12 * res_scale:
            break
        try:
            delta = scipy.linalg.solve_sylvester(L.T, L, -res)
        except (ValueError, np.linalg.LinAlgError):
            break
        X = 0.5 * ((X + delta) + (X + delta).T)
    res = X @ H11 + H11.T @ X + X @ H12 @ X - H21
    if np.max(np.abs(res)) > 1e-7 * res_scale:
        return None
    L = H11 + H12 @ X
    if np.max(np.linalg.eigvals(L).real) >= 0.0:
        return None
    return X


def _system_balance(A, B, C, sweeps: int = 8):
    """Diagonal state scaling equalizing row/column norms of [A B; C 0].

    Unlike balancing A alone, including B and C in the objective keeps
    the input/output maps sane.  Scale factors are powers of two, so
    the transform is exact in floating point.
    """
    n = A.shape[0]
    if n == 0:
        return A, B, C
    A = A.copy()
    B = B.copy()
    C = C.copy()
    total = np.zeros(n)
    for _ in range(sweeps):
        changed = False
        for i in range(n):
            r = np.sum(np.abs(A[i, :])) - abs(A[i, i]) + np.sum(np.abs(B[i, :]))
            c = np.sum(np.abs(A[:, i])) - abs(A[i, i]) + np.sum(np.abs(C[:, i]))
            if not (r > 0 and c > 0 and np.isfinite(r) and np.isfinite(c)):
                continue
            expo = np.clip(np.round(0.5 * np.log2(r / c)), -16.0, 16.0)
            expo = np.clip(expo, -20.0 - total[i], 20.0 - total[i])
            f = 2.0 ** expo
            if f != 1.0:
                A[i, :] /= f
                B[i, :] /= f
                A[:, i] *= f
                C[:, i] *= f
                total[i] += expo
                changed = True
        if not changed:
            break
    return A, B, C


def _svd_normalize_d12(C1, D11, D12, B2):
    """Coordinate changes making D12 = [0; I]; returns the u back-map."""
    p1, m2 = D12.shape
    U, s, Vt = np.linalg.svd(D12, full_matrices=True)
    Uperm = np.hstack([U[:, m2:], U[:, :m2]])
    C1n = Uperm.T @ C1
    D11n = Uperm.T @ D11
    u_map = Vt.T @ np.diag(1.0 / s)  # u = u_map @ u_tilde
    B2n = B2 @ u_map
    D12n = np.vstack([np.zeros((p1 - m2, m2)), np.eye(m2)])
    return C1n, D11n, D12n, B2n, u_map


def _svd_normalize_d21(B1, D11, D21, C2):
    """Coordinate changes making D21 = [0, I]; returns the y back-map."""
    p2, m1 = D21.shape
    U, s, Vt = np.linalg.svd(D21, full_matrices=True)
    Vperm = np.hstack([Vt[p2:, :].T, Vt[:p2, :].T])
    B1n = B1 @ Vperm
    D11n = D11 @ Vperm
    y_map = np.diag(1.0 / s) @ U.T  # y_tilde = y_map @ y
    C2n = y_map @ C2
    D21n = np.hstack([np.zeros((p2, m1 - p2)), np.eye(p2)])
    return B1n, D11n, D21n, C2n, y_map


def _central_controller(A, B1, B2, C1, C2, D11, gamma):
    """General-case two-Riccati central controller for a normalized plant
    (D12 = [0; I], D21 = [0, I], D22 = 0) at level gamma.

    Returns (Ak, Bk, Ck, Dk) or (None, reason).
    """
    n = A.shape[0]
    m1, m2 = B1.shape[1], B2.shape[1]
    p1, p2 = C1.shape[0], C2.shape[0]
    g2 = gamma * gamma
    # Parrott necessary condition on the uncontrolled feedthrough corners
    D1111 = D11[: p1 - m2, : m1 - p2]
    D1112 = D11[: p1 - m2, m1 - p2 :]
    D1121 = D11[p1 - m2 :, : m1 - p2]
    D1122 = D11[p1 - m2 :, m1 - p2 :]
    s_row = np.linalg.svd(np.hstack([D1111, D1112]), compute_uv=False)[0] \
        if min(p1 - m2, m1) > 0 else 0.0
    s_col = np.linalg.svd(np.vstack([D1111, D1121]), compute_uv=False)[0] \
        if min(m1 - p2, p1) > 0 else 0.0
    if gamma <= max(s_row, s_col) * (1.0 + 1e-12):
        return None, "parrott"
    B = np.hstack([B1, B2])
    C = np.vstack([C1, C2])
    D1dot = np.hstack([D11, np.vstack([np.zeros((p1 - m2, m2)), np.eye(m2)])])
    Ddot1 = np.vstack([D11, np.hstack([np.zeros((p2, m1 - p2)), np.eye(p2)])])
    R = D1dot.T @ D1dot
    R[:m1, :m1] -= g2 * np.eye(m1)
    Rt = Ddot1 @ Ddot1.T
    Rt[:p1, :p1] -= g2 * np.eye(p1)
    try:
        Ri = np.linalg.inv(R)
        Rti = np.linalg.inv(Rt)
    except np.linalg.LinAlgError:
        return None, "R_singular"
    # X Hamiltonian
    top = np.hstack([A, np.zeros((n, n))])
    bot = np.hstack([-C1.T @ C1, -A.T])
    stack_b = np.vstack([B, -C1.T @ D1dot])
    row = np.hstack([D1dot.T @ C1, B.T])
    Hx = np.vstack([top, bot]) - stack_b @ Ri @ row
    X = care_sign(Hx)
    if X is None:
        return None, "X_riccati"
    x_scale = 1.0 + float(np.max(np.abs(X)))
    # loose sign gate: marginal roundoff negatives pass through and the
    # a-posteriori closed-loop validation arbitrates
    if float(np.min(np.linalg.eigvalsh(X))) < -1e-4 * x_scale:
        return None, "X_indefinite"
    # Y Hamiltonian (dual)
    top = np.hstack([A.T, np.zeros((n, n))])
    bot = np.hstack([-B1 @ B1.T, -A])
    stack_c = np.vstack([C.T, -B1 @ Ddot1.T])
    row = np.hstack([Ddot1 @ B1.T, C])
    Hy = np.vstack([top, bot]) - stack_c @ Rti @ row
    Y = care_sign(Hy)
    if Y is None:
        return None, "Y_riccati"
    y_scale = 1.0 + float(np.max(np.abs(Y)))
    if float(np.min(np.linalg.eigvalsh(Y))) < -1e-4 * y_scale:
        return None, "Y_indefinite"
    rho_xy = float(np.max(np.abs(np.linalg.eigvals(X @ Y))))
    if rho_xy >= g2:
        return None, "spectral_radius"
    # gains
    F = -Ri @ (D1dot.T @ C1 + B.T @ X)
    Lg = -(B1 @ Ddot1.T + Y @ C.T) @ Rti
    F1, F2 = F[:m1, :], F[m1:, :]
    F12 = F1[m1 - p2 :, :]
    L1, L2 = Lg[:, :p1], Lg[:, p1:]
    L12 = L1[:, p1 - m2 :]
    try:
        T_row = np.linalg.inv(g2 * np.eye(p1 - m2) - D1111 @ D1111.T)
        T_col = np.linalg.inv(g2 * np.eye(m1 - p2) - D1111.T @ D1111)
        Dh11 = -D1121 @ D1111.T @ T_row @ D1112 - D1122
        M12 = np.eye(m2) - D1121 @ T_col @ D1121.T
        M21 = np.eye(p2) - D1112.T @ T_row @ D1112
        Dh12 = np.linalg.cholesky(M12)  # Dh12 Dh12' = M12
        Dh21 = scipy.linalg.cholesky(M21, lower=False)  # Dh21' Dh21 = M21
    except np.linalg.LinAlgError:
        return None, "feedthrough_factorization"
    Z = np.linalg.inv(np.eye(n) - Y @ X / g2)
    Bh2 = Z @ (B2 + L12) @ Dh12
    Ch2 = -Dh21 @ (C2 + F12)
    Bh1 = -Z @ L2 + Bh2 @ np.linalg.solve(Dh12, Dh11)
    Ch1 = F2 + Dh11 @ np.linalg.solve(Dh21, Ch2)
    Ah = A + B @ F + Bh1 @ np.linalg.solve(Dh21, Ch2)
    return (Ah, Bh1, Ch1, Dh11), "ok"


def _wrap_d22(Ak, Bk, Ck, Dk, D22):
    """Account for nonzero plant D22: u = K (y - D22 u)."""
    if D22.size == 0 or np.max(np.abs(D22)) == 0.0:
        return Ak, Bk, Ck, Dk
    M = np.eye(Dk.shape[0]) + Dk @ D22
    sv = np.linalg.svd(M, compute_uv=False)
    if sv[-1] <= 1e-12 * max(1.0, sv[0]):
        raise RegretSynthError("controller feedthrough loop is ill posed")
    Mi = np.linalg.inv(M)
    Ak2 = Ak - Bk @ D22 @ Mi @ Ck
    Bk2 = Bk @ (np.eye(Bk.shape[1]) - D22 @ Mi @ Dk)
    return Ak2, Bk2, Mi @ Ck, Mi @ Dk


def _regularized_blocks(P: GeneralizedPlant, reg_eps: float):
    """Continuous-domain blocks with rank-deficient D12/D21 repaired.

    Rank deficiencies are repaired by appending epsilon-weighted error
    rows / disturbance columns; the perturbation size is recorded so
    callers can report it.
    """
    # state balancing (similarity only, channels untouched) tames badly
    # scaled realizations coming out of the spectral-factor chain
    A0_, B0_, C0_ = _system_balance(P.ss.A, P.ss.B, P.ss.C)
    Ac, Bc, Cc, Dc = tustin_d2c(A0_, B0_, C0_, P.ss.D)
    n_d, n_u, n_e, n_y = P.n_d, P.n_u, P.n_e, P.n_y
    B1, B2 = Bc[:, :n_d], Bc[:, n_d:]
    C1, C2 = Cc[:n_e, :], Cc[n_e:, :]
    D11, D12 = Dc[:n_e, :n_d], Dc[:n_e, n_d:]
    D21, D22 = Dc[n_e:, :n_d], Dc[n_e:, n_d:]
    meta = {}
    sv12 = np.linalg.svd(D12, compute_uv=False) if D12.size else np.zeros(1)
    if D12.shape[0] < D12.shape[1] or sv12[-1] < 1e-9 * max(1.0, sv12[0]):
        m2 = D12.shape[1]
        eps = reg_eps * max(1.0, sv12[0])
        C1 = np.vstack([C1, np.zeros((m2, C1.shape[1]))])
        D11 = np.vstack([D11, np.zeros((m2, D11.shape[1]))])
        D12 = np.vstack([D12, eps * np.eye(m2)])
        meta["d12_regularized"] = eps
    sv21 = np.linalg.svd(D21, compute_uv=False) if D21.size else np.zeros(1)
    if D21.shape[1] < D21.shape[0] or sv21[-1] < 1e-9 * max(1.0, sv21[0]):
        p2 = D21.shape[0]
        eps = reg_eps * max(1.0, sv21[0])
        B1 = np.hstack([B1, np.zeros((B1.shape[0], p2))])
        D11 = np.hstack([D11, np.zeros((D11.shape[0], p2))])
        D21 = np.hstack([D21, eps * np.eye(p2)])
        meta["d21_regularized"] = eps
    return Ac, B1, B2, C1, C2, D11, D12, D21, D22, meta


def synth_hinf(P: GeneralizedPlant, gamma: float, *, validate: bool = True,
               reg_eps: float = 1e-8, norm_tol: float = 1e-6) -> SynthesisResult:
    """Controller with validated closed-loop norm < gamma, or a verdict.

    The feasibility verdict is bound to the a-posteriori certificate:
    a candidate that fails independent validation is reported
    infeasible at this level, never trusted.
    """
    if gamma <= 0:
        return SynthesisResult(None, gamma, False, np.inf,
                               metadata={"reason": "gamma_nonpositive"})
    stab = pbh_stabilizable(P.A, P.B_u)
    if not stab > 1e-9:
        raise NotStabilizable(f"(A, B_u) PBH margin {stab:.3g}")
    det = pbh_detectable(P.A, P.C_y)
    if not det > 1e-9:
        raise NotDetectable(f"(A, C_y) PBH margin {det:.3g}")

    # tiny regularizations can make the normalized problem numerically
    # hopeless (the channels are rescaled by 1/eps); escalate only on
    # numerical failure modes, never on genuine infeasibility signals
    genuine = {"parrott", "X_indefinite", "Y_indefinite", "spectral_radius"}
    ladder = sorted({reg_eps, 1e-6, 1e-4})
    ladder = [e for e in ladder if e >= reg_eps]
    out = None
    reason = "unset"
    meta = {}
    for eps in ladder:
        Ac, B1, B2, C1, C2, D11, D12, D21, D22, meta = _regularized_blocks(P, eps)
        C1n, D11n, D12n, B2n, u_map = _svd_normalize_d12(C1, D11, D12, B2)
        B1n, D11n, D21n, C2n, y_map = _svd_normalize_d21(B1, D11n, D21, C2)
        out, reason = _central_controller(Ac, B1n, B2n, C1n, C2n, D11n, gamma)
        if out is not None or reason in genuine or not meta:
            break
    if out is None:
        return SynthesisResult(None, gamma, False, np.inf,
                               metadata={**meta, "reason": reason})
    Ak, Bk, Ck, Dk = out
    # undo channel normalizations
    Bk = Bk @ y_map
    Dk = u_map @ Dk @ y_map
    Ck = u_map @ Ck
    try:
        Ak, Bk, Ck, Dk = _wrap_d22(Ak, Bk, Ck, Dk, D22)
        Kd = StateSpace(*tustin_c2d(Ak, Bk, Ck, Dk), P.sample_time)
    except RegretSynthError as exc:
        return SynthesisResult(None, gamma, False, np.inf,
                               metadata={**meta, "reason": str(exc)})
    cl = lft_lower(P, Kd)
    if not validate:
        return SynthesisResult(Kd, gamma, True, np.nan, cl,
                               metadata={**meta, "validated": False})
    if not cl.is_schur():
        return SynthesisResult(None, gamma, False, np.inf,
                               metadata={**meta, "reason": "closed_loop_unstable"})
    norm = hinf_norm(cl, tol=norm_tol)
    feasible = norm < gamma
    return SynthesisResult(Kd if feasible else None, gamma, feasible, norm,
                           cl if feasible else None,
                           metadata={**meta,
                                     "reason": "ok" if feasible else "norm_at_level"})


def hinf_optimize(P: GeneralizedPlant, tol_abs: float = 1e-4,
                  tol_rel: float = 1e-4, gamma_hint: float | None = None,
                  max_doublings: int = 60, stop_below: float | None = None):
    """Minimal achievable closed-loop norm by bisection.

    Returns (gamma_upper, result) where result holds the controller
    synthesized at the feasible upper end of the final bracket.  When
    ``stop_below`` is set, bisection ends as soon as a feasible level
    at or under it is found (used by feasibility-only callers).
    """
    g0 = gamma_hint if gamma_hint and gamma_hint > 0 else 1.0
    lo, hi = 0.0, None
    best = None
    g = g0
    for _ in range(max_doublings):
        res = synth_hinf(P, g)
        if res.feasible:
            hi, best = g, res
            break
        lo = g
        g *= 2.0
    if hi is None:
        raise NoFeasibleUpperBound(
            f"no feasible level found up to gamma = {g / 2:.3g}"
        )
    while hi - lo > tol_abs + tol_rel * hi:
        if stop_below is not None and hi <= stop_below:
            break
        mid = 0.5 * (lo + hi)
        res = synth_hinf(P, mid)
        if res.feasible:
            hi, best = mid, res
        else:
            lo = mid
    return hi, best
