"""Spectral factorization of the benchmark closed-loop cost.

``spectral_factorize_general`` implements the two-DARE construction for
a square factor F of P~P: a primal DARE gives the whitening gain, a
dual DARE re-expresses the anti-causal part, and the factor::

    F = (A - Ky' Kx,  B - Ky',  W^{-1/2} Kx,  W^{-1/2})

is stable and causal with a stable causal inverse whose poles are the
primal closed-loop eigenvalues.

``spectral_factor_regret`` specializes to the benchmark closed loop:
the primal solution has the closed form  Xhat = gamma_J^2 [[X, I], [I,
X^{-1}]] + diag(0, V)  where V solves an n_x-dimensional DARE in the
inverse-transpose dynamics.  The x-block of the resulting factor is
unobservable and is removed exactly, leaving state dimension n_x.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AssumptionViolated,
    GammaDZero,
    SingularX,
    StabilizabilityFailure,
)
from .noncausal import NoncausalClosedLoop, eval_noncausal_cost
from .riccati import (
    DareProblem,
    check_dare_assumptions,
    dare_residual,
    min_sv,
    pbh_stabilizable,
    solve_dare,
)
from .signals import Signal, inner, response_energy, simulate
from .statespace import StateSpace, invert

# Competitive-ratio regularization: gamma_d = 0 is a singular problem,
# replaced by gamma_d_eff = EPS_CR * gamma_J (slightly stronger bound).
EPS_CR = 1e-4


def effective_gamma_d(gamma_d: float, gamma_J: float, eps_cr: float = EPS_CR) -> float:
    return max(float(gamma_d), eps_cr * float(gamma_J))


def _sym(M):
    return 0.5 * (M + M.T)


def _inv_sqrt(M: np.ndarray) -> np.ndarray:
    evals, evecs = np.linalg.eigh(_sym(M))
    if np.min(evals) <= 0:
        raise AssumptionViolated(f"matrix not positive definite (min eig {np.min(evals):.3g})")
    return (evecs / np.sqrt(evals)) @ evecs.T


@dataclass(frozen=True)
class SpectralFactor:
    """Square stable factor F with exact state-space inverse."""

    F: StateSpace
    F_inv: StateSpace
    gamma_d: float
    gamma_J: float
    internals: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)


def para_hermitian_apply(system, ebar: Signal, tol: float = 1e-12) -> Signal:
    """Apply the adjoint P~ in the time domain: <P d, e> = <d, P~ e>.

    For a causal stable StateSpace the adjoint recursion
    ``A' xb[t+1] = xb[t] - C' eb[t]`` runs backward from zero terminal
    state.  For a benchmark closed loop the transposed state matrix is
    block lower-triangular with a stable and an anti-stable block, so
    the first block runs backward and the second forward.
    """
    if isinstance(system, NoncausalClosedLoop):
        A, B, C, D = system.A_hat, system.B_hat, system.C_hat, system.D_hat
        n = system.n_x
        K0 = system.K0
        from .signals import decay_extension

        n_pad = decay_extension(K0.decay_rate(), tol, n)
        t0, t1 = ebar.t0 - n_pad, ebar.t1 + n_pad
        T = t1 - t0 + 1
        ein = ebar.on_window(t0, t1)
        rhs = ein @ C  # rows are C' eb[t]
        A11, A12 = A[:n, :n], A[:n, n:]
        A22 = A[n:, n:]
        # xb1[t] = A11' xb1[t+1] + rhs1[t]  (stable: backward)
        x1 = np.zeros((T + 1, n))
        for k in range(T - 1, -1, -1):
            x1[k] = A11.T @ x1[k + 1] + rhs[k, :n]
        # xb2[t] = A12' xb1[t+1] + A22' xb2[t+1] + rhs2[t]
        # A22 = A11^{-T} is anti-stable, so solve forward:
        # xb2[t+1] = A22^{-T-ish}: A22' xb2[t+1] = xb2[t] - A12' xb1[t+1] - rhs2[t]
        A22T_inv = np.linalg.inv(A22.T)
        x2 = np.zeros((T + 1, n))
        for k in range(0, T):
            x2[k + 1] = A22T_inv @ (x2[k] - A12.T @ x1[k + 1] - rhs[k, n:])
        xb = np.hstack([x1, x2])
        dbar = xb[1:] @ B + ein @ D
        return Signal(t0, dbar)
    G: StateSpace = system
    if G.n_x == 0:
        return Signal(ebar.t0, ebar.samples @ G.D)
    if not G.is_schur():
        raise AssumptionViolated("para_hermitian_apply needs a stable causal system")
    from .signals import decay_extension

    n_pad = decay_extension(G.spectral_radius(), tol, G.n_x)
    t0, t1 = ebar.t0 - n_pad, ebar.t1
    T = t1 - t0 + 1
    ein = ebar.on_window(t0, t1)
    xb = np.zeros((T + 1, G.n_x))
    for k in range(T - 1, -1, -1):
        xb[k] = G.A.T @ xb[k + 1] + G.C.T @ ein[k]
    dbar = xb[1:] @ G.B + ein @ G.D
    return Signal(t0, dbar)


def _factor_from_dares(A, B, C, D, sample_time, *, check: bool = True):
    """Two-DARE spectral factor of P~P for given realization matrices."""
    n = A.shape[0]
    if n == 0:
        H = _sym(D.T @ D)
        evals, evecs = np.linalg.eigh(H)
        if np.min(evals) <= 0:
            raise AssumptionViolated("D'D must be positive definite")
        D_F = (evecs * np.sqrt(evals)) @ evecs.T
        m = D.shape[1]
        mats = (np.zeros((0, 0)), np.zeros((0, m)), np.zeros((m, 0)), D_F,
                sample_time)
        return mats, dict(Hhat=H, What=np.linalg.inv(H))
    prob_x = DareProblem.from_output_data(A, B, C, D)
    if check:
        report = check_dare_assumptions(prob_x)
        extra = []
        eigs = np.linalg.eigvals(A) if n else np.zeros(0)
        on_circle = np.min(np.abs(np.abs(eigs) - 1.0)) if n else np.inf
        extra.append(("no_unit_circle_eigs", on_circle > 1e-9, float(on_circle)))
        nonsing = min_sv(A) / max(1.0, float(np.max(np.abs(A)))) if n else np.inf
        extra.append(("A_nonsingular", nonsing > 1e-10, float(nonsing)))
        failures = [name for name, ok, _ in extra if not ok]
        if not report.passed or failures:
            raise AssumptionViolated(
                "spectral factorization assumptions failed: "
                + report.failure_summary()
                + ("; " + ", ".join(failures) if failures else ""),
                report,
            )
    sol_x = solve_dare(prob_x)
    Xhat, Hhat, Kx = sol_x.X, sol_x.H, sol_x.K_x
    # dual DARE: (A, B, Q, R, S) <- (A', Kx', 0, H^{-1}, 0)
    Hinv = np.linalg.inv(Hhat)
    prob_y = DareProblem(A.T, Kx.T, np.zeros((n, n)), _sym(Hinv), np.zeros((n, Kx.shape[0])))
    sol_y = solve_dare(prob_y)
    Yhat = sol_y.X
    What = _sym(Hinv + Kx @ Yhat @ Kx.T)
    Ky = np.linalg.solve(What, (A @ Yhat @ Kx.T).T)
    W_is = _inv_sqrt(What)
    A_F = A - Ky.T @ Kx
    B_F = B - Ky.T
    C_F = W_is @ Kx
    D_F = W_is
    internals = dict(Xhat=Xhat, Yhat=Yhat, Hhat=Hhat, What=What, Kx=Kx, Ky=Ky)
    return (A_F, B_F, C_F, D_F, sample_time), internals


def _freq_identity_error(F: StateSpace, phat_resp, thetas) -> float:
    """max relative deviation of F*F from P~P on the grid."""
    Fresp = F.freqresp(thetas)
    worst = 0.0
    for k in range(len(thetas)):
        lhs = Fresp[k].conj().T @ Fresp[k]
        rhs = phat_resp[k].conj().T @ phat_resp[k]
        scale = max(1.0, float(np.max(np.abs(rhs))))
        worst = max(worst, float(np.max(np.abs(lhs - rhs))) / scale)
    return worst


def spectral_factorize_general(system, *, check: bool = True,
                               n_theta_check: int = 64) -> SpectralFactor:
    """Spectral factor of P~P for a square-cost system (state dim kept).

    Accepts a StateSpace or a NoncausalClosedLoop (its raw matrices are
    used; the realization may mix causal and anti-causal dynamics).
    """
    if isinstance(system, NoncausalClosedLoop):
        mats = (system.A_hat, system.B_hat, system.C_hat, system.D_hat)
        ts = system.K0.plant.sample_time
        gamma_d, gamma_J = system.gamma_d, system.gamma_J
    else:
        mats = (system.A, system.B, system.C, system.D)
        ts = system.sample_time
        gamma_d = gamma_J = float("nan")
    (A_F, B_F, C_F, D_F, ts), internals = _factor_from_dares(*mats, ts, check=check)
    F = StateSpace(A_F, B_F, C_F, D_F, ts)
    F_inv = invert(F)
    thetas = np.linspace(0.0, np.pi, n_theta_check)
    phat_resp = StateSpace(*mats, ts).freqresp(thetas)
    diag = {
        "freq_identity_error": _freq_identity_error(F, phat_resp, thetas),
        "rho_F": F.spectral_radius(),
        "rho_F_inv": F_inv.spectral_radius(),
    }
    return SpectralFactor(F, F_inv, gamma_d, gamma_J, internals, diag)


def regret_qtilde(K0, gamma_J: float) -> np.ndarray:
    """Q of the reduced V-DARE (positive semidefinite by the plant DARE).

    The expression is subtractive, so roundoff can leave eigenvalues a
    few ulps below zero; those are clipped after a sign sanity check.
    """
    P = K0.plant
    A11 = K0.A11
    A11_inv = np.linalg.inv(A11)
    X_inv = np.linalg.inv(K0.X)
    H_plant = K0.H  # R + B_u' X B_u
    mid = X_inv - A11 @ X_inv @ A11.T - P.B_u @ np.linalg.solve(H_plant, P.B_u.T)
    Qt = _sym(gamma_J**2 * A11_inv @ mid @ A11_inv.T)
    if Qt.size == 0:
        return Qt
    evals, evecs = np.linalg.eigh(Qt)
    scale = 1.0 + float(np.max(np.abs(evals)))
    if evals[0] < -1e-8 * scale:
        raise AssumptionViolated(
            f"reduced-factor state cost is indefinite (min eig {evals[0]:.3g})"
        )
    return (evecs * np.clip(evals, 0.0, None)) @ evecs.T


def spectral_factor_regret(phat: NoncausalClosedLoop, *,
                           cond_limit: float = 1e12,
                           n_theta_check: int = 64) -> SpectralFactor:
    """State-dimension-n_x spectral factor for the regret bound.

    Requires gamma_d > 0 (competitive ratio must be regularized by the
    caller) and stabilizability of (A11^{-T}, X B_d).  Falls back to the
    general 2 n_x construction when X is too ill conditioned to invert.
    """
    gamma_d, gamma_J = phat.gamma_d, phat.gamma_J
    if gamma_d <= 0.0:
        raise GammaDZero(
            "spectral factor needs gamma_d > 0; regularize the competitive "
            "ratio level first (effective_gamma_d)"
        )
    K0 = phat.K0
    P = K0.plant
    n = P.n_x
    A11 = K0.A11
    A11_invT = np.linalg.inv(A11).T
    XBd = K0.X @ P.B_d
    stab = pbh_stabilizable(A11_invT, XBd)
    if not stab > 1e-10:
        raise StabilizabilityFailure(
            f"(A11^-T, X B_d) not stabilizable (PBH margin {stab:.3g})"
        )
    cond_X = float(np.linalg.cond(K0.X)) if n else 1.0
    if cond_X > cond_limit:
        if gamma_J == 0.0:
            raise SingularX(f"X condition number {cond_X:.3g} exceeds limit")
        return spectral_factorize_general(phat, check=False,
                                          n_theta_check=n_theta_check)

    Qt = regret_qtilde(K0, gamma_J)
    prob_v = DareProblem(A11_invT, XBd, Qt, gamma_d**2 * np.eye(P.n_d),
                         np.zeros((n, P.n_d)))
    sol_v = solve_dare(prob_v)
    V = sol_v.X
    Hhat = _sym(gamma_d**2 * np.eye(P.n_d) + P.B_d.T @ K0.X @ V @ XBd)
    # full-size primal solution in closed form (diagnostic + dual input)
    X_inv = np.linalg.inv(K0.X)
    Xhat = gamma_J**2 * np.block([[K0.X, np.eye(n)], [np.eye(n), X_inv]])
    Xhat[n:, n:] += V
    Xhat = _sym(Xhat)
    Kx_full = np.hstack([
        np.zeros((P.n_d, n)),
        -np.linalg.solve(Hhat, P.B_d.T @ K0.X @ V @ A11_invT),
    ])
    # dual DARE on the full 2n system
    A_hat = phat.A_hat
    prob_y = DareProblem(A_hat.T, Kx_full.T, np.zeros((2 * n, 2 * n)),
                         _sym(np.linalg.inv(Hhat)), np.zeros((2 * n, P.n_d)))
    sol_y = solve_dare(prob_y)
    Yhat = sol_y.X
    What = _sym(np.linalg.inv(Hhat) + Kx_full @ Yhat @ Kx_full.T)
    Ky = np.linalg.solve(What, (A_hat @ Yhat @ Kx_full.T).T)
    W_is = _inv_sqrt(What)
    A_F = A_hat - Ky.T @ Kx_full
    B_F = phat.B_hat - Ky.T
    C_F = W_is @ Kx_full
    # the x-block is exactly unobservable: drop it
    F = StateSpace(A_F[n:, n:], B_F[n:, :], C_F[:, n:], W_is,
                   P.sample_time)
    F_inv = invert(F)
    prob_full = DareProblem.from_output_data(A_hat, phat.B_hat, phat.C_hat, phat.D_hat)
    diag_thetas = np.linspace(0.0, np.pi, n_theta_check)
    phat_resp = phat.freqresp(diag_thetas)
    diagnostics = {
        "xhat_dare_residual": dare_residual(prob_full, Xhat),
        "qtilde_min_eig": float(np.min(np.linalg.eigvalsh(Qt))) if n else 0.0,
        "freq_identity_error": _freq_identity_error(F, phat_resp, diag_thetas),
        "rho_F": F.spectral_radius(),
        "rho_F_inv": F_inv.spectral_radius(),
        "cond_X": cond_X,
        "offdiag_AF_drop": float(np.max(np.abs(A_F[n:, :n]))) if n else 0.0,
    }
    internals = dict(Xhat=Xhat, V=V, Qtilde=Qt, Hhat=Hhat, What=What,
                     Kx=Kx_full, Ky=Ky, Yhat=Yhat)
    return SpectralFactor(F, F_inv, gamma_d, gamma_J, internals, diagnostics)


@dataclass(frozen=True)
class FactorVerification:
    passed: bool
    max_rel_deviation: float
    trials: int


def verify_factor(factor: SpectralFactor, phat: NoncausalClosedLoop,
                  trials: int = 20, seed: int = 0,
                  rel_tol: float = 1e-7) -> FactorVerification:
    """Sampled check of ||F d||^2 = gamma_d^2 ||d||^2 + gamma_J^2 J(K0, d)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        length = int(rng.integers(5, 40))
        d = Signal(0, rng.standard_normal((length, phat.n_d)))
        lhs = response_energy(factor.F, d)
        cost = eval_noncausal_cost(phat.K0, d)
        rhs = phat.gamma_d**2 * d.norm_sq() + phat.gamma_J**2 * cost
        dev = abs(lhs - rhs) / (1.0 + abs(rhs))
        worst = max(worst, dev)
    return FactorVerification(worst <= rel_tol, worst, trials)
