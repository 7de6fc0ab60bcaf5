"""Robust regret: scaled small-gain tests, D-scalings, DK-iteration.

A controller achieves the robust level iff the augmented open loop
``M = F_L(P, K) diag(I_nw, F^{-1})`` is stable and a positive scalar
frequency scaling D(theta) renders

    sigma_max( diag(D I_nv, I) M(e^{j theta}) diag(D^{-1} I_nw, I) ) < 1

at every angle.  The per-angle minimization over D is unimodal in
log D; its pointwise optimum is fitted by a stable minimum-phase SISO
system and alternated with H-infinity synthesis (DK-iteration, a
sufficient procedure only).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .errors import (
    DKDidNotConverge,
    WellPosednessError,
    FitToleranceExceeded,
    NotAFailurePoint,
    UnstableSystem,
)
from .hinf import SynthesisResult, hinf_optimize, synth_hinf
from .noncausal import NoncausalController, build_noncausal, build_phat, eval_noncausal_cost
from .norms import FrequencyGrid, hinf_norm
from .parallel import parallel_map
from .plants import (GeneralizedPlant, UncertainPlant, lft_lower,
                     lft_upper, matrix_lft_upper, weight_disturbance)
from .regret import ParetoFront, ParetoPoint, RegretLevel, _bisect_gamma_j, pareto_front
from .signals import Signal, response_energy
from .spectral import SpectralFactor, effective_gamma_d, spectral_factor_regret
from .statespace import StateSpace, append, invert, series, static_gain

_PHI = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class AugmentedOpenLoop:
    """Open uncertainty loop with the disturbance channel F^{-1}-weighted."""

    M: StateSpace
    n_w: int
    n_v: int
    provenance: dict = field(default_factory=dict)

    @property
    def n_d(self) -> int:
        return self.M.n_u - self.n_w

    @property
    def n_e(self) -> int:
        return self.M.n_y - self.n_v

    def m11(self) -> StateSpace:
        return self.M.subsystem(np.arange(self.n_v), np.arange(self.n_w))


def build_M(P: UncertainPlant, K: StateSpace, F: SpectralFactor) -> AugmentedOpenLoop:
    """Close the controller, leave (w, v) open, weight d by F^{-1}."""
    cl = lft_lower(P.as_generalized(), K)  # (w, d) -> (v, e)
    W_in = append(static_gain(np.eye(P.n_w), cl.sample_time), F.F_inv)
    M = series(W_in, cl)
    return AugmentedOpenLoop(M, P.n_w, P.n_v,
                             provenance={"gamma_d": F.gamma_d,
                                         "gamma_J": F.gamma_J})


def _scaled_sigma(M0: np.ndarray, n_v: int, n_w: int, d: float) -> float:
    if M0.size == 0:
        return 0.0
    r = np.ones(M0.shape[0])
    c = np.ones(M0.shape[1])
    r[:n_v] = d
    c[:n_w] = 1.0 / d
    return float(np.linalg.svd(M0 * np.outer(r, c), compute_uv=False)[0])


def matrix_rp_test(M0: np.ndarray, n_v: int, n_w: int,
                   log_span: float = 12.0, tol: float = 1e-7):
    """Minimize the scaled maximum singular value over scalar D > 0.

    Returns (passed, d_opt, value); the map is unimodal in log D, so a
    golden-section search on an adaptively expanded bracket suffices.
    """
    M0 = np.atleast_2d(M0)
    if M0[:n_v, n_w:].size == 0 or not np.any(M0[:n_v, n_w:]):
        if M0[n_v:, :n_w].size == 0 or not np.any(M0[n_v:, :n_w]):
            val = _scaled_sigma(M0, n_v, n_w, 1.0)
            return val < 1.0, 1.0, val

    def f(x):
        val = _scaled_sigma(M0, n_v, n_w, 10.0 ** x)
        return val if np.isfinite(val) else 1e300

    # beyond ~10^12 the off-diagonal contribution is below the answer
    # tolerance, so a fixed bracket is enough
    a, b = -log_span, log_span
    c = b - _PHI * (b - a)
    e = a + _PHI * (b - a)
    fc, fe = f(c), f(e)
    for _ in range(200):
        if fc <= fe:
            b, e, fe = e, c, fc
            c = b - _PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, e, fe
            e = a + _PHI * (b - a)
            fe = f(e)
        if b - a < tol:
            break
    x = c if fc <= fe else e
    val = min(fc, fe)
    return val < 1.0, float(10.0 ** x), float(val)


@dataclass(frozen=True)
class RobustPerfReport:
    passed: bool
    margin: float               # 1 - max scaled value (negative = fail)
    m11_norm: float
    pointwise: tuple            # (theta, d_opt, value) triples
    worst_theta: float

    def pointwise_scalings(self):
        return [(th, d) for th, d, _ in self.pointwise]


def robust_perf_test(M: AugmentedOpenLoop, grid: FrequencyGrid | None = None,
                     refine_factor: int = 4, n_refine: int = 5) -> RobustPerfReport:
    """Frequency-wise scaled test plus the small-gain prerequisite."""
    if not M.M.is_schur():
        raise UnstableSystem("robust performance test requires stable M")
    if grid is None:
        grid = FrequencyGrid.default(256)
    m11 = M.m11()
    m11_norm = hinf_norm(m11) if M.n_w and M.n_v else 0.0

    def run(thetas):
        resp = M.M.freqresp(thetas)
        out = []
        for k, th in enumerate(thetas):
            _, d_opt, val = matrix_rp_test(resp[k], M.n_v, M.n_w)
            out.append((float(th), d_opt, val))
        return out

    pts = run(grid.thetas)
    worst = sorted(pts, key=lambda t: -t[2])[:n_refine]
    fine = grid.refined_near([t[0] for t in worst], refine_factor)
    extra_thetas = np.setdiff1d(fine.thetas, grid.thetas)
    pts += run(extra_thetas)
    pts.sort(key=lambda t: t[0])
    vmax = max(t[2] for t in pts)
    worst_theta = max(pts, key=lambda t: t[2])[0]
    passed = vmax < 1.0 and m11_norm < 1.0
    return RobustPerfReport(passed, 1.0 - max(vmax, m11_norm), m11_norm,
                            tuple(pts), worst_theta)


@dataclass(frozen=True)
class DScaling:
    """Pointwise optimal scalings and their rational min-phase fit."""

    pointwise: tuple
    system: StateSpace
    order: int
    fit_error: float  # max |log10| deviation on the grid

    def magnitude(self, thetas) -> np.ndarray:
        return np.abs(self.system.freqresp(thetas)[:, 0, 0])


def _first_order_cascade(gain_log: float, zeros: np.ndarray, poles: np.ndarray,
                         sample_time) -> StateSpace:
    """g * prod (z - a_k) / (z - b_k) as a minimum-phase state space."""
    sys = static_gain([[10.0 ** gain_log]], sample_time)
    for a, b in zip(zeros, poles):
        sec = StateSpace([[b]], [[1.0]], [[b - a]], [[1.0]], sample_time)
        sys = series(sys, sec)
    return sys


def fit_dscale(pointwise, order: int | None = None, fit_tol: float = 0.1,
               max_order: int = 4, sample_time=1.0, seed: int = 0,
               raise_on_fail: bool = True) -> DScaling:
    """Fit a stable minimum-phase SISO system to pointwise magnitudes.

    Log-magnitude least squares over a cascade of real first-order
    sections with zeros/poles inside the unit circle (so the inverse is
    stable by construction).  The order escalates until the worst-case
    log10 error is within tolerance.
    """
    pts = [(float(t), float(d)) for t, d in pointwise]
    thetas = np.array([t for t, _ in pts])
    target = np.log10(np.array([max(d, 1e-12) for _, d in pts]))
    rng = np.random.default_rng(seed)
    ejt = np.exp(1j * thetas)
    rho_max = 1.0 - 1e-5  # keeps D and D^{-1} safely stable

    def roots_of(x):
        return rho_max * np.tanh(x)

    def logmag(gain_log, zeros, poles):
        lm = np.full(thetas.shape, gain_log)
        for a, b in zip(zeros, poles):
            lm += np.log10(np.abs(ejt - a)) - np.log10(np.abs(ejt - b))
        return lm

    # order 0: best constant
    g0 = float(np.mean(target))
    sys0 = _first_order_cascade(g0, np.zeros(0), np.zeros(0), sample_time)
    best = DScaling(tuple(pts), sys0, 0,
                    float(np.max(np.abs(logmag(g0, (), ()) - target))))
    orders = [order] if order is not None else list(range(1, max_order + 1))
    if best.fit_error <= fit_tol and order in (None, 0):
        return best
    th_pos = thetas[thetas > 0]
    th_lo = max(float(np.min(th_pos)) if th_pos.size else 1e-4, 1e-6)

    def corner_starts(k, jitter):
        """Pole/zero pairs at log-spaced corner angles of the data."""
        corners = np.logspace(np.log10(th_lo), np.log10(np.pi * 0.5), k)
        radii = np.clip(np.exp(-corners), -rho_max, rho_max)
        x = np.arctanh(np.clip(radii / rho_max, -0.999999, 0.999999))
        zs = x * (1.0 + 0.2 * jitter[:k])
        ps = x * (1.0 + 0.2 * jitter[k:])
        return np.concatenate([[g0], zs, ps])

    for k in orders:
        if k == 0:
            continue

        def residual(params):
            gl = params[0]
            return logmag(gl, roots_of(params[1 : 1 + k]),
                          roots_of(params[1 + k :])) - target

        starts = [corner_starts(k, np.zeros(2 * k))]
        for _ in range(2):
            starts.append(corner_starts(k, rng.standard_normal(2 * k)))
        starts.append(np.concatenate([[g0], rng.uniform(-2, 2, 2 * k)]))
        for x0 in starts:
            try:
                sol = scipy.optimize.least_squares(residual, x0, method="lm",
                                                   max_nfev=600)
            except Exception:
                continue
            gl = sol.x[0]
            zs = roots_of(sol.x[1 : 1 + k])
            ps = roots_of(sol.x[1 + k :])
            err = float(np.max(np.abs(logmag(gl, zs, ps) - target)))
            if err < best.fit_error:
                best = DScaling(tuple(pts),
                                _first_order_cascade(gl, zs, ps, sample_time),
                                k, err)
        if best.fit_error <= fit_tol:
            return best
    if best.fit_error > fit_tol and raise_on_fail:
        raise FitToleranceExceeded(
            f"D-scale fit error {best.fit_error:.3g} above {fit_tol} at "
            f"order {max_order}; supply a higher order"
        )
    return best


def _diag_copies(sys: StateSpace, n: int) -> StateSpace:
    out = sys
    for _ in range(n - 1):
        out = append(out, sys)
    return out


def dk_scaled_plant(P: UncertainPlant, F: SpectralFactor,
                    D: DScaling | None) -> GeneralizedPlant:
    """Open-loop plant for the K-step: inputs (w~, d^, u) -> (v~, e, y)."""
    ss = P.ss
    n_w, n_d, n_u = P.n_w, P.n_d, P.n_u
    n_v, n_e, n_y = P.n_v, P.n_e, P.n_y
    eye_u = static_gain(np.eye(n_u), ss.sample_time)
    eye_ey = static_gain(np.eye(n_e + n_y), ss.sample_time)
    if D is None or D.system.n_x == 0 and float(D.system.D[0, 0]) == 1.0:
        d_in = static_gain(np.eye(n_w), ss.sample_time)
        d_out = static_gain(np.eye(n_v), ss.sample_time)
    else:
        d_in = _diag_copies(invert(D.system), n_w)
        d_out = _diag_copies(D.system, n_v)
    W_in = append(append(d_in, F.F_inv), eye_u)
    W_out = append(d_out, eye_ey)
    scaled = series(series(W_in, ss), W_out)
    return GeneralizedPlant(scaled, n_d=n_w + n_d, n_u=n_u,
                            n_e=n_v + n_e, n_y=n_y)


@dataclass
class DKOptions:
    max_iter: int = 12
    tol_abs: float = 1e-3
    tol_rel: float = 1e-3
    fit_tol: float = 0.1
    max_d_order: int = 4
    stall_tol: float = 1e-3
    stall_iters: int = 3
    grid: FrequencyGrid | None = None


def dk_iteration(P: UncertainPlant, level: RegretLevel,
                 opts: DKOptions | None = None,
                 K0: NoncausalController | None = None,
                 raise_on_fail: bool = False,
                 initial_D: DScaling | None = None) -> SynthesisResult:
    """Alternate H-infinity synthesis (K-step) and D-scale fitting.

    Terminates successfully when the frequency-wise scaled test passes;
    success certifies the robust level (sufficient only).  Stalls or
    the iteration cap end with an infeasible result, or
    :class:`DKDidNotConverge` when ``raise_on_fail`` is set.  A
    ``initial_D`` from a nearby level warm-starts the alternation (any
    stable minimum-phase D keeps the certificate sound).
    """
    opts = opts or DKOptions()
    if K0 is None:
        K0 = build_noncausal(P.nominal())
    gd_eff = effective_gamma_d(level.gamma_d, level.gamma_J)
    phat = build_phat(K0, (gd_eff, level.gamma_J))
    F = spectral_factor_regret(phat)
    # nominal feasibility is necessary (Delta = 0 belongs to the set);
    # the nominal controller also seeds the alternation
    nominal_plant = weight_disturbance(P.nominal(), F.F_inv)
    nom_res = synth_hinf(nominal_plant, 1.0)
    if not nom_res.feasible:
        return SynthesisResult(None, 1.0, False, np.inf, None,
                               metadata={"level": (level.gamma_d, level.gamma_J),
                                         "kind": level.kind,
                                         "reason": "nominal_infeasible"})
    D = initial_D
    best = None
    best_val = np.inf
    trace = []
    for it in range(opts.max_iter):
        if it == 0 and D is None:
            K = nom_res.controller
            gamma_val = nom_res.achieved_norm
        else:
            P_syn = dk_scaled_plant(P, F, D)
            try:
                gamma_val, res = hinf_optimize(P_syn, opts.tol_abs, opts.tol_rel,
                                               gamma_hint=1.0, stop_below=1.0)
            except Exception as exc:
                trace.append({"iter": it, "error": str(exc)})
                break
            K = res.controller
        M = build_M(P, K, F)
        if not M.M.is_schur():
            trace.append({"iter": it, "hinf_value": gamma_val,
                          "note": "M unstable"})
            break
        rp = robust_perf_test(M, opts.grid)
        peak = 1.0 - rp.margin
        trace.append({"iter": it, "hinf_value": gamma_val,
                      "scaled_peak": peak,
                      "d_order": D.order if D else 0})
        if peak < best_val:
            best_val, best = peak, (K, rp, M)
        if rp.passed:
            meta = {"level": (level.gamma_d, level.gamma_J),
                    "kind": level.kind, "iterations": it + 1,
                    "dk_trace": trace, "scaled_peak": peak,
                    "m11_norm": rp.m11_norm, "final_D": D}
            if gd_eff != level.gamma_d:
                meta["gamma_d_regularized"] = gd_eff
            return SynthesisResult(K, 1.0, True, peak,
                                   lft_lower(P.nominal(), K), meta)
        if len(trace) > opts.stall_iters:
            recent = [t.get("scaled_peak", np.inf) for t in trace[-opts.stall_iters - 1 :]]
            if min(recent[:-1]) - recent[-1] < opts.stall_tol and \
                    all(np.isfinite(recent)):
                break
        # best-effort fit: an imperfect D still reshapes the K-step
        D = fit_dscale(rp.pointwise_scalings(), fit_tol=opts.fit_tol,
                       max_order=opts.max_d_order,
                       sample_time=P.sample_time, raise_on_fail=False)
    if raise_on_fail:
        raise DKDidNotConverge(
            f"DK-iteration stopped at scaled peak {best_val:.4f}",
            best=best[0] if best else None, achieved=best_val,
        )
    meta = {"level": (level.gamma_d, level.gamma_J), "kind": level.kind,
            "reason": "dk_did_not_converge", "dk_trace": trace,
            "scaled_peak": best_val}
    return SynthesisResult(best[0] if best else None, 1.0, False, best_val,
                           None, meta)


def dk_feasibility_oracle(P: UncertainPlant, opts: DKOptions | None = None,
                          K0: NoncausalController | None = None):
    """Feasibility closure for bisections, warm-starting D across levels."""
    opts = opts or DKOptions()
    if K0 is None:
        K0 = build_noncausal(P.nominal())
    state = {"D": None}

    def feasibility(level: RegretLevel) -> SynthesisResult:
        res = dk_iteration(P, level, opts, K0=K0, initial_D=state["D"])
        if res.feasible:
            state["D"] = res.metadata.get("final_D")
        return res

    return feasibility


def robust_pareto_front(P: UncertainPlant, n_points: int = 20,
                        tol_abs: float = 1e-2, tol_rel: float = 1e-3,
                        grid_span=(0.001, 0.999), opts: DKOptions | None = None,
                        gamma_inf: float | None = None) -> ParetoFront:
    """Pareto front with DK-iteration as the feasibility oracle.

    Each grid point gets its own warm-started oracle, so points stay
    independent (parallel-map contract).
    """
    opts = opts or DKOptions()
    K0 = build_noncausal(P.nominal())
    if gamma_inf is None:
        gamma_inf, _ = hinf_optimize(P.nominal(), tol_abs, tol_rel)
    grid = np.linspace(grid_span[0], grid_span[1], n_points) * gamma_inf

    def solve_point(gd):
        oracle = dk_feasibility_oracle(P, opts, K0)
        return _bisect_gamma_j(oracle, float(gd), tol_abs, tol_rel)

    points = parallel_map(solve_point, list(grid))
    return ParetoFront(tuple(points), "robust", gamma_inf,
                       metadata={"tol_abs": tol_abs, "tol_rel": tol_rel,
                                 "grid_span": grid_span})


@dataclass(frozen=True)
class UncertaintySample:
    """Stable LTI uncertainty with H-infinity norm at most one."""

    Delta: StateSpace
    seed: int
    norm: float


def sample_uncertainty(n_v: int, n_w: int, order: int, seed: int,
                       sample_time=1.0, scale_range=(0.2, 1.0)) -> UncertaintySample:
    """Random stable Delta (n_w x n_v) with ||Delta||_inf <= 1.

    Poles are uniform in radius on [0, 0.95] with random angles (complex
    pairs), input/output maps Gaussian; the system is normalized by its
    computed norm and shrunk by a uniform factor.
    """
    rng = np.random.default_rng(seed)
    if order == 0:
        D = rng.standard_normal((n_w, n_v))
        sv = np.linalg.svd(D, compute_uv=False)[0] if D.size else 1.0
        D = D / max(sv, 1e-12) * rng.uniform(*scale_range)
        return UncertaintySample(static_gain(D, sample_time), seed,
                                 float(np.linalg.svd(D, compute_uv=False)[0]))
    blocks = []
    left = order
    while left >= 2:
        r = rng.uniform(0.0, 0.95)
        th = rng.uniform(0.05, np.pi - 0.05)
        a, b = r * np.cos(th), r * np.sin(th)
        blocks.append(np.array([[a, b], [-b, a]]))
        left -= 2
    if left == 1:
        blocks.append(np.array([[rng.uniform(-0.95, 0.95)]]))
    A = np.zeros((order, order))
    o = 0
    for blk in blocks:
        k = blk.shape[0]
        A[o : o + k, o : o + k] = blk
        o += k
    B = rng.standard_normal((order, n_v))
    C = rng.standard_normal((n_w, order))
    D = 0.1 * rng.standard_normal((n_w, n_v))
    raw = StateSpace(A, B, C, D, sample_time)
    nrm = hinf_norm(raw)
    factor = rng.uniform(*scale_range) / max(nrm, 1e-12)
    Delta = StateSpace(A, B, factor * C, factor * D, sample_time)
    return UncertaintySample(Delta, seed, hinf_norm(Delta))


def worst_case_const_delta(M0: np.ndarray, n_v: int, n_w: int) -> np.ndarray:
    """Real destabilizing uncertainty at a failed real-frequency point.

    Uses the top singular pair of the optimally scaled matrix; at the
    scalar-D optimum the pair is balanced, so the witness has norm at
    most one and drives the loop gain to the test value.
    """
    M0 = np.real_if_close(np.atleast_2d(M0))
    if np.iscomplexobj(M0):
        raise NotAFailurePoint("constant witness requires a real matrix "
                               "(theta must be 0 or pi)")
    passed, d_opt, val = matrix_rp_test(M0, n_v, n_w)
    if val < 1.0 - 1e-6:
        raise NotAFailurePoint(f"scaled test passes here (value {val:.4f})")
    S = M0.copy()
    S[:n_v, n_w:] *= d_opt
    S[n_v:, :n_w] /= d_opt
    U, sv, Vt = np.linalg.svd(S)

    def witness_from(u, v, s):
        w_part, v_part = v[:n_w], u[:n_v]
        denom = s * float(v_part @ v_part)
        if denom <= 1e-12:
            return None
        Delta = np.outer(w_part, v_part) / denom
        sd = np.linalg.svd(Delta, compute_uv=False)[0] if Delta.size else 0.0
        if sd > 1.0 + 1e-9:
            return None
        try:
            gain = matrix_lft_upper(M0, Delta, n_w, n_v)
        except WellPosednessError:
            return Delta
        g = np.linalg.svd(gain, compute_uv=False)[0] if gain.size else 0.0
        return Delta if g >= min(val, 1.0) - 1e-6 else None

    # singular values tie at the balanced optimum up to the search
    # tolerance; try pure pairs, then two-pair combinations, until one
    # closes the loop
    top = [i for i in range(sv.size) if sv[i] >= sv[0] * (1.0 - 1e-5)]
    for i in top:
        out = witness_from(U[:, i], Vt[i, :], sv[i])
        if out is not None:
            return out
    for i in top:
        for j in top:
            if j <= i:
                continue
            for sign in (1.0, -1.0):
                u = (U[:, i] + sign * U[:, j]) / np.sqrt(2.0)
                v = (Vt[i, :] + sign * Vt[j, :]) / np.sqrt(2.0)
                out = witness_from(u, v, 0.5 * (sv[i] + sv[j]))
                if out is not None:
                    return out
    raise NotAFailurePoint("no rank-one witness found at this frequency")


@dataclass(frozen=True)
class RobustVerification:
    passed: bool
    n_unstable: int
    worst_margin: float
    trials: int


def verify_robust_regret(K: StateSpace, P: UncertainPlant, level: RegretLevel,
                         n_delta: int = 50, n_dist: int = 20, seed: int = 0,
                         delta_order: int = 5,
                         K0: NoncausalController | None = None) -> RobustVerification:
    """Sampled soundness check of the robust regret definition.

    For each sampled Delta the closed loop must be stable and every
    sampled disturbance must respect J(K, d, Delta) < gamma_d^2 ||d||^2
    + gamma_J^2 J(K0, d) with the benchmark evaluated on the nominal
    model.
    """
    if K0 is None:
        K0 = build_noncausal(P.nominal())
    cl_open = lft_lower(P.as_generalized(), K)  # (w, d) -> (v, e)
    rng = np.random.default_rng(seed)
    n_unstable = 0
    worst = -np.inf
    trials = 0
    for i in range(n_delta):
        ds = sample_uncertainty(P.n_v, P.n_w, delta_order,
                                seed=int(rng.integers(0, 2**31)),
                                sample_time=P.sample_time)
        cl = lft_upper(cl_open, ds.Delta, P.n_w, P.n_v)
        if not cl.is_schur():
            n_unstable += 1
            continue
        for _ in range(n_dist):
            d = Signal(0, rng.standard_normal((int(rng.integers(8, 50)), P.n_d)))
            j = response_energy(cl, d)
            bound = level.gamma_d**2 * d.norm_sq() + \
                level.gamma_J**2 * eval_noncausal_cost(K0, d)
            worst = max(worst, j - bound)
            trials += 1
    return RobustVerification(n_unstable == 0 and worst < 0.0,
                              n_unstable, worst, trials)
