"""Discrete-time state-space systems and their algebra.

The :class:`StateSpace` type is the universal carrier for plants,
controllers, weights and spectral factors.  All systems are discrete
time; ``sample_time`` is either a positive number of seconds or the
token ``"unit"`` for normalized-time models.

A system is the recursion::

    x[t+1] = A x[t] + B u[t]
    y[t]   = C x[t] + D u[t]

with transfer function ``G(z) = C (zI - A)^{-1} B + D``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DimensionError, SampleTimeError

# Schur margin: stable means spectral radius < 1 - TOL_STAB.
TOL_STAB = 1e-9

UNIT = "unit"


def _as_matrix(value, rows=None, cols=None) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(value, dtype=float))
    if rows is not None and cols is not None and arr.size == 0:
        arr = arr.reshape(rows, cols)
    return arr


@dataclass(frozen=True)
class StateSpace:
    """Immutable discrete-time LTI system (A, B, C, D, sample_time)."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    sample_time: float | str = UNIT

    def __post_init__(self):
        A = _as_matrix(self.A)
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionError(f"A must be square, got {A.shape}")
        B = _as_matrix(self.B)
        if B.size == 0:
            B = B.reshape(n, max(B.shape[1] if B.ndim == 2 else 0, 0))
        if B.shape[0] != n:
            raise DimensionError(f"B has {B.shape[0]} rows, expected {n}")
        C = _as_matrix(self.C)
        if C.size == 0:
            C = C.reshape(max(C.shape[0] if C.ndim == 2 else 0, 0), n)
        if C.shape[1] != n:
            raise DimensionError(f"C has {C.shape[1]} cols, expected {n}")
        D = _as_matrix(self.D)
        if D.shape != (C.shape[0], B.shape[1]):
            raise DimensionError(
                f"D shape {D.shape} inconsistent with C rows {C.shape[0]} "
                f"and B cols {B.shape[1]}"
            )
        if self.sample_time != UNIT:
            ts = float(self.sample_time)
            if not ts > 0:
                raise SampleTimeError(f"sample_time must be positive, got {ts}")
            object.__setattr__(self, "sample_time", ts)
        for name, arr in (("A", A), ("B", B), ("C", C), ("D", D)):
            arr = np.ascontiguousarray(arr)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    # -- dimensions -----------------------------------------------------
    @property
    def n_x(self) -> int:
        return self.A.shape[0]

    @property
    def n_u(self) -> int:
        return self.B.shape[1]

    @property
    def n_y(self) -> int:
        return self.C.shape[0]

    # -- stability ------------------------------------------------------
    def poles(self) -> np.ndarray:
        if self.n_x == 0:
            return np.zeros(0, dtype=complex)
        return np.linalg.eigvals(self.A)

    def spectral_radius(self) -> float:
        if self.n_x == 0:
            return 0.0
        return float(np.max(np.abs(self.poles())))

    def is_schur(self, tol: float = TOL_STAB) -> bool:
        return self.spectral_radius() < 1.0 - tol

    # -- evaluation ------------------------------------------------------
    def freqresp(self, thetas) -> np.ndarray:
        """Frequency response G(e^{j theta}) on an array of angles.

        Returns a complex array of shape (len(thetas), n_y, n_u).
        """
        thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
        out = np.empty((thetas.size, self.n_y, self.n_u), dtype=complex)
        if self.n_x == 0:
            out[:] = self.D
            return out
        eye = np.eye(self.n_x)
        for k, th in enumerate(thetas):
            z = np.exp(1j * th)
            try:
                X = np.linalg.solve(z * eye - self.A, self.B)
            except np.linalg.LinAlgError:
                # pole on the circle: evaluate just outside it
                X = np.linalg.solve(z * (1 + 1e-9) * eye - self.A, self.B)
            out[k] = self.C @ X + self.D
        return out

    def at_z(self, z: complex) -> np.ndarray:
        """Transfer function value at a single complex point."""
        if self.n_x == 0:
            return self.D.astype(complex)
        try:
            X = np.linalg.solve(z * np.eye(self.n_x) - self.A, self.B)
        except np.linalg.LinAlgError:
            X = np.linalg.solve(z * (1 + 1e-9) * np.eye(self.n_x) - self.A, self.B)
        return self.C @ X + self.D

    def dcgain(self) -> np.ndarray:
        return np.real(self.at_z(1.0))

    # -- submatrices -----------------------------------------------------
    def subsystem(self, outputs, inputs) -> "StateSpace":
        """Keep a subset of input/output channels (state is preserved)."""
        outputs = np.atleast_1d(outputs)
        inputs = np.atleast_1d(inputs)
        return StateSpace(
            self.A,
            self.B[:, inputs],
            self.C[outputs, :],
            self.D[np.ix_(outputs, inputs)],
            self.sample_time,
        )


def static_gain(D, sample_time=UNIT) -> StateSpace:
    D = _as_matrix(D)
    n_y, n_u = D.shape
    return StateSpace(
        np.zeros((0, 0)), np.zeros((0, n_u)), np.zeros((n_y, 0)), D, sample_time
    )


def _join_sample_time(a: StateSpace, b: StateSpace):
    if a.sample_time == b.sample_time:
        return a.sample_time
    raise SampleTimeError(
        f"incompatible sample times {a.sample_time!r} and {b.sample_time!r}"
    )


def series(g1: StateSpace, g2: StateSpace) -> StateSpace:
    """Cascade: output of g1 feeds g2, i.e. the map g2(g1(u))."""
    if g1.n_y != g2.n_u:
        raise DimensionError(f"series: g1 has {g1.n_y} outputs, g2 takes {g2.n_u}")
    ts = _join_sample_time(g1, g2)
    n1, n2 = g1.n_x, g2.n_x
    A = np.block(
        [
            [g1.A, np.zeros((n1, n2))],
            [g2.B @ g1.C, g2.A],
        ]
    )
    B = np.vstack([g1.B, g2.B @ g1.D])
    C = np.hstack([g2.D @ g1.C, g2.C])
    D = g2.D @ g1.D
    return StateSpace(A, B, C, D, ts)


def parallel(g1: StateSpace, g2: StateSpace) -> StateSpace:
    if g1.n_u != g2.n_u or g1.n_y != g2.n_y:
        raise DimensionError("parallel: dimension mismatch")
    ts = _join_sample_time(g1, g2)
    A = scipy.linalg.block_diag(g1.A, g2.A)
    B = np.vstack([g1.B, g2.B])
    C = np.hstack([g1.C, g2.C])
    return StateSpace(A, B, C, g1.D + g2.D, ts)


def append(g1: StateSpace, g2: StateSpace) -> StateSpace:
    """Block-diagonal stacking diag(g1, g2) of inputs and outputs."""
    ts = _join_sample_time(g1, g2)
    A = scipy.linalg.block_diag(g1.A, g2.A)
    B = scipy.linalg.block_diag(g1.B, g2.B)
    C = scipy.linalg.block_diag(g1.C, g2.C)
    D = scipy.linalg.block_diag(g1.D, g2.D)
    return StateSpace(A, B, C, D, ts)


def gain_scale(g: StateSpace, pre=None, post=None) -> StateSpace:
    """post @ G @ pre with constant matrices (no extra states)."""
    B, D, C = g.B, g.D, g.C
    if pre is not None:
        pre = _as_matrix(pre)
        B = B @ pre
        D = D @ pre
    if post is not None:
        post = _as_matrix(post)
        C = post @ C
        D = post @ D
    return StateSpace(g.A, B, C, D, g.sample_time)


def invert(g: StateSpace) -> StateSpace:
    """Exact state-space inverse; requires square invertible D."""
    if g.n_u != g.n_y:
        raise DimensionError("invert: system must be square")
    Dinv = np.linalg.inv(g.D)
    A = g.A - g.B @ Dinv @ g.C
    B = g.B @ Dinv
    C = -Dinv @ g.C
    return StateSpace(A, B, C, Dinv, g.sample_time)


def zoh_discretize(Ac, Bc, Cc, Dc, Ts: float) -> StateSpace:
    """Exact zero-order-hold discretization of a continuous system.

    Uses the augmented-matrix exponential: exp([[Ac, Bc], [0, 0]] Ts)
    yields both A = exp(Ac Ts) and B = int_0^Ts exp(Ac s) ds Bc.
    """
    if not Ts > 0:
        raise SampleTimeError(f"Ts must be positive, got {Ts}")
    Ac = _as_matrix(Ac)
    Bc = _as_matrix(Bc)
    Cc = _as_matrix(Cc)
    Dc = _as_matrix(Dc)
    n = Ac.shape[0]
    m = Bc.shape[1]
    if n == 0:
        return StateSpace(Ac, Bc, Cc, Dc, Ts)
    M = np.zeros((n + m, n + m))
    M[:n, :n] = Ac * Ts
    M[:n, n:] = Bc * Ts
    eM = scipy.linalg.expm(M)
    return StateSpace(eM[:n, :n], eM[:n, n:], Cc, Dc, Ts)


def tf1_to_ss(num1, num0, den1, den0):
    """First-order SISO transfer function (num1 s + num0)/(den1 s + den0)
    as balanced continuous-time state-space matrices (Ac, Bc, Cc, Dc)."""
    if den1 == 0:
        raise DimensionError("denominator must be first order")
    b1, b0 = num1 / den1, num0 / den1
    a0 = den0 / den1
    # G(s) = b1 + r/(s + a0); balanced so |B| = |C| = sqrt(|r|)
    r = b0 - b1 * a0
    g = np.sqrt(abs(r)) if r != 0 else 0.0
    Ac = np.array([[-a0]])
    Bc = np.array([[g]])
    Cc = np.array([[np.sign(r) * g]])
    Dc = np.array([[b1]])
    return Ac, Bc, Cc, Dc
