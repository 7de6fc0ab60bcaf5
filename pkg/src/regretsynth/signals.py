"""Finite-support representatives of two-sided l2 signals and simulation.

A :class:`Signal` stores samples on an integer window [t0, t1] and is
implicitly zero outside it.  Costs over two-sided sequences are made
computable by extending simulation windows until the truncated tail
energy is certifiably negligible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NonDecaying
from .statespace import StateSpace

# Default certified truncation level for window auto-extension.
TRUNC_TOL = 1e-12


@dataclass(frozen=True)
class Signal:
    """Vector-valued sequence supported on [t0, t0 + len - 1]."""

    t0: int
    samples: np.ndarray  # shape (T, dim)

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2:
            raise DimensionError("samples must be a (T, dim) array")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "t0", int(self.t0))

    @property
    def t1(self) -> int:
        return self.t0 + self.samples.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    def __len__(self) -> int:
        return self.samples.shape[0]

    def at(self, t: int) -> np.ndarray:
        if self.t0 <= t <= self.t1:
            return self.samples[t - self.t0]
        return np.zeros(self.dim)

    def norm_sq(self) -> float:
        return float(np.sum(self.samples * self.samples))

    def norm(self) -> float:
        return float(np.sqrt(self.norm_sq()))

    def on_window(self, t0: int, t1: int) -> np.ndarray:
        """Samples on [t0, t1] with zero padding where unsupported."""
        out = np.zeros((t1 - t0 + 1, self.dim))
        lo = max(t0, self.t0)
        hi = min(t1, self.t1)
        if hi >= lo:
            out[lo - t0 : hi - t0 + 1] = self.samples[lo - self.t0 : hi - self.t0 + 1]
        return out

    @classmethod
    def impulse(cls, dim: int, channel: int = 0, t0: int = 0) -> "Signal":
        s = np.zeros((1, dim))
        s[0, channel] = 1.0
        return cls(t0, s)

    @classmethod
    def from_samples(cls, samples, t0: int = 0) -> "Signal":
        return cls(t0, np.asarray(samples, dtype=float))


def inner(a: Signal, b: Signal) -> float:
    if a.dim != b.dim:
        raise DimensionError("inner: dimension mismatch")
    lo = max(a.t0, b.t0)
    hi = min(a.t1, b.t1)
    if hi < lo:
        return 0.0
    return float(np.sum(a.on_window(lo, hi) * b.on_window(lo, hi)))


def decay_extension(rho: float, tol: float = TRUNC_TOL, n_x: int = 1) -> int:
    """Window padding length so the tail energy of a rho-decaying state
    falls below tol: ceil(log tol / log rho), with a dimensional floor."""
    rho = min(max(rho, 1e-12), 1.0 - 1e-12)
    n = int(np.ceil(np.log(tol) / np.log(rho)))
    return max(n, 4 * n_x, 8)


def simulate(G: StateSpace, d: Signal, direction: str = "forward",
             tol: float = TRUNC_TOL) -> Signal:
    """Response of G to a finite-support input with certified truncation.

    forward:  x[t+1] = A x[t] + B d[t], zero state at the window start;
              requires rho(A) < 1 so the response tail decays.
    backward: the same difference equation solved against a zero state
              at the window *end* (anti-causal dichotomy); requires A
              invertible with rho(A) > 1 so iterating x[t] =
              A^{-1}(x[t+1] - B d[t]) decays toward the past.
    """
    if d.dim != G.n_u:
        raise DimensionError(f"input has dim {d.dim}, system takes {G.n_u}")
    if G.n_x == 0:
        return Signal(d.t0, d.samples @ G.D.T)
    rho = G.spectral_radius()
    if direction == "forward":
        if rho >= 1.0 - 1e-12:
            raise NonDecaying(f"forward simulation of system with rho(A) = {rho:.6g}")
        n_ext = decay_extension(rho, tol, G.n_x)
        t0, t1 = d.t0, d.t1 + n_ext
        T = t1 - t0 + 1
        din = d.on_window(t0, t1)
        x = np.zeros(G.n_x)
        out = np.empty((T, G.n_y))
        for k in range(T):
            out[k] = G.C @ x + G.D @ din[k]
            x = G.A @ x + G.B @ din[k]
        # extend until the terminal state is negligible
        rounds = 0
        while np.linalg.norm(x) ** 2 > tol * (1.0 + float(np.sum(out * out))) and rounds < 6:
            extra = np.empty((n_ext, G.n_y))
            for k in range(n_ext):
                extra[k] = G.C @ x
                x = G.A @ x
            out = np.vstack([out, extra])
            rounds += 1
        return Signal(t0, out)
    if direction == "backward":
        if rho <= 1.0 + 1e-12:
            raise NonDecaying(
                f"backward simulation requires anti-stable A (rho = {rho:.6g})"
            )
        Ainv = np.linalg.inv(G.A)
        rho_b = float(np.max(np.abs(np.linalg.eigvals(Ainv))))
        n_ext = decay_extension(rho_b, tol, G.n_x)
        t0, t1 = d.t0 - n_ext, d.t1
        T = t1 - t0 + 1
        din = d.on_window(t0, t1)
        x_next = np.zeros(G.n_x)  # x[t1 + 1] = 0
        xs = np.empty((T, G.n_x))
        for k in range(T - 1, -1, -1):
            x = Ainv @ (x_next - G.B @ din[k])
            xs[k] = x
            x_next = x
        rounds = 0
        out = xs @ G.C.T + din @ G.D.T
        while np.linalg.norm(xs[0]) ** 2 > tol * (1.0 + float(np.sum(out * out))) and rounds < 6:
            pre = np.empty((n_ext, G.n_x))
            x_next = xs[0]
            for k in range(n_ext - 1, -1, -1):
                x_next = Ainv @ x_next
                pre[k] = x_next
            xs = np.vstack([pre, xs])
            din = np.vstack([np.zeros((n_ext, d.dim)), din])
            t0 -= n_ext
            out = xs @ G.C.T + din @ G.D.T
            rounds += 1
        return Signal(t0, out)
    raise ValueError(f"unknown direction {direction!r}")


def stein(A: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Solve M = A M A' + Q by Kronecker elimination (small systems)."""
    n = A.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    lhs = np.eye(n * n) - np.kron(A, A)
    return np.linalg.solve(lhs, Q.ravel()).reshape(n, n)


def response_energy(G: StateSpace, d: Signal) -> float:
    """||G d||_2^2 with the post-support tail summed exactly.

    Simulates over the input support only; the remaining output energy
    is x' Go x with Go the observability Gramian, so no window
    extension is needed even for slowly decaying systems.
    """
    if d.dim != G.n_u:
        raise DimensionError(f"input has dim {d.dim}, system takes {G.n_u}")
    if G.n_x == 0:
        return float(np.sum((d.samples @ G.D.T) ** 2))
    if not G.is_schur():
        raise NonDecaying("response_energy requires a stable system")
    x = np.zeros(G.n_x)
    total = 0.0
    for k in range(len(d)):
        y = G.C @ x + G.D @ d.samples[k]
        total += float(y @ y)
        x = G.A @ x + G.B @ d.samples[k]
    Go = stein(G.A.T, G.C.T @ G.C)
    return total + float(x @ Go @ x)


def random_signal(rng, dim: int, length: int, t0: int = 0, kind: str = "white") -> Signal:
    """Seeded disturbance generator used by sampling verifications."""
    w = rng.standard_normal((length, dim))
    if kind == "white":
        s = w
    elif kind == "lowpass":
        s = np.empty_like(w)
        acc = np.zeros(dim)
        for k in range(length):
            acc = 0.9 * acc + 0.1 * w[k]
            s[k] = acc
    elif kind == "sinusoid":
        theta = rng.uniform(0.0, np.pi)
        t = np.arange(length)
        phase = rng.uniform(0, 2 * np.pi, size=dim)
        s = np.cos(np.outer(t, np.full(dim, theta)) + phase)
    else:
        raise ValueError(f"unknown kind {kind!r}")
    return Signal(t0, s)


def sinusoid_signal(dim: int, theta: float, length: int, t0: int = 0,
                    direction: np.ndarray | None = None) -> Signal:
    """Windowed unit-norm sinusoid at a given angle (near-worst-case probe)."""
    t = np.arange(length)
    if direction is None:
        direction = np.ones(dim)
    direction = np.asarray(direction, dtype=float)
    direction = direction / np.linalg.norm(direction)
    window = 0.5 * (1 - np.cos(2 * np.pi * (t + 0.5) / length))
    s = np.outer(np.cos(theta * t) * window, direction)
    sig = Signal(t0, s)
    n = sig.norm()
    return Signal(t0, s / n) if n > 0 else sig
