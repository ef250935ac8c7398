"""Time integration of the body ODE and of its exterior and point-vortex limits."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .errors import GeometryError, ShrinkflowError, SolverError
from .fluid_quantities import (
    ExteriorConstants,
    christoffel_S,
    evaluate,
    exterior_dynamics_pack,
)
from .geometry import Placement, perp
from .layer_potential import BoundaryModel

log = logging.getLogger(__name__)

TIME_REACHED = "time-reached"
COLLISION = "collision-guard"
SOLVER_FAILURE = "solver-failure"

CSV_COLUMNS = ("t", "theta", "h1", "h2", "omega", "l1", "l2", "energy", "C_eps", "separation")
CSV_NOTES = (
    "# t [time]; theta [rad]; h1,h2 [length] body centre q; omega [1/time], l1,l2 "
    "[length/time] body velocity p; energy = M p.p/2 - gamma^2 C/2 [conserved]; "
    "C_eps = boundary value of the unit-circulation stream function; "
    "separation [length] = body to outer boundary distance"
)


@dataclass(frozen=True)
class MassRegime:
    """Genuine mass and inertia of the body, possibly depending on eps.

    ``kind`` is ``fixed`` (m, J as given), ``case-i`` (``m`` and
    ``J = eps^2 J1``) or ``case-ii`` (``m = eps^alpha m1``,
    ``J = eps^(alpha+2) J1``).
    """

    kind: str = "fixed"
    m: float = 1.0
    J: float = 1.0
    alpha: float = 0.0

    def masses(self, eps: float) -> tuple[float, float]:
        if self.kind == "fixed":
            return self.m, self.J
        if self.kind == "case-i":
            return self.m, eps**2 * self.J
        if self.kind == "case-ii":
            a = eps**self.alpha
            return a * self.m, a * eps**2 * self.J
        raise ValueError(f"unknown mass regime {self.kind!r}")


@dataclass(frozen=True)
class SimParams:
    scheme: str = "rk4"
    dt: float = 1e-3
    rtol: float = 1e-10
    t_final: float = 10.0
    delta_stop: float | None = None
    gamma: float = 1.0
    regime: MassRegime = MassRegime()
    record_every: int = 1

    def __post_init__(self):
        if self.dt <= 0 or self.t_final <= 0:
            raise ValueError("dt and t_final must be positive")
        if self.delta_stop is not None and self.delta_stop <= 0:
            raise ValueError("delta_stop must be positive")
        if self.scheme not in ("rk4", "rk45"):
            raise ValueError("scheme must be rk4 or rk45")


@dataclass(frozen=True)
class BodyState:
    t: float
    q: np.ndarray
    p: np.ndarray
    eps: float

    @property
    def y(self) -> np.ndarray:
        return np.concatenate([self.q, self.p])


@dataclass
class Trajectory:
    t: list = field(default_factory=list)
    y: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    C: list = field(default_factory=list)
    separation: list = field(default_factory=list)
    reason: str = TIME_REACHED
    message: str = ""

    def append(self, t, y, e=np.nan, c=np.nan, sep=np.nan):
        self.t.append(float(t))
        self.y.append(np.array(y, dtype=float))
        self.energy.append(float(e))
        self.C.append(float(c))
        self.separation.append(float(sep))

    @property
    def times(self) -> np.ndarray:
        return np.asarray(self.t)

    @property
    def states(self) -> np.ndarray:
        return np.asarray(self.y)

    @property
    def h(self) -> np.ndarray:
        return self.states[:, 1:3]

    def energy_drift(self) -> float:
        e = np.asarray(self.energy)
        e = e[np.isfinite(e)]
        return float(np.max(np.abs(e - e[0])) / abs(e[0])) if e.size else np.nan

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(CSV_NOTES + "\n")
            wr = csv.writer(fh)
            wr.writerow(CSV_COLUMNS)
            for t, y, e, c, s in zip(self.t, self.y, self.energy, self.C, self.separation):
                wr.writerow([f"{v:.16e}" for v in (t, *y, e, c, s)])


def rk4_step(f: Callable, t: float, y: np.ndarray, dt: float, k1=None):
    k1 = f(t, y) if k1 is None else k1
    k2 = f(t + dt / 2, y + dt / 2 * k1)
    k3 = f(t + dt / 2, y + dt / 2 * k2)
    k4 = f(t + dt, y + dt * k3)
    return y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


# ---------------------------------------------------------------------------
# full bounded-domain system


class FullSystem:
    """Right-hand side of ``q' = p, M(q) p' + <Gamma(q), p, p> = F(q, p)``."""

    def __init__(self, model: BoundaryModel, eps: float, params: SimParams):
        self.model, self.eps, self.params = model, eps, params
        self.m, self.J = params.regime.masses(eps)
        self.gamma = params.gamma
        self.last = None

    def forces(self, y: np.ndarray):
        q = Placement.from_q(y[:3], self.eps)
        return evaluate(self.model, q, y[3:], self.gamma, self.m, self.J)

    def __call__(self, t: float, y: np.ndarray) -> np.ndarray:
        fs = self.forces(y)
        self.last = fs
        try:
            dp = np.linalg.solve(fs.M, fs.F - fs.gamma_total)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"mass matrix solve failed at t={t}: {exc}") from None
        return np.concatenate([y[3:], dp])


def rhs_full(model: BoundaryModel, state: BodyState, params: SimParams):
    """``(q', p')`` at ``state``."""
    d = FullSystem(model, state.eps, params)(state.t, state.y)
    return d[:3], d[3:]


def default_delta_stop(model: BoundaryModel, eps: float) -> float:
    return 3.0 * eps * model.reference.spacing


def integrate(model: BoundaryModel, state0: BodyState, params: SimParams) -> Trajectory:
    """Integrate the full ODE, stopping at ``t_final`` or at the collision guard."""
    rhs = FullSystem(model, state0.eps, params)
    stop = params.delta_stop or default_delta_stop(model, state0.eps)
    traj = Trajectory()
    if params.scheme == "rk45":
        return _integrate_adaptive(rhs, state0, params, stop, traj)
    t, y = state0.t, state0.y.astype(float)
    n_steps = int(round(params.t_final / params.dt))
    for i in range(n_steps + 1):
        try:
            k1 = rhs(t, y)
        except GeometryError as exc:
            traj.reason, traj.message = COLLISION, str(exc)
            return traj
        except ShrinkflowError as exc:
            traj.reason, traj.message = SOLVER_FAILURE, f"t={t:.6g}: {exc}"
            return traj
        fs = rhs.last
        if i % params.record_every == 0 or i == n_steps:
            traj.append(t, y, fs.energy, fs.C, fs.separation)
        if fs.separation <= stop:
            traj.reason = COLLISION
            traj.message = f"separation {fs.separation:.4g} <= {stop:.4g} at t={t:.6g}"
            return traj
        if i == n_steps:
            break
        try:
            y = rk4_step(rhs, t, y, params.dt, k1)
        except GeometryError as exc:
            traj.reason, traj.message = COLLISION, f"t={t:.6g}: {exc}"
            return traj
        except ShrinkflowError as exc:
            traj.reason, traj.message = SOLVER_FAILURE, f"t={t:.6g}: {exc}"
            return traj
        t = state0.t + (i + 1) * params.dt
    return traj


def _integrate_adaptive(rhs, state0, params, stop, traj):
    def guard(t, y):
        return rhs.model.separation(Placement.from_q(y[:3], rhs.eps)) - stop

    guard.terminal = True
    try:
        res = solve_ivp(rhs, (state0.t, state0.t + params.t_final), state0.y, method="RK45",
                        rtol=params.rtol, atol=params.rtol, events=guard)
    except GeometryError as exc:
        traj.reason, traj.message = COLLISION, str(exc)
        return traj
    except ShrinkflowError as exc:
        traj.reason, traj.message = SOLVER_FAILURE, str(exc)
        return traj
    if res.status == 1:
        traj.reason = COLLISION
    elif res.status < 0:
        traj.reason, traj.message = SOLVER_FAILURE, res.message
    for t, y in zip(res.t, res.y.T):
        fs = rhs.forces(y)
        traj.append(t, y, fs.energy, fs.C, fs.separation)
    return traj


# ---------------------------------------------------------------------------
# exterior-plane system


def rhs_exterior(theta: float, p, ext: ExteriorConstants, m1: float, J1: float,
                 gamma: float) -> np.ndarray:
    pack = exterior_dynamics_pack(theta, p, ext, m1, J1, gamma)
    return np.linalg.solve(pack.M, pack.F - pack.gamma_pp)


def integrate_exterior(ext: ExteriorConstants, q0, p0, m1: float, J1: float, gamma: float,
                       t_final: float, dt: float):
    """Returns times, states (theta, h, omega, l) and kinetic energies."""

    def f(t, y):
        return np.concatenate([y[3:], rhs_exterior(y[0], y[3:], ext, m1, J1, gamma)])

    def kinetic(y):
        ma = ext.M_a_theta(y[0])
        return 0.5 * y[3:] @ (np.diag([J1, m1, m1]) + ma) @ y[3:]

    n = int(round(t_final / dt))
    y = np.concatenate([q0, p0]).astype(float)
    ys, es = [y], [kinetic(y)]
    for i in range(n):
        y = rk4_step(f, i * dt, y, dt)
        ys.append(y)
        es.append(kinetic(y))
    return dt * np.arange(n + 1), np.array(ys), np.array(es)


# ---------------------------------------------------------------------------
# limit systems


@dataclass
class LimitTrajectory:
    t: np.ndarray
    h: np.ndarray
    l: np.ndarray
    energy: np.ndarray
    reason: str = TIME_REACHED

    def energy_drift(self) -> float:
        return float(np.max(np.abs(self.energy - self.energy[0])) / abs(self.energy[0]))


def integrate_massive_vortex(h0, l0, m: float, gamma: float, routh, t_final: float,
                             dt: float, guard: float = 1e-3) -> LimitTrajectory:
    """``m h'' = gamma (h' - gamma u_Omega(h))^perp`` with its conserved energy."""

    def f(t, y):
        h, l = y[:2], y[2:]
        return np.concatenate([l, gamma / m * perp(l - gamma * routh.u(h))])

    def e(y):
        return 0.5 * m * y[2:] @ y[2:] - gamma**2 * routh.psi(y[:2])

    n = int(round(t_final / dt))
    y = np.concatenate([h0, l0]).astype(float)
    ys = [y]
    reason = TIME_REACHED
    for i in range(n):
        y = rk4_step(f, i * dt, y, dt)
        if hasattr(routh, "R") and np.linalg.norm(y[:2]) > routh.R - guard:
            reason = COLLISION
            break
        ys.append(y)
    ys = np.array(ys)
    return LimitTrajectory(dt * np.arange(len(ys)), ys[:, :2], ys[:, 2:],
                           np.array([e(v) for v in ys]), reason)


def integrate_point_vortex(h0, gamma: float, routh, t_final: float, dt: float) -> LimitTrajectory:
    """``h' = gamma u_Omega(h)``; the Routh function is conserved."""

    def f(t, h):
        return gamma * routh.u(h)

    n = int(round(t_final / dt))
    h = np.asarray(h0, dtype=float)
    hs = [h]
    for i in range(n):
        h = rk4_step(f, i * dt, h, dt)
        hs.append(h)
    hs = np.array(hs)
    ls = np.array([gamma * routh.u(v) for v in hs])
    es = np.array([gamma**2 * routh.psi(v) for v in hs])
    return LimitTrajectory(dt * np.arange(n + 1), hs, ls, es)


def orbit_period(t: np.ndarray, h: np.ndarray, center=(0.0, 0.0)) -> float:
    """Time for the polar angle around ``center`` to advance by 2 pi."""
    rel = h - np.asarray(center)
    ang = np.unwrap(np.arctan2(rel[:, 1], rel[:, 0]))
    turn = np.abs(ang - ang[0])
    idx = np.nonzero(turn >= 2 * np.pi)[0]
    if idx.size == 0:
        return float("nan")
    i = idx[0]
    frac = (2 * np.pi - turn[i - 1]) / (turn[i] - turn[i - 1])
    return float(t[i - 1] + frac * (t[i] - t[i - 1]))


def christoffel_exterior(theta, p, ext):
    return christoffel_S(p, ext.M_a_theta(theta))
