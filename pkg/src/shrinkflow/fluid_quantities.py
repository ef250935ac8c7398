"""Inertia, Christoffel contractions, force fields, energies and plane constants.

Everything here is assembled from boundary traces produced by
:mod:`shrinkflow.layer_potential`.  The fluid density is 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import AccuracyError, GeometryError
from .geometry import (
    Placement,
    Shape,
    cross3,
    perp,
    rigid_traces,
    rot,
    rot3,
)
from .layer_potential import (
    INV2PI,
    BoundaryModel,
    ExteriorOperator,
    FluidSolution,
    discretize,
    solve_exterior_equilibrium,
    solve_exterior_kirchhoff,
)

PERP = np.array([[0.0, -1.0], [1.0, 0.0]])
FD_STEP = 1e-4


# ---------------------------------------------------------------------------
# inertia


@dataclass(frozen=True)
class InertiaSet:
    m: float
    J: float
    M_a: np.ndarray
    asymmetry: float = 0.0

    @property
    def M_g(self) -> np.ndarray:
        return np.diag([self.J, self.m, self.m])

    @property
    def M(self) -> np.ndarray:
        return self.M_g + self.M_a


def added_mass(phi: np.ndarray, k: np.ndarray, weights: np.ndarray):
    """``(M_a)_ij = sum_nodes w phi_i K_j``, symmetrised; returns (M_a, asymmetry)."""
    raw = (phi * weights) @ k.T
    norm = max(np.linalg.norm(raw), 1e-300)
    asym = float(np.linalg.norm(raw - raw.T) / norm)
    if asym > 1e-6:
        raise AccuracyError(f"added-mass asymmetry {asym:.2e} exceeds 1e-6")
    return 0.5 * (raw + raw.T), asym


def inertia(sol: FluidSolution, m: float, J: float) -> InertiaSet:
    ma, asym = added_mass(sol.phi_body, sol.k_body, sol.body.weights)
    return InertiaSet(m, J, ma, asym)


# ---------------------------------------------------------------------------
# Christoffel contractions


def christoffel_S(p: np.ndarray, M_a: np.ndarray) -> np.ndarray:
    """Rotation part: ``-(0, P_a) x p - omega M_a (0, l^perp)``."""
    p = np.asarray(p, dtype=float)
    pa = M_a @ p
    return -cross3(np.concatenate([[0.0], pa[1:]]), p) - p[0] * M_a @ np.concatenate(
        [[0.0], perp(p[1:])]
    )


def christoffel_boundary(p, dtau_outer: np.ndarray, k_outer: np.ndarray, w_outer) -> np.ndarray:
    """Outer-boundary part, contracted with p twice.

    Summing the three terms of each symbol against ``p_k p_l`` gives
    ``int b_j a (K.p) - a^2 K_j / 2`` with ``a = sum_k p_k dphi_k/dtau``.
    """
    p = np.asarray(p, dtype=float)
    a = p @ dtau_outer
    kp = p @ k_outer
    return (dtau_outer * a * kp - 0.5 * a**2 * k_outer) @ w_outer


def christoffel_symbols(dm: np.ndarray) -> np.ndarray:
    """``Gamma[k, i, j]`` from ``dm[k] = dM_a/dq_k``."""
    # Gamma^k_ij = 1/2 (dM_kj/dq_i + dM_ki/dq_j - dM_ij/dq_k)
    return 0.5 * (np.einsum("ikj->kij", dm) + np.einsum("jki->kij", dm) - dm)


def contract(gamma: np.ndarray, p: np.ndarray) -> np.ndarray:
    return np.einsum("kij,i,j->k", gamma, p, p)


def fd_derivative(func: Callable[[np.ndarray], np.ndarray], q, delta: float = FD_STEP):
    """Central differences of ``func`` in each of the three coordinates of ``q``."""
    q = np.asarray(q, dtype=float)
    out = []
    for k in range(3):
        e = np.zeros(3)
        e[k] = delta
        out.append((np.asarray(func(q + e)) - np.asarray(func(q - e))) / (2 * delta))
    return np.array(out)


def christoffel_fd(model: BoundaryModel, q, p, eps: float, delta: float = FD_STEP):
    """Christoffel contraction from finite differences of the added mass."""

    def ma(qq):
        return inertia(model.solve(Placement.from_q(qq, eps)), 0.0, 0.0).M_a

    dm = fd_derivative(ma, q, delta)
    return contract(christoffel_symbols(dm), np.asarray(p, dtype=float)), dm


def skew_symmetry_residual(dm: np.ndarray, p: np.ndarray) -> float:
    """``|A + A^t|`` for ``A = DM.p / 2 - S(p)``, ``S_kj = sum_i Gamma^k_ij p_i``."""
    p = np.asarray(p, dtype=float)
    dmp = np.einsum("kij,k->ij", dm, p)
    s = np.einsum("kij,i->kj", christoffel_symbols(dm), p)
    a = 0.5 * dmp - s
    return float(np.max(np.abs(a + a.T)))


# ---------------------------------------------------------------------------
# force fields and energy


def _cross_nodes(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Nodewise cross product of (3, N) arrays."""
    return np.stack([
        -a[2] * b[1] + a[1] * b[2],
        -a[0] * b[2] + b[0] * a[2],
        a[0] * b[1] - b[0] * a[1],
    ])


def force_E(dpsi_dn: np.ndarray, k: np.ndarray, weights: np.ndarray) -> np.ndarray:
    return -0.5 * (k * dpsi_dn**2) @ weights


def force_B(dpsi_dn, k, dphi_dtau, weights) -> np.ndarray:
    return (_cross_nodes(k, dphi_dtau) * dpsi_dn) @ weights


def force_total(p, E, B, gamma: float) -> np.ndarray:
    return gamma**2 * np.asarray(E) + gamma * cross3(np.asarray(p, dtype=float), np.asarray(B))


def energy(M: np.ndarray, p, C: float, gamma: float) -> float:
    p = np.asarray(p, dtype=float)
    return float(0.5 * p @ M @ p - 0.5 * gamma**2 * C)


@dataclass(frozen=True)
class InertiaForceSet:
    """All right-hand-side ingredients of the body ODE at one configuration."""

    placement: Placement
    inertia: InertiaSet
    C: float
    E: np.ndarray
    B: np.ndarray
    gamma_S: np.ndarray
    gamma_boundary: np.ndarray
    F: np.ndarray
    energy: float
    separation: float

    @property
    def M(self):
        return self.inertia.M

    @property
    def gamma_total(self):
        return self.gamma_S + self.gamma_boundary


def evaluate(model: BoundaryModel, q: Placement, p, gamma: float, m: float, J: float,
             sol: FluidSolution | None = None) -> InertiaForceSet:
    sol = model.solve(q) if sol is None else sol
    ins = inertia(sol, m, J)
    w = sol.body.weights
    E = force_E(sol.dpsi_dn, sol.k_body, w)
    B = force_B(sol.dpsi_dn, sol.k_body, sol.dphi_dtau_body, w)
    p = np.asarray(p, dtype=float)
    gs = christoffel_S(p, ins.M_a)
    gb = christoffel_boundary(p, sol.dphi_dtau_outer, sol.k_outer, sol.outer.weights)
    F = force_total(p, E, B, gamma)
    return InertiaForceSet(q, ins, sol.C, E, B, gs, gb, F, energy(ins.M, p, sol.C, gamma),
                           sol.separation)


# ---------------------------------------------------------------------------
# exterior-plane constants


@dataclass(frozen=True)
class ExteriorConstants:
    shape: Shape
    n: int
    capacity: float
    C_ext: float
    zeta: np.ndarray
    zeta_contour: np.ndarray
    M_a: np.ndarray
    M_dagger: np.ndarray
    M_dagger_components: np.ndarray
    M_bar: np.ndarray
    sigma: np.ndarray
    T2: np.ndarray
    c_conj: np.ndarray
    equilibrium: object
    kirchhoff: object

    @property
    def m_sharp(self) -> float:
        return float(self.M_a[0, 0])

    @property
    def mu(self) -> np.ndarray:
        return self.M_a[1:, 0]

    @property
    def M_flat(self) -> np.ndarray:
        return self.M_a[1:, 1:]

    @property
    def sigma_s(self) -> np.ndarray:
        return 0.5 * (self.sigma + self.sigma.T)

    @property
    def zeta_discrepancy(self) -> float:
        return float(np.linalg.norm(self.zeta - self.zeta_contour))

    def zeta_theta(self, theta: float) -> np.ndarray:
        return rot(theta) @ self.zeta

    def M_a_theta(self, theta: float) -> np.ndarray:
        r = rot3(theta)
        return r @ self.M_a @ r.T

    def M_dagger_theta(self, theta: float) -> np.ndarray:
        r = rot(theta)
        return r @ self.M_dagger @ r.T


def blasius_zeta(ext_solve, n_contour: int = 512, radius: float | None = None) -> np.ndarray:
    """zeta from the contour integral of ``z (H1 - i H2) dz`` with ``H = grad^perp psi``.

    The integrand is holomorphic outside the body, so the contour is moved
    to a circle well away from the curve where plain trapezoid quadrature
    converges geometrically.
    """
    curve = ext_solve.curve
    if radius is None:
        radius = 2.0 * float(np.max(np.linalg.norm(curve.nodes, axis=1)))
    phi = 2 * np.pi * np.arange(n_contour) / n_contour
    z = radius * np.exp(1j * phi)
    pts = np.stack([z.real, z.imag], axis=1)
    _, grad = ext_solve.far_field(pts)
    h = perp(grad)
    dz = 1j * z * (2 * np.pi / n_contour)
    val = np.sum(z * (h[:, 0] - 1j * h[:, 1]) * dz)
    return np.array([val.real, val.imag])


def exterior_constants(shape: Shape, n: int = 512) -> ExteriorConstants:
    curve = discretize(shape, n)
    op = ExteriorOperator(curve)
    eq = solve_exterior_equilibrium(shape, n, op)
    kir = solve_exterior_kirchhoff(shape, n, op)
    w = curve.weights
    x = curve.nodes
    p = eq.density
    zeta = -(x.T * p) @ w
    zeta_c = blasius_zeta(eq)
    if np.linalg.norm(zeta - zeta_c) > 1e-6 * max(1.0, shape.max_radius):
        raise AccuracyError(f"zeta formulas disagree: {zeta} vs {zeta_c}")
    k, _ = rigid_traces(curve)
    ma, _ = added_mass(kir.phi_body, k, w)
    mflat = ma[1:, 1:]
    mdag = 0.5 * (mflat @ PERP + (mflat @ PERP).T)
    phi = kir.phi_body
    d11 = (k[2] * phi[1]) @ w
    d12 = 0.5 * (k[2] * phi[2] - k[1] * phi[1]) @ w
    comp = np.array([[d11, d12], [d12, -d11]])
    vals = kir.conj_values[1:]
    dn = kir.conj_dn
    mbar = np.einsum("an,bn,n->ab", vals, np.stack([dn[2], -dn[1]]), w)
    sigma = np.einsum("n,na,nb,n->ab", p, x, perp(x), w) + np.outer(zeta, perp(zeta))
    t2 = np.einsum("n,na,nb,n->ab", p, x, x, w)
    return ExteriorConstants(shape, n, eq.capacity, eq.constant, zeta, zeta_c, ma, mdag,
                             comp, mbar, sigma, t2, kir.constants, eq, kir)


# ---------------------------------------------------------------------------
# Kirchhoff-Routh fields


class DiskRouth:
    """Closed-form Routh objects for the disk of radius R centred at 0."""

    mode = "closed-form-disk"

    def __init__(self, radius: float = 1.0):
        self.R = float(radius)

    def _check(self, h):
        if np.linalg.norm(h) >= self.R:
            raise GeometryError("point outside the disk")

    def psi0(self, h, x) -> float:
        """Harmonic function in the disk equal to G(x - h) on the circle."""
        h = np.asarray(h, dtype=float)
        x = np.asarray(x, dtype=float)
        r2 = h @ h
        if r2 == 0.0:
            return -INV2PI * np.log(self.R)
        hs = self.R**2 * h / r2
        return float(-INV2PI * np.log(np.sqrt(r2) * np.linalg.norm(x - hs) / self.R))

    def hess_psi0(self, h) -> np.ndarray:
        """Second x-derivative of psi0(h, .) at x = h."""
        h = np.asarray(h, dtype=float)
        r2 = h @ h
        if r2 == 0.0:
            return np.zeros((2, 2))
        d = h - self.R**2 * h / r2
        dd = d @ d
        return -INV2PI * (np.eye(2) / dd - 2 * np.outer(d, d) / dd**2)

    def psi(self, h) -> float:
        h = np.asarray(h, dtype=float)
        self._check(h)
        return float(np.log(self.R / (self.R**2 - h @ h)) / (4 * np.pi))

    def grad(self, h) -> np.ndarray:
        h = np.asarray(h, dtype=float)
        return h / (2 * np.pi * (self.R**2 - h @ h))

    def hess(self, h) -> np.ndarray:
        h = np.asarray(h, dtype=float)
        s = self.R**2 - h @ h
        return (np.eye(2) / s + 2 * np.outer(h, h) / s**2) / (2 * np.pi)

    def u(self, h) -> np.ndarray:
        return perp(self.grad(h))


class BemRouth:
    """Routh objects for a general domain from interior Dirichlet solves.

    Derivatives come from central differences of the boundary-integral
    value, so second derivatives of ``psi0`` are not offered.
    """

    mode = "bem"

    def __init__(self, model: BoundaryModel, step: float = FD_STEP):
        self.model = model
        self.outer = model.outer
        self.step = step

    def _solution(self, h):
        h = np.asarray(h, dtype=float)
        diff = self.outer.nodes - h
        g = -INV2PI * np.log(np.linalg.norm(diff, axis=1))
        return self.model.interior.solve(g)

    def psi0(self, h, x) -> float:
        return float(self._solution(h)(np.asarray(x, dtype=float))[0])

    def hess_psi0(self, h):
        raise NotImplementedError("second derivatives of psi0 need the closed-form disk mode")

    def psi(self, h) -> float:
        return 0.5 * self.psi0(h, h)

    def grad(self, h) -> np.ndarray:
        h = np.asarray(h, dtype=float)
        s = self.step
        return np.array([(self.psi(h + e) - self.psi(h - e)) / (2 * s)
                         for e in (np.array([s, 0.0]), np.array([0.0, s]))])

    def hess(self, h) -> np.ndarray:
        h = np.asarray(h, dtype=float)
        s = 10 * self.step
        cols = [(self.grad(h + e) - self.grad(h - e)) / (2 * s)
                for e in (np.array([s, 0.0]), np.array([0.0, s]))]
        hm = np.array(cols).T
        return 0.5 * (hm + hm.T)

    def u(self, h) -> np.ndarray:
        return perp(self.grad(h))


def routh(domain, h):
    """``(psi_Omega(h), u_Omega(h))`` for a :class:`DiskRouth` or :class:`BemRouth`."""
    return domain.psi(h), domain.u(h)


def corrector(domain, zeta: np.ndarray, q) -> tuple[float, np.ndarray]:
    """``psi_c = D psi_Omega(h) . zeta_theta`` and ``u_c = grad_h^perp psi_c``."""
    theta, h = q[0], np.asarray(q[1:], dtype=float)
    zt = rot(theta) @ np.asarray(zeta)
    return float(domain.grad(h) @ zt), perp(domain.hess(h) @ zt)


# ---------------------------------------------------------------------------
# exterior-plane dynamics


@dataclass(frozen=True)
class ExteriorPack:
    M: np.ndarray
    gamma_pp: np.ndarray
    F: np.ndarray


def exterior_christoffel(theta: float, p, ext: ExteriorConstants) -> np.ndarray:
    """Closed form in terms of ``M_dagger`` and ``mu``."""
    p = np.asarray(p, dtype=float)
    w, l = p[0], p[1:]
    md = ext.M_dagger_theta(theta)
    mu = rot(theta) @ ext.mu
    return np.concatenate([[-perp(l) @ md @ perp(l)], w**2 * perp(mu) - 2 * w * md @ l])


def exterior_force(theta: float, p, zeta: np.ndarray, gamma: float) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    zt = rot(theta) @ np.asarray(zeta)
    return gamma * np.concatenate([[zt @ p[1:]], perp(p[1:]) - p[0] * zt])


def exterior_dynamics_pack(theta: float, p, ext: ExteriorConstants, m1: float, J1: float,
                           gamma: float) -> ExteriorPack:
    ma = ext.M_a_theta(theta)
    return ExteriorPack(np.diag([J1, m1, m1]) + ma, christoffel_S(p, ma),
                        exterior_force(theta, p, ext.zeta, gamma))


# ---------------------------------------------------------------------------
# Lamb identity


def _boundary_field(ext: ExteriorConstants, spec: str) -> np.ndarray:
    curve = ext.equilibrium.curve
    t = curve.tangents
    if spec == "psi":
        return -ext.equilibrium.density[:, None] * t
    if spec in ("phi1", "phi2", "phi3"):
        j = int(spec[-1]) - 1
        k, _ = rigid_traces(curve)
        return ext.kirchhoff.dtau_body[j][:, None] * t + k[j][:, None] * perp(t)
    raise ValueError(f"unknown field {spec!r}; use psi, phi1, phi2 or phi3")


def lamb_identity_check(ext: ExteriorConstants, u_spec: str, v_spec: str, j: int):
    """Residual and both sides of the boundary identity for fields u, v and index j."""
    curve = ext.equilibrium.curve
    w = curve.weights
    n = curve.normals
    u = _boundary_field(ext, u_spec)
    v = _boundary_field(ext, v_spec)
    k, xi = rigid_traces(curve)
    un = np.sum(u * n, axis=1)
    vn = np.sum(v * n, axis=1)
    lhs = (np.sum(u * v, axis=1) * k[j - 1]) @ w
    rhs = np.sum(xi[j - 1] * (un[:, None] * v + vn[:, None] * u), axis=1) @ w
    return float(abs(lhs - rhs)), float(lhs), float(rhs)


