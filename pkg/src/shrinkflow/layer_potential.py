"""Nyström discretisation of single-layer potentials and the boundary solves.

Kernel: ``G_L(r) = -(1/2 pi) ln(|r| / L)``.  The length ``L`` is chosen as
twice the largest distance of the relevant curve from the origin, which
keeps the logarithmic capacity measured in units of ``L`` below 1/2 and the
augmented systems uniquely solvable.  Replacing ``G`` by ``G_L`` only adds a
multiple of the total density to the potential.  Every quantity that is
returned is converted back to the plain kernel ``G``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import GeometryError, SolverError
from .geometry import (
    BODY,
    DiscreteCurve,
    Placement,
    Shape,
    discretize,
    place,
    rigid_traces,
    separation,
)

INV2PI = 1.0 / (2.0 * np.pi)
CONJUGACY_TOL = 1e-9


class AccuracyWarning(UserWarning):
    pass


def kernel_scale(curve: DiscreteCurve) -> float:
    return 2.0 * float(np.max(np.linalg.norm(curve.nodes, axis=1)))


# ---------------------------------------------------------------------------
# matrices


@lru_cache(maxsize=16)
def _kress_row(n_nodes: int) -> np.ndarray:
    n = n_nodes // 2
    d = np.arange(n_nodes)
    m = np.arange(1, n)
    row = -(2 * np.pi / n) * (np.cos(np.outer(d, m) * np.pi / n) / m).sum(axis=1)
    row -= (np.pi / n**2) * (-1.0) ** d
    row.flags.writeable = False
    return row


def sl_self(curve: DiscreteCurve, scale: float = 1.0) -> np.ndarray:
    """Kress product quadrature for the single layer on its own curve."""
    nn = curve.n
    n = nn // 2
    idx = np.arange(nn)
    diff = (idx[:, None] - idx[None, :]) % nn
    r = _kress_row(nn)[diff]
    x = curve.nodes
    dist = np.linalg.norm(x[:, None, :] - x[None, :, :], axis=2)
    dt = np.pi * diff / n
    with np.errstate(divide="ignore", invalid="ignore"):
        h = np.log(dist) - 0.5 * np.log(4.0 * np.sin(0.5 * dt) ** 2)
    speed = curve.speed
    h[idx, idx] = np.log(speed)
    a = -INV2PI * (0.5 * r + (np.pi / n) * h) * speed[None, :]
    return a + INV2PI * np.log(scale) * curve.weights[None, :]


def sl_cross(source: DiscreteCurve, target_points: np.ndarray, scale: float = 1.0):
    diff = target_points[:, None, :] - source.nodes[None, :, :]
    dist = np.linalg.norm(diff, axis=2)
    if np.any(dist < 1e-14):
        raise GeometryError("coincident nodes on distinct curves")
    return -INV2PI * np.log(dist / scale) * source.weights[None, :]


def sl_matrix(source: DiscreteCurve, target: DiscreteCurve, scale: float = 1.0):
    """Potential at ``target`` nodes produced by node densities on ``source``."""
    if source is target:
        return sl_self(source, scale)
    return sl_cross(source, target.nodes, scale)


def grad_kernel(source: DiscreteCurve, points: np.ndarray) -> np.ndarray:
    """Gradient of the single layer at ``points``: shape (M, N, 2)."""
    diff = points[:, None, :] - source.nodes[None, :, :]
    r2 = np.sum(diff**2, axis=2)
    return -INV2PI * diff / r2[..., None] * source.weights[None, :, None]


def dn_cross(source: DiscreteCurve, target: DiscreteCurve) -> np.ndarray:
    """Normal derivative (target normal) of a single layer on another curve."""
    return np.einsum("mnd,md->mn", grad_kernel(source, target.nodes), target.normals)


def dn_self(curve: DiscreteCurve) -> np.ndarray:
    """Principal value of the normal derivative of a single layer on its curve.

    The one-sided limits are ``dn_self @ p -/+ p/2``; the minus sign goes with
    the side ``n`` points into.  Since ``n`` points away from the fluid on every
    curve of the package, the fluid-side value is ``dn_self @ p + p/2``.
    """
    x = curve.nodes
    diff = x[:, None, :] - x[None, :, :]
    r2 = np.sum(diff**2, axis=2)
    np.fill_diagonal(r2, 1.0)
    num = np.einsum("ijd,id->ij", diff, curve.normals)
    k = -INV2PI * num / r2 * curve.weights[None, :]
    np.fill_diagonal(k, curve.curvature * curve.weights / (4 * np.pi))
    return k


def eval_sl(curve: DiscreteCurve, density: np.ndarray, points, scale: float = 1.0):
    """Trapezoid evaluation of the single layer and its gradient off the curve."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    diff = pts[:, None, :] - curve.nodes[None, :, :]
    dist = np.linalg.norm(diff, axis=2)
    near = dist.min(axis=1) < 2.0 * curve.spacing
    if np.any(near):
        warnings.warn(
            f"{near.sum()} evaluation point(s) within two node spacings of the "
            f"curve; expected error ~ exp(-2 pi d/h) is no longer negligible",
            AccuracyWarning,
            stacklevel=2,
        )
    wp = curve.weights * density
    val = -INV2PI * np.log(dist / scale) @ wp
    grad = np.einsum("mnd,n->md", -INV2PI * diff / (dist**2)[..., None], wp)
    return val, grad


# ---------------------------------------------------------------------------
# solve containers


@dataclass(frozen=True)
class CoupledSolve:
    body_density: np.ndarray
    outer_density: np.ndarray
    constant: float
    residual: float


@dataclass(frozen=True)
class KirchhoffTraces:
    """Tangential derivatives of the Kirchhoff potentials (rows j = 1, 2, 3)."""

    dtau_body: np.ndarray
    dtau_outer: np.ndarray | None
    phi_body: np.ndarray
    constants: np.ndarray
    conj_values: np.ndarray
    conj_dn: np.ndarray
    circulation: np.ndarray


@dataclass(frozen=True)
class ExteriorSolve:
    curve: DiscreteCurve
    density: np.ndarray
    constant: float
    capacity: float
    scale: float
    raw_density: np.ndarray

    def far_field(self, points):
        """Value of the exterior solution psi^{-1} at points off the curve."""
        v, g = eval_sl(self.curve, self.raw_density, points, self.scale)
        return v - INV2PI * np.log(self.scale) * np.sum(self.raw_density * self.curve.weights), g


# ---------------------------------------------------------------------------
# coupled body + outer system


def conjugate_data(body: DiscreteCurve) -> np.ndarray:
    """Dirichlet data Kbar_j whose tangential derivative is K_j (rows j)."""
    y = body.nodes - np.asarray(body.placement.h)
    return np.stack([0.5 * np.sum(y**2, axis=1), -y[:, 1], y[:, 0]])


def antiderivative(curve: DiscreteCurve, dtau: np.ndarray) -> np.ndarray:
    """Periodic arclength primitive of ``dtau`` with zero weighted mean."""
    f = dtau * curve.speed
    nn = curve.n
    fh = np.fft.fft(f, axis=-1)
    k = np.fft.fftfreq(nn, 1.0 / nn)
    k[0] = 1.0
    gh = fh / (1j * k)
    gh[..., 0] = 0.0
    gh[..., nn // 2] = 0.0
    g = np.real(np.fft.ifft(gh, axis=-1))
    w = curve.weights
    return g - (g @ w)[..., None] / w.sum()


class CoupledOperator:
    """LU-factored matrix of the augmented body + outer single-layer system.

    Unknowns are ``(p_body, p_outer, C)``; rows impose
    ``SL[p_body] + SL[p_outer] - C = f`` on the body,
    ``SL[p_body] + SL[p_outer] = 0`` on the outer curve and the body flux
    ``sum w p_body``.
    """

    def __init__(self, body, outer, scale, body_self=None, outer_self=None,
                 body_dn=None, outer_dn=None):
        self.body, self.outer, self.scale = body, outer, scale
        nb, no = body.n, outer.n
        a = np.zeros((nb + no + 1, nb + no + 1))
        diff = body.nodes[:, None, :] - outer.nodes[None, :, :]
        r2 = np.sum(diff**2, axis=2)
        self.distances = r2
        if np.min(r2) < 1e-28:
            raise GeometryError("coincident nodes on distinct curves")
        lg = -INV2PI * 0.5 * np.log(r2 / scale**2)
        a[:nb, :nb] = sl_self(body, scale) if body_self is None else body_self
        a[:nb, nb:nb + no] = lg * outer.weights[None, :]
        a[nb:nb + no, :nb] = lg.T * body.weights[None, :]
        a[nb:nb + no, nb:nb + no] = sl_self(outer, scale) if outer_self is None else outer_self
        a[:nb, -1] = -1.0
        a[-1, :nb] = body.weights
        self.matrix = a
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("error")
                self.lu = lu_factor(a, check_finite=True)
        except (ValueError, RuntimeWarning, np.linalg.LinAlgError) as exc:
            raise SolverError(f"singular single-layer system: {exc}") from None
        self.body_dn = dn_self(body) if body_dn is None else body_dn
        self.outer_dn = dn_self(outer) if outer_dn is None else outer_dn
        g = -INV2PI * diff / r2[..., None]
        self.dn_ob = np.einsum("bod,bd->bo", g, body.normals) * outer.weights[None, :]
        self.dn_bo = -np.einsum("bod,od->ob", g, outer.normals) * body.weights[None, :]

    def solve(self, rhs_body: np.ndarray, flux):
        """Solve for one or several right-hand sides (columns)."""
        nb, no = self.body.n, self.outer.n
        rhs_body = np.asarray(rhs_body, dtype=float)
        single = rhs_body.ndim == 1
        rb = rhs_body.reshape(nb, -1)
        k = rb.shape[1]
        rhs = np.zeros((nb + no + 1, k))
        rhs[:nb] = rb
        rhs[-1] = flux
        sol = lu_solve(self.lu, rhs)
        res = np.max(np.abs(self.matrix @ sol - rhs))
        if not np.isfinite(res) or res > 1e-8 * max(1.0, np.max(np.abs(rhs))):
            raise SolverError(f"linear solve residual {res:.2e}")
        pb, po, c = sol[:nb], sol[nb:nb + no], sol[-1]
        if single:
            return pb[:, 0], po[:, 0], float(c[0]), float(res)
        return pb.T, po.T, c, float(res)

    def fluid_dn_body(self, pb, po):
        return pb @ self.body_dn.T + 0.5 * pb + po @ self.dn_ob.T

    def fluid_dn_outer(self, pb, po):
        return po @ self.outer_dn.T + 0.5 * po + pb @ self.dn_bo.T


def _check(body, outer):
    if separation(body, outer) <= 0:
        raise GeometryError("body intersects or leaves the outer domain")


def solve_circulation(body: DiscreteCurve, outer: DiscreteCurve, op=None):
    """Stream function with unit circulation: returns (C, dpsi/dn on body, solve)."""
    if op is None:
        _check(body, outer)
        op = CoupledOperator(body, outer, kernel_scale(outer))
    pb, po, c, res = op.solve(np.zeros(body.n), -1.0)
    return c, pb, CoupledSolve(pb, po, c, res)


def solve_kirchhoff(body: DiscreteCurve, outer: DiscreteCurve, op=None) -> KirchhoffTraces:
    """Kirchhoff potential traces through their harmonic conjugates."""
    if op is None:
        _check(body, outer)
        op = CoupledOperator(body, outer, kernel_scale(outer))
    data = conjugate_data(body)
    pb, po, c, _ = op.solve(data.T, 0.0)
    dn_b = op.fluid_dn_body(pb, po)
    dn_o = op.fluid_dn_outer(pb, po)
    dtau_b, dtau_o = -dn_b, -dn_o
    circ = np.array([dtau_b @ body.weights, dtau_o @ outer.weights]).T
    scale = np.abs(dtau_b) @ body.weights + 1e-300
    if np.any(np.abs(circ[:, 0]) > CONJUGACY_TOL * np.maximum(1.0, scale)):
        raise SolverError(f"Kirchhoff conjugate has net circulation {circ[:, 0]}")
    phi = antiderivative(body, dtau_b)
    return KirchhoffTraces(dtau_b, dtau_o, phi, np.asarray(c), data + c[:, None], dn_b, circ)


# ---------------------------------------------------------------------------
# exterior-plane problems on one curve


class ExteriorOperator:
    def __init__(self, curve: DiscreteCurve):
        self.curve = curve
        self.scale = kernel_scale(curve)
        n = curve.n
        a = np.zeros((n + 1, n + 1))
        a[:n, :n] = sl_self(curve, self.scale)
        a[:n, -1] = -1.0
        a[-1, :n] = curve.weights
        self.matrix = a
        self.lu = lu_factor(a)
        self.dn = dn_self(curve)

    def solve(self, rhs, flux):
        n = self.curve.n
        rhs = np.asarray(rhs, dtype=float).reshape(n, -1)
        full = np.zeros((n + 1, rhs.shape[1]))
        full[:n] = rhs
        full[-1] = flux
        sol = lu_solve(self.lu, full)
        res = np.max(np.abs(self.matrix @ sol - full))
        if not np.isfinite(res) or res > 1e-8:
            raise SolverError(f"exterior solve residual {res:.2e}")
        return sol[:n].T, sol[-1]

    def fluid_dn(self, p):
        return p @ self.dn.T + 0.5 * p


def solve_exterior_equilibrium(shape: Shape, n: int, op: ExteriorOperator | None = None):
    """Equilibrium density of the curve with total flux -1."""
    curve = discretize(shape, n, BODY) if op is None else op.curve
    op = op or ExteriorOperator(curve)
    p, c = op.solve(np.zeros(curve.n), -1.0)
    p = p[0]
    const = float(c[0]) + INV2PI * np.log(op.scale)
    dn = op.fluid_dn(p)
    return ExteriorSolve(curve, dn, const, float(np.exp(2 * np.pi * const)), op.scale, p)


def solve_exterior_kirchhoff(shape: Shape, n: int, op: ExteriorOperator | None = None):
    """Exterior Kirchhoff potentials via decaying conjugates with zero flux."""
    curve = discretize(shape, n, BODY) if op is None else op.curve
    op = op or ExteriorOperator(curve)
    data = conjugate_data(curve)
    p, c = op.solve(data.T, 0.0)
    dn = op.fluid_dn(p)
    dtau = -dn
    circ = dtau @ curve.weights
    if np.any(np.abs(circ) > CONJUGACY_TOL * np.maximum(1.0, np.abs(dtau) @ curve.weights)):
        raise SolverError(f"exterior conjugate has net circulation {circ}")
    phi = antiderivative(curve, dtau)
    return KirchhoffTraces(dtau, None, phi, np.asarray(c), data + c[:, None], dn,
                           np.stack([circ, np.zeros(3)], axis=1))


# ---------------------------------------------------------------------------
# interior Dirichlet problem on the outer curve


class InteriorSolution:
    """Harmonic function in Omega represented as a single layer on the boundary."""

    def __init__(self, outer: DiscreteCurve, density: np.ndarray, scale: float):
        self.outer, self.density, self.scale = outer, density, scale

    def __call__(self, points):
        return self.evaluate(points)[0]

    def evaluate(self, points):
        """Values, gradients and Hessians at interior points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        diff = pts[:, None, :] - self.outer.nodes[None, :, :]
        r2 = np.sum(diff**2, axis=2)
        if np.any(np.sqrt(r2.min(axis=1)) < 2.0 * self.outer.spacing):
            warnings.warn("interior evaluation too close to the boundary",
                          AccuracyWarning, stacklevel=2)
        wp = self.outer.weights * self.density
        val = -INV2PI * 0.5 * np.log(r2 / self.scale**2) @ wp
        grad = np.einsum("mnd,n->md", -INV2PI * diff / r2[..., None], wp)
        eye = np.eye(2)[None, None]
        hk = -INV2PI * (eye / r2[..., None, None]
                        - 2 * diff[..., :, None] * diff[..., None, :] / (r2**2)[..., None, None])
        hess = np.einsum("mnab,n->mab", hk, wp)
        return val, grad, hess


class InteriorDirichlet:
    """Reusable factorisation of ``SL_L[p] = g`` on the outer curve."""

    def __init__(self, outer: DiscreteCurve):
        self.outer = outer
        self.scale = kernel_scale(outer)
        self.lu = lu_factor(sl_self(outer, self.scale))

    def solve(self, g) -> InteriorSolution:
        p = lu_solve(self.lu, np.asarray(g, dtype=float))
        return InteriorSolution(self.outer, p, self.scale)


def solve_interior_dirichlet(outer: DiscreteCurve, g) -> InteriorSolution:
    return InteriorDirichlet(outer).solve(g)


# ---------------------------------------------------------------------------
# cached model for repeated solves with one body shape inside one domain


@dataclass(frozen=True)
class FluidSolution:
    """Boundary data of the circulation and Kirchhoff problems at one (eps, q)."""

    placement: Placement
    body: DiscreteCurve
    outer: DiscreteCurve
    k_body: np.ndarray
    xi_body: np.ndarray
    k_outer: np.ndarray
    C: float
    dpsi_dn: np.ndarray
    kirchhoff: KirchhoffTraces
    separation: float
    residual: float

    @property
    def dphi_dtau_body(self):
        return self.kirchhoff.dtau_body

    @property
    def dphi_dtau_outer(self):
        return self.kirchhoff.dtau_outer

    @property
    def phi_body(self):
        return self.kirchhoff.phi_body


class BoundaryModel:
    """A body shape inside a fixed outer domain, with cached self-interaction blocks.

    The body self-blocks do not change under rigid motions, so they are
    computed once per scale and reused for every placement.
    """

    def __init__(self, body_shape: Shape, outer_shape: Shape, n_body: int = 64,
                 n_outer: int = 128, min_separation: float = 0.0):
        self.body_shape, self.outer_shape = body_shape, outer_shape
        self.n_body, self.n_outer = n_body, n_outer
        self.reference = discretize(body_shape, n_body, BODY)
        self.outer = discretize(outer_shape, n_outer, "outer")
        self.scale = kernel_scale(self.outer)
        self.outer_self = sl_self(self.outer, self.scale)
        self.outer_dn = dn_self(self.outer)
        self.min_separation = min_separation
        self._body_blocks: dict[float, tuple] = {}
        self._interior: InteriorDirichlet | None = None

    def _blocks(self, eps: float):
        blk = self._body_blocks.get(eps)
        if blk is None:
            curve = place(self.reference, Placement(0.0, (0.0, 0.0), eps))
            blk = (sl_self(curve, self.scale), dn_self(curve))
            if len(self._body_blocks) > 32:
                self._body_blocks.clear()
            self._body_blocks[eps] = blk
        return blk

    def body_curve(self, q: Placement) -> DiscreteCurve:
        return place(self.reference, q)

    def separation(self, q: Placement) -> float:
        return separation(self.body_curve(q), self.outer)

    def operator(self, q: Placement):
        body = self.body_curve(q)
        s, d = self._blocks(q.epsilon)
        try:
            op = CoupledOperator(body, self.outer, self.scale, s, self.outer_self, d,
                                 self.outer_dn)
        except SolverError:
            op = None
        sep = separation(body, self.outer, None if op is None else op.distances)
        if sep <= self.min_separation or op is None:
            raise GeometryError(f"separation {sep:.3g} below guard {self.min_separation:.3g}")
        return op, sep

    def circulation_constant(self, q: Placement) -> float:
        op, _ = self.operator(q)
        return solve_circulation(op.body, self.outer, op)[0]

    def solve(self, q: Placement) -> FluidSolution:
        op, sep = self.operator(q)
        body = op.body
        c, dpsi, circ = solve_circulation(body, self.outer, op)
        kir = solve_kirchhoff(body, self.outer, op)
        k_body, xi = rigid_traces(body)
        k_outer, _ = rigid_traces(self.outer, q.h)
        return FluidSolution(q, body, self.outer, k_body, xi, k_outer, c, dpsi, kir,
                             sep, circ.residual)

    @property
    def interior(self) -> InteriorDirichlet:
        if self._interior is None:
            self._interior = InteriorDirichlet(self.outer)
        return self._interior

