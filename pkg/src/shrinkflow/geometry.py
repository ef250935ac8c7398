"""Shapes, rigid placements and quadrature-ready discrete curves.

Orientation conventions used everywhere in the package:

* ``x^perp = (-x2, x1)``.
* On a body curve the tangent runs counterclockwise and ``n = tau^perp``
  points into the solid.
* On the outer curve the tangent runs clockwise and ``n = tau^perp``
  points out of the fluid domain.

In both cases ``n`` points away from the fluid.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import InvalidShapeError

BODY = "body"
OUTER = "outer"


def perp(v: np.ndarray) -> np.ndarray:
    """Rotate vectors (last axis of length 2) by +pi/2."""
    v = np.asarray(v, dtype=float)
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


def rot(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def rot3(theta: float) -> np.ndarray:
    """The 3x3 rotation acting on (omega, l) as diag(1, R(theta))."""
    out = np.eye(3)
    out[1:, 1:] = rot(theta)
    return out


def i_eps(eps: float) -> np.ndarray:
    return np.diag([eps, 1.0, 1.0])


def cross3(pa: np.ndarray, pb: np.ndarray) -> np.ndarray:
    """Cross product on R x R^2: (la^perp . lb, wa lb^perp - wb la^perp)."""
    wa, la = pa[0], np.asarray(pa[1:])
    wb, lb = pb[0], np.asarray(pb[1:])
    return np.concatenate([[perp(la) @ lb], wa * perp(lb) - wb * perp(la)])


# ---------------------------------------------------------------------------
# Shapes


@dataclass(frozen=True)
class Shape:
    """Analytic smooth Jordan curve with its enclosed centroid at the origin.

    ``kind`` is ``"circle"`` (params ``(radius,)``), ``"ellipse"``
    (``(a, b)`` with ``a >= b``) or ``"star"`` (``(r0, ((k, c_k, s_k), ...))``)
    for the radial function ``r(t) = r0 + sum c_k cos kt + s_k sin kt``.
    """

    kind: str
    params: tuple
    offset: tuple = field(default=(0.0, 0.0), compare=False)

    # raw parametrization, before centroid shift -------------------------
    def _raw(self, t: np.ndarray):
        t = np.asarray(t, dtype=float)
        if self.kind == "circle":
            (a,) = self.params
            c, s = np.cos(t), np.sin(t)
            x = a * np.stack([c, s], -1)
            d1 = a * np.stack([-s, c], -1)
            d2 = -x
            return x, d1, d2
        if self.kind == "ellipse":
            a, b = self.params
            c, s = np.cos(t), np.sin(t)
            x = np.stack([a * c, b * s], -1)
            d1 = np.stack([-a * s, b * c], -1)
            d2 = -x
            return x, d1, d2
        if self.kind == "star":
            r, r1, r2 = self._radial(t)
            c, s = np.cos(t), np.sin(t)
            e = np.stack([c, s], -1)
            ep = np.stack([-s, c], -1)
            x = r[..., None] * e
            d1 = r1[..., None] * e + r[..., None] * ep
            d2 = (r2 - r)[..., None] * e + 2.0 * r1[..., None] * ep
            return x, d1, d2
        raise InvalidShapeError(f"unknown shape kind {self.kind!r}")

    def _radial(self, t):
        r0, modes = self.params
        r = np.full_like(t, r0, dtype=float)
        r1 = np.zeros_like(r)
        r2 = np.zeros_like(r)
        for k, ck, sk in modes:
            ckt, skt = np.cos(k * t), np.sin(k * t)
            r = r + ck * ckt + sk * skt
            r1 = r1 + k * (-ck * skt + sk * ckt)
            r2 = r2 - k * k * (ck * ckt + sk * skt)
        return r, r1, r2

    def evaluate(self, t: np.ndarray):
        """Return position, first and second parameter derivatives at ``t``."""
        x, d1, d2 = self._raw(t)
        return x - np.asarray(self.offset), d1, d2

    def scaled(self, lam: float) -> "Shape":
        """The dilated shape ``lam * S``."""
        if self.kind == "star":
            r0, modes = self.params
            params = (lam * r0, tuple((k, lam * c, lam * s) for k, c, s in modes))
        else:
            params = tuple(lam * v for v in self.params)
        return make_shape(self.kind, params)

    @property
    def max_radius(self) -> float:
        t = np.linspace(0, 2 * np.pi, 2048, endpoint=False)
        return float(np.max(np.linalg.norm(self.evaluate(t)[0], axis=-1)))

    def describe(self) -> str:
        if self.kind == "star":
            r0, modes = self.params
            body = ";".join(f"{k},{c:g},{s:g}" for k, c, s in modes)
            return f"star:{r0:g}|{body}"
        return f"{self.kind}:" + ",".join(f"{v:g}" for v in self.params)


def _region_centroid(shape: Shape) -> np.ndarray:
    t = np.linspace(0.0, 2 * np.pi, 4096, endpoint=False)
    x, d1, _ = shape._raw(t)
    dt = 2 * np.pi / t.size
    area = 0.5 * np.sum(x[:, 0] * d1[:, 1] - x[:, 1] * d1[:, 0]) * dt
    cx = 0.5 * np.sum(x[:, 0] ** 2 * d1[:, 1]) * dt / area
    cy = -0.5 * np.sum(x[:, 1] ** 2 * d1[:, 0]) * dt / area
    return np.array([cx, cy])


def make_shape(kind: str, params) -> Shape:
    """Validate parameters and build a centroid-centred :class:`Shape`."""
    if kind == "circle":
        params = tuple(float(v) for v in params)
        if len(params) != 1 or not params[0] > 0:
            raise InvalidShapeError("circle needs one positive radius")
    elif kind == "ellipse":
        params = tuple(float(v) for v in params)
        if len(params) != 2:
            raise InvalidShapeError("ellipse needs two semi-axes a,b")
        a, b = params
        if not (b > 0 and a >= b):
            raise InvalidShapeError("ellipse semi-axes must satisfy a >= b > 0")
    elif kind == "star":
        r0, modes = params
        r0 = float(r0)
        modes = tuple((int(k), float(c), float(s)) for k, c, s in modes)
        if not r0 > 0 or any(k < 1 for k, _, _ in modes):
            raise InvalidShapeError("star needs r0 > 0 and modes k >= 1")
        params = (r0, modes)
        probe = Shape(kind, params)
        t = np.linspace(0, 2 * np.pi, 4096, endpoint=False)
        if np.min(probe._radial(t)[0]) <= 0.05 * r0:
            raise InvalidShapeError("star radial function must stay positive")
    else:
        raise InvalidShapeError(f"unknown shape kind {kind!r}")
    shape = Shape(kind, params)
    if kind == "star":
        shape = Shape(kind, params, tuple(_region_centroid(shape)))
    return shape


def circle(radius: float = 1.0) -> Shape:
    return make_shape("circle", (radius,))


def ellipse(a: float, b: float) -> Shape:
    return make_shape("ellipse", (a, b))


def star(r0: float, modes: Sequence[tuple]) -> Shape:
    return make_shape("star", (r0, tuple(modes)))


def parse_shape(text: str) -> Shape:
    """Parse ``circle:1``, ``ellipse:2,1`` or ``star:1|3,0.1,0;2,0,0.05``."""
    try:
        kind, _, rest = text.strip().partition(":")
        kind = kind.strip().lower()
        if not rest:
            raise ValueError("missing parameters after ':'")
        if kind == "star":
            head, _, tail = rest.partition("|")
            modes = []
            for chunk in filter(None, tail.split(";")):
                k, c, s = chunk.split(",")
                modes.append((int(k), float(c), float(s)))
            return make_shape("star", (float(head), modes))
        values = [float(v) for v in rest.split(",")]
    except InvalidShapeError:
        raise
    except ValueError as exc:
        raise InvalidShapeError(f"malformed shape string {text!r}: {exc}") from None
    return make_shape(kind, values)


# ---------------------------------------------------------------------------
# Placements and discrete curves


@dataclass(frozen=True)
class Placement:
    """Body configuration ``q = (theta, h)`` at scale ``epsilon``."""

    theta: float = 0.0
    h: tuple = (0.0, 0.0)
    epsilon: float = 1.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        object.__setattr__(self, "h", (float(self.h[0]), float(self.h[1])))

    @property
    def q(self) -> np.ndarray:
        return np.array([self.theta, self.h[0], self.h[1]])

    @classmethod
    def from_q(cls, q, epsilon: float = 1.0) -> "Placement":
        return cls(float(q[0]), (float(q[1]), float(q[2])), epsilon)


@dataclass(frozen=True, eq=False)
class DiscreteCurve:
    """Nodes of a closed curve sampled uniformly in its parameter.

    ``d1`` and ``d2`` are the first and second derivatives with respect to
    the uniform parameter, ``weights = |d1| * 2 pi / N`` and ``curvature``
    is the signed curvature along the traversal direction.
    """

    nodes: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    orientation: str
    shape: Shape | None = None
    placement: Placement = Placement()

    @property
    def n(self) -> int:
        return self.nodes.shape[0]

    @property
    def speed(self) -> np.ndarray:
        return np.linalg.norm(self.d1, axis=1)

    @property
    def tangents(self) -> np.ndarray:
        return self.d1 / self.speed[:, None]

    @property
    def normals(self) -> np.ndarray:
        return perp(self.tangents)

    @property
    def weights(self) -> np.ndarray:
        return self.speed * (2 * np.pi / self.n)

    @property
    def curvature(self) -> np.ndarray:
        cr = self.d1[:, 0] * self.d2[:, 1] - self.d1[:, 1] * self.d2[:, 0]
        return cr / self.speed**3

    @property
    def spacing(self) -> float:
        return float(np.max(self.weights))

    @property
    def length(self) -> float:
        return float(np.sum(self.weights))


def discretize(shape: Shape, n: int, orientation: str = BODY) -> DiscreteCurve:
    if n < 8 or n % 2:
        raise ValueError("node count must be even and at least 8")
    if orientation not in (BODY, OUTER):
        raise ValueError(f"orientation must be {BODY!r} or {OUTER!r}")
    t = 2 * np.pi * np.arange(n) / n
    if orientation == BODY:
        x, d1, d2 = shape.evaluate(t)
    else:
        x, d1, d2 = shape.evaluate(-t)
        d1 = -d1
    return DiscreteCurve(x, d1, d2, orientation, shape)


def place(curve: DiscreteCurve, q: Placement) -> DiscreteCurve:
    """Apply ``x -> eps R(theta) x + h`` to a body curve."""
    if curve.orientation != BODY:
        raise ValueError("only body curves can be placed")
    r = rot(q.theta)
    e = q.epsilon
    h = np.asarray(q.h)
    old = curve.placement
    composed = Placement(
        old.theta + q.theta,
        tuple(e * (r @ np.asarray(old.h)) + h),
        old.epsilon * e,
    )
    return replace(
        curve,
        nodes=e * curve.nodes @ r.T + h,
        d1=e * curve.d1 @ r.T,
        d2=e * curve.d2 @ r.T,
        placement=composed,
    )


def rigid_fields(nodes: np.ndarray, h) -> np.ndarray:
    """The rigid velocity fields xi_j at ``nodes``: shape (3, N, 2)."""
    n = nodes.shape[0]
    xi = np.empty((3, n, 2))
    xi[0] = perp(nodes - np.asarray(h))
    xi[1] = [1.0, 0.0]
    xi[2] = [0.0, 1.0]
    return xi


def rigid_traces(curve: DiscreteCurve, h=None):
    """Normal traces ``K_j = xi_j . n`` (shape (3, N)) and the fields xi_j.

    ``h`` defaults to the body's own placement centre, which is what the
    body curve needs; the outer curve must pass the body centre explicitly.
    """
    if h is None:
        h = curve.placement.h
    xi = rigid_fields(curve.nodes, h)
    k = np.einsum("jnd,nd->jn", xi, curve.normals)
    return k, xi


def _refine(curve: DiscreteCurve, i: int, sub: int = 16) -> np.ndarray:
    """Points of ``curve`` between nodes i-1 and i+1 from its analytic shape."""
    if curve.shape is None:
        return curve.nodes[[i]]
    n = curve.n
    t = 2 * np.pi * (i + np.linspace(-1, 1, 2 * sub + 1)) / n
    if curve.orientation == OUTER:
        t = -t
    x = curve.shape.evaluate(t)[0]
    q = curve.placement
    return q.epsilon * x @ rot(q.theta).T + np.asarray(q.h)


def separation(body: DiscreteCurve, outer: DiscreteCurve, sq_dist=None) -> float:
    """Distance between the curves, negative when the body pokes out of Omega.

    The node-to-node minimum is refined once by subdividing the parameter
    interval around the closest pair on each curve.  ``sq_dist`` may carry
    the already computed matrix of squared node distances.
    """
    if sq_dist is None:
        sq_dist = np.sum((body.nodes[:, None, :] - outer.nodes[None, :, :]) ** 2, axis=2)
    i, j = np.unravel_index(np.argmin(sq_dist), sq_dist.shape)
    pb = _refine(body, i)
    po = _refine(outer, j)
    dist = float(np.min(np.linalg.norm(pb[:, None] - po[None], axis=2)))
    if not np.all(inside(outer, body.nodes)):
        return -dist
    return dist


def inside(curve: DiscreteCurve, points: np.ndarray) -> np.ndarray:
    """Winding-number test for points against a closed discrete curve."""
    pts = np.atleast_2d(points)
    rel = curve.nodes[None, :, :] - pts[:, None, :]
    ang = np.arctan2(rel[..., 1], rel[..., 0])
    dang = np.diff(np.concatenate([ang, ang[:, :1]], axis=1), axis=1)
    dang = (dang + np.pi) % (2 * np.pi) - np.pi
    return np.abs(dang.sum(axis=1)) > np.pi
