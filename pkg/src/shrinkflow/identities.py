"""Catalogue of exact identities used as numerical self-checks.

Each check returns an :class:`IdentityResult`; the catalogue is consumed by
``shrinkflow verify`` and by the test-suite.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .fluid_quantities import (
    christoffel_boundary,
    christoffel_fd,
    christoffel_S,
    exterior_christoffel,
    exterior_constants,
    exterior_force,
    force_E,
    inertia,
    lamb_identity_check,
    skew_symmetry_residual,
)
from .geometry import Placement, Shape, i_eps, parse_shape
from .layer_potential import BoundaryModel

DEFAULT_BODY = "star:1|2,0.15,0;3,0.1,0.05"
DEFAULT_OUTER = "ellipse:1.2,0.9"


@dataclass(frozen=True)
class IdentityResult:
    name: str
    value: float
    tolerance: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value) and self.value < self.tolerance)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        out = f"{tag}  {self.name:<18} value={self.value:.3e}  tol={self.tolerance:.1e}"
        return out + (f"  {self.detail}" if self.detail else "")


@dataclass(frozen=True)
class VerifyConfig:
    body: Shape
    outer: Shape
    eps: float = 0.3
    n_body: int = 96
    n_outer: int = 192
    n_ext: int = 512
    samples: int = 10
    delta: float = 0.1
    seed: int = 12345
    tol_scale: float = 1.0

    @classmethod
    def default(cls, **kw):
        return cls(parse_shape(DEFAULT_BODY), parse_shape(DEFAULT_OUTER), **kw)


def random_configurations(model: BoundaryModel, eps: float, count: int, delta: float,
                          rng: np.random.Generator, max_tries: int = 10000):
    """Configurations with body-to-wall separation at least ``delta`` and random velocities."""
    box = model.outer.shape.max_radius
    out = []
    for _ in range(max_tries):
        q = np.array([rng.uniform(0, 2 * np.pi), *rng.uniform(-box, box, 2)])
        if model.separation(Placement.from_q(q, eps)) >= delta:
            out.append((q, rng.normal(size=3)))
            if len(out) == count:
                return out
    raise RuntimeError("could not sample enough admissible configurations")


# ---------------------------------------------------------------------------
# individual checks


def check_zeta_dual(cfg: VerifyConfig, ext) -> IdentityResult:
    return IdentityResult("zeta-dual", ext.zeta_discrepancy, 1e-8 * cfg.tol_scale,
                          f"zeta={np.round(ext.zeta, 10).tolist()}")


def check_m_dagger(cfg: VerifyConfig, ext) -> IdentityResult:
    diff = np.max(np.abs(ext.M_dagger - 0.5 * (ext.M_bar + ext.M_bar.T)))
    trace = abs(np.trace(ext.M_dagger))
    return IdentityResult("m-dagger", float(max(diff, trace)), 1e-10 * cfg.tol_scale)


def check_lamb(cfg: VerifyConfig, ext) -> IdentityResult:
    fields = ("psi", "phi1", "phi2", "phi3")
    worst = 0.0
    for a in fields:
        for b in fields:
            for j in (1, 2, 3):
                worst = max(worst, lamb_identity_check(ext, a, b, j)[0])
    return IdentityResult("lamb", worst, 1e-8 * cfg.tol_scale)


def _sampled(cfg: VerifyConfig):
    model = BoundaryModel(cfg.body, cfg.outer, cfg.n_body, cfg.n_outer)
    rng = np.random.default_rng(cfg.seed)
    return model, random_configurations(model, cfg.eps, cfg.samples, cfg.delta, rng)


def check_force_potential(cfg: VerifyConfig, model, samples) -> IdentityResult:
    """E equals half the gradient of C (central differences)."""
    worst = 0.0
    h = 1e-4
    for q, _ in samples:
        sol = model.solve(Placement.from_q(q, cfg.eps))
        E = force_E(sol.dpsi_dn, sol.k_body, sol.body.weights)
        dc = np.array([(model.circulation_constant(Placement.from_q(q + h * e, cfg.eps))
                        - model.circulation_constant(Placement.from_q(q - h * e, cfg.eps)))
                       / (2 * h) for e in np.eye(3)])
        worst = max(worst, float(np.max(np.abs(E - 0.5 * dc))))
    return IdentityResult("force-potential", worst, 1e-5 * cfg.tol_scale)


def check_christoffel(cfg: VerifyConfig, model, samples) -> list[IdentityResult]:
    split_err, skew = 0.0, 0.0
    for q, p in samples:
        sol = model.solve(Placement.from_q(q, cfg.eps))
        ma = inertia(sol, 0.0, 0.0).M_a
        split = christoffel_S(p, ma) + christoffel_boundary(p, sol.dphi_dtau_outer,
                                                            sol.k_outer, sol.outer.weights)
        fd, dm = christoffel_fd(model, q, p, cfg.eps)
        split_err = max(split_err, float(np.linalg.norm(fd - split) / np.linalg.norm(fd)))
        skew = max(skew, skew_symmetry_residual(dm, p))
    return [IdentityResult("christoffel-split", split_err, 1e-4 * cfg.tol_scale),
            IdentityResult("skew-symmetry", skew, 1e-5 * cfg.tol_scale)]


def check_scalings(cfg: VerifyConfig, ext) -> list[IdentityResult]:
    rng = np.random.default_rng(cfg.seed + 1)
    lam = 0.37
    ext_l = exterior_constants(cfg.body.scaled(lam), cfg.n_ext)
    theta = rng.uniform(0, 2 * np.pi)
    il = i_eps(lam)
    mass = np.max(np.abs(ext_l.M_a_theta(theta) - lam**2 * il @ ext.M_a_theta(theta) @ il))
    mass /= max(1.0, np.max(np.abs(ext_l.M_a)))
    chris, force = 0.0, 0.0
    for _ in range(5):
        p = rng.normal(size=3)
        g = exterior_christoffel(theta, p, ext_l)
        chris = max(chris, float(np.max(np.abs(g - lam * il @ exterior_christoffel(
            theta, il @ p, ext)))))
        f = exterior_force(theta, p, ext_l.zeta, 1.3)
        force = max(force, float(np.max(np.abs(
            f - il @ exterior_force(theta, il @ p, ext.zeta, 1.3)))))
    return [IdentityResult("scaling-mass", float(mass), 1e-9 * cfg.tol_scale),
            IdentityResult("scaling-christoffel", chris, 1e-9 * cfg.tol_scale),
            IdentityResult("scaling-force", force, 1e-9 * cfg.tol_scale)]


@dataclass(frozen=True)
class Identity:
    name: str
    description: str
    group: str


CATALOG = (
    Identity("zeta-dual", "conformal centre: density moment vs far-field contour integral",
             "exterior"),
    Identity("m-dagger", "traceless symmetric part of the rotated added mass equals the "
             "symmetrised conjugate moment matrix", "exterior"),
    Identity("lamb", "boundary identity int (u.v) K_j = int xi_j.((u.n) v + (v.n) u) for "
             "tangent-free rigid and circulation fields", "exterior"),
    Identity("force-potential", "E(q) = DC(q)/2 by central differences", "bounded"),
    Identity("christoffel-split", "FD Christoffel contraction = rotation part + outer "
             "boundary part", "bounded"),
    Identity("skew-symmetry", "DM.p/2 - S(p) is skew-symmetric", "bounded"),
    Identity("scaling-mass", "plane added mass of a scaled body = lam^2 I M I", "exterior"),
    Identity("scaling-christoffel", "plane Christoffel term of a scaled body = lam I G(I p)",
             "exterior"),
    Identity("scaling-force", "plane force of a scaled body = I F(I p)", "exterior"),
)


def run_all(cfg: VerifyConfig, only: Callable[[str], bool] | None = None
            ) -> list[IdentityResult]:
    keep = only or (lambda name: True)
    ext = exterior_constants(cfg.body, cfg.n_ext)
    results = []
    if keep("zeta-dual"):
        results.append(check_zeta_dual(cfg, ext))
    if keep("m-dagger"):
        results.append(check_m_dagger(cfg, ext))
    if keep("lamb"):
        results.append(check_lamb(cfg, ext))
    if any(keep(n) for n in ("force-potential", "christoffel-split", "skew-symmetry")):
        model, samples = _sampled(cfg)
        if keep("force-potential"):
            results.append(check_force_potential(cfg, model, samples))
        if keep("christoffel-split") or keep("skew-symmetry"):
            results += [r for r in check_christoffel(cfg, model, samples) if keep(r.name)]
    results += [r for r in check_scalings(cfg, ext) if keep(r.name)]
    return results


__all__ = ["CATALOG", "IdentityResult", "VerifyConfig", "run_all"]
