"""Analytic cover geometry: rays, vector Snell refraction, intersection with
perturbed spherical/planar surfaces, and the exact two-refraction traversal
used as ground truth by the simulator and as the oracle for the learned
per-ray surrogate.

All functions are pure and accept either a single ray ((3,) arrays) or a
batch ((N, 3) arrays).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput, NoConvergence, TotalInternalReflection

UNIT_TOL = 1e-9
MIN_HIT_DISTANCE = 1e-9
NEWTON_TOL = 1e-10
NEWTON_MAX_ITERS = 20

# traversal status codes
STATUS_OK = 0
STATUS_UNTOUCHED = 1
STATUS_TIR = 2
STATUS_ESCAPED = 3


def normalize(v, axis=-1):
    return v / np.linalg.norm(v, axis=axis, keepdims=True)


def orthonormal_frame(axis):
    """Two unit vectors spanning the plane perpendicular to ``axis``."""
    axis = np.asarray(axis, dtype=np.float64)
    helper = np.array([1.0, 0.0, 0.0])
    if abs(axis[0]) > 0.9:
        helper = np.array([0.0, 1.0, 0.0])
    e1 = np.cross(axis, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(axis, e1)
    return e1, e2


@dataclass(frozen=True)
class Ray:
    """World-frame ray with unit direction; origin in meters."""

    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=np.float64)
        d = np.asarray(self.direction, dtype=np.float64)
        if o.shape != d.shape or o.shape[-1] != 3:
            raise InvalidInput("ray origin/direction must be matching (..., 3) arrays")
        n = np.linalg.norm(d, axis=-1)
        if np.any(np.abs(n - 1.0) > UNIT_TOL):
            raise InvalidInput("ray direction must be unit length")
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d)

    @staticmethod
    def normalized(origin, direction) -> "Ray":
        d = np.asarray(direction, dtype=np.float64)
        return Ray(np.asarray(origin, dtype=np.float64), normalize(d))

    def at(self, t):
        t = np.asarray(t, dtype=np.float64)
        return self.origin + t[..., None] * self.direction if t.ndim else \
            self.origin + t * self.direction


@dataclass(frozen=True)
class SurfaceHit:
    """Nearest intersection: distance along the ray, hit point, and the unit
    surface normal oriented toward the incident medium."""

    distance: float
    point: np.ndarray
    normal: np.ndarray


@dataclass(frozen=True)
class Plane:
    point: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "point", np.asarray(self.point, dtype=np.float64))
        n = np.asarray(self.normal, dtype=np.float64)
        object.__setattr__(self, "normal", n / np.linalg.norm(n))


@dataclass(frozen=True)
class SphericalCap:
    center: np.ndarray
    radius: float
    axis: np.ndarray
    half_angle: float = np.pi / 2

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64))
        a = np.asarray(self.axis, dtype=np.float64)
        object.__setattr__(self, "axis", a / np.linalg.norm(a))
        if self.radius <= 0:
            raise InvalidInput("spherical cap radius must be positive")


class FigureHeightfield:
    """Smooth surface-figure perturbation: a uniform cubic B-spline over a
    square lateral domain.  Values stay within the convex hull of the control
    grid, so the construction-time amplitude bound is exact."""

    def __init__(self, control: np.ndarray):
        control = np.asarray(control, dtype=np.float64)
        if control.ndim != 2 or min(control.shape) < 4:
            raise InvalidInput("figure control grid must be at least 4x4")
        self.control = control

    @staticmethod
    def random(n: int, amplitude: float, seed: int) -> "FigureHeightfield":
        rng = np.random.default_rng(seed)
        return FigureHeightfield(rng.uniform(-amplitude, amplitude, (n, n)))

    @property
    def amplitude(self) -> float:
        return float(np.abs(self.control).max())

    @staticmethod
    def _basis(t):
        t2, t3 = t * t, t * t * t
        b = np.stack([(1 - t) ** 3, 3 * t3 - 6 * t2 + 4,
                      -3 * t3 + 3 * t2 + 3 * t + 1, t3], axis=-1) / 6.0
        db = np.stack([-3 * (1 - t) ** 2, 9 * t2 - 12 * t,
                       -9 * t2 + 6 * t + 3, 3 * t2], axis=-1) / 6.0
        return b, db

    def evaluate(self, u, v):
        """Height and its partials at lateral coordinates in [-1, 1]^2.

        Coordinates are clamped to the domain edge; the height is constant
        (zero derivative) beyond it.
        """
        nu, nv = self.control.shape
        gu = np.clip((np.asarray(u, dtype=np.float64) + 1) * 0.5 * (nu - 3), 0.0, nu - 3)
        gv = np.clip((np.asarray(v, dtype=np.float64) + 1) * 0.5 * (nv - 3), 0.0, nv - 3)
        active_u = (gu > 0) & (gu < nu - 3)
        active_v = (gv > 0) & (gv < nv - 3)
        iu = np.minimum(np.floor(gu).astype(np.int64), nu - 4)
        iv = np.minimum(np.floor(gv).astype(np.int64), nv - 4)
        bu, dbu = self._basis(gu - iu)
        bv, dbv = self._basis(gv - iv)
        patch = np.stack([
            np.stack([self.control[iu + a, iv + b] for b in range(4)], axis=-1)
            for a in range(4)
        ], axis=-2)  # (..., 4, 4)
        h = np.einsum("...a,...ab,...b->...", bu, patch, bv)
        dh_du = np.einsum("...a,...ab,...b->...", dbu, patch, bv) * (0.5 * (nu - 3)) * active_u
        dh_dv = np.einsum("...a,...ab,...b->...", bu, patch, dbv) * (0.5 * (nv - 3)) * active_v
        return h, dh_du, dh_dv


@dataclass(frozen=True)
class ParametricSurface:
    """Base plane or spherical cap plus an optional figure perturbation.

    The figure is applied along the base normal: for a cap the effective
    radius becomes radius + h(u, v); for a plane the surface is offset by
    h(u, v) along its normal.  Lateral (u, v) coordinates are displacements
    perpendicular to the base axis, scaled by ``figure_scale``.
    """

    base: object
    figure: FigureHeightfield | None = None
    figure_scale: float = 1.0
    frame: tuple = field(init=False, repr=False)

    def __post_init__(self):
        axis = self.base.normal if isinstance(self.base, Plane) else self.base.axis
        object.__setattr__(self, "frame", orthonormal_frame(axis))
        if self.figure is not None:
            limit = 0.1 * (self.base.radius if isinstance(self.base, SphericalCap)
                           else self.figure_scale)
            if self.figure.amplitude > limit + 1e-15:
                raise InvalidInput(
                    f"figure amplitude {self.figure.amplitude:g} exceeds the "
                    f"single-valued intersection bound {limit:g}")

    @property
    def axis_origin(self) -> np.ndarray:
        return self.base.point if isinstance(self.base, Plane) else self.base.center

    @property
    def axis(self) -> np.ndarray:
        return self.base.normal if isinstance(self.base, Plane) else self.base.axis

    def _lateral(self, points):
        q = points - self.axis_origin
        e1, e2 = self.frame
        return (q @ e1) / self.figure_scale, (q @ e2) / self.figure_scale

    def implicit(self, points):
        """Signed implicit value f and its gradient at world points.

        f = 0 on the surface; for caps f = |p - c| - (R + h); for planes
        f = <n0, p - p0> - h.
        """
        points = np.asarray(points, dtype=np.float64)
        e1, e2 = self.frame
        if self.figure is not None:
            u, v = self._lateral(points)
            h, dh_du, dh_dv = self.figure.evaluate(u, v)
            grad_h = (dh_du[..., None] * e1 + dh_dv[..., None] * e2) / self.figure_scale
        else:
            h = 0.0
            grad_h = 0.0
        if isinstance(self.base, Plane):
            f = (points - self.base.point) @ self.base.normal - h
            grad = np.broadcast_to(self.base.normal, points.shape) - grad_h
        else:
            q = points - self.base.center
            r = np.linalg.norm(q, axis=-1)
            f = r - (self.base.radius + h)
            grad = q / r[..., None] - grad_h
        return f, grad

    def contains_lateral(self, points):
        """Cap-membership test (always true for planes)."""
        if isinstance(self.base, Plane):
            return np.ones(np.asarray(points).shape[:-1], dtype=bool)
        q = normalize(np.asarray(points) - self.base.center)
        return q @ self.base.axis >= np.cos(self.base.half_angle) - 1e-12


def refract(incident, normal, eta, on_tir="raise", check=True):
    """Transmitted unit direction across an index interface (vector Snell).

    ``normal`` must face the incident medium (dot(normal, incident) < 0) and
    ``eta`` is the ratio of the incident to the transmitted refractive index.
    With ``on_tir='mask'`` returns ``(directions, tir_mask)`` instead of
    raising on total internal reflection; masked lanes are invalid.
    """
    r = np.asarray(incident, dtype=np.float64)
    n = np.asarray(normal, dtype=np.float64)
    if check:
        if eta <= 0 if np.isscalar(eta) else np.any(np.asarray(eta) <= 0):
            raise InvalidInput("eta must be positive")
        if np.any(np.abs(np.linalg.norm(r, axis=-1) - 1.0) > UNIT_TOL) or \
           np.any(np.abs(np.linalg.norm(n, axis=-1) - 1.0) > UNIT_TOL):
            raise InvalidInput("incident and normal must be unit vectors")
        if np.any(np.sum(n * r, axis=-1) >= 0):
            raise InvalidInput("normal must face the incident medium")
    c1 = -np.sum(n * r, axis=-1)
    s2 = eta * eta * (1.0 - c1 * c1)
    tir = s2 > 1.0
    c2 = np.sqrt(np.maximum(1.0 - s2, 0.0))
    t = eta * r + (eta * c1 - c2)[..., None] * n
    if on_tir == "mask":
        return t, tir
    if np.any(tir):
        raise TotalInternalReflection(mask=tir)
    return t


def _base_first_hit(origins, dirs, surface):
    """Distance to the nearest admissible base-surface hit; inf where none."""
    base = surface.base
    if isinstance(base, Plane):
        denom = dirs @ base.normal
        with np.errstate(divide="ignore", invalid="ignore"):
            t = ((base.point - origins) @ base.normal) / denom
        t = np.where(np.abs(denom) < 1e-14, np.inf, t)
        t = np.where(t > MIN_HIT_DISTANCE, t, np.inf)
        return t
    q = origins - base.center
    b = np.sum(dirs * q, axis=-1)
    c = np.sum(q * q, axis=-1) - base.radius**2
    disc = b * b - c
    root = np.sqrt(np.maximum(disc, 0.0))
    t = np.full(b.shape, np.inf)
    for cand in (-b - root, -b + root):
        cand = np.where((disc >= 0) & (cand > MIN_HIT_DISTANCE), cand, np.inf)
        pts = origins + cand[..., None] * dirs
        ok = np.isfinite(cand) & surface.contains_lateral(pts)
        t = np.where(ok & (cand < t), cand, t)
    return t


def _newton_refine(origins, dirs, surface, t0):
    """Newton refinement of hit distances for perturbed surfaces."""
    t = t0.copy()
    live = np.isfinite(t)
    if surface.figure is None:
        return t, live
    for _ in range(NEWTON_MAX_ITERS):
        if not np.any(live):
            break
        pts = origins + t[..., None] * dirs
        f, grad = surface.implicit(pts)
        done = np.abs(f) < NEWTON_TOL
        live = live & ~done
        if not np.any(live):
            break
        slope = np.sum(grad * dirs, axis=-1)
        step = np.where(live, f / np.where(np.abs(slope) < 1e-14, np.inf, slope), 0.0)
        t = t - step
    pts = origins + t[..., None] * dirs
    f, _ = surface.implicit(pts)
    converged = np.isfinite(t0) & (np.abs(f) < NEWTON_TOL)
    if np.any(np.isfinite(t0) & ~converged):
        raise NoConvergence("surface-figure Newton refinement did not converge")
    return t, converged


def intersect_batch(origins, dirs, surface):
    """Nearest hits of a ray batch with a surface.

    Returns (distances, points, normals, hit_mask); normals are unit and
    oriented toward the incident medium.  Missed lanes carry inf distance.
    """
    origins = np.atleast_2d(np.asarray(origins, dtype=np.float64))
    dirs = np.atleast_2d(np.asarray(dirs, dtype=np.float64))
    t0 = _base_first_hit(origins, dirs, surface)
    t, hit = _newton_refine(origins, dirs, surface, t0)
    hit = hit & (t > MIN_HIT_DISTANCE)
    t = np.where(hit, t, np.inf)
    pts = origins + np.where(hit, t, 1.0)[..., None] * dirs
    if np.any(hit):
        hit = hit & surface.contains_lateral(pts)
        t = np.where(hit, t, np.inf)
    with np.errstate(invalid="ignore", divide="ignore"):
        _, grad = surface.implicit(pts)
        normals = grad / np.linalg.norm(grad, axis=-1, keepdims=True)
    normals = np.where(hit[..., None], normals, [0.0, 0.0, 1.0])
    facing = np.sum(normals * dirs, axis=-1) < 0
    normals = np.where(facing[..., None], normals, -normals)
    return t, pts, normals, hit


def intersect(ray: Ray, surface: ParametricSurface):
    """Nearest hit of a single ray; None when the surface is missed."""
    t, pts, normals, hit = intersect_batch(ray.origin, ray.direction, surface)
    if not hit[0]:
        return None
    return SurfaceHit(distance=float(t[0]), point=pts[0], normal=normals[0])


@dataclass(frozen=True)
class CoverSurfacePair:
    """Ground-truth translucent cover: inner + outer refractive surfaces and
    the refractive indices on both sides."""

    inner: ParametricSurface
    outer: ParametricSurface
    index_inside: float
    index_outside: float = 1.0
    aperture_radius: float = np.inf

    def __post_init__(self):
        if self.index_inside <= 0 or self.index_outside <= 0:
            raise InvalidInput("refractive indices must be positive")

    def lateral_radius(self, points):
        """Distance of points from the inner surface's axis line."""
        q = np.asarray(points) - self.inner.axis_origin
        axial = q @ self.inner.axis
        return np.linalg.norm(q - axial[..., None] * self.inner.axis, axis=-1)


@dataclass(frozen=True)
class TraceResult:
    """Exit rays of a cover traversal plus per-ray status flags.

    ``path_depth`` is the distance traveled from the input origin to the
    exit origin along the (possibly bent) path; 0 for untouched rays, whose
    exit ray is the unchanged input ray.
    """

    origin: np.ndarray
    direction: np.ndarray
    status: np.ndarray
    path_depth: np.ndarray
    inner_distance: np.ndarray
    medium_length: np.ndarray

    @property
    def ok(self):
        return self.status == STATUS_OK

    @property
    def untouched(self):
        return self.status == STATUS_UNTOUCHED


def trace_through_cover(ray: Ray, cover: CoverSurfacePair) -> TraceResult:
    """Refract a ray batch through both cover surfaces.

    Rays that miss the inner surface or hit it outside the aperture pass
    through unchanged and are flagged ``STATUS_UNTOUCHED``; total internal
    reflection at either interface flags ``STATUS_TIR``.
    """
    single = ray.origin.ndim == 1
    origins = np.atleast_2d(ray.origin)
    dirs = np.atleast_2d(ray.direction)
    n = origins.shape[0]
    status = np.full(n, STATUS_OK, dtype=np.uint8)
    out_o = origins.copy()
    out_d = dirs.copy()
    depth = np.zeros(n)
    t1, p1, n1, hit1 = intersect_batch(origins, dirs, cover.inner)
    inside_aperture = hit1 & (cover.lateral_radius(p1) <= cover.aperture_radius)
    status[~inside_aperture] = STATUS_UNTOUCHED

    act = inside_aperture
    eta1 = cover.index_outside / cover.index_inside
    d1, tir1 = refract(dirs[act], n1[act], eta1, on_tir="mask", check=False)
    idx = np.flatnonzero(act)
    status[idx[tir1]] = STATUS_TIR
    idx = idx[~tir1]
    d1 = d1[~tir1]

    t2, p2, n2, hit2 = intersect_batch(p1[idx], d1, cover.outer)
    status[idx[~hit2]] = STATUS_ESCAPED
    idx = idx[hit2]
    d1, t2, p2, n2 = d1[hit2], t2[hit2], p2[hit2], n2[hit2]

    eta2 = cover.index_inside / cover.index_outside
    d2, tir2 = refract(d1, n2, eta2, on_tir="mask", check=False)
    status[idx[tir2]] = STATUS_TIR
    idx = idx[~tir2]
    out_o[idx] = p2[~tir2]
    out_d[idx] = d2[~tir2]

    inner_dist = np.where(inside_aperture, t1, np.inf)
    medium = np.full(n, np.nan)
    medium[idx] = t2[~tir2]
    depth[idx] = t1[idx] + t2[~tir2]

    if single:
        return TraceResult(out_o[0], out_d[0], status[0], depth[0],
                           inner_dist[0], medium[0])
    return TraceResult(out_o, out_d, status, depth, inner_dist, medium)
