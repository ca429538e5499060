"""NURBS patch geometry: the fixed map from [0,1]^2 to the physical domain.

A patch stores its control net and weights; evaluation returns points and
Jacobians of the map. Builders construct the benchmark geometries: the exact
rational disk (90-degree arcs with midpoint weight sqrt(2)/2), squares, and
multi-patch splits of both. The geometric map never changes during solution
refinement (fixed F0); knot insertion and degree elevation exist only to
derive solution bases and the rational-field variants.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .splines import (
    KnotVector,
    SplineError,
    elevate_degree_bezier,
    nurbs_basis_2d,
    refine_knots_matrix,
)

SQ2 = np.sqrt(2.0)


class SingularMapError(RuntimeError):
    """Geometric Jacobian is (numerically) singular at the requested point."""


@dataclass
class PatchGeometry:
    """Tensor-product NURBS surface patch parameterized on [0,1]^2."""

    knots_u: KnotVector
    knots_v: KnotVector
    control_points: np.ndarray  # (n_u, n_v, dim)
    weights: np.ndarray  # (n_u, n_v)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.control_points = np.asarray(self.control_points, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        nu, nv = self.knots_u.num_basis, self.knots_v.num_basis
        if self.control_points.shape[:2] != (nu, nv):
            raise SplineError(
                f"control net {self.control_points.shape[:2]} does not match "
                f"knot/degree arithmetic ({nu}, {nv})"
            )
        if self.weights.shape != (nu, nv):
            raise SplineError("weight grid does not match control net")
        if np.any(self.weights <= 0):
            raise SplineError("all weights must be positive")

    @property
    def degrees(self) -> tuple[int, int]:
        return (self.knots_u.degree, self.knots_v.degree)


@dataclass(frozen=True)
class GeomSample:
    """Physical point, 2x2 Jacobian d(x)/d(xi) and its determinant."""

    point: np.ndarray
    jacobian: np.ndarray
    jac_det: float


def map_point(patch: PatchGeometry, xi: float, eta: float) -> np.ndarray:
    """Physical coordinates of (xi, eta); valid at degenerate points too."""
    iu, iv, R, _, _ = nurbs_basis_2d(patch.knots_u, patch.knots_v, patch.weights, xi, eta)
    P = patch.control_points[iu : iu + R.shape[0], iv : iv + R.shape[1]]
    return np.einsum("ab,abk->k", R, P)


def map_geometry(patch: PatchGeometry, xi: float, eta: float) -> GeomSample:
    """Point, Jacobian and determinant of the patch map at (xi, eta)."""
    iu, iv, R, Ru, Rv = nurbs_basis_2d(patch.knots_u, patch.knots_v, patch.weights, xi, eta)
    P = patch.control_points[iu : iu + R.shape[0], iv : iv + R.shape[1]]
    point = np.einsum("ab,abk->k", R, P)
    jac = np.empty((2, 2))
    jac[:, 0] = np.einsum("ab,abk->k", Ru, P)[:2]
    jac[:, 1] = np.einsum("ab,abk->k", Rv, P)[:2]
    det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
    if abs(det) < 1e-14:
        raise SingularMapError(f"degenerate Jacobian at (xi, eta) = ({xi}, {eta})")
    return GeomSample(point=point, jacobian=jac, jac_det=float(det))


def geometry_samples(patch: PatchGeometry, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized map over an (n, 2) array of parametric points.

    Returns (points (n, dim), jacobians (n, 2, 2), dets (n,)). Results for a
    fixed point set are cached on the patch: the map is fixed, so repeated
    assemblies over the same cells reuse them.
    """
    key = pts.tobytes()
    hit = patch._cache.get(key)
    if hit is not None:
        return hit
    n = pts.shape[0]
    dim = patch.control_points.shape[2]
    points = np.empty((n, dim))
    jacs = np.empty((n, 2, 2))
    dets = np.empty(n)
    for k in range(n):
        s = map_geometry(patch, pts[k, 0], pts[k, 1])
        points[k] = s.point
        jacs[k] = s.jacobian
        dets[k] = s.jac_det
    patch._cache[key] = (points, jacs, dets)
    return points, jacs, dets


def _single_span_knots(degree: int) -> KnotVector:
    return KnotVector(np.array([0.0] * (degree + 1) + [1.0] * (degree + 1)), degree)


def unit_square_patch(side: float = 1.0, degree: int = 2,
                      origin=(0.0, 0.0), size=None) -> PatchGeometry:
    """Axis-aligned rectangle as a single-span patch with unit weights."""
    sx, sy = (side, side) if size is None else size
    kv = _single_span_knots(degree)
    g = np.linspace(0.0, 1.0, degree + 1)
    cp = np.zeros((degree + 1, degree + 1, 2))
    for i, u in enumerate(g):
        for j, v in enumerate(g):
            cp[i, j] = (origin[0] + sx * u, origin[1] + sy * v)
    return PatchGeometry(kv, kv, cp, np.ones((degree + 1, degree + 1)))


def disk_patch(radius: float = 1.0) -> PatchGeometry:
    """Exact unit disk as one biquadratic rational patch.

    The four edges of the parametric square are exact 90-degree arcs
    (interior control points at tangent intersections, weight sqrt(2)/2);
    the map is regular except at the four parametric corners.
    """
    a = radius * SQ2 / 2.0
    c = radius * SQ2
    s = SQ2 / 2.0
    cp = np.array(
        [
            [(-a, -a), (-c, 0.0), (-a, a)],
            [(0.0, -c), (0.0, 0.0), (0.0, c)],
            [(a, -a), (c, 0.0), (a, a)],
        ]
    )
    w = np.array([[1.0, s, 1.0], [s, 1.0, s], [1.0, s, 1.0]])
    kv = _single_span_knots(2)
    return PatchGeometry(kv, kv, cp, w)


def _arc_quarter(radius: float, theta0: float) -> tuple[np.ndarray, np.ndarray]:
    """Control points/weights of the arc from theta0 to theta0 + 90 degrees."""
    t0, t1 = theta0, theta0 + np.pi / 2
    p0 = radius * np.array([np.cos(t0), np.sin(t0)])
    p2 = radius * np.array([np.cos(t1), np.sin(t1)])
    tm = (t0 + t1) / 2
    p1 = (radius / np.cos(np.pi / 4)) * np.array([np.cos(tm), np.sin(tm)])
    return np.array([p0, p1, p2]), np.array([1.0, SQ2 / 2.0, 1.0])


def disk_five_patch(radius: float = 1.0) -> list[PatchGeometry]:
    """Disk as a central square plus four ring patches with exact arc edges.

    Interfaces share identical control points by construction.
    """
    kv = _single_span_knots(2)
    b = radius / 2.0  # half-side of the central square
    corners = np.array([[b, -b], [b, b], [-b, b], [-b, -b]])
    patches = [unit_square_patch(origin=(-b, -b), size=(2 * b, 2 * b), degree=2)]
    for k, th in enumerate([-np.pi / 4, np.pi / 4, 3 * np.pi / 4, 5 * np.pi / 4]):
        arc_pts, arc_w = _arc_quarter(radius, th)
        c0, c1 = corners[k], corners[(k + 1) % 4]
        inner_pts = np.array([c0, (c0 + c1) / 2, c1])
        inner_w = np.ones(3)
        cp = np.zeros((3, 3, 2))
        w = np.zeros((3, 3))
        # u runs along the interface (inner edge), v from inner edge to the arc.
        hw = np.stack([inner_w, (inner_w + arc_w) / 2, arc_w], axis=1)
        for i in range(3):
            cp[i, 0] = inner_pts[i]
            cp[i, 2] = arc_pts[i]
            # Interpolate in homogeneous coordinates so the radial edges stay straight.
            cp[i, 1] = (inner_w[i] * inner_pts[i] + arc_w[i] * arc_pts[i]) / (2 * hw[i, 1])
            w[i] = hw[i]
        patches.append(PatchGeometry(kv, kv, cp, w))
    return patches


def disk_four_patch(radius: float = 1.0) -> list[PatchGeometry]:
    """Disk as four quarter patches meeting at the center (collapsed edge)."""
    kv = _single_span_knots(2)
    patches = []
    for th in [0.0, np.pi / 2, np.pi, 3 * np.pi / 2]:
        arc_pts, arc_w = _arc_quarter(radius, th)
        cp = np.zeros((3, 3, 2))
        w = np.zeros((3, 3))
        for i in range(3):
            cp[i, 2] = arc_pts[i]
            cp[i, 0] = (0.0, 0.0)
            cp[i, 1] = arc_pts[i] / 2.0
            w[i] = (1.0, (1.0 + arc_w[i]) / 2, arc_w[i])
        patches.append(PatchGeometry(kv, kv, cp, w))
    return patches


def elevate_patch_degree(patch: PatchGeometry) -> PatchGeometry:
    """Degree-elevate a single-span rational patch by one in both directions."""
    for kv in (patch.knots_u, patch.knots_v):
        if kv.breakpoints.size != 2:
            raise SplineError("degree elevation implemented for single-span patches only")
    w = patch.weights
    hom = np.concatenate([patch.control_points * w[..., None], w[..., None]], axis=2)
    hom = elevate_degree_bezier(hom)
    hom = np.swapaxes(elevate_degree_bezier(np.swapaxes(hom, 0, 1)), 0, 1)
    new_w = hom[..., -1]
    new_cp = hom[..., :-1] / new_w[..., None]
    pu, pv = patch.degrees
    return PatchGeometry(
        _single_span_knots(pu + 1), _single_span_knots(pv + 1), new_cp, new_w
    )


def refine_patch(patch: PatchGeometry, new_u, new_v) -> PatchGeometry:
    """Insert knots into both directions (exact geometry preservation)."""
    w = patch.weights
    hom = np.concatenate([patch.control_points * w[..., None], w[..., None]], axis=2)
    ku, Au = refine_knots_matrix(patch.knots_u, new_u)
    kv, Av = refine_knots_matrix(patch.knots_v, new_v)
    hom = np.einsum("ia,ab...,jb->ij...", Au, hom, Av)
    new_w = hom[..., -1]
    new_cp = hom[..., :-1] / new_w[..., None]
    return PatchGeometry(ku, kv, new_cp, new_w)


def build_benchmark_geometry(name: str, **params) -> list[PatchGeometry]:
    """Benchmark geometries by name: disk, square, het_square.

    disk: radius (1.0), patches in {1, 4, 5}, degree in {2, 3} (degree 3 is
    the elevated single patch). square / het_square: side (1.0), patches n
    giving an n-by-n conforming grid of patches, degree (2).
    """
    if name == "disk":
        radius = params.get("radius", 1.0)
        npatch = params.get("patches", 1)
        degree = params.get("degree", 2)
        if npatch == 1:
            patch = disk_patch(radius)
            if degree == 3:
                patch = elevate_patch_degree(patch)
            elif degree != 2:
                raise ValueError(f"unsupported disk degree {degree}")
            return [patch]
        if degree != 2:
            raise ValueError("multi-patch disk is built at degree 2")
        if npatch == 4:
            return disk_four_patch(radius)
        if npatch == 5:
            return disk_five_patch(radius)
        raise ValueError(f"unsupported disk patch count {npatch}")
    if name in ("square", "het_square"):
        side = params.get("side", 1.0)
        npatch = params.get("patches", 1 if name == "square" else 2)
        degree = params.get("degree", 2)
        h = side / npatch
        out = []
        for j in range(npatch):
            for i in range(npatch):
                out.append(
                    unit_square_patch(origin=(i * h, j * h), size=(h, h), degree=degree)
                )
        return out
    raise ValueError(f"unknown benchmark geometry {name!r}")
