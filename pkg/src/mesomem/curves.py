"""Discrete closed planar curves, the mass ray map, and membrane configurations.

A PeriodicCurve stores n samples at uniform arclength s_i = i*L/n together
with tangent, inner-style normal and curvature from 4th-order periodic
finite differences.  The perp convention is fixed as (a, b)-perp = (-b, a);
for a counterclockwise convex curve the normal then points inward and the
curvature kappa = -gamma'' . nu is negative (integral of kappa over one
period is -2*pi).

The ray map psi(s, m) = gamma(s) + t(s, m) * theta(s) sends stacked mass m
on the ray through gamma(s) to a point in the plane; t is the closed-form
offset below.  Negative m parametrizes the opposite (head) side of the
curve.  A Configuration bundles (curve, theta, chi, mass); its sampled ray
images support an embedding check and pairwise overlap tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import CurveError, RayOverrunError, TransversalityError

__all__ = [
    "PeriodicCurve",
    "resample_arclength",
    "ray_offset",
    "ray_mass",
    "Configuration",
    "ray_map",
    "EmbeddingResult",
    "embedding_check",
    "save_curve",
    "load_curve",
    "save_configuration",
    "load_configuration",
]


def perp(v: np.ndarray) -> np.ndarray:
    """Quarter turn (a, b) -> (-b, a), rowwise."""
    out = np.empty_like(v)
    out[..., 0] = -v[..., 1]
    out[..., 1] = v[..., 0]
    return out


def _d1_periodic(values: np.ndarray, ds: float) -> np.ndarray:
    """4th-order periodic central first derivative along axis 0."""
    vp1 = np.roll(values, -1, axis=0)
    vp2 = np.roll(values, -2, axis=0)
    vm1 = np.roll(values, 1, axis=0)
    vm2 = np.roll(values, 2, axis=0)
    return (-vp2 + 8.0 * vp1 - 8.0 * vm1 + vm2) / (12.0 * ds)


def _d2_periodic(values: np.ndarray, ds: float) -> np.ndarray:
    """4th-order periodic central second derivative along axis 0."""
    vp1 = np.roll(values, -1, axis=0)
    vp2 = np.roll(values, -2, axis=0)
    vm1 = np.roll(values, 1, axis=0)
    vm2 = np.roll(values, 2, axis=0)
    return (-vp2 + 16.0 * vp1 - 30.0 * values + 16.0 * vm1 - vm2) / (12.0 * ds**2)


class PeriodicCurve:
    """Closed planar curve sampled uniformly in arclength.

    points[i] is the position at s_i = i * length / n.  Derived quantities
    (unit tangent, unit normal, signed curvature) are computed once at
    construction; instances are treated as immutable afterwards.
    """

    def __init__(self, points: np.ndarray, length: float):
        points = np.asarray(points, dtype=float)
        if points.ndim != 2 or points.shape[1] != 2 or points.shape[0] < 8:
            raise CurveError("need an (n, 2) array with n >= 8")
        if not np.all(np.isfinite(points)) or not (length > 0):
            raise CurveError("non-finite points or non-positive length")
        self.points = points
        self.length = float(length)
        self.n = points.shape[0]
        self.ds = self.length / self.n

        tangent = _d1_periodic(points, self.ds)
        speed = np.linalg.norm(tangent, axis=1)
        if np.max(np.abs(speed - 1.0)) > 1e-3:
            raise CurveError(
                "samples are not uniform in arclength "
                f"(max | |gamma'| - 1 | = {np.max(np.abs(speed - 1.0)):.3g})"
            )
        self.tangent = tangent
        nu = perp(tangent)
        self.normal = nu / np.linalg.norm(nu, axis=1)[:, None]
        self.second = _d2_periodic(points, self.ds)
        self.curvature = -np.sum(self.second * self.normal, axis=1)
        self._cache: dict[int, CubicSpline] = {}

    @property
    def s_nodes(self) -> np.ndarray:
        return np.arange(self.n) * self.ds

    def deriv(self, values: np.ndarray) -> np.ndarray:
        """Periodic 4th-order derivative of nodal data (scalars or rows)."""
        return _d1_periodic(np.asarray(values, dtype=float), self.ds)

    def interpolator(self, values: np.ndarray) -> CubicSpline:
        """Periodic cubic interpolant of nodal data over s in [0, L]."""
        v = np.asarray(values, dtype=float)
        x = np.append(self.s_nodes, self.length)
        y = np.concatenate([v, v[:1]], axis=0)
        return CubicSpline(x, y, axis=0, bc_type="periodic")

    def position(self, s) -> np.ndarray:
        key = id(self.points)
        if key not in self._cache:
            self._cache[key] = self.interpolator(self.points)
        return self._cache[key](np.mod(s, self.length))


def _spline_and_length(points: np.ndarray):
    """Periodic chord-length spline through a closed polyline plus arclength tables."""
    closed = np.vstack([points, points[:1]])
    seg = np.linalg.norm(np.diff(closed, axis=0), axis=1)
    if np.any(seg == 0.0):
        raise CurveError("repeated consecutive points in input polyline")
    t = np.concatenate([[0.0], np.cumsum(seg)])
    if t[-1] <= 0:
        raise CurveError("input polyline has zero length")
    cs = CubicSpline(t, closed, axis=0, bc_type="periodic")
    # Gauss-Legendre (8 nodes) per spline interval for the arclength table
    gl_x, gl_w = np.polynomial.legendre.leggauss(8)
    a, b = t[:-1], t[1:]
    mid, half = (a + b) / 2.0, (b - a) / 2.0
    tt = mid[:, None] + half[:, None] * gl_x[None, :]
    sp = np.linalg.norm(cs(tt.ravel(), 1).reshape(tt.shape + (2,)), axis=2)
    seg_len = half * np.sum(sp * gl_w[None, :], axis=1)
    s_knots = np.concatenate([[0.0], np.cumsum(seg_len)])
    return cs, t, s_knots


def _invert_arclength(cs, t_knots, s_knots, targets):
    """Parameter values t with arclength(t) = targets, three Newton polishes."""
    t = np.interp(targets, s_knots, t_knots)
    gl_x, gl_w = np.polynomial.legendre.leggauss(8)
    for _ in range(3):
        idx = np.clip(np.searchsorted(t_knots, t, side="right") - 1, 0, len(t_knots) - 2)
        a = t_knots[idx]
        mid, half = (a + t) / 2.0, (t - a) / 2.0
        tt = mid[:, None] + half[:, None] * gl_x[None, :]
        sp = np.linalg.norm(cs(tt.ravel(), 1).reshape(tt.shape + (2,)), axis=2)
        s_here = s_knots[idx] + half * np.sum(sp * gl_w[None, :], axis=1)
        ds_dt = np.linalg.norm(cs(t, 1), axis=1)
        t = t - (s_here - targets) / ds_dt
    return t


def _uniform_resample(points: np.ndarray, n: int) -> PeriodicCurve:
    P = np.asarray(points, dtype=float)
    if P.shape[0] >= 2 and np.allclose(P[0], P[-1]):
        P = P[:-1]
    if P.shape[0] < 8:
        raise CurveError("need at least 8 input points")
    length = 0.0
    for _ in range(12):
        cs, t_knots, s_knots = _spline_and_length(P if P.shape[0] != n else P)
        length = s_knots[-1]
        targets = np.arange(n) * (length / n)
        t = _invert_arclength(cs, t_knots, s_knots, targets)
        newP = cs(t)
        if P.shape[0] == n:
            move = float(np.max(np.linalg.norm(newP - P, axis=1)))
            P = newP
            if move < 1e-13 * max(1.0, length):
                break
        else:
            P = newP
    return PeriodicCurve(P, length)


def resample_arclength(source, n: int) -> PeriodicCurve:
    """Uniform-arclength closed curve from a polyline or a shape spec.

    source is either an (m, 2) array of points along a closed curve
    (m >= 8), or one of the strings "circle:R", "ellipse:a:b",
    "file:path".  Circles are generated analytically (uniform angle is
    uniform arclength); everything else goes through chord-length periodic
    cubic splines iterated to an arclength-uniform fixed point.
    """
    if isinstance(source, str):
        kind, _, rest = source.partition(":")
        if kind == "circle":
            R = float(rest)
            if R <= 0:
                raise CurveError("circle radius must be positive")
            s = 2.0 * np.pi * np.arange(n) / n
            pts = R * np.stack([np.cos(s), np.sin(s)], axis=1)
            return PeriodicCurve(pts, 2.0 * np.pi * R)
        if kind == "ellipse":
            a_str, _, b_str = rest.partition(":")
            a, b = float(a_str), float(b_str)
            if a <= 0 or b <= 0:
                raise CurveError("ellipse semi-axes must be positive")
            if a == b:
                return resample_arclength(f"circle:{a}", n)
            m = max(4096, 16 * n)
            phi = 2.0 * np.pi * np.arange(m) / m
            pts = np.stack([a * np.cos(phi), b * np.sin(phi)], axis=1)
            return _uniform_resample(pts, n)
        if kind == "file":
            return _uniform_resample(load_curve(rest).points, n)
        raise CurveError(f"unknown shape spec {source!r}")
    return _uniform_resample(np.asarray(source, dtype=float), n)


# ---------------------------------------------------------------------------
# Ray offset / mass coordinates
# ---------------------------------------------------------------------------

def ray_offset(A, B, m, eps):
    """Signed spatial offset along a ray for stacked mass m.

    A = nu.theta (> 0), B = theta'.theta-perp.  Closed form
    t = (A/B) * (1 - sqrt(1 - 2*B*eps*m/A^2)), evaluated in the
    cancellation-free form (A/B) * x / (1 + sqrt(1 - x)); for
    |B| < 1e-6 * A^2 / (eps * max(|m|, 1)) a cubic series in B is used so
    B = 0 is exact.  Negative m gives negative t (head side).

    Raises RayOverrunError when 1 - 2*B*eps*m/A^2 < 0 (the mass exceeds
    the focal capacity of the ray).
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    m_ = np.asarray(m, dtype=float)
    scalar = all(np.ndim(v) == 0 for v in (A, B, m_))
    A, B, m_ = np.broadcast_arrays(A, B, m_)

    if np.any(A <= 0):
        raise ValueError("ray alignment A = nu.theta must be positive")
    x = 2.0 * B * eps * m_ / A**2
    disc = 1.0 - x
    if np.any(disc < 0):
        bad = np.argwhere(disc < 0)
        raise RayOverrunError(
            f"mass exceeds focal capacity of the ray (first at index {tuple(bad[0])})"
        )

    em = eps * m_
    series = em / A + B * em**2 / (2.0 * A**3) + B**2 * em**3 / (2.0 * A**5)
    btol = 1e-6 * A**2 / (eps * np.maximum(np.abs(m_), 1.0))
    use_series = np.abs(B) < btol
    B_safe = np.where(use_series, 1.0, B)
    closed = (A / B_safe) * x / (1.0 + np.sqrt(disc))
    out = np.where(use_series, series, closed)
    return float(out) if scalar else out


def ray_mass(A, B, t, eps):
    """Stacked mass for a given ray offset: m = (A*t - B*t^2/2)/eps.

    Exact inverse of :func:`ray_offset` on its domain.
    """
    A = np.asarray(A, dtype=float)
    out = (A * t - np.asarray(B, dtype=float) * np.square(t) / 2.0) / eps
    if all(np.ndim(v) == 0 for v in (A, B, t)):
        return float(out)
    return out


# ---------------------------------------------------------------------------
# Configurations
# ---------------------------------------------------------------------------

class Configuration:
    """Membrane state on a single curve: Z = (curve, theta, chi, mass).

    theta is the unit ray direction per node with nu.theta > 0
    (transversality), chi the {0,1} phase per node, mass the nonnegative
    lipid mass stacked on each ray.  Phase purity per ray holds
    structurally: the per-phase mass fields are (1-chi)*mass and chi*mass.
    """

    def __init__(self, curve: PeriodicCurve, theta: np.ndarray,
                 chi: np.ndarray, mass: np.ndarray):
        theta = np.asarray(theta, dtype=float)
        chi = np.asarray(chi)
        mass = np.asarray(mass, dtype=float)
        n = curve.n
        if theta.shape != (n, 2) or chi.shape != (n,) or mass.shape != (n,):
            raise ValueError("field shapes do not match the curve sampling")
        norms = np.linalg.norm(theta, axis=1)
        if np.any(norms == 0) or np.max(np.abs(norms - 1.0)) > 1e-6:
            raise ValueError("theta must consist of unit vectors")
        theta = theta / norms[:, None]
        if not np.all((chi == 0) | (chi == 1)):
            raise ValueError("chi must be 0/1 valued")
        if np.any(mass < 0):
            raise ValueError("mass must be nonnegative")
        align = np.sum(curve.normal * theta, axis=1)
        if np.any(align <= 0):
            node = int(np.argmin(align))
            raise TransversalityError(node, float(align[node]))
        self.curve = curve
        self.theta = theta
        self.chi = chi.astype(np.int8)
        self.mass = mass
        self.align = align                      # nu . theta per node
        self.theta_prime = curve.deriv(theta)   # same stencil as the curve

    @property
    def turn_rate(self) -> np.ndarray:
        """B = theta' . theta-perp per node (ray rotation rate)."""
        return np.sum(self.theta_prime * perp(self.theta), axis=1)


def ray_map(Z: Configuration, s, m, eps):
    """Ray map psi(s, m) = gamma(s) + t(s, m) * theta(s) at scale eps.

    gamma, theta and theta' are interpolated periodically between nodes;
    ray-overrun errors from the offset propagate.
    """
    curve = Z.curve
    s_mod = np.mod(s, curve.length)
    gamma = curve.position(s_mod)
    theta = curve.interpolator(Z.theta)(s_mod)
    theta = theta / np.linalg.norm(theta, axis=-1, keepdims=True)
    tp = curve.interpolator(Z.theta_prime)(s_mod)
    tangent = curve.interpolator(curve.tangent)(s_mod)
    nu = perp(tangent / np.linalg.norm(tangent, axis=-1, keepdims=True))
    A = np.sum(nu * theta, axis=-1)
    B = np.sum(tp * perp(theta), axis=-1)
    t = ray_offset(A, B, m, eps)
    return gamma + np.asarray(t)[..., None] * theta


@dataclass
class EmbeddingResult:
    ok: bool
    reason: str | None = None          # "overlap" or "ray-overrun"
    cells: tuple | None = None         # witness cell indices (s-index, m-level)
    point: tuple | None = None         # a point in the offending region

    def __bool__(self) -> bool:
        return self.ok


def _mesh_points(Z: Configuration, eps: float, resolution: int):
    """Sampled ray-map points on an (s, m) grid; None signals a ray overrun."""
    n = Z.curve.n
    idx = np.unique((np.arange(resolution) * n) // resolution)
    K = resolution
    fractions = -1.0 + (2.0 * np.arange(K) + 1.0) / K
    A = Z.align[idx][:, None]
    B = Z.turn_rate[idx][:, None]
    M = Z.mass[idx][:, None]
    m = fractions[None, :] * M
    try:
        t = ray_offset(A, B, m, eps)
    except RayOverrunError:
        x = 2.0 * B * eps * m / A**2
        j, k = np.argwhere(1.0 - x < 0)[0]
        return None, (int(idx[j]), int(k))
    pts = Z.curve.points[idx][:, None, :] + t[..., None] * Z.theta[idx][:, None, :]
    return pts, None


def mesh_polygons(Z: Configuration, eps: float, resolution: int = 24):
    """Quadrilateral ray-map cells as shapely polygons, or an overrun witness."""
    from shapely.geometry import Polygon

    pts, overrun = _mesh_points(Z, eps, resolution)
    if pts is None:
        return None, overrun
    ns = pts.shape[0]
    polys, ids = [], []
    for j in range(ns):
        jn = (j + 1) % ns
        for k in range(pts.shape[1] - 1):
            quad = Polygon([pts[j, k], pts[jn, k], pts[jn, k + 1], pts[j, k + 1]])
            if quad.area > 0:
                polys.append(quad)
                ids.append((j, k))
    return (polys, ids), None


def embedding_check(Z: Configuration, eps: float, resolution: int = 24) -> EmbeddingResult:
    """Sampled sufficient embedding test of the ray map.

    Samples psi over an (s, m) grid, forms the induced quadrilateral mesh
    and intersects all non-adjacent cell pairs.  A ray overrun (mass beyond
    the focal point of a ray) also fails the check.  This is a desk-scale
    sampled test, not a proof; resolution is the knob.
    """
    if resolution < 16:
        raise ValueError("resolution must be at least 16")
    from shapely.strtree import STRtree

    built, overrun = mesh_polygons(Z, eps, resolution)
    if built is None:
        return EmbeddingResult(False, reason="ray-overrun", cells=(overrun,))
    polys, ids = built
    ns = len({j for j, _ in ids}) or 1
    tree = STRtree(polys)
    for a, poly in enumerate(polys):
        for b in tree.query(poly):
            b = int(b)
            if b <= a:
                continue
            ja, ka = ids[a]
            jb, kb = ids[b]
            dj = min(abs(ja - jb), ns - abs(ja - jb))
            if dj <= 1 and abs(ka - kb) <= 1:
                continue
            inter = poly.intersection(polys[b])
            if inter.area > 1e-12 * min(poly.area, polys[b].area):
                pt = inter.representative_point()
                return EmbeddingResult(False, reason="overlap",
                                       cells=(ids[a], ids[b]), point=(pt.x, pt.y))
    return EmbeddingResult(True)


# ---------------------------------------------------------------------------
# Curve / configuration I/O: header "n length", then rows.
# ---------------------------------------------------------------------------

def save_curve(path, curve: PeriodicCurve):
    with open(path, "w") as fh:
        fh.write(f"{curve.n} {curve.length:.17g}\n")
        for x, y in curve.points:
            fh.write(f"{x:.17g} {y:.17g}\n")


def load_curve(path) -> PeriodicCurve:
    with open(path) as fh:
        n_str, length_str = fh.readline().split()
        data = np.loadtxt(fh, dtype=float, max_rows=int(n_str))
    if data.shape != (int(n_str), 2):
        raise CurveError(f"curve file {path}: expected {n_str} rows of 'x y'")
    return PeriodicCurve(data, float(length_str))


def save_configuration(path, Z: Configuration):
    with open(path, "w") as fh:
        fh.write(f"{Z.curve.n} {Z.curve.length:.17g}\n")
        for i in range(Z.curve.n):
            x, y = Z.curve.points[i]
            tx, ty = Z.theta[i]
            fh.write(f"{x:.17g} {y:.17g} {tx:.17g} {ty:.17g} {int(Z.chi[i])} "
                     f"{Z.mass[i]:.17g}\n")


def load_configuration(path) -> Configuration:
    with open(path) as fh:
        n_str, length_str = fh.readline().split()
        data = np.loadtxt(fh, dtype=float, max_rows=int(n_str))
    n = int(n_str)
    if data.shape != (n, 6):
        raise CurveError(f"configuration file {path}: expected {n} rows of "
                         "'x y theta_x theta_y chi mass'")
    curve = PeriodicCurve(data[:, :2], float(length_str))
    return Configuration(curve, data[:, 2:4], data[:, 4].astype(np.int8), data[:, 5])
