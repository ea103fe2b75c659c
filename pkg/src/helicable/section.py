"""Cross-section of twisted round conductors at z = 0.

A conductor of radius ``r_c`` swept along the helix

    gamma(t) = (r cos(a t + phase), r sin(a t + phase), b t)

is the union of balls centred on the helix. Its trace in the plane z = 0 is
bounded by the envelope of the circles ``g(t, x, y) = 0`` with

    g(t, x, y) = (x - gx)^2 + (y - gy)^2 + (b t)^2 - r_c^2,

i.e. the points that also satisfy ``dg/dt = 0``. For fixed ``t`` that second
condition is the straight line ``(p - gamma) . gamma' = b^2 t``, so every
envelope point is a circle/line intersection with a closed form.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import HelixParams, MaterialSpec


class GeometryError(ValueError):
    """Raised for cross-sections that cannot be meshed."""


@dataclass(frozen=True)
class LayerSpec:
    radius: float
    count: int
    conductor_radius: float
    phase_offset: float = 0.0

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("layer radius must be >= 0")
        if self.count < 1:
            raise ValueError("layer needs at least one conductor")
        if not self.conductor_radius > 0:
            raise ValueError("conductor radius must be positive")
        if self.radius == 0 and self.count != 1:
            raise ValueError("a layer at radius 0 holds exactly one conductor")

    def phases(self) -> np.ndarray:
        return self.phase_offset + 2 * np.pi * np.arange(self.count) / self.count


@dataclass(frozen=True)
class CablePlan:
    helix: HelixParams
    layers: tuple[LayerSpec, ...]
    shield_radius: float
    materials: MaterialSpec = field(default_factory=MaterialSpec)

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ValueError("cable plan has no layers")
        reach = max(l.radius + l.conductor_radius for l in self.layers)
        if not self.shield_radius > reach:
            raise ValueError(
                f"shield radius {self.shield_radius} does not clear conductors (reach {reach})"
            )

    @property
    def n_conductors(self) -> int:
        return sum(l.count for l in self.layers)

    def conductor_radii(self) -> np.ndarray:
        """Layer radius of every conductor, in conductor-id order."""
        return np.concatenate([np.full(l.count, l.radius) for l in self.layers])


@dataclass(frozen=True)
class EnvelopePolygon:
    points: np.ndarray  # (n, 2), counter-clockwise, not repeated at the end
    conductor_id: int
    layer_id: int

    @property
    def area(self) -> float:
        return polygon_area(self.points)

    def segments(self) -> np.ndarray:
        return np.stack([self.points, np.roll(self.points, -1, axis=0)], axis=1)


@dataclass(frozen=True)
class SymmetryCell:
    conductors: list[EnvelopePolygon]
    shield: np.ndarray  # (m, 2) counter-clockwise
    shield_radius: float


def polygon_area(pts) -> float:
    x, y = np.asarray(pts).T
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _degenerate(layer: LayerSpec, h: HelixParams) -> bool:
    return layer.radius == 0.0 or h.alpha == 0.0


def _t_max(layer: LayerSpec, h: HelixParams) -> float:
    """Largest |t| whose circle still touches its tangency line."""
    if _degenerate(layer, h):
        return 0.0
    b = h.beta
    speed = layer.radius * h.alpha  # |gamma'| in the plane
    return layer.conductor_radius / np.sqrt(b * b + (b * b / speed) ** 2)


def _branches(layer: LayerSpec, h: HelixParams, t, phase: float = 0.0):
    """Outer and inner envelope points for an array of parameters ``t``.

    Returns ``(outer, inner, ok)`` where ``ok`` flags parameters with a real
    intersection.
    """
    t = np.asarray(t, dtype=float)
    a = h.handedness * h.alpha
    b = h.beta
    r, rc = layer.radius, layer.conductor_radius
    th = a * t + phase
    radial = np.stack([np.cos(th), np.sin(th)], axis=-1)
    centre = r * radial
    if _degenerate(layer, h):
        # dg/dt = 2 b^2 t, only t = 0 touches; report the radial pair there
        ok = t == 0.0
        foot = centre
        half = np.where(ok, rc, np.nan)
    else:
        tangent = r * a * np.stack([-np.sin(th), np.cos(th)], axis=-1)
        speed2 = (r * a) ** 2
        foot = centre + (b * b * t / speed2)[..., None] * tangent
        half2 = rc * rc - (b * t) ** 2 - (b * b * t) ** 2 / speed2
        ok = half2 >= -1e-15 * rc * rc
        half = np.sqrt(np.clip(half2, 0.0, None))
        half = np.where(ok, half, np.nan)
    outer = foot + half[..., None] * radial
    inner = foot - half[..., None] * radial
    return outer, inner, ok


def envelope_points(layer: LayerSpec, h: HelixParams, t: float, phase: float = 0.0) -> np.ndarray:
    """Envelope points generated by the single parameter ``t``.

    Returns an array of shape (0, 2), (1, 2) or (2, 2). For an untwisted or
    centred conductor only ``t = 0`` contributes and the pair on the radial
    line through the conductor centre is returned.
    """
    outer, inner, ok = _branches(layer, h, np.array([t]), phase)
    if not ok[0]:
        return np.empty((0, 2))
    if np.allclose(outer[0], inner[0], rtol=0, atol=1e-15):
        return outer[:1]
    return np.vstack([outer, inner])


def envelope_g(layer: LayerSpec, h: HelixParams, t, xy, phase: float = 0.0):
    """``g(t, x, y)`` and ``dg/dt`` for checking envelope points."""
    t = np.asarray(t, dtype=float)
    xy = np.asarray(xy, dtype=float)
    a = h.handedness * h.alpha
    r = layer.radius
    th = a * t + phase
    gx, gy = r * np.cos(th), r * np.sin(th)
    dgx, dgy = -r * a * np.sin(th), r * a * np.cos(th)
    dx, dy = xy[..., 0] - gx, xy[..., 1] - gy
    g = dx * dx + dy * dy + (h.beta * t) ** 2 - layer.conductor_radius**2
    dg = -2 * (dx * dgx + dy * dgy) + 2 * h.beta**2 * t
    return g, dg


def _circle(centre, radius, n) -> np.ndarray:
    ang = 2 * np.pi * np.arange(n) / n
    return np.asarray(centre) + radius * np.stack([np.cos(ang), np.sin(ang)], axis=-1)


def _dedupe(pts: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    keep = np.ones(len(pts), dtype=bool)
    d = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    keep[1:] = d >= tol
    pts = pts[keep]
    if len(pts) > 1 and np.linalg.norm(pts[0] - pts[-1]) < tol:
        pts = pts[:-1]
    return pts


def envelope_polygon(
    layer: LayerSpec,
    h: HelixParams,
    samples: int = 256,
    phase: float = 0.0,
    conductor_id: int = 0,
    layer_id: int = 0,
) -> EnvelopePolygon:
    """Closed counter-clockwise polygon approximating one conductor's trace.

    ``t`` runs over the parameters with a real circle/line intersection,
    clustered like Chebyshev nodes towards the two tips where the branches
    meet. The outer branch is traversed forward, the inner branch backward.
    """
    if samples < 16:
        raise ValueError("need at least 16 samples per conductor")
    if _degenerate(layer, h):
        pts = _circle(layer.radius * np.array([np.cos(phase), np.sin(phase)]),
                      layer.conductor_radius, samples)
        return EnvelopePolygon(pts, conductor_id, layer_id)

    m = samples // 2 + 1
    t = -_t_max(layer, h) * np.cos(np.pi * np.arange(m) / (m - 1))
    outer, inner, ok = _branches(layer, h, t, phase)
    if not ok.all():  # pragma: no cover - t lies inside the support by construction
        raise GeometryError("envelope sampling left the admissible parameter range")
    pts = _dedupe(np.vstack([outer, inner[::-1]]))
    if polygon_area(pts) < 0:
        pts = pts[::-1]
    if not is_simple(pts):
        raise GeometryError(
            f"envelope of layer {layer_id} self-intersects; twist too strong for r_c={layer.conductor_radius}"
        )
    return EnvelopePolygon(pts, conductor_id, layer_id)


def _rotate(pts: np.ndarray, ang: float) -> np.ndarray:
    c, s = np.cos(ang), np.sin(ang)
    return pts @ np.array([[c, s], [-s, c]])


def _segments_intersect(A, B, C, D) -> np.ndarray:
    """Proper or touching intersection of segments AB and CD (broadcast)."""

    def orient(P, Q, R):
        return (Q[..., 0] - P[..., 0]) * (R[..., 1] - P[..., 1]) - (Q[..., 1] - P[..., 1]) * (R[..., 0] - P[..., 0])

    d1 = orient(C, D, A)
    d2 = orient(C, D, B)
    d3 = orient(A, B, C)
    d4 = orient(A, B, D)
    return (d1 * d2 <= 0) & (d3 * d4 <= 0)


def is_simple(pts: np.ndarray) -> bool:
    """Check that a closed polygon has no self-intersections."""
    n = len(pts)
    P, Q = pts, np.roll(pts, -1, axis=0)
    i, j = np.triu_indices(n, k=2)
    adjacent = (i == 0) & (j == n - 1)
    i, j = i[~adjacent], j[~adjacent]
    return not _segments_intersect(P[i], Q[i], P[j], Q[j]).any()


def polygons_intersect(a: np.ndarray, b: np.ndarray) -> bool:
    lo_a, hi_a = a.min(0), a.max(0)
    lo_b, hi_b = b.min(0), b.max(0)
    if (hi_a < lo_b).any() or (hi_b < lo_a).any():
        return False
    A0, A1 = a, np.roll(a, -1, axis=0)
    B0, B1 = b, np.roll(b, -1, axis=0)
    if _segments_intersect(A0[:, None], A1[:, None], B0[None], B1[None]).any():
        return True
    # no crossing: either disjoint or nested
    return bool(point_in_polygon(a[:1], b)[0] or point_in_polygon(b[:1], a)[0])


def point_in_polygon(pts, poly) -> np.ndarray:
    """Even-odd rule; vectorised over ``pts``."""
    pts = np.atleast_2d(pts)
    x, y = pts[:, 0:1], pts[:, 1:2]
    x0, y0 = poly[:, 0], poly[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    cond = (y0 > y) != (y1 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xc = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
    return ((cond & (x < xc)).sum(axis=1) % 2).astype(bool)


def samples_for_spacing(plan: CablePlan, spacing: float, minimum: int = 32) -> int:
    """Vertex count giving roughly ``spacing`` between envelope vertices."""
    worst = 0.0
    for layer in plan.layers:
        stretch = np.sqrt(1 + (plan.helix.alpha * layer.radius / plan.helix.beta) ** 2)
        worst = max(worst, np.pi * layer.conductor_radius * (1 + stretch))
    n = int(np.ceil(worst / spacing))
    return max(minimum, n + n % 2)


def build_symmetry_cell(plan: CablePlan, samples: int = 256, shield_samples: int | None = None) -> SymmetryCell:
    """All conductor traces plus the shield circle, checked for overlaps."""
    polys: list[EnvelopePolygon] = []
    cid = 0
    for lid, layer in enumerate(plan.layers):
        base = envelope_polygon(layer, plan.helix, samples, 0.0, layer_id=lid)
        for ph in layer.phases():
            polys.append(EnvelopePolygon(_rotate(base.points, ph), cid, lid))
            cid += 1
    if shield_samples is None:
        perim = min(polygon_perimeter(p.points) / len(p.points) for p in polys)
        shield_samples = max(64, int(np.ceil(2 * np.pi * plan.shield_radius / max(perim, 1e-12))))
        shield_samples = min(shield_samples, 4 * samples)
    shield = _circle((0.0, 0.0), plan.shield_radius, shield_samples)
    check_cell(polys, shield)
    return SymmetryCell(polys, shield, plan.shield_radius)


def polygon_perimeter(pts) -> float:
    return float(np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1).sum())


def check_cell(polys: list[EnvelopePolygon], shield: np.ndarray) -> None:
    for p in polys:
        if not point_in_polygon(p.points, shield).all() or not _strictly_inside(p.points, shield):
            raise GeometryError(f"conductor {p.conductor_id} is not inside the shield")
    for i in range(len(polys)):
        for j in range(i + 1, len(polys)):
            if polygons_intersect(polys[i].points, polys[j].points):
                raise GeometryError(f"conductors {polys[i].conductor_id} and {polys[j].conductor_id} overlap")


def _strictly_inside(pts, shield) -> bool:
    A0, A1 = pts, np.roll(pts, -1, axis=0)
    B0, B1 = shield, np.roll(shield, -1, axis=0)
    return not _segments_intersect(A0[:, None], A1[:, None], B0[None], B1[None]).any()


def write_section_csv(cell: SymmetryCell, path) -> None:
    """Columns: conductor_id, vertex_index, x, y. The shield uses id -1."""
    with open(path, "w") as f:
        f.write("conductor_id,vertex_index,x,y\n")
        for p in cell.conductors:
            for k, (x, y) in enumerate(p.points):
                f.write(f"{p.conductor_id},{k},{x:.17g},{y:.17g}\n")
        for k, (x, y) in enumerate(cell.shield):
            f.write(f"-1,{k},{x:.17g},{y:.17g}\n")


def read_section_csv(path) -> SymmetryCell:
    data = np.genfromtxt(path, delimiter=",", names=True, dtype=None, encoding="ascii")
    cid = np.atleast_1d(data["conductor_id"]).astype(int)
    idx = np.atleast_1d(data["vertex_index"]).astype(int)
    xy = np.stack([np.atleast_1d(data["x"]), np.atleast_1d(data["y"])], axis=1).astype(float)
    polys = []
    shield = None
    for c in np.unique(cid):
        sel = cid == c
        order = np.argsort(idx[sel], kind="stable")
        pts = xy[sel][order]
        if c < 0:
            shield = pts
        else:
            polys.append(EnvelopePolygon(pts, int(c), -1))
    if shield is None:
        raise GeometryError(f"{path}: no shield polygon (conductor_id -1)")
    radius = float(np.linalg.norm(shield, axis=1).max())
    return SymmetryCell(polys, shield, radius)
