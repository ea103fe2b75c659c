"""Triangle mesh of the symmetry cell, its validator and MSH 2.2 I/O."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import TextIO

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

INSULATOR = -1

# local edge k of a triangle runs from local node LOCAL_EDGES[k][0] to [k][1]
LOCAL_EDGES = np.array([[0, 1], [1, 2], [2, 0]])


class MeshError(ValueError):
    """Base class for mesh parse and validation failures."""

    def __init__(self, msg: str, lineno: int | None = None):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {msg}" if lineno is not None else msg)


class MshVersionError(MeshError):
    pass


class UnknownPhysicalNameError(MeshError):
    pass


class DanglingNodeError(MeshError):
    pass


class NonzeroZError(MeshError):
    pass


class NonConformingMeshError(MeshError):
    pass


class MeshSyntaxError(MeshError):
    pass


@dataclass(frozen=True, eq=False)
class Mesh2D:
    """Triangulated symmetry cell.

    ``tri_region[t]`` is the conductor index (>= 0) or ``INSULATOR``.
    ``outer_edges`` lists node pairs on the shield. Node and element tags are
    kept only so MSH output can reuse the input numbering.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    tri_region: np.ndarray
    outer_edges: np.ndarray
    node_tags: np.ndarray | None = None

    def __post_init__(self):
        nodes = np.ascontiguousarray(self.nodes, dtype=float)
        tris = np.ascontiguousarray(self.triangles, dtype=np.int64)
        reg = np.ascontiguousarray(self.tri_region, dtype=np.int64)
        outer = np.ascontiguousarray(self.outer_edges, dtype=np.int64).reshape(-1, 2)
        tags = (np.arange(1, len(nodes) + 1) if self.node_tags is None
                else np.ascontiguousarray(self.node_tags, dtype=np.int64))
        for name, arr in (("nodes", nodes), ("triangles", tris), ("tri_region", reg),
                          ("outer_edges", outer), ("node_tags", tags)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_conductors(self) -> int:
        return int(self.tri_region.max()) + 1 if (self.tri_region >= 0).any() else 0

    @cached_property
    def _edge_data(self):
        local = self.triangles[:, LOCAL_EDGES]  # (T, 3, 2)
        a, b = local[..., 0].ravel(), local[..., 1].ravel()
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        key = lo * self.n_nodes + hi
        uniq, inv = np.unique(key, return_inverse=True)
        edges = np.stack([uniq // self.n_nodes, uniq % self.n_nodes], axis=1)
        tri_edges = inv.reshape(-1, 3)
        signs = np.where(a < b, 1, -1).reshape(-1, 3)
        return edges, tri_edges, signs

    @property
    def edges(self) -> np.ndarray:
        """Unique edges ``(min node, max node)`` sorted lexicographically."""
        return self._edge_data[0]

    @property
    def tri_edges(self) -> np.ndarray:
        """Global edge index of each local edge, shape (T, 3)."""
        return self._edge_data[1]

    @property
    def tri_edge_signs(self) -> np.ndarray:
        """+1 where the local edge runs along the global edge orientation."""
        return self._edge_data[2]

    @cached_property
    def edge_triangles(self) -> np.ndarray:
        """The (up to) two triangles on each edge, -1 padded, shape (E, 2)."""
        E = len(self.edges)
        out = np.full((E, 2), -1, dtype=np.int64)
        flat = self.tri_edges.ravel()
        owner = np.repeat(np.arange(self.n_triangles), 3)
        order = np.argsort(flat, kind="stable")
        flat, owner = flat[order], owner[order]
        first = np.ones(len(flat), dtype=bool)
        first[1:] = flat[1:] != flat[:-1]
        out[flat[first], 0] = owner[first]
        out[flat[~first], 1] = owner[~first]
        return out

    @cached_property
    def neighbors(self) -> np.ndarray:
        """Triangle across each local edge, -1 on the boundary, shape (T, 3)."""
        et = self.edge_triangles[self.tri_edges]  # (T, 3, 2)
        me = np.arange(self.n_triangles)[:, None]
        return np.where(et[..., 0] == me, et[..., 1], et[..., 0])

    @cached_property
    def signed_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def edge_regions(self) -> np.ndarray:
        """Region of the triangles on each side of every edge, (E, 2), -2 for none."""
        et = self.edge_triangles
        return np.where(et >= 0, self.tri_region[np.maximum(et, 0)], -2)

    def conductor_nodes_mask(self) -> np.ndarray:
        m = np.zeros(self.n_nodes, dtype=bool)
        m[self.triangles[self.tri_region >= 0].ravel()] = True
        return m

    def insulator_nodes_mask(self) -> np.ndarray:
        m = np.zeros(self.n_nodes, dtype=bool)
        m[self.triangles[self.tri_region == INSULATOR].ravel()] = True
        return m


def _oriented(nodes, tris):
    p = nodes[tris]
    d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    area = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    tris = tris.copy()
    flip = area < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    return tris


def make_mesh(nodes, triangles, tri_region, outer_edges=None, node_tags=None, validate=True) -> Mesh2D:
    """Build a mesh, orienting triangles counter-clockwise.

    When ``outer_edges`` is omitted the mesh boundary is used.
    """
    nodes = np.asarray(nodes, dtype=float)
    tris = _oriented(nodes, np.asarray(triangles, dtype=np.int64))
    if outer_edges is None:
        tmp = Mesh2D(nodes, tris, tri_region, np.empty((0, 2)), node_tags)
        bnd = tmp.edge_triangles[:, 1] < 0
        outer_edges = tmp.edges[bnd]
    m = Mesh2D(nodes, tris, tri_region, outer_edges, node_tags)
    if validate:
        validate_mesh(m)
    return m


def _chain_loops(directed: np.ndarray) -> list[np.ndarray]:
    """Split directed edges (a -> b) into closed vertex cycles; None if not manifold."""
    nxt: dict[int, int] = {}
    for k, (a, b) in enumerate(directed):
        if a in nxt:
            return None
        nxt[int(a)] = k
    used = np.zeros(len(directed), dtype=bool)
    loops = []
    for start in range(len(directed)):
        if used[start]:
            continue
        cycle = []
        k = start
        while not used[k]:
            used[k] = True
            cycle.append(k)
            b = int(directed[k, 1])
            if b not in nxt:
                return None
            k = nxt[b]
        if k != start:
            return None
        loops.append(np.array(cycle))
    return loops


def boundary_directed_edges(m: Mesh2D, region_mask: np.ndarray):
    """Directed boundary edges of the triangle set ``region_mask``.

    Each edge is traversed with the region on its left. Returns
    ``(edge ids, direction signs, directed node pairs)``.
    """
    inside = region_mask
    T = np.nonzero(inside)[0]
    nb = m.neighbors[T]
    nb_in = np.where(nb >= 0, inside[np.maximum(nb, 0)], False)
    t_idx, k_idx = np.nonzero(~nb_in)
    tri = T[t_idx]
    eids = m.tri_edges[tri, k_idx]
    signs = m.tri_edge_signs[tri, k_idx]
    a = m.triangles[tri, LOCAL_EDGES[k_idx, 0]]
    b = m.triangles[tri, LOCAL_EDGES[k_idx, 1]]
    return eids, signs, np.stack([a, b], axis=1)


def validate_mesh(m: Mesh2D) -> None:
    """Check every structural invariant; raise a ``MeshError`` subclass."""
    if m.n_triangles == 0:
        raise NonConformingMeshError("mesh has no triangles")
    if m.triangles.min() < 0 or m.triangles.max() >= m.n_nodes:
        raise DanglingNodeError("triangle references a missing node")
    areas = m.signed_areas
    p = m.nodes[m.triangles]
    longest = np.linalg.norm(p - np.roll(p, -1, axis=1), axis=2).max(axis=1)
    # inradius-like height: centroid must sit a positive distance off every edge
    if (areas <= 0).any() or (2 * areas / longest / 3 <= 1e-12).any():
        bad = int(np.nonzero((areas <= 0) | (2 * areas / longest / 3 <= 1e-12))[0][0])
        raise NonConformingMeshError(f"triangle {bad} is degenerate")
    counts = np.bincount(m.tri_edges.ravel(), minlength=len(m.edges))
    if counts.max() > 2:
        raise NonConformingMeshError("an edge is shared by more than two triangles")
    used = np.zeros(m.n_nodes, dtype=bool)
    used[m.triangles.ravel()] = True
    if not used.all():
        raise NonConformingMeshError(f"{int((~used).sum())} nodes belong to no triangle")

    # one closed outer loop, whose enclosed area equals the triangle area sum
    _, _, directed = boundary_directed_edges(m, np.ones(m.n_triangles, dtype=bool))
    loops = _chain_loops(directed)
    if loops is None or len(loops) != 1:
        raise NonConformingMeshError("mesh boundary is not a single closed loop")
    loop_pts = m.nodes[directed[loops[0], 0]]
    x, y = loop_pts.T
    enclosed = 0.5 * (np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))
    if abs(enclosed - areas.sum()) > 1e-9 * abs(enclosed):
        raise NonConformingMeshError("triangles overlap (area mismatch with boundary loop)")
    if len(m.outer_edges):
        bset = {tuple(e) for e in np.sort(directed, axis=1)}
        oset = {tuple(e) for e in np.sort(m.outer_edges, axis=1)}
        if bset != oset:
            raise NonConformingMeshError("outer_boundary edges differ from the mesh boundary")

    regions = m.tri_region
    if (regions < INSULATOR).any():
        raise NonConformingMeshError("invalid region tag")
    er = m.edge_regions()
    both = (er >= 0).all(axis=1) & (er[:, 0] != er[:, 1])
    if both.any():
        raise NonConformingMeshError("two conductors touch without insulation")
    outer_sides = (m.edge_triangles[:, 1] < 0) & (er[:, 0] >= 0)
    if outer_sides.any():
        raise NonConformingMeshError("a conductor touches the outer boundary")

    for r in np.unique(regions):
        sel = np.nonzero(regions == r)[0]
        if not _edge_connected(m, sel):
            what = "insulator" if r == INSULATOR else f"conductor {r}"
            raise NonConformingMeshError(f"{what} region is not edge-connected")
        if r >= 0:
            _, _, d = boundary_directed_edges(m, regions == r)
            lp = _chain_loops(d)
            if lp is None or len(lp) != 1:
                raise NonConformingMeshError(f"conductor {r} boundary is not a single closed loop")
    present = np.unique(regions[regions >= 0])
    if len(present) and not np.array_equal(present, np.arange(len(present))):
        raise NonConformingMeshError("conductor ids are not contiguous from 0")


def _edge_connected(m: Mesh2D, tris: np.ndarray) -> bool:
    if len(tris) <= 1:
        return True
    local = -np.ones(m.n_triangles, dtype=np.int64)
    local[tris] = np.arange(len(tris))
    nb = m.neighbors[tris]
    src = np.repeat(np.arange(len(tris)), 3)
    dst = local[np.maximum(nb.ravel(), 0)]
    ok = (nb.ravel() >= 0) & (dst >= 0)
    g = coo_matrix((np.ones(ok.sum()), (src[ok], dst[ok])), shape=(len(tris),) * 2)
    n, _ = connected_components(g, directed=False)
    return n == 1


@dataclass(frozen=True)
class MeshStats:
    n_triangles: int
    n_nodes: int
    n_edges: int
    min_angle_deg: float
    max_aspect_ratio: float
    region_counts: dict[int, int]


def triangle_quality(m: Mesh2D):
    """Minimum angle (degrees) and circumradius / (2 inradius) per triangle."""
    p = m.nodes[m.triangles]
    e = np.roll(p, -1, axis=1) - p  # edge vectors
    L = np.linalg.norm(e, axis=2)
    ang = []
    for k in range(3):
        a, b = -e[:, k - 1], e[:, k]
        c = np.einsum("ij,ij->i", a, b) / (L[:, k - 1] * L[:, k])
        ang.append(np.degrees(np.arccos(np.clip(c, -1, 1))))
    min_ang = np.min(ang, axis=0)
    A = m.signed_areas
    R = L.prod(axis=1) / (4 * A)
    r = 2 * A / L.sum(axis=1)
    return min_ang, R / (2 * r)


def mesh_stats(m: Mesh2D) -> MeshStats:
    min_ang, aspect = triangle_quality(m)
    regs, cnt = np.unique(m.tri_region, return_counts=True)
    return MeshStats(
        n_triangles=m.n_triangles,
        n_nodes=m.n_nodes,
        n_edges=len(m.edges),
        min_angle_deg=float(min_ang.min()),
        max_aspect_ratio=float(aspect.max()),
        region_counts={int(r): int(c) for r, c in zip(regs, cnt)},
    )


# --------------------------------------------------------------------- MSH 2.2

_LINE, _TRI, _POINT = 1, 2, 15
_NODES_PER_TYPE = {_LINE: 2, _TRI: 3, _POINT: 1}


def _region_for_name(name: str, lineno: int) -> int | str:
    if name == "insulator":
        return INSULATOR
    if name == "outer_boundary":
        return "outer"
    if name.startswith("conductor_"):
        tail = name[len("conductor_"):]
        if tail.isdigit():
            return int(tail)
    raise UnknownPhysicalNameError(f"unknown physical name {name!r}", lineno)


def parse_msh(stream: TextIO | str) -> Mesh2D:
    """Read an ASCII MSH 2.2 mesh.

    Physical groups must be named ``conductor_<i>``, ``insulator`` or
    ``outer_boundary``. Point elements are ignored.
    """
    text = stream if isinstance(stream, str) else stream.read()
    lines = text.splitlines()
    pos = 0

    def next_line():
        nonlocal pos
        while pos < len(lines):
            pos += 1
            s = lines[pos - 1].strip()
            if s:
                return s, pos
        raise MeshSyntaxError("unexpected end of file", pos)

    phys: dict[int, tuple[int, int | str]] = {}
    node_tags: list[int] = []
    coords: list[tuple[float, float]] = []
    elements: list[tuple[int, int, int, list[int]]] = []  # (lineno, type, phys, nodes)
    seen_format = False
    while pos < len(lines):
        s = lines[pos].strip()
        pos += 1
        if not s:
            continue
        if s == "$MeshFormat":
            fmt, ln = next_line()
            parts = fmt.split()
            if len(parts) != 3 or parts[0] != "2.2" or parts[1] != "0":
                raise MshVersionError(f"expected '2.2 0 8', got {fmt!r}", ln)
            if parts[2] != "8":
                raise MshVersionError(f"unsupported data size {parts[2]}", ln)
            seen_format = True
            _expect(next_line(), "$EndMeshFormat")
        elif s == "$PhysicalNames":
            n = _int(*next_line())
            for _ in range(n):
                body, ln = next_line()
                parts = body.split(maxsplit=2)
                if len(parts) != 3:
                    raise MeshSyntaxError("bad physical name line", ln)
                dim, tag, name = int(parts[0]), int(parts[1]), parts[2].strip().strip('"')
                phys[tag] = (dim, _region_for_name(name, ln))
            _expect(next_line(), "$EndPhysicalNames")
        elif s == "$Nodes":
            if not seen_format:
                raise MshVersionError("$Nodes before $MeshFormat", pos)
            n = _int(*next_line())
            for _ in range(n):
                body, ln = next_line()
                parts = body.split()
                if len(parts) != 4:
                    raise MeshSyntaxError("node line needs id x y z", ln)
                z = float(parts[3])
                if abs(z) > 1e-12:
                    raise NonzeroZError(f"node {parts[0]} has z = {z}", ln)
                node_tags.append(int(parts[0]))
                coords.append((float(parts[1]), float(parts[2])))
            _expect(next_line(), "$EndNodes")
        elif s == "$Elements":
            n = _int(*next_line())
            for _ in range(n):
                body, ln = next_line()
                parts = [int(v) for v in body.split()]
                etype, ntags = parts[1], parts[2]
                if etype not in _NODES_PER_TYPE:
                    raise MeshSyntaxError(f"unsupported element type {etype}", ln)
                enodes = parts[3 + ntags:]
                if len(enodes) != _NODES_PER_TYPE[etype]:
                    raise MeshSyntaxError("wrong node count for element type", ln)
                ptag = parts[3] if ntags > 0 else 0
                elements.append((ln, etype, ptag, enodes))
            _expect(next_line(), "$EndElements")
        elif s.startswith("$"):
            end = "$End" + s[1:]
            while True:
                body, _ = next_line()
                if body == end:
                    break
        else:
            raise MeshSyntaxError(f"unexpected content {s!r}", pos)
    if not seen_format:
        raise MshVersionError("missing $MeshFormat section", 1)

    index = {tag: i for i, tag in enumerate(node_tags)}
    tris, regions, outer, tri_lines = [], [], [], []
    for ln, etype, ptag, enodes in elements:
        if etype == _POINT:
            continue
        try:
            ids = [index[v] for v in enodes]
        except KeyError as exc:
            raise DanglingNodeError(f"element references missing node {exc.args[0]}", ln) from None
        if ptag not in phys:
            raise UnknownPhysicalNameError(f"physical tag {ptag} has no name", ln)
        dim, role = phys[ptag]
        if etype == _TRI:
            if role == "outer":
                raise UnknownPhysicalNameError("triangle tagged outer_boundary", ln)
            tris.append(ids)
            regions.append(role)
            tri_lines.append(ln)
        else:
            if role != "outer":
                raise UnknownPhysicalNameError("line element not tagged outer_boundary", ln)
            outer.append(ids)
    nodes = np.array(coords, dtype=float).reshape(-1, 2)
    tris_a = np.array(tris, dtype=np.int64).reshape(-1, 3)
    mesh = make_mesh(nodes, tris_a, np.array(regions, dtype=np.int64),
                     np.array(outer, dtype=np.int64).reshape(-1, 2), np.array(node_tags), validate=False)
    try:
        validate_mesh(mesh)
    except MeshError as exc:
        lineno = tri_lines[0] if tri_lines else None
        bad = _first_bad_triangle(mesh)
        if bad is not None:
            lineno = tri_lines[bad]
        raise type(exc)(str(exc), lineno) from None
    return mesh


def _first_bad_triangle(m: Mesh2D):
    areas = m.signed_areas
    bad = np.nonzero(areas <= 0)[0]
    return int(bad[0]) if len(bad) else None


def _expect(got, token):
    s, ln = got
    if s != token:
        raise MeshSyntaxError(f"expected {token}, got {s!r}", ln)


def _int(s, ln):
    try:
        return int(s)
    except ValueError:
        raise MeshSyntaxError(f"expected an integer, got {s!r}", ln) from None


def write_msh(m: Mesh2D) -> str:
    """Serialise to ASCII MSH 2.2 (physical tags: 1 outer, 2 insulator, 100+i conductor i)."""
    out = ["$MeshFormat", "2.2 0 8", "$EndMeshFormat"]
    names = [(1, 1, "outer_boundary"), (2, 2, "insulator")]
    names += [(2, 100 + i, f"conductor_{i}") for i in range(m.n_conductors)]
    out += ["$PhysicalNames", str(len(names))]
    out += [f'{d} {t} "{n}"' for d, t, n in names]
    out += ["$EndPhysicalNames", "$Nodes", str(m.n_nodes)]
    tags = m.node_tags
    out += [f"{tags[i]} {x:.17g} {y:.17g} 0" for i, (x, y) in enumerate(m.nodes)]
    out += ["$EndNodes", "$Elements", str(len(m.outer_edges) + m.n_triangles)]
    eid = 1
    for a, b in m.outer_edges:
        out.append(f"{eid} 1 2 1 1 {tags[a]} {tags[b]}")
        eid += 1
    for (a, b, c), r in zip(m.triangles, m.tri_region):
        ptag = 2 if r == INSULATOR else 100 + int(r)
        out.append(f"{eid} 2 2 {ptag} {ptag} {tags[a]} {tags[b]} {tags[c]}")
        eid += 1
    out.append("$EndElements")
    return "\n".join(out) + "\n"


def read_msh_file(path) -> Mesh2D:
    with open(path) as f:
        return parse_msh(f)


def write_msh_file(m: Mesh2D, path) -> None:
    with open(path, "w") as f:
        f.write(write_msh(m))
