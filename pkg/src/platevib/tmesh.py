"""Hierarchical T-mesh over [0,1]^2 stored as a quadtree.

Cells are split by cross insertion into four equal quadrants. Coordinates are
exact rationals (cross insertion only ever halves intervals), so neighbor and
vertex matching never needs a floating tolerance. Cell numbering is kept
coarse-to-fine: after every refinement batch the cells are renumbered
canonically (level, then parent id, then quadrant SW/SE/NW/NE), which also
fixes the order in which splits are replayed when Bezier ordinates are
recomputed. Vertices are classified from the leaf tiling: boundary vertices
and interior crossing vertices anchor basis functions, T-junctions do not.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

QUADRANTS = ((0, 0), (1, 0), (0, 1), (1, 1))  # SW, SE, NW, NE
SIDES = ("W", "E", "S", "N")


class MeshError(ValueError):
    """Invalid cell reference or inconsistent mesh operation."""


@dataclass
class Cell:
    id: int
    rect: tuple[Fraction, Fraction, Fraction, Fraction]  # (u0, u1, v0, v1)
    level: int
    parent: Optional[int] = None
    children: Optional[tuple[int, int, int, int]] = None

    @property
    def active(self) -> bool:
        return self.children is None

    @property
    def mid(self) -> tuple[Fraction, Fraction]:
        u0, u1, v0, v1 = self.rect
        return ((u0 + u1) / 2, (v0 + v1) / 2)

    @property
    def size(self) -> tuple[Fraction, Fraction]:
        u0, u1, v0, v1 = self.rect
        return (u1 - u0, v1 - v0)


@dataclass
class RefineReport:
    """Outcome of one refinement batch."""

    new_cells: list[int]
    new_vertices: list[tuple[Fraction, Fraction]]
    truncated_basis: list[int]
    id_map: dict[int, int]
    before: "HierTMesh"
    forced: list[int] = field(default_factory=list)


class HierTMesh:
    """Quadtree of cells tiling [0,1]^2, starting from an nx-by-ny grid."""

    def __init__(self, nx: int, ny: int):
        if nx < 1 or ny < 1:
            raise MeshError("initial grid must be at least 1x1")
        self.nx, self.ny = nx, ny
        self.cells: list[Cell] = []
        self.version = 0
        self._basis = None
        for j in range(ny):
            for i in range(nx):
                rect = (
                    Fraction(i, nx),
                    Fraction(i + 1, nx),
                    Fraction(j, ny),
                    Fraction(j + 1, ny),
                )
                self.cells.append(Cell(id=len(self.cells), rect=rect, level=0))

    # ----- queries ---------------------------------------------------------

    def cell(self, cid: int) -> Cell:
        try:
            c = self.cells[cid]
        except IndexError:
            raise MeshError(f"unknown cell id {cid}") from None
        return c

    def leaves(self) -> list[Cell]:
        return [c for c in self.cells if c.active]

    def leaf_ids(self) -> list[int]:
        return [c.id for c in self.cells if c.active]

    def root_at(self, u: Fraction, v: Fraction, bias=(1, 1)) -> Cell:
        def pick(x: Fraction, n: int, b: int) -> int:
            t = x * n
            if t.denominator == 1:  # on a level-0 grid line
                i = int(t) if b > 0 else int(t) - 1
            else:
                i = int(t)
            return min(max(i, 0), n - 1)

        i = pick(u, self.nx, bias[0])
        j = pick(v, self.ny, bias[1])
        return self.cells[j * self.nx + i]

    def leaf_at(self, u, v, bias=(1, 1), split_set=None) -> Cell:
        """Leaf containing (u, v); bias picks the side on mesh lines.

        With ``split_set`` given, only cells in it count as split (used
        while replaying the refinement history).
        """
        u, v = Fraction(u), Fraction(v)
        c = self.root_at(u, v, bias)
        while c.children is not None and (split_set is None or c.id in split_set):
            mu, mv = c.mid
            qx = 1 if (u > mu or (u == mu and bias[0] > 0)) else 0
            qy = 1 if (v > mv or (v == mv and bias[1] > 0)) else 0
            c = self.cells[c.children[QUADRANTS.index((qx, qy))]]
        return c

    def neighbor_leaves(self, cid: int, side: str) -> list[Cell]:
        """Leaves adjacent to the given cell across one of its sides."""
        c = self.cell(cid)
        u0, u1, v0, v1 = c.rect
        out: list[Cell] = []
        if side in ("E", "W"):
            x = u1 if side == "E" else u0
            if x == 0 or x == 1:
                return []
            bias = (1, 1) if side == "E" else (-1, 1)
            t = v0
            while t < v1:
                leaf = self.leaf_at(x, t, bias=bias)
                out.append(leaf)
                t = leaf.rect[3]
        else:
            y = v1 if side == "N" else v0
            if y == 0 or y == 1:
                return []
            bias = (1, 1) if side == "N" else (1, -1)
            t = u0
            while t < u1:
                leaf = self.leaf_at(t, y, bias=bias)
                out.append(leaf)
                t = leaf.rect[1]
        return out

    # ----- vertices --------------------------------------------------------

    def vertex_positions(self) -> set[tuple[Fraction, Fraction]]:
        verts = set()
        for c in self.leaves():
            u0, u1, v0, v1 = c.rect
            verts.update({(u0, v0), (u1, v0), (u0, v1), (u1, v1)})
        return verts

    def _edge_count(self, x: Fraction, y: Fraction) -> int:
        count = 0
        # An edge leaves the vertex northward iff the two leaves just above it
        # (NW- and NE-biased) differ; same reasoning in each direction.
        if y < 1 and self.leaf_at(x, y, (-1, 1)) is not self.leaf_at(x, y, (1, 1)):
            count += 1
        if y > 0 and self.leaf_at(x, y, (-1, -1)) is not self.leaf_at(x, y, (1, -1)):
            count += 1
        if x < 1 and self.leaf_at(x, y, (1, -1)) is not self.leaf_at(x, y, (1, 1)):
            count += 1
        if x > 0 and self.leaf_at(x, y, (-1, -1)) is not self.leaf_at(x, y, (-1, 1)):
            count += 1
        return count

    def classify_vertex(self, pos: tuple[Fraction, Fraction]) -> str:
        x, y = pos
        on_x = x == 0 or x == 1
        on_y = y == 0 or y == 1
        if on_x and on_y:
            return "corner"
        if on_x or on_y:
            return "boundary"
        return "crossing" if self._edge_count(x, y) == 4 else "t_junction"

    def vertices(self) -> dict[tuple[Fraction, Fraction], str]:
        return {pos: self.classify_vertex(pos) for pos in self.vertex_positions()}

    def anchor_vertices(self) -> list[tuple[Fraction, Fraction]]:
        """Vertices carrying basis functions: boundary (incl. corners) and crossing."""
        out = [p for p, k in self.vertices().items() if k != "t_junction"]
        out.sort(key=lambda p: (p[1], p[0]))
        return out

    def dimension(self) -> int:
        """Dimension 4(V^b + V^+) of the C1 bicubic space on this mesh."""
        return 4 * len(self.anchor_vertices())

    # ----- refinement ------------------------------------------------------

    def split_events(self) -> list[int]:
        """Split cells in canonical replay order (level, then id)."""
        ev = [c.id for c in self.cells if c.children is not None]
        ev.sort(key=lambda cid: (self.cells[cid].level, cid))
        return ev

    def _split(self, cid: int) -> list[int]:
        c = self.cell(cid)
        if not c.active:
            raise MeshError(f"cell {cid} is not a leaf")
        u0, u1, v0, v1 = c.rect
        mu, mv = c.mid
        kids = []
        for qx, qy in QUADRANTS:
            rect = (
                u0 if qx == 0 else mu,
                mu if qx == 0 else u1,
                v0 if qy == 0 else mv,
                mv if qy == 0 else v1,
            )
            kid = Cell(id=len(self.cells), rect=rect, level=c.level + 1, parent=c.id)
            self.cells.append(kid)
            kids.append(kid.id)
        c.children = tuple(kids)
        return kids

    def _renumber(self) -> dict[int, int]:
        """Reassign ids coarse-to-fine (BFS over the quadtree); returns old->new map."""
        order: list[Cell] = sorted(
            (c for c in self.cells if c.level == 0), key=lambda c: c.id
        )
        k = 0
        while k < len(order):
            c = order[k]
            if c.children is not None:
                order.extend(self.cells[i] for i in c.children)
            k += 1
        id_map = {c.id: new for new, c in enumerate(order)}
        for c in order:
            c.id = id_map[c.id]
            if c.parent is not None:
                c.parent = id_map[c.parent]
            if c.children is not None:
                c.children = tuple(id_map[k] for k in c.children)
        self.cells = sorted(order, key=lambda c: c.id)
        return id_map

    def refine_cells(self, cell_ids) -> RefineReport:
        """Cross-insert the given leaf cells.

        Splits are applied coarsest-first (the net effect of the temporary
        removal/re-refinement rule for level jumps), cells are renumbered
        coarse-to-fine, and the basis registry is rebuilt. The report lists
        new cell ids, newly anchoring vertices and the ids (in the
        pre-refinement registry) of basis functions that were truncated.
        """
        ids = list(dict.fromkeys(cell_ids))
        for cid in ids:
            self.cell(cid)  # raises on unknown id
            if not self.cells[cid].active:
                raise MeshError(f"cell {cid} is not a leaf")
        before = self.copy()
        old_vertices = self.vertex_positions()
        ids.sort(key=lambda cid: (self.cells[cid].level, cid))
        created: list[int] = []
        for cid in ids:
            created.extend(self._split(cid))
        id_map = self._renumber()
        self.version += 1
        new_cells = sorted(id_map[c] for c in created)
        new_vertices = sorted(self.vertex_positions() - old_vertices, key=lambda p: (p[1], p[0]))
        truncated = self._truncated_against(before)
        return RefineReport(
            new_cells=new_cells,
            new_vertices=new_vertices,
            truncated_basis=truncated,
            id_map=id_map,
            before=before,
        )

    def _truncated_against(self, before: "HierTMesh") -> list[int]:
        old_reg = before.basis
        old_anchor_keys = set(old_reg.key_index)
        new_anchors = [p for p in self.anchor_vertices() if (p, (0, 0)) not in old_anchor_keys]
        hit: set[int] = set()
        for pos in new_anchors:
            x, y = pos
            for bx in (-1, 1):
                for by in (-1, 1):
                    if (x == 0 and bx < 0) or (x == 1 and bx > 0):
                        continue
                    if (y == 0 and by < 0) or (y == 1 and by > 0):
                        continue
                    leaf = before.leaf_at(x, y, (bx, by))
                    hit.update(old_reg.leaf_function_ids(leaf.id))
        return sorted(hit)

    def uniform_refine(self, times: int = 1) -> None:
        for _ in range(times):
            self.refine_cells(self.leaf_ids())

    def copy(self) -> "HierTMesh":
        m = HierTMesh.__new__(HierTMesh)
        m.nx, m.ny = self.nx, self.ny
        m.version = self.version
        m._basis = None
        m.cells = [
            Cell(id=c.id, rect=c.rect, level=c.level, parent=c.parent, children=c.children)
            for c in self.cells
        ]
        return m

    # ----- basis access ----------------------------------------------------

    @property
    def basis(self):
        """Bezier-ordinate registry for the current tiling (built lazily)."""
        if self._basis is None or self._basis.version != self.version:
            from .phtbasis import compute_bezier_ordinates

            self._basis = compute_bezier_ordinates(self)
        return self._basis

    # ----- io ---------------------------------------------------------------

    def dump(self) -> str:
        """One line per leaf: id, level, dyadic rect, corner vertex kinds."""
        kinds = self.vertices()
        lines = []
        for c in self.leaves():
            u0, u1, v0, v1 = c.rect
            corners = [(u0, v0), (u1, v0), (u0, v1), (u1, v1)]
            ck = ",".join(kinds[p] for p in corners)
            lines.append(f"{c.id} {c.level} {u0} {u1} {v0} {v1} {ck}")
        return "\n".join(lines) + "\n"


def init_tensor_mesh(nx: int, ny: int) -> HierTMesh:
    """Level-0 hierarchical T-mesh over an nx-by-ny tensor grid."""
    return HierTMesh(nx, ny)
