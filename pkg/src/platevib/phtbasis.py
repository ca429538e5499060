"""C1 bicubic spline basis over a hierarchical T-mesh, in Bezier form.

Every boundary or crossing vertex anchors four basis functions, one per
Hermite slot (value, d/du, d/dv, cross). A function is stored as a 4x4 array
of Bezier ordinates on each supporting leaf; the 2x2 ordinate block at a cell
corner is in bijection with the Hermite data there, which is what makes
cross-insertion refinement exact: ordinates of existing functions are
subdivided onto the children, the blocks around every newly anchoring vertex
are zeroed (truncation), and the four new functions anchored there restore
the removed content.

The registry is a pure function of the leaf tiling: it is rebuilt by
replaying all splits coarsest-first, so at the moment a vertex starts to
anchor functions its four quadrant cells always sit at one level, and the
univariate pair data reduces to one formula,

    f0 = (d2/s, -3/s),   f1 = (d1/s, +3/s),   s = d1 + d2,

with d1, d2 the gaps to the previous/next mesh line (a missing side
contributes 0). At level 0 this reproduces the tensor-product C1 cubic
B-spline basis function-by-function.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .tmesh import QUADRANTS, HierTMesh, MeshError

# De Casteljau subdivision of cubic Bernstein coefficients at the midpoint.
SUB_LEFT = np.array(
    [
        [1.0, 0.0, 0.0, 0.0],
        [0.5, 0.5, 0.0, 0.0],
        [0.25, 0.5, 0.25, 0.0],
        [0.125, 0.375, 0.375, 0.125],
    ]
)
SUB_RIGHT = SUB_LEFT[::-1, ::-1].copy()
SUB = (SUB_LEFT, SUB_RIGHT)

TYPE_ORDER = ((0, 0), (1, 0), (0, 1), (1, 1))


class BasisError(RuntimeError):
    """Internal invariant of the basis registry violated."""


def bernstein(t: float) -> np.ndarray:
    """Cubic Bernstein values on the reference interval [-1, 1]."""
    a = (1.0 - t) / 2.0
    b = (1.0 + t) / 2.0
    return np.array([a**3, 3 * a**2 * b, 3 * a * b**2, b**3])


def bernstein_deriv(t: float) -> np.ndarray:
    """d/dt of the cubic Bernstein basis on [-1, 1]."""
    a = (1.0 - t) / 2.0
    b = (1.0 + t) / 2.0
    b2 = np.array([a**2, 2 * a * b, b**2])
    return 1.5 * np.array([-b2[0], b2[0] - b2[1], b2[1] - b2[2], b2[2]])


def _pair_data(d1: float, d2: float) -> tuple[tuple[float, float], tuple[float, float]]:
    s = d1 + d2
    return ((d2 / s, -3.0 / s), (d1 / s, 3.0 / s))


def _uni_coeffs(anchor, data, x0, x1) -> np.ndarray:
    """Bernstein coefficients on [x0, x1] of the univariate factor with the
    given Hermite data at `anchor`, which must be an interval endpoint."""
    val, der = data
    w = float(x1 - x0)
    if anchor == x0:
        return np.array([val, val + (w / 3.0) * der, 0.0, 0.0])
    if anchor == x1:
        return np.array([0.0, 0.0, val - (w / 3.0) * der, val])
    raise BasisError("anchor is not an endpoint of the supporting interval")


@dataclass
class BasisFn:
    """One basis function: anchor vertex, Hermite slot, per-leaf ordinates."""

    anchor: tuple[Fraction, Fraction]
    type: tuple[int, int]
    u_data: tuple[float, float]
    v_data: tuple[float, float]
    ords: dict[int, np.ndarray]


class PhtBasis:
    """Basis registry bound to one tiling (mesh.version) of a HierTMesh."""

    def __init__(self, mesh: HierTMesh, funcs: list[BasisFn]):
        self.mesh = mesh
        self.version = mesh.version
        self.funcs = funcs
        self.key_index = {(f.anchor, f.type): i for i, f in enumerate(funcs)}
        self._leaf_ids: dict[int, list[int]] = {}
        for i, f in enumerate(funcs):
            for leaf in f.ords:
                self._leaf_ids.setdefault(leaf, []).append(i)
        self._leaf_tab: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    @property
    def n(self) -> int:
        return len(self.funcs)

    def leaf_function_ids(self, leaf_id: int) -> list[int]:
        return self._leaf_ids.get(leaf_id, [])

    def leaf_tabulation(self, leaf_id: int) -> tuple[np.ndarray, np.ndarray]:
        """(function ids, stacked (nf, 4, 4) ordinates) for one leaf."""
        hit = self._leaf_tab.get(leaf_id)
        if hit is None:
            ids = np.array(self._leaf_ids.get(leaf_id, []), dtype=int)
            B = (
                np.stack([self.funcs[i].ords[leaf_id] for i in ids])
                if ids.size
                else np.zeros((0, 4, 4))
            )
            hit = (ids, B)
            self._leaf_tab[leaf_id] = hit
        return hit

    def eval_cell(self, cell_id: int, xi_hat: float, eta_hat: float):
        """Non-zero values and parametric first derivatives on a leaf.

        (xi_hat, eta_hat) live on the reference square [-1,1]^2 of the cell.
        Returns (ids, N, dN/du, dN/dv).
        """
        cell = self.mesh.cell(cell_id)
        if not cell.active:
            raise MeshError(f"cell {cell_id} is not a leaf")
        if not (-1.0 <= xi_hat <= 1.0 and -1.0 <= eta_hat <= 1.0):
            raise ValueError("reference coordinates outside [-1,1]^2")
        ids, B = self.leaf_tabulation(cell_id)
        bu, bv = bernstein(xi_hat), bernstein(eta_hat)
        du, dv = bernstein_deriv(xi_hat), bernstein_deriv(eta_hat)
        w, h = float(cell.size[0]), float(cell.size[1])
        N = np.einsum("fij,i,j->f", B, bu, bv)
        Nu = (2.0 / w) * np.einsum("fij,i,j->f", B, du, bv)
        Nv = (2.0 / h) * np.einsum("fij,i,j->f", B, bu, dv)
        return ids, N, Nu, Nv

    def g_matrix(self, u, v, bias=None):
        """Geometric data (value, d/du, d/dv, cross) of all functions at a point.

        Evaluated on the leaf selected by `bias` (default: the lower-left
        adjacent leaf); the data of a C1 function is single-valued at any
        mesh vertex, so the side only matters for reproducibility.
        Returns (ids, G) with G of shape (4, nf).
        """
        u, v = Fraction(u), Fraction(v)
        if bias is None:
            bias = (-1 if u > 0 else 1, -1 if v > 0 else 1)
        leaf = self.mesh.leaf_at(u, v, bias)
        u0, u1, v0, v1 = leaf.rect
        w, h = float(u1 - u0), float(v1 - v0)
        th_u = 2.0 * float((u - u0) / (u1 - u0)) - 1.0
        th_v = 2.0 * float((v - v0) / (v1 - v0)) - 1.0
        ids, B = self.leaf_tabulation(leaf.id)
        bu, bv = bernstein(th_u), bernstein(th_v)
        dbu, dbv = bernstein_deriv(th_u), bernstein_deriv(th_v)
        cu, cv = 2.0 / w, 2.0 / h
        G = np.stack(
            [
                np.einsum("fij,i,j->f", B, bu, bv),
                cu * np.einsum("fij,i,j->f", B, dbu, bv),
                cv * np.einsum("fij,i,j->f", B, bu, dbv),
                cu * cv * np.einsum("fij,i,j->f", B, dbu, dbv),
            ]
        )
        return ids, G

    def eval_point(self, u, v, bias=None):
        """(ids, N, dN/du, dN/dv) at a parametric point of [0,1]^2."""
        ids, G = self.g_matrix(u, v, bias)
        return ids, G[0], G[1], G[2]

    # ----- boundary traces --------------------------------------------------

    def edge_functions(self, side: str) -> list[int]:
        """Functions with non-zero trace on one patch edge (W/E/S/N)."""
        out = []
        for i, f in enumerate(self.funcs):
            x, y = f.anchor
            if side == "W" and x == 0 and f.u_data[0] != 0:
                out.append(i)
            elif side == "E" and x == 1 and f.u_data[0] != 0:
                out.append(i)
            elif side == "S" and y == 0 and f.v_data[0] != 0:
                out.append(i)
            elif side == "N" and y == 1 and f.v_data[0] != 0:
                out.append(i)
        return out

    def edge_trace_table(self, side: str):
        """Trace data of the edge functions: (fn id, t, value, d/dt).

        t is the parametric coordinate along the edge; the trace of function
        (anchor, slot) is its tangential univariate factor scaled by the
        normal factor's value on the edge.
        """
        rows = []
        for i in self.edge_functions(side):
            f = self.funcs[i]
            if side in ("W", "E"):
                t, scale = f.anchor[1], f.u_data[0]
                val, der = f.v_data
            else:
                t, scale = f.anchor[0], f.v_data[0]
                val, der = f.u_data
            rows.append((i, t, scale * val, scale * der))
        rows.sort(key=lambda r: (r[1], r[2], r[3]))
        return rows

    # ----- diagnostics ------------------------------------------------------

    def partition_defect(self) -> float:
        """Max deviation of summed ordinate slots from 1 over all leaves."""
        worst = 0.0
        for leaf in self.mesh.leaf_ids():
            _, B = self.leaf_tabulation(leaf)
            worst = max(worst, float(np.abs(B.sum(axis=0) - 1.0).max()))
        return worst


def _anchor_pair_data(mesh: HierTMesh, pos, gaps):
    d1u, d2u, d1v, d2v = gaps
    return _pair_data(d1u, d2u), _pair_data(d1v, d2v)


def compute_bezier_ordinates(mesh: HierTMesh) -> PhtBasis:
    """Build the basis registry for the current tiling by canonical replay."""
    cells = mesh.cells
    work: dict[tuple, dict] = {}
    leaf_map: dict[int, set] = {}

    def add_function(anchor, gaps, qleaves):
        pu, pv = _anchor_pair_data(mesh, anchor, gaps)
        for tu, tv in TYPE_ORDER:
            key = (anchor, (tu, tv))
            ords = {}
            for L in qleaves:
                u4 = _uni_coeffs(anchor[0], pu[tu], L.rect[0], L.rect[1])
                v4 = _uni_coeffs(anchor[1], pv[tv], L.rect[2], L.rect[3])
                ords[L.id] = np.outer(u4, v4)
                leaf_map.setdefault(L.id, set()).add(key)
            work[key] = {"u_data": pu[tu], "v_data": pv[tv], "ords": ords}

    def truncate_at(anchor, qleaves):
        ax, ay = anchor
        for L in qleaves:
            u0, u1, v0, v1 = L.rect
            rs = slice(0, 2) if ax == u0 else slice(2, 4)
            cs = slice(0, 2) if ay == v0 else slice(2, 4)
            for key in list(leaf_map.get(L.id, ())):
                if key[0] == anchor:
                    continue
                b = work[key]["ords"][L.id]
                b[rs, cs] = 0.0
                if not b.any():
                    del work[key]["ords"][L.id]
                    leaf_map[L.id].discard(key)

    # Level-0 tensor basis: every grid vertex anchors four functions.
    nx, ny = mesh.nx, mesh.ny
    hu, hv = 1.0 / nx, 1.0 / ny
    for j in range(ny + 1):
        for i in range(nx + 1):
            anchor = (Fraction(i, nx), Fraction(j, ny))
            gaps = (
                hu if i > 0 else 0.0,
                hu if i < nx else 0.0,
                hv if j > 0 else 0.0,
                hv if j < ny else 0.0,
            )
            qleaves = [
                cells[jj * nx + ii]
                for jj in (j - 1, j)
                for ii in (i - 1, i)
                if 0 <= ii < nx and 0 <= jj < ny
            ]
            add_function(anchor, gaps, qleaves)

    split_set: set[int] = set()
    for cid in mesh.split_events():
        Q = cells[cid]
        split_set.add(cid)
        kids = [cells[k] for k in Q.children]

        # Subdivide ordinates of every function supported on Q onto the children.
        for key in list(leaf_map.get(Q.id, ())):
            b = work[key]["ords"].pop(Q.id)
            leaf_map[Q.id].discard(key)
            for (qx, qy), kid in zip(QUADRANTS, kids):
                bc = SUB[qx] @ b @ SUB[qy].T
                if bc.any():
                    work[key]["ords"][kid.id] = bc
                    leaf_map.setdefault(kid.id, set()).add(key)
        leaf_map.pop(Q.id, None)

        u0, u1, v0, v1 = Q.rect
        mu, mv = Q.mid
        half_u, half_v = float(mu - u0), float(mv - v0)

        def rleaf(x, y, bias):
            return mesh.leaf_at(x, y, bias=bias, split_set=split_set)

        new_anchors = [((mu, mv), (half_u, half_u, half_v, half_v))]
        # Edge midpoints anchor when they sit on the domain boundary or when
        # the neighbor across the edge has already been split (the vertex
        # then has four emanating edges: it turned from T-junction to crossing).
        mids = (
            ((u0, mv), "W"),
            ((u1, mv), "E"),
            ((mu, v0), "S"),
            ((mu, v1), "N"),
        )
        for (px, py), side in mids:
            if side in ("W", "E"):
                on_bnd = px == 0 or px == 1
                sgn = -1 if side == "W" else 1
                crossing = (not on_bnd) and (
                    rleaf(px, py, (sgn, -1)) is not rleaf(px, py, (sgn, 1))
                )
                if on_bnd:
                    gaps = (0.0 if px == 0 else half_u, half_u if px == 0 else 0.0, half_v, half_v)
                elif crossing:
                    gaps = (half_u, half_u, half_v, half_v)
                else:
                    continue
            else:
                on_bnd = py == 0 or py == 1
                sgn = -1 if side == "S" else 1
                crossing = (not on_bnd) and (
                    rleaf(px, py, (-1, sgn)) is not rleaf(px, py, (1, sgn))
                )
                if on_bnd:
                    gaps = (half_u, half_u, 0.0 if py == 0 else half_v, half_v if py == 0 else 0.0)
                elif crossing:
                    gaps = (half_u, half_u, half_v, half_v)
                else:
                    continue
            new_anchors.append(((px, py), gaps))

        for anchor, gaps in new_anchors:
            ax, ay = anchor
            qleaves = []
            seen = set()
            for bx in (-1, 1):
                if (ax == 0 and bx < 0) or (ax == 1 and bx > 0):
                    continue
                for by in (-1, 1):
                    if (ay == 0 and by < 0) or (ay == 1 and by > 0):
                        continue
                    L = rleaf(ax, ay, (bx, by))
                    if L.id not in seen:
                        seen.add(L.id)
                        qleaves.append(L)
            if any(L.level != Q.level + 1 for L in qleaves):
                raise BasisError("replay invariant broken: non-uniform anchor neighborhood")
            truncate_at(anchor, qleaves)
            add_function(anchor, gaps, qleaves)

    keys = sorted(work.keys(), key=lambda k: (k[0][1], k[0][0], k[1][1], k[1][0]))
    funcs = [
        BasisFn(
            anchor=k[0],
            type=k[1],
            u_data=work[k]["u_data"],
            v_data=work[k]["v_data"],
            ords=work[k]["ords"],
        )
        for k in keys
    ]
    basis = PhtBasis(mesh, funcs)
    expected = mesh.dimension()
    if basis.n != expected:
        raise BasisError(
            f"registry size {basis.n} violates the dimension formula 4(Vb+V+) = {expected}"
        )
    return basis


def eval_pht(mesh: HierTMesh, cell_id: int, xi_hat: float, eta_hat: float):
    """Non-zero basis values and parametric derivatives on a leaf cell."""
    return mesh.basis.eval_cell(cell_id, xi_hat, eta_hat)


def rht_eval(mesh: HierTMesh, weights_hat: np.ndarray, cell_id: int,
             xi_hat: float, eta_hat: float):
    """Rational basis values and parametric derivatives on a leaf cell.

    weights_hat is aligned with the basis registry. With unit weights this
    reduces to eval_pht; on the level-0 mesh with NURBS weights it matches
    the NURBS basis exactly.
    """
    weights_hat = np.asarray(weights_hat, dtype=float)
    if np.any(weights_hat <= 0):
        raise ValueError("all rational weights must be positive")
    ids, N, Nu, Nv = eval_pht(mesh, cell_id, xi_hat, eta_hat)
    w = weights_hat[ids]
    Nw, Nwu, Nwv = N * w, Nu * w, Nv * w
    W, Wu, Wv = Nw.sum(), Nwu.sum(), Nwv.sum()
    R = Nw / W
    Ru = Nwu / W - Nw * (Wu / W**2)
    Rv = Nwv / W - Nw * (Wv / W**2)
    return ids, R, Ru, Rv


def prolong_hierarchical(coarse: HierTMesh, fine: HierTMesh, coeffs: np.ndarray) -> np.ndarray:
    """Exact coefficient transfer onto a nested refinement.

    Functions kept from the coarse registry keep their coefficients; each
    newly anchoring vertex contributes four coefficients solved from the
    4x4 geometric-information system (values/derivatives of the coarse
    function at the vertex against the data of the four new functions).
    Accepts (n,) or (n, m) coefficient arrays.
    """
    creg, freg = coarse.basis, fine.basis
    coeffs = np.asarray(coeffs, dtype=float)
    squeeze = coeffs.ndim == 1
    C = coeffs[:, None] if squeeze else coeffs
    if C.shape[0] != creg.n:
        raise ValueError("coefficient array does not match the coarse registry")
    out = np.zeros((freg.n, C.shape[1]))
    new_by_anchor: dict[tuple, list[int]] = {}
    for fid, f in enumerate(freg.funcs):
        cid = creg.key_index.get((f.anchor, f.type))
        if cid is not None:
            out[fid] = C[cid]
        else:
            new_by_anchor.setdefault(f.anchor, []).append(fid)
    for anchor, fids in new_by_anchor.items():
        fids.sort(key=lambda i: (freg.funcs[i].type[1], freg.funcs[i].type[0]))
        T = np.empty((4, 4))
        for col, fid in enumerate(fids):
            f = freg.funcs[fid]
            vu, du = f.u_data
            vv, dv = f.v_data
            T[:, col] = (vu * vv, du * vv, vu * dv, du * dv)
        ids, G = creg.g_matrix(anchor[0], anchor[1])
        data = G @ C[ids]
        delta = np.linalg.solve(T, data)
        for row, fid in enumerate(fids):
            out[fid] = delta[row]
    return out[:, 0] if squeeze else out


def rht_update_controls(mesh_before: HierTMesh, controls: np.ndarray,
                        weights: np.ndarray, mesh_after: HierTMesh):
    """Control-point/weight update for the rational surface under refinement.

    Works in homogeneous coordinates: weighted controls are lifted to 4D,
    prolonged exactly onto the refined registry, and projected back. The
    represented surface is unchanged.
    """
    controls = np.asarray(controls, dtype=float)
    weights = np.asarray(weights, dtype=float)
    hom = np.concatenate([controls * weights[:, None], weights[:, None]], axis=1)
    hom_f = prolong_hierarchical(mesh_before, mesh_after, hom)
    w_new = hom_f[:, -1]
    if np.any(w_new <= 0):
        raise ValueError("rational update produced a non-positive weight")
    return hom_f[:, :-1] / w_new[:, None], w_new
