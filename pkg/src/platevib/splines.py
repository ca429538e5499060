"""Univariate B-spline and NURBS bases.

Open knot vectors on [0, 1], Cox-de Boor evaluation restricted to the p+1
functions supported on the containing span, derivatives of arbitrary order,
and the rational (NURBS) counterparts with quotient-rule derivatives.
Knot insertion and degree elevation operate on homogeneous coordinates so
they preserve the represented geometry exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SplineError(ValueError):
    """Invalid spline data or evaluation outside the parametric domain."""


@dataclass(frozen=True)
class KnotVector:
    """Open knot vector with degree p.

    ``values`` is non-decreasing, starts and ends with p+1 repeated knots,
    and interior multiplicities never exceed p+1.
    """

    values: np.ndarray
    degree: int

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        p = self.degree
        if p < 0:
            raise SplineError("degree must be non-negative")
        if vals.ndim != 1 or vals.size < 2 * (p + 1):
            raise SplineError("knot vector too short for degree %d" % p)
        if np.any(np.diff(vals) < 0):
            raise SplineError("knot vector must be non-decreasing")
        if not (np.all(vals[: p + 1] == vals[0]) and np.all(vals[-p - 1 :] == vals[-1])):
            raise SplineError("knot vector must be open (end knots repeated p+1 times)")
        _, counts = np.unique(vals, return_counts=True)
        if np.any(counts > p + 1):
            raise SplineError("interior knot multiplicity exceeds p+1")

    @property
    def num_basis(self) -> int:
        return self.values.size - self.degree - 1

    @property
    def first(self) -> float:
        return float(self.values[0])

    @property
    def last(self) -> float:
        return float(self.values[-1])

    @property
    def breakpoints(self) -> np.ndarray:
        """Distinct knot values (span boundaries)."""
        return np.unique(self.values)

    def span_of(self, xi: float) -> int:
        """Index k with values[k] <= xi < values[k+1] (last span at xi = last)."""
        vals = self.values
        if xi < vals[0] or xi > vals[-1]:
            raise SplineError(f"parameter {xi} outside knot range [{vals[0]}, {vals[-1]}]")
        p = self.degree
        if xi >= vals[-1]:
            return int(np.searchsorted(vals, vals[-1], side="left") - 1)
        k = int(np.searchsorted(vals, xi, side="right") - 1)
        return max(k, p)


def make_open_knots(degree: int, breakpoints, multiplicity: int = 1) -> KnotVector:
    """Open knot vector over the given breakpoints with uniform interior multiplicity."""
    bp = np.asarray(breakpoints, dtype=float)
    interior = np.repeat(bp[1:-1], multiplicity)
    vals = np.concatenate([np.full(degree + 1, bp[0]), interior, np.full(degree + 1, bp[-1])])
    return KnotVector(vals, degree)


def bspline_basis(knots: KnotVector, xi: float):
    """Non-zero B-spline values at xi.

    Returns ``(span, values)`` where ``values[j]`` is basis function
    ``span - p + j`` evaluated at xi. The values are non-negative and sum
    to one.
    """
    span = knots.span_of(xi)
    p = knots.degree
    t = knots.values
    N = np.zeros(p + 1)
    left = np.zeros(p + 1)
    right = np.zeros(p + 1)
    N[0] = 1.0
    for j in range(1, p + 1):
        left[j] = xi - t[span + 1 - j]
        right[j] = t[span + j] - xi
        saved = 0.0
        for r in range(j):
            denom = right[r + 1] + left[j - r]
            temp = N[r] / denom if denom != 0.0 else 0.0
            N[r] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        N[j] = saved
    return span, N


def bspline_derivs(knots: KnotVector, xi: float, order: int):
    """Non-zero basis values and derivatives up to ``order``.

    Returns ``(span, D)`` with ``D[k, j]`` the k-th derivative of basis
    function ``span - p + j`` at xi. Rows with k >= 1 sum to zero.
    """
    p = knots.degree
    if order > p:
        raise SplineError(f"derivative order {order} exceeds degree {p}")
    span = knots.span_of(xi)
    t = knots.values
    # Triangular table of all lower-degree bases (standard knot-difference scheme).
    ndu = np.zeros((p + 1, p + 1))
    a = np.zeros((2, p + 1))
    left = np.zeros(p + 1)
    right = np.zeros(p + 1)
    ndu[0, 0] = 1.0
    for j in range(1, p + 1):
        left[j] = xi - t[span + 1 - j]
        right[j] = t[span + j] - xi
        saved = 0.0
        for r in range(j):
            ndu[j, r] = right[r + 1] + left[j - r]
            temp = ndu[r, j - 1] / ndu[j, r] if ndu[j, r] != 0.0 else 0.0
            ndu[r, j] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        ndu[j, j] = saved
    D = np.zeros((order + 1, p + 1))
    D[0, :] = ndu[:, p]
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[0, 0] = 1.0
        for k in range(1, order + 1):
            d = 0.0
            rk = r - k
            pk = p - k
            if r >= k:
                a[s2, 0] = a[s1, 0] / ndu[pk + 1, rk] if ndu[pk + 1, rk] != 0.0 else 0.0
                d = a[s2, 0] * ndu[rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                denom = ndu[pk + 1, rk + j]
                a[s2, j] = (a[s1, j] - a[s1, j - 1]) / denom if denom != 0.0 else 0.0
                d += a[s2, j] * ndu[rk + j, pk]
            if r <= pk:
                a[s2, k] = -a[s1, k - 1] / ndu[pk + 1, r] if ndu[pk + 1, r] != 0.0 else 0.0
                d += a[s2, k] * ndu[r, pk]
            D[k, r] = d
            s1, s2 = s2, s1
    fac = p
    for k in range(1, order + 1):
        D[k, :] *= fac
        fac *= p - k
    return span, D


def bspline_basis_full(knots: KnotVector, xi: float) -> np.ndarray:
    """All basis values at xi as a dense length-num_basis vector."""
    span, vals = bspline_basis(knots, xi)
    out = np.zeros(knots.num_basis)
    out[span - knots.degree : span + 1] = vals
    return out


def nurbs_basis_2d(knots_u: KnotVector, knots_v: KnotVector, weights: np.ndarray,
                   xi: float, eta: float):
    """Non-zero bivariate rational basis values and first parametric derivatives.

    ``weights`` has shape (n_u, n_v) and must be positive. Returns
    ``(iu, iv, R, Ru, Rv)`` where ``R[a, b]`` corresponds to the tensor
    function ``(iu + a, iv + b)``.
    """
    weights = np.asarray(weights, dtype=float)
    if np.any(weights <= 0):
        raise SplineError("all NURBS weights must be positive")
    su, Du = bspline_derivs(knots_u, xi, 1)
    sv, Dv = bspline_derivs(knots_v, eta, 1)
    pu, pv = knots_u.degree, knots_v.degree
    iu, iv = su - pu, sv - pv
    w = weights[iu : su + 1, iv : sv + 1]
    Bu, dBu = Du[0], Du[1]
    Bv, dBv = Dv[0], Dv[1]
    Nw = np.outer(Bu, Bv) * w
    Nwu = np.outer(dBu, Bv) * w
    Nwv = np.outer(Bu, dBv) * w
    W = Nw.sum()
    Wu = Nwu.sum()
    Wv = Nwv.sum()
    R = Nw / W
    Ru = Nwu / W - Nw * (Wu / W**2)
    Rv = Nwv / W - Nw * (Wv / W**2)
    return iu, iv, R, Ru, Rv


def insert_knot_matrix(knots: KnotVector, xi: float, times: int = 1):
    """Knot insertion operator for B-spline coefficients.

    Returns ``(new_knots, A)`` with ``A`` of shape (n_new, n_old) such that
    a curve with coefficients c is represented on the refined vector by
    ``A @ c``. Applies to homogeneous coordinates for NURBS.
    """
    t = knots.values.copy()
    p = knots.degree
    A = np.eye(knots.num_basis)
    for _ in range(times):
        n = len(t) - p - 1
        k = int(np.searchsorted(t, xi, side="right") - 1)
        k = max(k, p)
        step = np.zeros((n + 1, n))
        for i in range(n + 1):
            if i <= k - p:
                step[i, i] = 1.0
            elif i >= k + 1:
                step[i, i - 1] = 1.0
            else:
                denom = t[i + p] - t[i]
                alpha = (xi - t[i]) / denom if denom > 0 else 0.0
                step[i, i] = alpha
                step[i, i - 1] = 1.0 - alpha
        t = np.insert(t, k + 1, xi)
        A = step @ A
    return KnotVector(t, p), A


def refine_knots_matrix(knots: KnotVector, new_values) -> tuple[KnotVector, np.ndarray]:
    """Insert several knot values (with multiplicities) in one operator."""
    kv, A = knots, np.eye(knots.num_basis)
    for xi in new_values:
        kv, step = insert_knot_matrix(kv, float(xi))
        A = step @ A
    return kv, A


def elevate_degree_bezier(coeffs: np.ndarray) -> np.ndarray:
    """Degree-elevate Bezier coefficients (single span) by one.

    ``coeffs`` has shape (p+1, ...); returns shape (p+2, ...).
    """
    p = coeffs.shape[0] - 1
    out = np.zeros((p + 2,) + coeffs.shape[1:])
    out[0] = coeffs[0]
    out[p + 1] = coeffs[p]
    for i in range(1, p + 1):
        a = i / (p + 1)
        out[i] = a * coeffs[i - 1] + (1 - a) * coeffs[i]
    return out
