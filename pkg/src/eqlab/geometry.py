"""Spaces with a non-symmetric affine connection.

A :class:`Space` carries connection coefficients Gamma^i_{jk} that need
not be symmetric in the two lower slots.  The symmetric part defines an
associated covariant derivative written ``;`` throughout, the
antisymmetric part is the torsion, and four further covariant-derivative
kinds use the full non-symmetric coefficients with the four possible slot
arrangements.  The curvature of the symmetric part generates a
five-parameter family K(u, u', v, v', w) of curvature-like tensors built
from torsion corrections.
"""

from __future__ import annotations

import random
from fractions import Fraction
from itertools import product

from .jets import (
    JetScalar,
    NotInvertibleError,
    jet_add,
    jet_inverse,
    jet_mul,
    jet_neg,
    jet_partial,
    jet_scale,
    value_at_base,
)
from .linalg import RationalMatrix, rank_exact
from .tensors import (
    DOWN,
    UP,
    TensorField,
    antisym_pair,
    flatten_at_base,
    sym_pair,
    tensor_add,
    tensor_scale,
    tensor_sub,
    transpose,
)

GAMMA_VALENCE = (UP, DOWN, DOWN)


class SingularMetricError(ValueError):
    """The metric is not invertible at the base point."""


class Space:
    """Dimension plus connection field, optionally remembering a metric.

    Derived objects that every verification path reuses (symmetric part,
    torsion, trace, curvature, covariant derivative of torsion) are
    computed once and cached; the instance itself never changes.
    """

    def __init__(self, dim: int, gamma: TensorField,
                 metric: TensorField | None = None):
        if dim < 2:
            raise ValueError("dim must be at least 2")
        if gamma.dim != dim or gamma.valence != GAMMA_VALENCE:
            raise ValueError("gamma must have valence (up, down, down) at the space dim")
        if metric is not None and (metric.dim != dim or metric.valence != (DOWN, DOWN)):
            raise ValueError("metric must have valence (down, down) at the space dim")
        self.dim = dim
        self.gamma = gamma
        self.metric = metric
        self._cache: dict[str, object] = {}

    @classmethod
    def from_metric(cls, metric: TensorField) -> "Space":
        return cls(metric.dim, christoffel_from_metric(metric), metric)

    def _cached(self, key: str, compute):
        if key not in self._cache:
            self._cache[key] = compute()
        return self._cache[key]

    def sym(self) -> TensorField:
        """Symmetric part of the connection, Gamma^i_(jk)."""
        return self._cached("sym", lambda: sym_pair(self.gamma, 1, 2))

    def torsion(self) -> TensorField:
        """Antisymmetric part of the connection."""
        return self._cached("torsion", lambda: antisym_pair(self.gamma, 1, 2))

    def trace_sym(self) -> TensorField:
        """The (0,1) contraction Gamma^a_{ja} of the symmetric part."""
        def compute():
            s = self.sym()
            def component(idx):
                total = None
                for a in range(self.dim):
                    term = s[a, idx[0], a]
                    total = term if total is None else jet_add(total, term)
                return total
            return TensorField.build(self.dim, (DOWN,), s.order, component)
        return self._cached("trace_sym", compute)

    def curvature(self) -> TensorField:
        return self._cached("curvature", lambda: curvature_R(self))

    def torsion_cd(self) -> TensorField:
        """Associated covariant derivative of the torsion, slots (i, j, m; n)."""
        return self._cached("torsion_cd",
                            lambda: cov_deriv_assoc(self.torsion(), self))

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "gamma": self.gamma.to_json(),
            "metric": self.metric.to_json() if self.metric is not None else None,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Space":
        metric = obj.get("metric")
        return cls(int(obj["dim"]), TensorField.from_json(obj["gamma"]),
                   TensorField.from_json(metric) if metric is not None else None)


def split_connection(s: Space) -> tuple[TensorField, TensorField]:
    """Symmetric part and torsion; their sum reassembles the connection."""
    return s.sym(), s.torsion()


def _cov_deriv(a: TensorField, dim: int,
               up_term, down_term) -> TensorField:
    """Shared skeleton: comma derivative plus one correction per slot.

    up_term(i, alpha, k) and down_term(slot_index, alpha, k) supply the
    connection coefficient multiplying a with slot replaced by alpha, for
    derivative direction k.  The derivative direction becomes a trailing
    covariant slot.
    """
    rank = a.rank
    out_valence = a.valence + (DOWN,)

    def component(idx: tuple[int, ...]) -> JetScalar:
        base_idx = idx[:rank]
        k = idx[rank]
        total = jet_partial(a[base_idx], k)
        for t in range(rank):
            replaced = list(base_idx)
            for alpha in range(dim):
                replaced[t] = alpha
                value = a[tuple(replaced)]
                if value.is_zero():
                    continue
                if a.valence[t] == UP:
                    coeff = up_term(base_idx[t], alpha, k)
                else:
                    coeff = jet_neg(down_term(base_idx[t], alpha, k))
                total = jet_add(total, jet_mul(coeff, value))
        return total

    return TensorField.build(dim, out_valence, a.order - 1, component)


def cov_deriv_assoc(a: TensorField, s: Space) -> TensorField:
    """Covariant derivative with respect to the symmetric part.

    Works for any valence, one correction term per slot; a scalar reduces
    to the comma derivative.  Contracted non-tensorial objects such as the
    connection trace are handled by treating them formally as fields of
    their apparent valence.
    """
    sym = s.sym()
    return _cov_deriv(a, s.dim,
                      up_term=lambda i, alpha, k: sym[i, alpha, k],
                      down_term=lambda j, alpha, k: sym[alpha, j, k])


def cov_deriv_kind(a: TensorField, s: Space, kind: int) -> TensorField:
    """One of the four covariant-derivative kinds of the full connection.

    The kinds differ in which lower slot of Gamma meets the derivative
    direction: kind 1 uses Gamma^i_{ak} on up slots and Gamma^a_{jk} on
    down slots, kind 2 the transposed pair, kinds 3 and 4 the two mixed
    arrangements.
    """
    g = s.gamma
    ups = {
        1: lambda i, alpha, k: g[i, alpha, k],
        2: lambda i, alpha, k: g[i, k, alpha],
        3: lambda i, alpha, k: g[i, alpha, k],
        4: lambda i, alpha, k: g[i, k, alpha],
    }
    downs = {
        1: lambda j, alpha, k: g[alpha, j, k],
        2: lambda j, alpha, k: g[alpha, k, j],
        3: lambda j, alpha, k: g[alpha, k, j],
        4: lambda j, alpha, k: g[alpha, j, k],
    }
    if kind not in ups:
        raise ValueError(f"kind must be 1, 2, 3 or 4, got {kind}")
    return _cov_deriv(a, s.dim, up_term=ups[kind], down_term=downs[kind])


def curvature_R(s: Space) -> TensorField:
    """Curvature of the symmetric part, slots (i, j, m, n)."""
    sym = s.sym()
    dim = s.dim
    d_sym = [
        TensorField(dim, sym.valence, [jet_partial(c, n) for c in sym.components])
        for n in range(dim)
    ]

    def component(idx: tuple[int, ...]) -> JetScalar:
        i, j, m, n = idx
        total = jet_add(d_sym[n][i, j, m], jet_neg(d_sym[m][i, j, n]))
        for alpha in range(dim):
            total = jet_add(total, jet_mul(sym[alpha, j, m], sym[i, alpha, n]))
            total = jet_add(total, jet_neg(jet_mul(sym[alpha, j, n], sym[i, alpha, m])))
        return total

    return TensorField.build(dim, (UP, DOWN, DOWN, DOWN), sym.order - 1, component)


def torsion_square_terms(s: Space) -> tuple[TensorField, TensorField, TensorField]:
    """The three quadratic torsion contractions entering the K family.

    Returns (T^a_{jm} T^i_{an}, T^a_{jn} T^i_{am}, T^a_{mn} T^i_{aj}),
    each with slots (i, j, m, n).
    """
    t = s.torsion()
    dim = s.dim

    def build(pairing):
        def component(idx):
            total = None
            for alpha in range(dim):
                x, y = pairing(idx, alpha)
                term = jet_mul(x, y)
                total = term if total is None else jet_add(total, term)
            return total
        return TensorField.build(dim, (UP, DOWN, DOWN, DOWN), t.order, component)

    v_term = build(lambda idx, a: (t[a, idx[1], idx[2]], t[idx[0], a, idx[3]]))
    vp_term = build(lambda idx, a: (t[a, idx[1], idx[3]], t[idx[0], a, idx[2]]))
    w_term = build(lambda idx, a: (t[a, idx[2], idx[3]], t[idx[0], a, idx[1]]))
    return v_term, vp_term, w_term


def curvature_K(s: Space, u: Fraction | int, up: Fraction | int,
                v: Fraction | int, vp: Fraction | int,
                w: Fraction | int) -> TensorField:
    """Member of the five-parameter curvature family.

    K = R + u T^i_{jm;n} + u' T^i_{jn;m} + v T^a_{jm}T^i_{an}
      + v' T^a_{jn}T^i_{am} + w T^a_{mn}T^i_{aj},
    with ; the associated covariant derivative.
    """
    cd = s.torsion_cd()
    cd_swapped = transpose(cd, (0, 1, 3, 2))
    v_term, vp_term, w_term = torsion_square_terms(s)
    total = s.curvature()
    for coeff, tensor in ((u, cd), (up, cd_swapped), (v, v_term),
                          (vp, vp_term), (w, w_term)):
        if coeff:
            total = tensor_add(total, tensor_scale(coeff, tensor))
    return total


def _invert_jet_matrix(rows: list[list[JetScalar]], dim: int, order: int) -> list[list[JetScalar]]:
    """Gauss-Jordan inverse of an N x N matrix of jets.

    Pivots need a nonzero value at the base point; permutation handles
    zero leading entries, and total failure means the matrix is singular
    at the base point.
    """
    n = len(rows)
    a = [list(r) for r in rows]
    inv = [[JetScalar.constant(dim, order, 1) if i == j else JetScalar.zero(dim, order)
            for j in range(n)] for i in range(n)]
    for col in range(n):
        pivot = next((r for r in range(col, n)
                      if value_at_base(a[r][col]) != 0), None)
        if pivot is None:
            raise SingularMetricError("matrix of jets is singular at the base point")
        a[col], a[pivot] = a[pivot], a[col]
        inv[col], inv[pivot] = inv[pivot], inv[col]
        scale = jet_inverse(a[col][col])
        a[col] = [jet_mul(scale, x) for x in a[col]]
        inv[col] = [jet_mul(scale, x) for x in inv[col]]
        for r in range(n):
            if r == col:
                continue
            factor = a[r][col]
            if factor.is_zero():
                continue
            a[r] = [jet_add(x, jet_neg(jet_mul(factor, y)))
                    for x, y in zip(a[r], a[col])]
            inv[r] = [jet_add(x, jet_neg(jet_mul(factor, y)))
                      for x, y in zip(inv[r], inv[col])]
    return inv


def christoffel_from_metric(g: TensorField) -> TensorField:
    """Connection coefficients of a possibly non-symmetric metric.

    Gamma_{i.jk} = (g_{ji,k} - g_{jk,i} + g_{ik,j}) / 2 raised through the
    inverse h of the full metric in the convention h^{ia} g_{ja} = d^i_j.
    A non-symmetric g generically yields a non-symmetric connection.
    """
    if g.valence != (DOWN, DOWN):
        raise ValueError("metric must have valence (down, down)")
    dim = g.dim

    # h^{ia} g_{ja} = delta^i_j: invert M[j][a] = g[j, a], then h rows are
    # the solutions of M x = e_i
    m_rows = [[g[j, a] for a in range(dim)] for j in range(dim)]
    try:
        inv = _invert_jet_matrix(m_rows, dim, g.order)
    except SingularMetricError:
        raise SingularMetricError("metric is singular at the base point") from None
    # inv is M^{-1} with inv[a][i] solving sum_a g[j,a] h[i,a] = delta: take
    # h[i][a] = inv[a][i]
    h = [[inv[a][i] for a in range(dim)] for i in range(dim)]

    dg = [TensorField(dim, g.valence, [jet_partial(c, k) for c in g.components])
          for k in range(dim)]
    half = Fraction(1, 2)

    def lowered(i, j, k):
        term = jet_add(dg[k][j, i], jet_neg(dg[i][j, k]))
        term = jet_add(term, dg[j][i, k])
        return jet_scale(half, term)

    def component(idx):
        i, j, k = idx
        total = None
        for alpha in range(dim):
            term = jet_mul(h[i][alpha], lowered(alpha, j, k))
            total = term if total is None else jet_add(total, term)
        return total

    return TensorField.build(dim, GAMMA_VALENCE, g.order - 1, component)


def random_connection(dim: int, order: int, seed: int,
                      torsion_free: bool = False) -> Space:
    """Space with independently drawn small-rational connection jets."""
    rng = random.Random(seed * 9176 + dim * 37 + order)
    from .mapping import random_jet  # deferred: mapping depends on geometry

    gamma = TensorField.build(
        dim, GAMMA_VALENCE, order, lambda idx: random_jet(rng, dim, order))
    space = Space(dim, gamma)
    if torsion_free:
        space = Space(dim, space.sym())
    return space


def curvature_family_span(dim: int, instances: int = 10, seed: int = 0,
                          order: int = 2) -> int:
    """Span dimension of the five non-R coefficient tensors of the K family.

    Each of the five tensors is flattened at the base point on `instances`
    random connections and the concatenated vectors are ranked exactly.
    Torsion-free draws would be degenerate and are not used.
    """
    if instances < 1:
        raise ValueError("instances must be at least 1")
    rows: list[list[Fraction]] = [[] for _ in range(5)]
    for trial in range(instances):
        s = random_connection(dim, order, seed * 1009 + trial)
        cd = s.torsion_cd()
        tensors = (cd, transpose(cd, (0, 1, 3, 2))) + torsion_square_terms(s)
        for row, tensor in zip(rows, tensors):
            row.extend(flatten_at_base(tensor))
    return rank_exact(RationalMatrix.from_rows(rows))
