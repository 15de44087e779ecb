"""Finite partially ordered state spaces.

A :class:`Poset` stores its elements in a fixed order-consistent enumeration
(a linear extension), so the zeta matrix is upper unitriangular and its
inverse, the Mobius matrix, is integer valued.  Both matrices are computed
exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    CycleError,
    DimensionMismatch,
    DimensionTooLarge,
    DuplicateLabel,
    UnknownState,
)

DENSE_CUBE_LIMIT = 14   # dense relation matrices only up to 2^14 states
LAZY_CUBE_LIMIT = 20


class Poset:
    """Finite poset with an order-consistent enumeration.

    ``elements[i]`` is the i-th state e_{i+1}; ``leq[i, j]`` is True iff
    ``elements[i]`` precedes ``elements[j]``.  The enumeration is a linear
    extension: ``leq[i, j]`` implies ``i <= j``.  Instances are immutable.
    """

    def __init__(self, elements, leq, cube_dim=None):
        leq = np.asarray(leq, dtype=bool)
        m = len(elements)
        if leq.shape != (m, m):
            raise DimensionMismatch(f"relation must be {m}x{m}, got {leq.shape}")
        self.elements = tuple(elements)
        leq = leq.copy()
        leq.flags.writeable = False
        self.leq = leq
        self.cube_dim = cube_dim
        self._index = {e: i for i, e in enumerate(self.elements)}
        if len(self._index) != m:
            raise DuplicateLabel("duplicate state labels")
        lower = np.tril(leq, -1)
        if lower.any():
            i, j = np.argwhere(lower)[0]
            raise CycleError(
                f"enumeration is not a linear extension at {elements[int(i)]!r}, "
                f"{elements[int(j)]!r}"
            )

    @property
    def size(self):
        return len(self.elements)

    def index(self, e):
        try:
            return self._index[e]
        except KeyError:
            raise UnknownState(f"unknown state {e!r}") from None

    def contains(self, e):
        return e in self._index

    def leq_labels(self, x, y):
        return bool(self.leq[self.index(x), self.index(y)])

    def __repr__(self):
        return f"Poset({self.size} states)"


@dataclass(frozen=True)
class ZetaMobius:
    """Zeta matrix C and its exact integer inverse Cinv (the Mobius matrix)."""

    C: np.ndarray
    Cinv: np.ndarray

    def __post_init__(self):
        for a in (self.C, self.Cinv):
            a.flags.writeable = False


def _transitive_closure(rel):
    """Reflexive-transitive closure of a boolean relation matrix."""
    m = rel.shape[0]
    closure = rel | np.eye(m, dtype=bool)
    while True:
        nxt = closure | (closure @ closure)
        if (nxt == closure).all():
            return closure
        closure = nxt


def _topological_order(rel, m):
    """Deterministic topological sort, ties broken by input position."""
    placed = np.zeros(m, dtype=bool)
    order = []
    strict = rel & ~np.eye(m, dtype=bool)
    for _ in range(m):
        for i in range(m):
            if not placed[i] and not (strict[:, i] & ~placed).any():
                order.append(i)
                placed[i] = True
                break
    return order


def build_poset(labels, relations):
    """Build a poset from labels and ordered pairs (x, y) meaning x < y.

    The stored relation is the reflexive-transitive closure of ``relations``;
    the enumeration is a deterministic topological sort with ties broken by
    input order.  Raises CycleError (with a two-cycle witness) when the
    closure violates antisymmetry, DuplicateLabel on repeated labels.
    """
    labels = list(labels)
    if len(set(labels)) != len(labels):
        seen = set()
        for lab in labels:
            if lab in seen:
                raise DuplicateLabel(f"duplicate label {lab!r}")
            seen.add(lab)
    m = len(labels)
    pos = {lab: i for i, lab in enumerate(labels)}
    rel = np.eye(m, dtype=bool)
    for x, y in relations:
        if x not in pos:
            raise UnknownState(f"relation endpoint {x!r} is not a declared label")
        if y not in pos:
            raise UnknownState(f"relation endpoint {y!r} is not a declared label")
        rel[pos[x], pos[y]] = True
    closure = _transitive_closure(rel)
    sym = closure & closure.T & ~np.eye(m, dtype=bool)
    if sym.any():
        i, j = np.argwhere(sym)[0]
        raise CycleError(
            f"antisymmetry violated: {labels[int(i)]!r} and {labels[int(j)]!r} "
            "are mutually related",
            witness=(labels[int(i)], labels[int(j)]),
        )
    order = _topological_order(closure, m)
    elements = [labels[i] for i in order]
    leq = closure[np.ix_(order, order)]
    return Poset(elements, leq)


def _invert_unitriangular(cf, block=256):
    """Blocked back-substitution for an upper unitriangular float matrix.

    Processing bottom-up keeps the invariant that x[lo:, lo:] inverts
    cf[lo:, lo:]; each new block needs one small row loop plus two matrix
    products, so large instances run at matrix-multiply speed.
    """
    m = cf.shape[0]
    x = np.eye(m, dtype=np.float64)
    hi = m
    while hi > 0:
        lo = max(0, hi - block)
        for i in range(hi - 2, lo - 1, -1):
            row = cf[i, i + 1:hi]
            if row.any():
                x[i, i + 1:hi] -= row @ x[i + 1:hi, i + 1:hi]
        if hi < m:
            x[lo:hi, hi:] = -(
                x[lo:hi, lo:hi] @ cf[lo:hi, hi:] @ x[hi:, hi:]
            )
        hi = lo
    return x


def zeta_mobius(p):
    """Zeta matrix C(i,j) = 1 iff e_i <= e_j, and its exact integer inverse.

    Back-substitution on the unitriangular C runs in float64, which is exact
    for integers below 2**53; the result is certified by a magnitude bound
    plus an exact product check C Cinv = I, and any failure falls back to
    arbitrary-precision integers.
    """
    if isinstance(p, LazyCubePoset):
        raise DimensionTooLarge(
            f"dense zeta/Mobius matrices are only available up to dimension "
            f"{DENSE_CUBE_LIMIT}"
        )
    c = p.leq.astype(np.int64)
    m = c.shape[0]
    cf = c.astype(np.float64)
    x = _invert_unitriangular(cf)
    if np.abs(x).max() < 2.0**53:
        # float products are exact while every partial sum stays below 2**53;
        # bound them by max row sum of C times max column sum of |x|.  Under
        # that certificate a single exact product C x = I settles exactness
        # (a right inverse of a square matrix is the inverse).
        magnitude = float(cf.sum(axis=1).max()) * float(np.abs(x).sum(axis=0).max())
        if magnitude < 2.0**53 and not (cf @ x - np.eye(m)).any():
            return ZetaMobius(C=c, Cinv=np.rint(x).astype(np.int64))
    return ZetaMobius(C=c, Cinv=_invert_unitriangular_exact(c))


def _invert_unitriangular_exact(c):
    """Arbitrary-precision integer back-substitution (fallback path)."""
    m = c.shape[0]
    cobj = c.astype(object)
    xobj = np.eye(m, dtype=object)
    for i in range(m - 2, -1, -1):
        xobj[i, :] = xobj[i, :] - cobj[i, i + 1:] @ xobj[i + 1:, :]
    return np.array([[int(v) for v in row] for row in xobj], dtype=np.int64)


def _cube_masks(d):
    """All d-bit masks sorted by (popcount, value); bit i is coordinate i+1."""
    masks = np.arange(2**d, dtype=np.int64)
    weights = np.array([int(v).bit_count() for v in masks], dtype=np.int64)
    order = np.lexsort((masks, weights))
    return masks[order]


def _mask_to_bits(mask, d):
    return tuple((int(mask) >> i) & 1 for i in range(d))


def cube_poset(d):
    """The cube {0,1}^d with coordinatewise order.

    Elements are d-bit tuples enumerated by (weight, numeric value), which is
    a linear extension.  Dense relation matrices are built for d <= 14; for
    14 < d <= 20 a lazy bit-level poset is returned instead.
    """
    if not 1 <= d <= LAZY_CUBE_LIMIT:
        raise DimensionTooLarge(f"cube dimension must be in [1, {LAZY_CUBE_LIMIT}]")
    if d > DENSE_CUBE_LIMIT:
        return LazyCubePoset(d)
    masks = _cube_masks(d)
    elements = [_mask_to_bits(v, d) for v in masks]
    m = len(masks)
    leq = np.zeros((m, m), dtype=bool)
    block = max(1, 2**22 // m)
    for lo in range(0, m, block):
        hi = min(lo + block, m)
        leq[lo:hi, :] = (masks[lo:hi, None] & masks[None, :]) == masks[lo:hi, None]
    return Poset(elements, leq, cube_dim=d)


class LazyCubePoset:
    """Cube poset for 14 < d <= 20: bit-level comparisons, no dense matrices."""

    def __init__(self, d):
        self.d = d
        self.cube_dim = d
        self._masks = _cube_masks(d)
        self._pos = np.empty(2**d, dtype=np.int64)
        self._pos[self._masks] = np.arange(2**d)

    @property
    def size(self):
        return 2**self.d

    def element(self, i):
        return _mask_to_bits(self._masks[i], self.d)

    def index(self, e):
        mask = _bits_to_mask(e, self.d)
        return int(self._pos[mask])

    def leq_labels(self, x, y):
        mx = _bits_to_mask(x, self.d)
        my = _bits_to_mask(y, self.d)
        return (mx & my) == mx

    @property
    def leq(self):
        raise DimensionTooLarge(
            f"dense relation matrix unavailable above dimension {DENSE_CUBE_LIMIT}"
        )

    def __repr__(self):
        return f"LazyCubePoset(d={self.d})"


def _bits_to_mask(e, d):
    if len(e) != d:
        raise UnknownState(f"expected a {d}-bit state, got {e!r}")
    mask = 0
    for i, b in enumerate(e):
        if b not in (0, 1):
            raise UnknownState(f"non-binary coordinate in {e!r}")
        mask |= int(b) << i
    return mask


def weight(e):
    """Number of set coordinates of a cube state."""
    return sum(int(b) for b in e)


def up_set(p, e):
    """All states e' with e <= e', in enumeration order."""
    if isinstance(p, LazyCubePoset):
        m = _bits_to_mask(e, p.d)
        return tuple(
            p.element(i)
            for i in range(p.size)
            if (m & int(p._masks[i])) == m
        )
    i = p.index(e)
    return tuple(p.elements[j] for j in np.flatnonzero(p.leq[i, :]))


def down_set(p, e):
    """All states e' with e' <= e, in enumeration order."""
    if isinstance(p, LazyCubePoset):
        m = _bits_to_mask(e, p.d)
        return tuple(
            p.element(i)
            for i in range(p.size)
            if (int(p._masks[i]) & m) == int(p._masks[i])
        )
    i = p.index(e)
    return tuple(p.elements[j] for j in np.flatnonzero(p.leq[:, i]))


def _greatest(p, mask):
    """Index of the greatest element of the masked subset, or None."""
    members = np.flatnonzero(mask)
    for k in members:
        if p.leq[mask, k].all():
            return int(k)
    return None


def _least(p, mask):
    members = np.flatnonzero(mask)
    for k in members:
        if p.leq[k, mask].all():
            return int(k)
    return None


def meet_join(p, x, y):
    """(meet, join) of x and y; each side is None when it does not exist."""
    if getattr(p, "cube_dim", None) is not None:
        d = p.cube_dim
        mx = _bits_to_mask(x, d)
        my = _bits_to_mask(y, d)
        if isinstance(p, LazyCubePoset):
            return _mask_to_bits(mx & my, d), _mask_to_bits(mx | my, d)
        # still resolve through the index so unknown states raise
        p.index(x), p.index(y)
        return _mask_to_bits(mx & my, d), _mask_to_bits(mx | my, d)
    i, j = p.index(x), p.index(y)
    lower = p.leq[:, i] & p.leq[:, j]
    upper = p.leq[i, :] & p.leq[j, :]
    mi = _greatest(p, lower)
    ji = _least(p, upper)
    meet = p.elements[mi] if mi is not None else None
    join = p.elements[ji] if ji is not None else None
    return meet, join


def is_lattice(p):
    """True iff every pair of states has both a meet and a join."""
    if getattr(p, "cube_dim", None) is not None:
        return True
    for i in range(p.size):
        for j in range(i + 1, p.size):
            x, y = p.elements[i], p.elements[j]
            meet, join = meet_join(p, x, y)
            if meet is None or join is None:
                return False
    return True


def maximal_indices(p):
    """Indices of maximal elements (no strictly greater state)."""
    strict = p.leq & ~np.eye(p.size, dtype=bool)
    return [i for i in range(p.size) if not strict[i, :].any()]


def minimal_indices(p):
    strict = p.leq & ~np.eye(p.size, dtype=bool)
    return [i for i in range(p.size) if not strict[:, i].any()]


def is_total_order(p):
    comparable = p.leq | p.leq.T
    return bool(comparable.all())
