"""Cube chain generators: nearest-neighbor walks, powers, g+ transforms.

The nearest-neighbor walk flips coordinate i up with rate alpha_i and down
with rate beta_i; it is reversible with a product-form stationary law.  The
pairwise g+ transform moves probability mass from an incomparable pair onto
its meet and join, which increases the row law in the supermodular order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain import validate_chain
from .errors import (
    DimensionMismatch,
    IncomparableRequired,
    InsufficientMass,
    NegativeHoldingProbability,
    NotLattice,
    NumericalFailure,
)
from .poset import cube_poset, meet_join


@dataclass(frozen=True)
class CubeWalkParams:
    """Flip rates of a nearest-neighbor cube walk.

    alpha[i] is the 0->1 rate of coordinate i+1, beta[i] the 1->0 rate; all
    must be strictly positive.  ``admissible`` flags sum(alpha+beta) <= 1,
    under which the walk is Mobius monotone in both directions.
    """

    d: int
    alpha: tuple
    beta: tuple

    def __post_init__(self):
        if len(self.alpha) != self.d or len(self.beta) != self.d:
            raise DimensionMismatch(
                f"alpha and beta must have length d={self.d}"
            )
        if any(a <= 0 for a in self.alpha) or any(b <= 0 for b in self.beta):
            raise NegativeHoldingProbability(
                "flip rates must be strictly positive"
            )

    @property
    def admissible(self):
        return sum(self.alpha) + sum(self.beta) <= 1.0

    @property
    def rates(self):
        return np.asarray(self.alpha, dtype=float) + np.asarray(self.beta, dtype=float)


@dataclass(frozen=True)
class GPlusMove:
    """One pairwise g+ move: shift ``kappa`` from {x, y} to {meet, join} in ``row``."""

    row: object
    x: object
    y: object
    kappa: float


def nearest_neighbor_walk(params, nu=None):
    """Single-coordinate-flip walk on the d-cube.

    Rejects parameter sets that drive any holding probability negative (with
    the offending state as witness).
    """
    p = cube_poset(params.d)
    m = p.size
    mat = np.zeros((m, m))
    alpha = params.alpha
    beta = params.beta
    for i, e in enumerate(p.elements):
        for k in range(params.d):
            flipped = list(e)
            flipped[k] = 1 - flipped[k]
            j = p.index(tuple(flipped))
            mat[i, j] = beta[k] if e[k] else alpha[k]
        stay = 1.0 - mat[i].sum()
        if stay < -1e-12:
            raise NegativeHoldingProbability(
                f"holding probability at state {e!r} is {stay!r}"
            )
        mat[i, i] = max(stay, 0.0)
    return validate_chain(mat, p, nu=nu)


def cube_stationary_product(params):
    """Product-form stationary law of the nearest-neighbor walk.

    pi(e) multiplies alpha_i/(alpha_i+beta_i) over set coordinates and
    beta_i/(alpha_i+beta_i) over unset ones; exact closed form used as an
    oracle for the dense solver.
    """
    p = cube_poset(params.d)
    alpha = np.asarray(params.alpha, dtype=float)
    beta = np.asarray(params.beta, dtype=float)
    ratio_one = alpha / (alpha + beta)
    ratio_zero = beta / (alpha + beta)
    pi = np.empty(p.size)
    for i, e in enumerate(p.elements):
        bits = np.asarray(e)
        pi[i] = np.prod(np.where(bits == 1, ratio_one, ratio_zero))
    return pi


def power_chain(c, k):
    """k-step kernel P^k (stationary law unchanged)."""
    if k < 1:
        raise DimensionMismatch(f"power must be >= 1, got {k}")
    return validate_chain(
        np.linalg.matrix_power(c.P, k), c.poset, nu=c.nu, row_tol=1e-10
    )


def gplus_transform(c, move, row_tol=1e-12):
    """Apply one pairwise g+ move to a single row of the kernel.

    Requires x and y incomparable with an existing meet and join, and at
    least ``kappa`` mass on each of x and y in the row.  Row mass is
    conserved exactly.
    """
    p = c.poset
    r = p.index(move.row)
    xi = p.index(move.x)
    yi = p.index(move.y)
    if move.kappa < 0:
        raise InsufficientMass(f"mass moved must be >= 0, got {move.kappa!r}")
    if p.leq[xi, yi] or p.leq[yi, xi]:
        raise IncomparableRequired(
            f"{move.x!r} and {move.y!r} are comparable; the transform needs "
            "an incomparable pair"
        )
    meet, join = meet_join(p, move.x, move.y)
    if meet is None or join is None:
        raise NotLattice(
            f"{move.x!r} and {move.y!r} lack a meet or join; the transform "
            "needs a lattice"
        )
    kappa = float(move.kappa)
    if kappa > min(c.P[r, xi], c.P[r, yi]) + 1e-15:
        raise InsufficientMass(
            f"kappa {kappa!r} exceeds available mass "
            f"min({c.P[r, xi]!r}, {c.P[r, yi]!r}) in row {move.row!r}"
        )
    mat = c.P.copy()
    mat[r, xi] -= kappa
    mat[r, yi] -= kappa
    mat[r, p.index(join)] += kappa
    mat[r, p.index(meet)] += kappa
    return validate_chain(mat, p, nu=c.nu, row_tol=row_tol)


def axis_moves(kappa):
    """The four symmetry-axis g+ moves of the 3-cube walk.

    Rows (0,0,0), (0,1,0), (1,0,1), (1,1,1) are fixed by the coordinate swap
    1<->3; each is transformed through the incomparable neighbour pair that
    the swap exchanges.
    """
    return (
        GPlusMove(row=(0, 0, 0), x=(1, 0, 0), y=(0, 0, 1), kappa=kappa),
        GPlusMove(row=(0, 1, 0), x=(1, 1, 0), y=(0, 1, 1), kappa=kappa),
        GPlusMove(row=(1, 0, 1), x=(1, 0, 0), y=(0, 0, 1), kappa=kappa),
        GPlusMove(row=(1, 1, 1), x=(1, 1, 0), y=(0, 1, 1), kappa=kappa),
    )


def axis_transformed_walk(params, kappa, nu=None):
    """3-cube walk with the four symmetry-axis rows g+ transformed."""
    if params.d != 3:
        raise DimensionMismatch("the symmetry-axis transform is defined on the 3-cube")
    c = nearest_neighbor_walk(params, nu=nu)
    for move in axis_moves(kappa):
        c = gplus_transform(c, move)
    return c


@dataclass(frozen=True)
class SupermodularWitnessReport:
    """Minimum of Ef(second law) - Ef(first law) over sampled supermodular f."""

    min_difference: float
    trials: int
    worst_function: np.ndarray | None

    def __post_init__(self):
        if self.worst_function is not None:
            self.worst_function.flags.writeable = False


def is_supermodular(f, p):
    """Exhaustive pair check of f(meet) + f(join) >= f(x) + f(y)."""
    m = p.size
    for i in range(m):
        for j in range(i + 1, m):
            meet, join = meet_join(p, p.elements[i], p.elements[j])
            if meet is None or join is None:
                raise NotLattice("supermodularity needs a lattice")
            if (
                f[p.index(meet)] + f[p.index(join)]
                < f[i] + f[j] - 1e-12 * max(1.0, np.abs(f).max())
            ):
                return False
    return True


def _random_supermodular(p, d, rng):
    """Sample one verified supermodular function on the cube.

    Base: nonneg combinations of products of per-coordinate nondecreasing
    functions (supermodular by construction) plus a modular part; optional
    noise is repaired by raising join values until the exhaustive pair check
    passes.
    """
    m = p.size
    f = np.zeros(m)
    terms = rng.integers(1, 4)
    for _ in range(terms):
        w = rng.uniform(0.2, 1.0)
        u0 = rng.uniform(0.0, 1.0, size=d)
        u1 = u0 + rng.uniform(0.0, 1.0, size=d)
        for i, e in enumerate(p.elements):
            prod = 1.0
            for k in range(d):
                prod *= u1[k] if e[k] else u0[k]
            f[i] += w * prod
    mod = rng.normal(0.0, 0.5, size=d + 1)
    for i, e in enumerate(p.elements):
        f[i] += mod[0] + sum(mod[1 + k] * e[k] for k in range(d))
    if rng.random() < 0.5:
        f += rng.normal(0.0, 0.05, size=m)
        for _ in range(4 * m):
            fixed = True
            for i in range(m):
                for j in range(i + 1, m):
                    meet, join = meet_join(p, p.elements[i], p.elements[j])
                    gap = f[i] + f[j] - f[p.index(meet)] - f[p.index(join)]
                    if gap > 0:
                        f[p.index(join)] += gap
                        fixed = False
            if fixed:
                break
    scale = np.abs(f).max()
    if scale > 0:
        f = f / scale
    return f


def supermodular_order_witness(p1_row, p2_row, poset, trials, seed):
    """Sample verified supermodular functions and compare expectations.

    Reports the minimum of Ef(p2) - Ef(p1) over the sampled functions; a g+
    transformed row must never drop below -1e-12 times the scale.  Functions
    are normalized to unit max magnitude, and every candidate passes the
    exhaustive pair check before use.
    """
    d = getattr(poset, "cube_dim", None)
    if d is None:
        raise NotLattice(
            "supermodular sampling is implemented for cube lattices only"
        )
    p1 = np.asarray(p1_row, dtype=float)
    p2 = np.asarray(p2_row, dtype=float)
    if p1.shape != (poset.size,) or p2.shape != (poset.size,):
        raise DimensionMismatch("row laws must match the poset size")
    rng = np.random.default_rng(seed)
    worst = np.inf
    worst_f = None
    done = 0
    attempts = 0
    while done < trials:
        attempts += 1
        if attempts > 50 * trials:
            raise NumericalFailure(
                "supermodular sampler rejected too many candidates"
            )
        f = _random_supermodular(poset, d, rng)
        if not is_supermodular(f, poset):
            continue
        done += 1
        diff = float(p2 @ f - p1 @ f)
        if diff < worst:
            worst = diff
            worst_f = f
    return SupermodularWitnessReport(
        min_difference=worst, trials=trials, worst_function=worst_f
    )
