"""Availability chain of an unreliable network on the powerset of nodes.

States are the subsets of nodes currently down.  Groups I of up nodes break
down with rate psi(D u I)/psi(D); groups H of down nodes return with rate
phi(D)/phi(D \\ H).  The continuous-time generator is uniformized into a
discrete-time kernel and fed to the monotonicity/duality/convergence
pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import convergence, duality, monotonicity
from .chain import Chain, StationaryLaw, stationary, validate_chain
from .errors import (
    DimensionTooLarge,
    InputError,
    MissingSubsetValue,
    ZeroGenerator,
)
from .poset import cube_poset, zeta_mobius

PIPELINE_DIM_LIMIT = 14
DEFAULT_MULTIPLIER = 1.05


@dataclass(frozen=True)
class RateFunctions:
    """Positive set functions psi (breakdown) and phi (repair) on P(J).

    Values are indexed by node bitmask (bit i = node i down); both tables
    have length 2^d and must be strictly positive so every rate ratio is
    well defined.
    """

    d: int
    psi: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        m = 2**self.d
        for name, table in (("psi", self.psi), ("phi", self.phi)):
            if table.shape != (m,):
                raise MissingSubsetValue(
                    f"{name} must assign a value to all {m} subsets"
                )
            if not (table > 0).all():
                mask = int(np.flatnonzero(table <= 0)[0])
                raise MissingSubsetValue(
                    f"{name} must be strictly positive; offending subset mask "
                    f"{mask:#b}"
                )
            table.flags.writeable = False


def rates_from_tables(d, psi_table, phi_table):
    """Build RateFunctions from {bitmask: value} mappings (must be complete)."""
    m = 2**d

    def fill(name, mapping):
        out = np.full(m, np.nan)
        for mask, value in mapping.items():
            if not 0 <= int(mask) < m:
                raise MissingSubsetValue(
                    f"{name}[{mask}] is outside the {d}-node powerset"
                )
            out[int(mask)] = float(value)
        missing = np.flatnonzero(np.isnan(out))
        if missing.size:
            raise MissingSubsetValue(
                f"{name} is undefined on subset mask {int(missing[0]):#b}"
            )
        return out

    return RateFunctions(d=d, psi=fill("psi", psi_table), phi=fill("phi", phi_table))


def power_family(d, c):
    """Set function D -> c^|D|."""
    masks = np.arange(2**d)
    sizes = np.array([int(v).bit_count() for v in masks])
    return np.asarray(float(c) ** sizes, dtype=float)


def pernode_family(d, values):
    """Set function D -> product of per-node values over D."""
    values = np.asarray(values, dtype=float)
    if values.shape != (d,):
        raise MissingSubsetValue(f"need {d} per-node values, got {values.shape}")
    out = np.ones(2**d)
    for mask in range(2**d):
        prod = 1.0
        for i in range(d):
            if mask >> i & 1:
                prod *= values[i]
        out[mask] = prod
    return out


@dataclass(frozen=True)
class Generator:
    """Conservative rate matrix on the subset poset (cube enumeration order)."""

    Q: np.ndarray
    d: int

    def __post_init__(self):
        self.Q.flags.writeable = False


def _submasks(mask):
    """Nonempty submasks of ``mask``."""
    sub = mask
    while sub:
        yield sub
        sub = (sub - 1) & mask


def availability_generator(r, single_moves_only=False):
    """Breakdown/repair generator from the rate functions.

    Q(D, D u I) = psi(D u I)/psi(D) for nonempty up groups I, Q(D, D \\ H) =
    phi(D)/phi(D \\ H) for nonempty down groups H; diagonal balances each
    row.  ``single_moves_only`` keeps only |I| = |H| = 1 transitions, the
    regime in which uniformization reproduces the nearest-neighbor walk.
    """
    d = r.d
    if d > PIPELINE_DIM_LIMIT:
        raise DimensionTooLarge(
            f"availability chains are built densely only up to d={PIPELINE_DIM_LIMIT}"
        )
    p = cube_poset(d)
    m = p.size
    masks = [sum(b << i for i, b in enumerate(e)) for e in p.elements]
    pos = {mask: i for i, mask in enumerate(masks)}
    full = 2**d - 1
    q = np.zeros((m, m))
    for a, dmask in enumerate(masks):
        comp = full & ~dmask
        for imask in _submasks(comp):
            if single_moves_only and int(imask).bit_count() != 1:
                continue
            q[a, pos[dmask | imask]] = r.psi[dmask | imask] / r.psi[dmask]
        for hmask in _submasks(dmask):
            if single_moves_only and int(hmask).bit_count() != 1:
                continue
            q[a, pos[dmask & ~hmask]] = r.phi[dmask] / r.phi[dmask & ~hmask]
        q[a, a] = -q[a].sum()
    return Generator(Q=q, d=d)


@dataclass(frozen=True)
class UniformizedChain:
    """Discrete-time embedding P = I + Q/rate, with the rate kept for rescaling."""

    chain: Chain
    rate: float


def uniformize(gen, multiplier=DEFAULT_MULTIPLIER):
    """Uniformize a generator into a row-stochastic kernel.

    The rate is ``multiplier`` times the largest total exit rate; multipliers
    above 1 keep every holding probability strictly positive.  The stationary
    law is preserved: pi Q = 0 iff pi P = pi.
    """
    if multiplier < 1.0:
        raise InputError(f"multiplier must be >= 1, got {multiplier!r}")
    exit_max = float(np.abs(np.diag(gen.Q)).max())
    if exit_max == 0.0:
        raise ZeroGenerator("all transition rates are zero")
    rate = multiplier * exit_max
    p = cube_poset(gen.d)
    mat = np.eye(p.size) + gen.Q / rate
    return UniformizedChain(chain=validate_chain(mat, p), rate=rate)


@dataclass(frozen=True)
class AvailabilityReport:
    """Composite pipeline output; ``stopped_at`` is None on a full run."""

    d: int
    rate: float
    chain: Chain
    law: StationaryLaw
    reports: tuple
    dual: object | None
    residuals: object | None
    curve: object | None
    tail: object | None
    bound: object | None
    stopped_at: str | None


class _Stage:
    """Labels errors with the pipeline stage they escaped from."""

    def __init__(self, name):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and isinstance(exc, Exception):
            exc.stage = self.name
        return False


def availability_pipeline(
    r,
    multiplier=DEFAULT_MULTIPLIER,
    direction="down",
    horizon=200,
    stop_below=convergence.STOP_BELOW_DEFAULT,
    single_moves_only=False,
):
    """Generator -> uniformize -> stationary -> monotonicity -> dual -> curves.

    The initial law is the point mass at the empty down-set (all servers up),
    which always satisfies the start condition of the down-direction dual.
    When the requested direction's reversed-kernel monotonicity fails, the
    pipeline stops after the monotonicity stage and returns the verdicts.
    Errors escaping a stage carry the stage name on their ``stage``
    attribute.
    """
    with _Stage("generator"):
        gen = availability_generator(r, single_moves_only=single_moves_only)
    with _Stage("uniformize"):
        uni = uniformize(gen, multiplier=multiplier)
    nu = np.zeros(uni.chain.size)
    nu[0 if direction == "down" else uni.chain.size - 1] = 1.0
    c = uni.chain.with_nu(nu)
    with _Stage("stationary"):
        law = stationary(c)
    zm = zeta_mobius(c.poset)
    from .chain import reverse

    with _Stage("monotonicity"):
        rev = reverse(c, law)
        reports = (
            monotonicity.mobius_monotone_down(c, zm),
            monotonicity.mobius_monotone_up(c, zm),
            monotonicity.mobius_monotone_down(rev, zm),
            monotonicity.mobius_monotone_up(rev, zm),
        )
    rev_ok = reports[2] if direction == "down" else reports[3]
    if not rev_ok.verdict:
        return AvailabilityReport(
            d=r.d,
            rate=uni.rate,
            chain=c,
            law=law,
            reports=reports,
            dual=None,
            residuals=None,
            curve=None,
            tail=None,
            bound=None,
            stopped_at="monotonicity",
        )
    with _Stage("dual"):
        dual = duality.build_ssd(c, law, zm, direction=direction)
        link = duality.build_link(law, zm, direction=direction)
        residuals = duality.verify_duality(link, c, dual)
    with _Stage("convergence"):
        curve = convergence.separation_curve(c, law, horizon, stop_below=stop_below)
        tail = convergence.absorption_tail(dual, curve.horizon)
        bound = convergence.sst_bound_check(curve, tail)
    return AvailabilityReport(
        d=r.d,
        rate=uni.rate,
        chain=c,
        law=law,
        reports=reports,
        dual=dual,
        residuals=residuals,
        curve=curve,
        tail=tail,
        bound=bound,
        stopped_at=None,
    )
