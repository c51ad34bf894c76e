"""Taylor coefficients of the distinguished string-equation solution.

The reduced hierarchy of order n has a unique (up to the conventions
below) formal solution W picked out by the string equation.  Its
Taylor coefficients in the x variables are read off the hierarchy
tables: writing m = (i_1+..+i_k)/(n+1), the symmetric derivative

    f_{i1..ik}(0) = (n-1)^m * [coefficient of (u_{n-1,2})^m
                               in the reduced equation for i1..ik]

and the monomial x_{i1}..x_{ik} of W carries f/(product of index
multiplicities!).  The admissible index multisets split by genus:
m = 2g - 2 + k with g a nonnegative integer, and the genus-g part is
quasihomogeneous: sum(n+1-i_j) = (n+1)(2-2g) on every monomial.

String equation.  In these variables the string equation reads

    d_1 W = (1/2) sum_{i+j=n} i j x_i x_j
            - sum_{i>=1, n does not divide i} ((i+n)/i) x_{i+n} d_i W,

with W(0) = 0 and d_i W(0) = 0 for i <= n.  (A transport term as
printed elsewhere with weight (i+n) instead of (i+n)/i, or with the
opposite sign, is inconsistent with the hierarchy tables: the
genus-0 cubic-stratum residual only cancels with the weights above,
and the calibration tests pin this down against independently
recursed intersection numbers.)  `string_residual` evaluates the
defect of a truncated W against this operator; it vanishes
identically on every stratum both sides cover.

Single-index (linear) terms of W sit outside the k >= 2 coefficient
formula; the string equation determines them from the pair terms,
and `string_linear_terms` extrapolates exactly that way.

Correlator normalization.  Insertion records (k, m) with 1 <= k < n
map to the linear index j = m n + k, and the insertion's descent
factor is the product c_{k,m} = k (n+k) (2n+k) ... (mn+k).  The
series convention is calibrated so that the three-point genus-0
correlator of the first insertion is +1; together with the string
residual vanishing this fixes

    correlator = (-1)^(s+1) * f_{j1..js}(0) / (c_1 ... c_s)

("calibrated").  A bare index factor mn+k in place of c_{k,m} first
diverges from the descent product at m = 2, where it is ruled out by
the independently recursed intersection numbers.  The conventions
"map" ((-1)^s f/prod c) and "plain" (f/prod c) are selectable for
comparison; they disagree with the calibrated one by a global sign
on odd/even insertion counts respectively.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, NamedTuple, Optional, Tuple

from .errors import BoundError, DomainError
from .gd import GDContext
from .jets import TSHIFT, pack
from .rationals import Q, QZERO

log = logging.getLogger(__name__)

XMonomial = Tuple[int, ...]           # sorted ascending variable indices

SIGN_CONVENTIONS = ("calibrated", "map", "plain")


class WittenKey(NamedTuple):
    """Hierarchy order n and a sorted index multiset (k >= 2 entries)."""

    n: int
    indices: Tuple[int, ...]


class CorrelatorKey(NamedTuple):
    """A genus-tagged multiset of insertion records (k, m)."""

    n: int
    g: int
    insertions: Tuple[Tuple[int, int], ...]


def make_witten_key(n: int, indices: Iterable[int]) -> WittenKey:
    idx = tuple(sorted(int(i) for i in indices))
    if n < 2:
        raise DomainError(f"hierarchy order must be >= 2, got {n}")
    if len(idx) < 2 or any(i < 1 for i in idx):
        raise DomainError(f"need >= 2 positive indices, got {idx}")
    return WittenKey(n, idx)


def admissible_genus(n: int, indices: Tuple[int, ...]) -> Optional[int]:
    """The genus forced by the grading, or None when none exists.

    Admissible iff (n+1) | sum(i), and m = sum(i)/(n+1) makes
    g = (m - k + 2)/2 a nonnegative integer.
    """
    total = sum(indices)
    if total % (n + 1):
        return None
    m = total // (n + 1)
    k = len(indices)
    if (m + k) % 2 or m < k - 2:
        return None
    return (m - k + 2) // 2


def witten_coefficient(key: WittenKey, ctx: GDContext) -> "Q":
    """The symmetric derivative f_{i1..ik}(0); 0 for inadmissible keys."""
    n, indices = key
    if ctx.n != n:
        raise DomainError(f"context order {ctx.n} does not match key order {n}")
    if admissible_genus(n, indices) is None:
        return QZERO
    m = sum(indices) // (n + 1)
    coeff = ctx.n_coeff(indices, [(n - 1, 2)] * m)
    return coeff * (n - 1) ** m if coeff else QZERO


@dataclass
class GradedSeries:
    """A sparse truncated series of W in the x variables.

    genus of None marks a genus-mixed series (e.g. a residual);
    kmax of None marks a series complete in every factor count
    (e.g. the small-phase-space polynomial).
    """

    n: int
    genus: Optional[int]
    kmax: Optional[int]
    terms: Dict[XMonomial, "Q"] = field(default_factory=dict)

    def check_quasihomogeneous(self) -> None:
        """Every monomial obeys sum(n+1-i) = (n+1)(2-2g), exactly."""
        if self.genus is None:
            return
        target = (self.n + 1) * (2 - 2 * self.genus)
        for m in self.terms:
            if sum(self.n + 1 - i for i in m) != target:
                raise RuntimeError(f"quasihomogeneity broken at {m}")

    def restrict(self, max_index: int) -> "GradedSeries":
        """Drop every monomial containing x_i with i > max_index."""
        kept = {m: c for m, c in self.terms.items()
                if not m or m[-1] <= max_index}
        return GradedSeries(self.n, self.genus, self.kmax, kept)


def _multisets(total: int, k: int, cap: int | None = None):
    """Ascending k-tuples of positive integers summing to total."""
    if cap is None:
        cap = total

    def rec(remaining, slots, minimum, acc):
        if slots == 0:
            if remaining == 0:
                yield tuple(acc)
            return
        for i in range(minimum, remaining - slots + 2):
            acc.append(i)
            yield from rec(remaining - i, slots - 1, i, acc)
            acc.pop()

    yield from rec(total, k, 1, [])


def witten_truncation(n: int, g_max: int, k_max: int, ctx: GDContext) -> List[GradedSeries]:
    """W^0 .. W^{g_max}, complete through k_max factors each.

    The monomial for an index multiset carries f times the number of
    its orderings divided by k!, i.e. f / prod(multiplicity!).
    """
    if k_max < 2:
        raise DomainError(f"k_max must be >= 2, got {k_max}")
    if g_max < 0:
        raise DomainError(f"g_max must be >= 0, got {g_max}")
    out = []
    for g in range(g_max + 1):
        series = GradedSeries(n, g, k_max)
        for k in range(2, k_max + 1):
            m = 2 * g - 2 + k
            if m < 1:
                continue
            total = (n + 1) * m
            for idx in _multisets(total, k):
                f = witten_coefficient(WittenKey(n, idx), ctx)
                if not f:
                    continue
                denom = 1
                run = 1
                for a in range(1, k):
                    run = run + 1 if idx[a] == idx[a - 1] else 1
                    denom *= run
                series.terms[idx] = f / denom
        series.check_quasihomogeneous()
        out.append(series)
    return out


def _x_diff(terms: Dict[XMonomial, "Q"], i: int) -> Dict[XMonomial, "Q"]:
    out: Dict[XMonomial, "Q"] = {}
    for m, c in terms.items():
        mult = m.count(i)
        if mult:
            pos = m.index(i)
            nm = m[:pos] + m[pos + 1:]
            prev = out.get(nm)
            add = c * mult
            out[nm] = add if prev is None else prev + add
    return {m: c for m, c in out.items() if c}


def _quadratic_source(n: int) -> Dict[XMonomial, "Q"]:
    # (1/2) sum over ordered pairs i+j=n of i*j*x_i*x_j
    out: Dict[XMonomial, "Q"] = {}
    for i in range(1, n):
        j = n - i
        if i < j:
            out[(i, j)] = Q(i * j)
        elif i == j:
            out[(i, i)] = Q(i * i, 2)
    return out


def string_residual(n: int, parts: Iterable[GradedSeries],
                    max_factors: int | None = None) -> GradedSeries:
    """Defect of the string equation on a truncated W, per stratum.

    Returns the residual restricted to monomials with between 2 and
    max_factors variables; the input must be complete through
    max_factors + 1 factors (BoundError otherwise).  A zero result
    certifies every covered stratum.  The one-factor stratum is
    excluded by construction: it is exactly the data that determines
    the extrapolated linear terms (see string_linear_terms).
    """
    parts = list(parts)
    if not parts:
        raise BoundError("no series given")
    cover = min((p.kmax if p.kmax is not None else 10 ** 9) for p in parts)
    if max_factors is None:
        max_factors = cover - 1
    if max_factors + 1 > cover:
        raise BoundError(
            f"series complete to {cover} factors cannot certify "
            f"residual strata up to {max_factors} factors")
    total: Dict[XMonomial, "Q"] = {}
    for p in parts:
        if p.n != n:
            raise DomainError("series order mismatch")
        for m, c in p.terms.items():
            prev = total.get(m)
            total[m] = c if prev is None else prev + c

    res: Dict[XMonomial, "Q"] = {}

    def add(m: XMonomial, c) -> None:
        if len(m) < 2 or len(m) > max_factors:
            return
        prev = res.get(m)
        v = c if prev is None else prev + c
        if v:
            res[m] = v
        elif prev is not None:
            del res[m]

    for m, c in _x_diff(total, 1).items():
        add(m, c)
    for m, c in _quadratic_source(n).items():
        add(m, -c)
    # transport: + sum (i+n) x_{i+n} d_i W over i not divisible by n
    for m, c in total.items():
        if len(m) > max_factors:
            continue
        seen = set()
        for pos, i in enumerate(m):
            if i in seen or i % n == 0:
                continue
            seen.add(i)
            nm = tuple(sorted(m[:pos] + m[pos + 1:] + (i + n,)))
            add(nm, c * m.count(i) * (i + n))
    return GradedSeries(n, None, max_factors, res)


def string_linear_terms(n: int, parts: Iterable[GradedSeries]) -> Dict[int, "Q"]:
    """Linear terms of W extrapolated from the one-factor residual.

    A linear term c*x_l of W is transported onto the x_{l+n} stratum
    of the residual, where the pair part of W must cancel it:
        c = -(1/(l+n)) * [coefficient of x_{l+n} in d_1 (pair part)].
    These sit outside the k >= 2 coefficient formula and are reported
    as extrapolated values keyed by l, the linear term's x index.
    """
    combined: Dict[XMonomial, "Q"] = {}
    for p in parts:
        if p.n != n:
            raise DomainError("series order mismatch")
        for m, c in p.terms.items():
            if len(m) == 2:
                prev = combined.get(m)
                combined[m] = c if prev is None else prev + c
    out: Dict[int, "Q"] = {}
    for m, c in _x_diff(combined, 1).items():
        if len(m) != 1:
            continue
        j = m[0]
        l = j - n
        if l >= 1 and l % n:
            val = -c / j
            if val:
                out[l] = val
    return out


def genus0_small_phase(n: int, ctx: GDContext) -> GradedSeries:
    """W restricted to (x_1 .. x_{n-1}, 0, 0, ...), computed by flows.

    Independent of the coefficient-extraction formula: the x_1-axis
    data forced by the string equation (d_s d_1 W on the axis is
    (n-1) x_1 for s = n-1 and 0 for other s < n) is transported by the
    reduced pair/multi equations, Taylor-assembling the restriction in
    x_2..x_{n-1}.  The result is a quasihomogeneous polynomial: every
    monomial has sum(n+1-i) = 2(n+1), which is asserted.
    """
    if ctx.n != n:
        raise DomainError(f"context order {ctx.n} does not match {n}")
    target = 2 * (n + 1)
    series = GradedSeries(n, 0, None)

    def add_axis_poly(x1_poly: Dict[int, "Q"], A: Tuple[int, ...], denom: int):
        for p, c in x1_poly.items():
            if not c:
                continue
            m = tuple(sorted((1,) * p + A))
            if sum(n + 1 - i for i in m) != target:
                raise RuntimeError(f"off-grading term x^{m} in small phase space")
            prev = series.terms.get(m)
            v = c / denom if prev is None else prev + c / denom
            if v:
                series.terms[m] = v
            elif prev is not None:
                del series.terms[m]

    # axis part: d_1 W on the axis is the axis part of the quadratic
    # source, x_1^2/2 for n = 2 and 0 otherwise
    if n == 2:
        add_axis_poly({3: Q(1, 6)}, (), 1)

    # u_{s,t} on the axis: d_1^t of (n-1) x_1^2/2 when s = n-1, else 0
    def axis_value(v: int) -> Dict[int, "Q"]:
        s = v >> TSHIFT
        t = v & 31
        if s != n - 1 or t > 2:
            return {}
        if t == 0:
            return {2: Q(n - 1, 2)}
        if t == 1:
            return {1: Q(n - 1)}
        return {0: Q(n - 1)}

    # enumerate index multisets A over {2..n-1}
    def assemble(A: Tuple[int, ...]):
        denom = 1
        run = 1
        for a in range(1, len(A)):
            run = run + 1 if A[a] == A[a - 1] else 1
            denom *= run if A[a] == A[a - 1] else 1
        if len(A) == 1:
            if A[0] == n - 1:
                add_axis_poly({2: Q(n - 1, 2)}, A, 1)
            return
        eq = ctx.gd_equation(A)
        acc: Dict[int, "Q"] = {}
        for mono, coeff in eq.items():
            vals = [axis_value(v) for v in mono]
            prod: Dict[int, "Q"] = {0: coeff}
            for val in vals:
                if not val:
                    prod = {}
                    break
                nxt: Dict[int, "Q"] = {}
                for p1, c1 in prod.items():
                    for p2, c2 in val.items():
                        prev = nxt.get(p1 + p2)
                        nxt[p1 + p2] = c1 * c2 if prev is None else prev + c1 * c2
                prod = nxt
            for p, c in prod.items():
                prev = acc.get(p)
                acc[p] = c if prev is None else prev + c
        add_axis_poly({p: c for p, c in acc.items() if c}, A, denom)

    def rec(minimum: int, acc: List[int], budget: int):
        if acc:
            assemble(tuple(acc))
        for a in range(minimum, n):
            cost = n + 1 - a
            if cost <= budget:
                acc.append(a)
                rec(a, acc, budget - cost)
                acc.pop()

    rec(2, [], target)
    series.check_quasihomogeneous()
    return series


def make_correlator_key(n: int, g: int, insertions) -> CorrelatorKey:
    ins = tuple(sorted((int(k), int(m)) for k, m in insertions))
    if n < 2:
        raise DomainError(f"hierarchy order must be >= 2, got {n}")
    if g < 0:
        raise DomainError(f"genus must be >= 0, got {g}")
    for k, m in ins:
        if not (1 <= k <= n - 1) or m < 0:
            raise DomainError(f"insertion ({k},{m}) outside 1 <= k <= {n-1}, m >= 0")
    return CorrelatorKey(n, g, ins)


def correlator(key: CorrelatorKey, ctx: GDContext,
               convention: str = "calibrated") -> "Q":
    """The genus-g correlator of the insertion multiset, exact.

    Zero whenever the grading selection rules fail (wrong divisibility
    or genus mismatch).  Insertion counts below 2 are outside the
    coefficient formula and return 0 with a diagnostic; query
    string_linear_terms for the extrapolated single-insertion values.
    """
    if convention not in SIGN_CONVENTIONS:
        raise DomainError(f"unknown sign convention {convention!r}")
    n, g, insertions = key
    s = len(insertions)
    if s <= 1:
        log.warning("correlator with %d insertion(s) is outside the pair-extraction "
                    "range; returning 0 (see string_linear_terms)", s)
        return QZERO
    indices = tuple(sorted(m * n + k for k, m in insertions))
    if admissible_genus(n, indices) != g:
        return QZERO
    f = witten_coefficient(WittenKey(n, indices), ctx)
    if not f:
        return QZERO
    denom = 1
    for k, m in insertions:
        for l in range(m + 1):
            denom *= l * n + k
    if convention == "calibrated":
        sign = -1 if s % 2 == 0 else 1
    elif convention == "map":
        sign = -1 if s % 2 else 1
    else:
        sign = 1
    return f * Q(sign, denom)
