"""The P_s coefficient family: recurrence, column symmetrization.

A column matrix is an ordered list of columns (i, j) with i >= 1,
j >= 0.  P_s of a matrix is defined by three recurrence rules:

  1) all j = 0                -> 0
  2) single column (i; j>0)   -> C(s, j)      (independent of i)
  3) n >= 2 columns, some j>0 ->
        (1/n!) C(s, J) J!/prod(j!) -
        sum over proper prefixes q = 1..n-1 of
            P_s(prefix) * 1/(n-q)! * C(s - W_q, J - J_q)
                        * (J - J_q)!/prod(tail j!)
     where J = sum of all j and W_q = sum of (i+j) over the prefix.

The subtracted binomial carries the *shifted* subscript s - W_q: this
is the only reading under which the padding identity (zero-j columns
scale the symmetrized sum by 1/k! times the number of distinct
arrangements of the pad) holds, and it is validated end to end by the
first KP hierarchy equations.

The binomial convention is total: C(a, b) = 0 unless 0 <= b <= a, in
particular C(a, 0) = 0 for a < 0 (the padding identity's case split
depends on this).

`p_coeff_sym` is the column-permutation symmetrization: the sum of
P_s over all distinct matrices obtainable by permuting columns.  It is
evaluated by a recurrence over sub-multisets (derived by grouping the
ordered prefix sums by prefix multiset), which is algebraically equal
to the orbit sum but exponentially cheaper on repeated columns.
`p_coeff_sym_orbit` is the direct orbit enumeration, kept as an
independent cross-check.
"""

from __future__ import annotations

import math
from itertools import permutations, product
from typing import Dict, Iterable, Sequence, Tuple

from .rationals import Q, QZERO

Column = Tuple[int, int]
ColumnMatrix = Tuple[Column, ...]     # ordered
ColumnMultiset = Tuple[Column, ...]   # canonical sorted form


def binom(a: int, b: int) -> int:
    """C(a, b) with out-of-range values set to 0 (including all a < 0)."""
    if b < 0 or a < 0 or b > a:
        return 0
    return math.comb(a, b)


def _validate(columns) -> ColumnMatrix:
    cols = tuple((int(i), int(j)) for i, j in columns)
    if not cols:
        raise ValueError("a column matrix needs at least one column")
    for i, j in cols:
        if i < 1 or j < 0:
            raise ValueError(f"bad column ({i}, {j}): need i >= 1, j >= 0")
    return cols


def column_multiset(columns) -> ColumnMultiset:
    """Canonical (sorted) multiset form of a set of columns."""
    return tuple(sorted(_validate(columns)))


def orbit_size(ms: ColumnMultiset) -> int:
    """Number of distinct ordered matrices obtainable by column permutation."""
    n = len(ms)
    size = math.factorial(n)
    run = 1
    for k in range(1, n):
        if ms[k] == ms[k - 1]:
            run += 1
            size //= run
        else:
            run = 1
    return size


_p_cache: Dict[Tuple[int, ColumnMatrix], "Q"] = {}
_sym_cache: Dict[Tuple[int, ColumnMultiset], "Q"] = {}


def p_coeff(s: int, columns: Sequence[Column]) -> "Q":
    """P_s of an ordered column matrix (rules 1-3, memoized)."""
    cols = _validate(columns)
    return _p_coeff(int(s), cols)


def _p_coeff(s: int, cols: ColumnMatrix) -> "Q":
    n = len(cols)
    js = [j for _, j in cols]
    J = sum(js)
    if J == 0:
        return QZERO  # rule 1
    if n == 1:
        return Q(binom(s, js[0]))  # rule 2
    if J > s:
        return QZERO  # every branch of rule 3 carries a vanishing binomial
    key = (s, cols)
    hit = _p_cache.get(key)
    if hit is not None:
        return hit
    jfact = 1
    for j in js:
        jfact *= math.factorial(j)
    val = Q(binom(s, J) * math.factorial(J), math.factorial(n) * jfact)
    Wq = 0
    Jq = 0
    tail_jfact = jfact
    for q in range(1, n):
        i_q, j_q = cols[q - 1]
        Wq += i_q + j_q
        Jq += j_q
        tail_jfact //= math.factorial(j_q)
        c = binom(s - Wq, J - Jq)
        if c:
            head = _p_coeff(s, cols[:q])
            if head:
                val -= head * Q(c * math.factorial(J - Jq),
                                math.factorial(n - q) * tail_jfact)
    _p_cache[key] = val
    return val


def p_coeff_sym(s: int, columns) -> "Q":
    """Symmetrized sum of p_coeff over the column-permutation orbit."""
    ms = column_multiset(columns)
    return _bracket(int(s), ms)


def _bracket(s: int, ms: ColumnMultiset) -> "Q":
    J = sum(j for _, j in ms)
    if J == 0:
        return QZERO
    if len(ms) == 1:
        return Q(binom(s, ms[0][1]))
    if J > s:
        return QZERO
    key = (s, ms)
    hit = _sym_cache.get(key)
    if hit is not None:
        return hit

    distinct = []
    mult = []
    for col in ms:
        if distinct and distinct[-1] == col:
            mult[-1] += 1
        else:
            distinct.append(col)
            mult.append(1)

    def tail_factor(sub: Tuple[int, ...], shift: int) -> "Q":
        # 1/|B|! * C(shift, J_B) * J_B!/prod j_b!  for the complement B,
        # folded with orbit(B):   C(shift, J_B) * J_B! / (prod j_b! * prod mult_B!)
        JB = 0
        denom = 1
        for (col, m, taken) in zip(distinct, mult, sub):
            left = m - taken
            if left:
                JB += col[1] * left
                denom *= math.factorial(col[1]) ** left * math.factorial(left)
        c = binom(shift, JB)
        if not c:
            return QZERO
        return Q(c * math.factorial(JB), denom)

    # leading term == tail_factor over the whole multiset with empty prefix
    val = tail_factor((0,) * len(distinct), s)

    for take in product(*(range(m + 1) for m in mult)):
        q = sum(take)
        if q == 0 or q == len(ms):
            continue
        wtA = sum((col[0] + col[1]) * k for col, k in zip(distinct, take))
        shift = s - wtA
        if shift < 0:
            continue
        tf = tail_factor(take, shift)
        if not tf:
            continue
        sub_ms = []
        for col, k in zip(distinct, take):
            sub_ms.extend([col] * k)
        sub_val = _bracket(s, tuple(sub_ms))
        if sub_val:
            val -= sub_val * tf
    _sym_cache[key] = val
    return val


def p_coeff_sym_orbit(s: int, columns) -> "Q":
    """Orbit-sum reference implementation (cross-check for p_coeff_sym)."""
    ms = column_multiset(columns)
    total = QZERO
    for arrangement in set(permutations(ms)):
        total += _p_coeff(int(s), arrangement)
    return total


def clear_caches() -> None:
    _p_cache.clear()
    _sym_cache.clear()
