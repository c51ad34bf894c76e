"""KP hierarchy in jet normal form.

Builds, weight stage by weight stage, the table of equations

    d_i d_j v  =  (polynomial in u_{s,t} with s, t >= 1, all monomials
                   of weight exactly i + j)

together with the normal forms of the eta expansion coefficients

    eta_r  =  (1/r) u_{r,0}  +  (tail with every factor t >= 1).

The induction runs on the weight w = i + j: the pair equations of
weight w need eta forms of weight < w and pair equations of weight
< w; eta_w then needs the freshly built weight-w pairs (for the
two-index terms of its raw multi-derivative expansion).  eta_1 =
u_{1,0} seeds everything.

A pair equation with 2 <= i <= j is assembled from

    (1/j) d_i d_j v  =  d_i eta_j  -  d_i (tail of eta_j),

where d_i eta_j expands through the symmetrized P-coefficient sum over
column multisets (every column (s, t) becomes d_1^t applied to the
normal form of eta_s) and d_i of a jet polynomial applies the Leibniz
rule with d_i u_{s,t} = d_1^t of the (i, s) pair equation.

eta_r itself is the multi-derivative expansion

    eta_r = sum_m (-1)^(m+1)/m! * [over ordered (i_1..i_m), sum = r]
            (1/(i_1...i_m)) d_{i_1}..d_{i_m} v

reduced to normal form.  The build aggregates it by the exponential
order m:  M(1, r) = (1/r) u_{r,0},  M(m, r) = sum_i (1/i) d_i M(m-1, r-i),
so each stage costs a handful of linear flow derivations instead of
one reduction per partition.

The module also carries the expansion-layer operations in the eta/xi
symbol spaces (ds_eta, b_coeff, xi_from_eta) and the raw
compatibility recursion for B_s^t in xi symbols, which serves as an
independent oracle for the P-coefficient expansion of B_s^t.
Eta/xi-space monomials use the same packed representation as jets:
the packed pair (i << 5) | j stands for d_1^j eta_i (resp. xi_i).
"""

from __future__ import annotations

import math
from typing import Dict, Iterator, List, Tuple

from .errors import DomainError, MissingTableError
from .jets import (Monomial, Poly, TMASK, TSHIFT, d1_iter, d1_total,
                   multideriv, pack, poly_iadd, poly_mul, poly_scale,
                   poly_sub, poly_var, weight_of)
from .pcoeff import binom, p_coeff_sym
from .rationals import Q, QONE

MultiDeriv = Tuple[int, ...]          # sorted indices of d_{i1}...d_{ik} v
EtaPoly = Dict[Monomial, "Q"]         # packed (i, j) monomials over EtaSymbol

VALIDATE = True                       # cheap per-equation invariant checks


def partitions(n: int, maxpart: int | None = None) -> Iterator[Tuple[int, ...]]:
    """Multisets of positive integers summing to n (ascending tuples)."""
    if maxpart is None:
        maxpart = n

    def rec(remaining: int, cap: int, acc: List[int]):
        if remaining == 0:
            yield tuple(reversed(acc))
            return
        for part in range(min(cap, remaining), 0, -1):
            acc.append(part)
            yield from rec(remaining - part, part, acc)
            acc.pop()

    yield from rec(n, maxpart, [])


def eta_raw(r: int) -> Dict[MultiDeriv, "Q"]:
    """eta_r as an exact sum of multi-derivative symbols d_{i1}..d_{in} v.

    The coefficient of the index multiset {i1..in} aggregates the
    ordered sum: (-1)^(n+1) / (prod i * prod multiplicity!).
    """
    if r < 1:
        raise DomainError(f"eta index must be >= 1, got {r}")
    out: Dict[MultiDeriv, "Q"] = {}
    for part in partitions(r):
        denom = 1
        run = 1
        prev = None
        for p in part:
            denom *= p
            run = run + 1 if p == prev else 1
            denom *= run
            prev = p
        sign = 1 if len(part) % 2 else -1
        out[part] = Q(sign, denom)
    return out


def column_multisets(total: int, max_jsum: int) -> Iterator[Tuple[Tuple[int, int], ...]]:
    """Column multisets {(i, j)}: i, j >= 1, sum(i + j) = total, sum(j) <= max_jsum.

    Yields ascending-sorted tuples of pairs; the column (i, j) stands
    for d_1^j eta_i in the expansion layer.
    """
    def rec(remaining: int, jleft: int, last: Tuple[int, int], acc: List[Tuple[int, int]]):
        if remaining == 0:
            yield tuple(acc)
            return
        for i in range(1, remaining):
            for j in range(1, min(jleft, remaining - i) + 1):
                col = (i, j)
                if col < last:
                    continue
                acc.append(col)
                yield from rec(remaining - i - j, jleft - j, col, acc)
                acc.pop()

    if max_jsum >= 1:
        yield from rec(total, max_jsum, (1, 1), [])


def _pack_cols(cols: Tuple[Tuple[int, int], ...]) -> Monomial:
    return tuple((i << TSHIFT) | j for i, j in cols)


def ds_eta(s: int, r: int) -> EtaPoly:
    """d_s eta_r as a polynomial in the symbols d_1^j eta_i.

    Exact finite sum over column multisets with total weight r + s;
    the coefficient of each multiset is the symmetrized P_s bracket
    (the aggregate of P_s over all orderings of the columns).
    """
    if s < 1 or r < 1:
        raise DomainError("flow and eta indices must be >= 1")
    out: EtaPoly = {}
    for cols in column_multisets(s + r, max_jsum=s):
        c = p_coeff_sym(s, cols)
        if c:
            out[_pack_cols(cols)] = c
    return out


def b_coeff(s: int, t: int) -> EtaPoly:
    """B_s^t (wave-operator coefficient) expanded in d_1^j eta_i symbols."""
    if t < 2 or t > s:
        raise DomainError(f"b_coeff needs 2 <= t <= s, got t={t}, s={s}")
    out: EtaPoly = {}
    for cols in column_multisets(t, max_jsum=s):
        c = p_coeff_sym(s, cols)
        if c:
            out[_pack_cols(cols)] = -c
    return out


def xi_from_eta(j: int) -> EtaPoly:
    """xi_j = sum over n of (1/n!) sum_{i1+..+in=j} eta_{i1}..eta_{in}.

    Aggregated over unordered index multisets; the packed symbol
    (i, 0) is the underived eta_i.
    """
    if j < 1:
        raise DomainError(f"xi index must be >= 1, got {j}")
    out: EtaPoly = {}
    for part in partitions(j):
        denom = 1
        run = 1
        prev = None
        for p in part:
            run = run + 1 if p == prev else 1
            denom *= run
            prev = p
        out[tuple(i << TSHIFT for i in part)] = Q(1, denom)
    return out


def b_from_xi_recursion(s: int, t: int, _memo: dict | None = None) -> EtaPoly:
    """B_s^t from the raw compatibility recursion, in d_1^j xi_i symbols.

    Independent of the P-coefficient machinery: only the recursion
        B_s^t = - sum_{i=1..t-1} C(s,i) d^i xi_{t-i}
                - sum_{k=2..t-1} B_s^k sum_{i=0..t-k-1} C(s-k,i) d^i xi_{t-i-k}
    is used.  Convert with xi_to_eta to compare against b_coeff.
    """
    if t < 2 or t > s:
        raise DomainError(f"need 2 <= t <= s, got t={t}, s={s}")
    if _memo is None:
        _memo = {}
    key = (s, t)
    if key in _memo:
        return _memo[key]
    out: EtaPoly = {}
    for i in range(1, t):
        c = binom(s, i)
        if c:
            poly_iadd(out, {(pack(t - i, i),): QONE}, Q(-c))
    for k in range(2, t):
        bk = b_from_xi_recursion(s, k, _memo)
        if not bk:
            continue
        inner: EtaPoly = {}
        for i in range(0, t - k):
            c = binom(s - k, i)
            if c:
                poly_iadd(inner, {(pack(t - i - k, i),): QONE}, Q(-c))
        if inner:
            poly_iadd(out, poly_mul(bk, inner))
    _memo[key] = out
    return out


def xi_to_eta(p: EtaPoly) -> EtaPoly:
    """Substitute xi_a = xi_from_eta(a) into a xi-symbol polynomial."""
    cache: Dict[int, EtaPoly] = {}

    def piece(v: int) -> EtaPoly:
        hit = cache.get(v)
        if hit is None:
            hit = d1_iter(xi_from_eta(v >> TSHIFT), v & TMASK)
            cache[v] = hit
        return hit

    out: EtaPoly = {}
    for m, c in p.items():
        acc: EtaPoly = {(): QONE}
        for v in m:
            acc = poly_mul(acc, piece(v))
        poly_iadd(out, acc, c)
    return out


class KPTable:
    """Memoized weight-staged table of KP pair equations and eta forms."""

    def __init__(self):
        self.equations: Dict[Tuple[int, int], Poly] = {}
        self.eta_forms: Dict[int, Poly] = {1: {(pack(1, 0),): QONE}}
        self.built_weight = 1
        self._reduce_cache: Dict[MultiDeriv, Poly] = {}
        self._dv_cache: Dict[int, Poly] = {}
        self._deta_cache: Dict[Tuple[int, int], Poly] = {}
        self._mcache: Dict[Tuple[int, int], Poly] = {}

    # ------------------------------------------------------------ lookups

    def pair(self, i: int, j: int) -> Poly:
        """Stored normal form of d_i d_j v; raises if not built."""
        if i < 1 or j < 1:
            raise DomainError("flow indices must be >= 1")
        if i > j:
            i, j = j, i
        if i == 1:
            return poly_var(j, 1)
        eq = self.equations.get((i, j))
        if eq is None:
            raise MissingTableError(f"pair equation ({i},{j}) not built")
        return eq

    def eta(self, r: int) -> Poly:
        form = self.eta_forms.get(r)
        if form is None:
            raise MissingTableError(f"eta form {r} not built")
        return form

    # ------------------------------------------------------- derivations

    def flow_diff(self, a: int, p: Poly) -> Poly:
        """d_a applied to a jet polynomial, in normal form.

        Requires every pair equation (a, s) for factors u_{s,t} of p
        with s >= 2 to be present already (true whenever p has weight
        below the built weight, or within a build stage).
        """
        if a == 1:
            return d1_total(p)
        out: Poly = {}
        get = out.get
        dv_get = self._dv_cache.get
        akey = a << 16
        for m, c in p.items():
            k = len(m)
            i = 0
            while i < k:
                v = m[i]
                j = i + 1
                while j < k and m[j] == v:
                    j += 1
                rest = m[:i] + m[i + 1:]
                dv = dv_get(akey | v)
                if dv is None:
                    dv = self._dv(a, v)
                cm = c * (j - i)
                if rest:
                    last = rest[-1]
                    first = rest[0]
                    for md, cd in dv.items():
                        if last <= md[0]:
                            nm = rest + md
                        elif md[-1] <= first:
                            nm = md + rest
                        else:
                            nm = tuple(sorted(rest + md))
                        cur = get(nm)
                        out[nm] = cm * cd if cur is None else cur + cm * cd
                else:
                    for md, cd in dv.items():
                        cur = get(md)
                        out[md] = cm * cd if cur is None else cur + cm * cd
                i = j
        return {m: c for m, c in out.items() if c}

    def _dv(self, a: int, v: int) -> Poly:
        # normal form of d_a u_{s,t} for the packed variable v, a >= 2
        s = v >> TSHIFT
        t = v & TMASK
        if s == 1:
            val = poly_var(a, t + 1)
        else:
            val = d1_iter(self.pair(a, s), t)
        self._dv_cache[(a << 16) | v] = val
        return val

    def _deta(self, i: int, j: int) -> Poly:
        # d_1^j applied to the normal form of eta_i
        key = (i, j)
        hit = self._deta_cache.get(key)
        if hit is None:
            hit = d1_iter(self.eta(i), j)
            self._deta_cache[key] = hit
        return hit

    # ------------------------------------------------------------ builds

    def ensure_weight(self, w: int) -> None:
        if w <= self.built_weight:
            return
        import gc
        was_enabled = gc.isenabled()
        gc.disable()
        try:
            for stage in range(self.built_weight + 1, w + 1):
                self._build_stage(stage)
        finally:
            if was_enabled:
                gc.enable()

    def build_to(self, w: int, workers: int = 1) -> None:
        """Build every pair equation and eta form of weight <= w."""
        if workers <= 1:
            self.ensure_weight(w)
            return
        from concurrent.futures import ThreadPoolExecutor
        for stage in range(self.built_weight + 1, w + 1):
            todo = [(i, stage - i) for i in range(2, stage // 2 + 1)
                    if (i, stage - i) not in self.equations]
            if todo:
                with ThreadPoolExecutor(max_workers=workers) as pool:
                    list(pool.map(lambda ij: self._build_pair(*ij), todo))
            self._build_eta(stage)
            self.built_weight = stage

    def _build_stage(self, w: int) -> None:
        todo = [i for i in range(2, w // 2 + 1) if (i, w - i) not in self.equations]
        if todo:
            expansions = self._stage_expansions(w, todo)
            for i in todo:
                self._finish_pair(i, w - i, expansions[i])
        self._build_eta(w)
        self.built_weight = w

    def _stage_expansions(self, w: int, flows) -> Dict[int, Poly]:
        """d_i eta_{w-i} in jets, for every flow i in `flows`, one pass.

        The jet product of a column multiset does not depend on the
        differentiating flow, so the stage enumerates multisets once
        (depth-first, largest column first, sharing prefix products)
        and scatters each product into every expansion whose bracket
        coefficient is nonzero.
        """
        out: Dict[int, Poly] = {i: {} for i in flows}
        smax = max(flows)

        def rec(remaining: int, jleft: int, mi: int, mj: int, jsum: int, acc, cols):
            for i in range(min(mi, remaining - 1), 0, -1):
                jcap = min(jleft, remaining - i)
                if i == mi and jcap > mj:
                    jcap = mj
                for j in range(jcap, 0, -1):
                    rem = remaining - i - j
                    jl = jleft - j
                    if rem == 1 or (rem > 0 and rem > jl * (i + 1)):
                        continue
                    cols.append((i, j))
                    acc2 = poly_mul(acc, self._deta(i, j)) if acc is not None \
                        else self._deta(i, j)
                    if rem == 0:
                        for s in flows:
                            if jsum + j <= s:
                                c = p_coeff_sym(s, cols)
                                if c:
                                    poly_iadd(out[s], acc2, c)
                    else:
                        rec(rem, jl, i, j, jsum + j, acc2, cols)
                    cols.pop()

        rec(w, smax, w, w, 0, None, [])
        return out

    def _finish_pair(self, i: int, j: int, expansion: Poly) -> Poly:
        eta_form = self.eta(j)
        tail = dict(eta_form)
        head_coeff = tail.pop((pack(j, 0),), None)
        if head_coeff != Q(1, j):
            raise RuntimeError(f"eta_{j} head term corrupt: {head_coeff}")
        eq = poly_scale(j, poly_sub(expansion, self.flow_diff(i, tail)))
        if VALIDATE:
            self._validate_pair(eq, i, j)
        self.equations[(i, j)] = eq
        return eq

    def kp_equation(self, i: int, j: int) -> Poly:
        """Normal form of d_i d_j v, building prerequisites on demand."""
        if i < 1 or j < 1:
            raise DomainError("flow indices must be >= 1")
        if i > j:
            i, j = j, i
        if i == 1:
            return poly_var(j, 1)
        eq = self.equations.get((i, j))
        if eq is not None:
            return eq
        self.ensure_weight(i + j - 1)
        return self._build_pair(i, j)

    def eta_normal(self, r: int) -> Poly:
        """Normal form of eta_r, building prerequisites on demand."""
        form = self.eta_forms.get(r)
        if form is not None:
            return form
        self.ensure_weight(r)
        return self.eta_forms[r]

    def _build_pair(self, i: int, j: int, eta_index: int | None = None) -> Poly:
        """Assemble d_i d_j v (2 <= i <= j) from d_i eta_j.

        eta_index optionally forces which of the two indices carries
        the eta expansion (the default is the larger); both must give
        the same polynomial, which the symmetry suite exercises.
        """
        if eta_index is None:
            flow, ei = i, j
        else:
            ei = eta_index
            flow = i if ei == j else j
        expansion = self._ds_eta_jets(flow, ei)
        eta_form = self.eta(ei)
        head = (pack(ei, 0),)
        tail = dict(eta_form)
        head_coeff = tail.pop(head, None)
        if head_coeff != Q(1, ei):
            raise RuntimeError(f"eta_{ei} head term corrupt: {head_coeff}")
        eq = poly_scale(ei, poly_sub(expansion, self.flow_diff(flow, tail)))
        if VALIDATE:
            self._validate_pair(eq, i, j)
        if eta_index is None:
            self.equations[(i, j)] = eq
        return eq

    def _ds_eta_jets(self, s: int, r: int) -> Poly:
        """d_s eta_r expanded into jet normal form (eta forms < s+r needed).

        Depth-first over column multisets in descending lex order,
        carrying the running product so sibling subtrees share their
        prefix products.
        """
        out: Poly = {}

        def rec(remaining: int, jleft: int, mi: int, mj: int, acc, cols):
            for i in range(min(mi, remaining - 1), 0, -1):
                jcap = min(jleft, remaining - i)
                if i == mi and jcap > mj:
                    jcap = mj
                for j in range(jcap, 0, -1):
                    rem = remaining - i - j
                    jl = jleft - j
                    if rem == 1 or (rem > 0 and rem > jl * (i + 1)):
                        continue
                    cols.append((i, j))
                    acc2 = poly_mul(acc, self._deta(i, j)) if acc is not None \
                        else self._deta(i, j)
                    if rem == 0:
                        c = p_coeff_sym(s, cols)
                        if c:
                            poly_iadd(out, acc2, c)
                    else:
                        rec(rem, jl, i, j, acc2, cols)
                    cols.pop()

        total = s + r
        rec(total, s, total, total, None, [])
        return out

    def _exp_order(self, m: int, r: int) -> Poly:
        """M(m, r): the order-m block of the multi-derivative expansion.

        M(1, r) = (1/r) u_{r,0};
        M(m, r) = sum_{i} (1/i) d_i M(m-1, r-i)   (m factors total).
        """
        if m == 1:
            return {(pack(r, 0),): Q(1, r)}
        key = (m, r)
        hit = self._mcache.get(key)
        if hit is not None:
            return hit
        acc: Poly = {}
        for i in range(1, r - m + 2):
            lower = self._exp_order(m - 1, r - i)
            if lower:
                poly_iadd(acc, self.flow_diff(i, lower), Q(1, i))
        self._mcache[key] = acc
        return acc

    def _build_eta(self, r: int) -> None:
        if r in self.eta_forms:
            return
        acc: Poly = dict(self._exp_order(1, r))
        fact = 1
        for m in range(2, r + 1):
            fact *= m
            sign = 1 if m % 2 else -1
            poly_iadd(acc, self._exp_order(m, r), Q(sign, fact))
        if VALIDATE:
            for mm in acc:
                if weight_of(mm) != r:
                    raise RuntimeError(f"eta_{r} weight invariant broken at {mm}")
        self.eta_forms[r] = acc

    # ------------------------------------------------- multideriv reduction

    def _reduce(self, term: MultiDeriv) -> Poly:
        k = len(term)
        if k == 1:
            return poly_var(term[0], 0)
        if k == 2:
            a, b = term
            return poly_var(b, 1) if a == 1 else self.pair(a, b)
        hit = self._reduce_cache.get(term)
        if hit is None:
            hit = self.flow_diff(term[-1], self._reduce(term[:-1]))
            self._reduce_cache[term] = hit
        return hit

    # ------------------------------------------------------- validation

    @staticmethod
    def _validate_pair(eq: Poly, i: int, j: int) -> None:
        w = i + j
        for m in eq:
            tsum = 0
            wsum = 0
            for v in m:
                s = v >> TSHIFT
                t = v & TMASK
                if s < 1 or t < 1:
                    raise RuntimeError(f"({i},{j}): factor out of range in {m}")
                tsum += t + 1
                wsum += s + t
            if wsum != w:
                raise RuntimeError(f"({i},{j}): weight invariant broken at {m}")
            if tsum % 2:
                raise RuntimeError(f"({i},{j}): odd-parity monomial {m}")


def reduce_multideriv(sym, table: KPTable) -> Poly:
    """Normal form of d_{i1}..d_{ik} v against an already-built table.

    Raises MissingTableError when a required lower-weight equation is
    absent (a build-order bug in the caller); use KPTable.ensure_weight
    first.
    """
    return table._reduce(multideriv(sym))
