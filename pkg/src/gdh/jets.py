"""Sparse exact-rational differential-polynomial algebra.

The hierarchy equations live in "jet normal form": polynomials in the
symbols u_{s,t} meaning (d/dx_s)(d/dx_1)^t v, with exact rational
coefficients.  A pure x_1-derivative d^k v (k >= 1) is canonically the
variable (s=1, t=k-1); no other encoding of it is ever constructed.

Representation (shared by every symbol space in the package):

  variable   = one int, (s << 5) | t          (t < 32 always holds here)
  monomial   = tuple of variable ints, sorted ascending (canonical form)
  polynomial = dict mapping monomial -> rational, no zero coefficients

The packed int orders variables exactly like the (s, t) pair would
(lexicographically ascending), so the canonical order is the one a
pair representation would give; `mono`/`factors` convert between the
packed form and `JetVariable` pairs at the API boundary.  Packing is
what makes the hot paths cheap: monomial products merge int tuples,
and the total x_1-derivative of a factor is literally `v + 1`.

The zero polynomial is the empty dict.  The empty monomial () is the
constant term.  `poly_add`/`poly_mul`/`poly_scale` are symbol-agnostic
and are reused for polynomials in the eta/xi expansion symbols (pairs
(i, j) meaning d^j eta_i / d^j xi_i) and in multi-derivative symbols;
only the derivations differ per space.

All values are immutable by convention: functions never mutate their
inputs (the only exception, `poly_iadd`, says so in its name), so
polynomials can be shared freely, including across threads.
"""

from __future__ import annotations

from typing import Dict, Iterable, NamedTuple, Tuple

from .rationals import Q, QONE

TSHIFT = 5
TMASK = (1 << TSHIFT) - 1


class JetVariable(NamedTuple):
    """The symbol u_{s,t} = d_s d_1^t v: pair view of a packed variable."""

    s: int
    t: int

    def packed(self) -> int:
        return (self.s << TSHIFT) | self.t


class EtaSymbol(NamedTuple):
    """d_1^j eta_i, for the eta expansion layer of the KP engine."""

    i: int
    j: int


class XiSymbol(NamedTuple):
    """d_1^j xi_i; appears only in the raw compatibility-recursion oracle."""

    i: int
    j: int


Monomial = Tuple[int, ...]
Poly = Dict[Monomial, "Q"]


def pack(s: int, t: int) -> int:
    if s < 1 or t < 0 or t > TMASK:
        raise ValueError(f"variable out of range: s={s}, t={t}")
    return (s << TSHIFT) | t


def unpack(v: int) -> JetVariable:
    return JetVariable(v >> TSHIFT, v & TMASK)


def mono(*pairs) -> Monomial:
    """Canonical monomial from (s, t) pairs: ascending packed order."""
    return tuple(sorted(pack(int(s), int(t)) for s, t in pairs))


def factors(m: Monomial) -> Tuple[JetVariable, ...]:
    """The (s, t) factors of a monomial, in canonical ascending order."""
    return tuple(JetVariable(v >> TSHIFT, v & TMASK) for v in m)


def multideriv(indices) -> Tuple[int, ...]:
    """Canonical multi-derivative symbol d_{i1}...d_{ik} v: sorted indices."""
    out = tuple(sorted(int(i) for i in indices))
    if not out or any(i < 1 for i in out):
        raise ValueError(f"multi-derivative indices must be positive: {indices}")
    return out


def poly_var(s: int, t: int) -> Poly:
    """The polynomial consisting of the single variable u_{s,t}."""
    return {(pack(s, t),): QONE}


def poly_const(c) -> Poly:
    c = Q(c)
    return {(): c} if c else {}


def poly_add(a: Poly, b: Poly) -> Poly:
    if not a:
        return dict(b)
    if not b:
        return dict(a)
    out = dict(a)
    get = out.get
    for m, c in b.items():
        v = get(m)
        if v is None:
            out[m] = c
        else:
            v = v + c
            if v:
                out[m] = v
            else:
                del out[m]
    return out


def poly_iadd(out: Poly, b: Poly, scale=None) -> None:
    """In-place out += scale*b; only for dicts the caller owns."""
    get = out.get
    if scale is None:
        for m, c in b.items():
            v = get(m)
            if v is None:
                out[m] = c
            else:
                v = v + c
                if v:
                    out[m] = v
                else:
                    del out[m]
    elif scale:
        for m, c in b.items():
            v = get(m)
            if v is None:
                out[m] = scale * c
            else:
                v = v + scale * c
                if v:
                    out[m] = v
                else:
                    del out[m]


def poly_neg(a: Poly) -> Poly:
    return {m: -c for m, c in a.items()}


def poly_sub(a: Poly, b: Poly) -> Poly:
    out = dict(a)
    get = out.get
    for m, c in b.items():
        v = get(m)
        if v is None:
            out[m] = -c
        else:
            v = v - c
            if v:
                out[m] = v
            else:
                del out[m]
    return out


def poly_scale(c, a: Poly) -> Poly:
    c = Q(c)
    if not c:
        return {}
    return {m: c * v for m, v in a.items()}


def mono_mul(m1: Monomial, m2: Monomial) -> Monomial:
    if not m1:
        return m2
    if not m2:
        return m1
    if m1[-1] <= m2[0]:
        return m1 + m2
    if m2[-1] <= m1[0]:
        return m2 + m1
    return tuple(sorted(m1 + m2))


def poly_mul(a: Poly, b: Poly) -> Poly:
    if not a or not b:
        return {}
    if len(a) > len(b):
        a, b = b, a
    out: Poly = {}
    get = out.get
    bitems = list(b.items())
    for ma, ca in a.items():
        if ma:
            last = ma[-1]
            first = ma[0]
            for mb, cb in bitems:
                if mb:
                    if last <= mb[0]:
                        m = ma + mb
                    elif mb[-1] <= first:
                        m = mb + ma
                    else:
                        m = tuple(sorted(ma + mb))
                else:
                    m = ma
                v = get(m)
                out[m] = ca * cb if v is None else v + ca * cb
        else:
            for mb, cb in bitems:
                v = get(mb)
                out[mb] = ca * cb if v is None else v + ca * cb
    return {m: c for m, c in out.items() if c}


def poly_eq(a: Poly, b: Poly) -> bool:
    """Exact equality (canonical forms compare directly)."""
    return a == b


def weight_of(m: Monomial) -> int:
    """Sum of s + t over the factors; additive under monomial product."""
    return sum((v >> TSHIFT) + (v & TMASK) for v in m)


def poly_weights(p: Poly) -> set:
    return {weight_of(m) for m in p}


def is_canonical(m: Monomial) -> bool:
    return all(m[i] <= m[i + 1] for i in range(len(m) - 1))


def d1_total(p: Poly) -> Poly:
    """Total x_1-derivative under the Leibniz rule: u_{s,t} -> u_{s,t+1}.

    Raises every monomial's weight by exactly one per surviving term;
    constants are annihilated.  Bumping the last copy of a factor run
    keeps the tuple sorted, so no re-sort is needed.
    """
    out: Poly = {}
    get = out.get
    for m, c in p.items():
        k = len(m)
        i = 0
        while i < k:
            v = m[i]
            j = i + 1
            while j < k and m[j] == v:
                j += 1
            nm = m[:j - 1] + (v + 1,) + m[j:]
            cur = get(nm)
            add = c * (j - i)
            out[nm] = add if cur is None else cur + add
            i = j
    return {m: c for m, c in out.items() if c}


def d1_iter(p: Poly, times: int) -> Poly:
    for _ in range(times):
        p = d1_total(p)
    return p


def poly_from_terms(terms: Iterable) -> Poly:
    """Build a polynomial from (monomial-spec, coeff) pairs.

    Monomial specs are iterables of (s, t) pairs; coefficients anything
    Q() accepts.  Zero results are pruned.
    """
    out: Poly = {}
    for spec, c in terms:
        m = mono(*spec)
        v = out.get(m)
        c = Q(c)
        if v is None:
            if c:
                out[m] = c
        else:
            v = v + c
            if v:
                out[m] = v
            else:
                del out[m]
    return out
