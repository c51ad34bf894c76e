"""JSON wire forms for rationals, monomials and polynomials.

Rationals travel as {"num": "...", "den": "..."} with decimal-string
values, den > 0, lowest terms.  A jet monomial is an array of [s, t]
pairs in canonical (ascending) order.  A polynomial is an array of
{"monomial": ..., "coeff": ...} records; writers emit records sorted
by monomial so output is deterministic, and the reader re-validates
canonical order, nonzero coefficients and lowest terms.
"""

from __future__ import annotations

from typing import List

from .jets import Monomial, Poly, TMASK, TSHIFT, pack
from .rationals import Q, rational_from_json, rational_to_json


def monomial_to_json(m: Monomial) -> List[List[int]]:
    return [[v >> TSHIFT, v & TMASK] for v in m]


def monomial_from_json(obj) -> Monomial:
    m = tuple(pack(int(s), int(t)) for s, t in obj)
    if any(m[i] > m[i + 1] for i in range(len(m) - 1)):
        raise ValueError(f"monomial not in canonical order: {obj}")
    return m


def poly_to_json(p: Poly, order=None) -> list:
    keys = sorted(p) if order is None else order(p)
    return [{"monomial": monomial_to_json(m), "coeff": rational_to_json(p[m])}
            for m in keys]


def poly_from_json(obj) -> Poly:
    out: Poly = {}
    for rec in obj:
        m = monomial_from_json(rec["monomial"])
        c = rational_from_json(rec["coeff"])
        if not c:
            raise ValueError(f"zero coefficient stored for {rec['monomial']}")
        if m in out:
            raise ValueError(f"duplicate monomial {rec['monomial']}")
        out[m] = c
    return out
