"""Equation rendering: stable ordering, text, LaTeX and JSON forms.

Display order of monomials: ascending number of factors, then factors
compared in descending order, largest first.  This reproduces the
conventional display of the low hierarchy equations (single
derivatives first, highest flow first, products after).

Text notation: `dK` is the derivative in x_K and powers count
repeated d1, so u_{3,1} prints as `d3 d1 v`, u_{1,3} as `d1^4 v`, and
a squared factor as `(d1^2 v)^2`.  LaTeX mode uses \\partial with the
same conventions (d1 is the bare \\partial).
"""

from __future__ import annotations

from typing import Dict, Iterable, List, Tuple

from .jets import Monomial, Poly, TMASK, TSHIFT
from .rationals import Q
from .serialize import poly_to_json


def display_key(m: Monomial):
    return (len(m), tuple(-v for v in m))


def display_order(p: Poly) -> List[Monomial]:
    return sorted(p, key=display_key)


def _coeff_text(c) -> Tuple[str, str]:
    # sign, magnitude (empty magnitude for 1)
    sign = "-" if c < 0 else "+"
    mag = abs(c)
    return sign, "" if mag == 1 else str(mag)


def _factor_text(v: int) -> str:
    s = v >> TSHIFT
    t = v & TMASK
    if s == 1:
        return "d1 v" if t == 0 else f"d1^{t + 1} v"
    if t == 0:
        return f"d{s} v"
    if t == 1:
        return f"d{s} d1 v"
    return f"d{s} d1^{t} v"


def _mono_text(m: Monomial) -> str:
    parts = []
    i = len(m)
    while i > 0:
        v = m[i - 1]
        j = i - 1
        while j > 0 and m[j - 1] == v:
            j -= 1
        power = i - j
        body = _factor_text(v)
        parts.append(body if power == 1 else f"({body})^{power}")
        i = j
    return " ".join(parts)


def _factor_latex(v: int) -> str:
    s = v >> TSHIFT
    t = v & TMASK
    ds = f"\\partial_{s}" if s < 10 else f"\\partial_{{{s}}}"
    if s == 1:
        return "\\partial v" if t == 0 else f"\\partial^{t + 1} v"
    if t == 0:
        return f"{ds} v"
    if t == 1:
        return f"{ds} \\partial v"
    return f"{ds} \\partial^{t} v"


def _mono_latex(m: Monomial) -> str:
    parts = []
    i = len(m)
    while i > 0:
        v = m[i - 1]
        j = i - 1
        while j > 0 and m[j - 1] == v:
            j -= 1
        power = i - j
        body = _factor_latex(v)
        parts.append(body if power == 1 else f"({body})^{power}")
        i = j
    return " \\, ".join(parts)


def _coeff_latex(c) -> Tuple[str, str]:
    sign = "-" if c < 0 else "+"
    mag = abs(c)
    if mag == 1:
        return sign, ""
    if mag.denominator == 1:
        return sign, str(mag)
    return sign, f"\\frac{{{mag.numerator}}}{{{mag.denominator}}}"


def _join_terms(rendered: Iterable[Tuple[str, str, str]]) -> str:
    out = []
    for sign, mag, body in rendered:
        if not out:
            head = f"-{mag} " if sign == "-" else (f"{mag} " if mag else "")
            if sign == "-" and not mag:
                head = "- "
            out.append(f"{head}{body}")
        else:
            mid = f"{mag} " if mag else ""
            out.append(f" {sign} {mid}{body}")
    return "".join(out) if out else "0"


def lhs_text(indices: Iterable[int]) -> str:
    parts = []
    idx = sorted(indices, reverse=True)
    i = 0
    while i < len(idx):
        j = i
        while j < len(idx) and idx[j] == idx[i]:
            j += 1
        power = j - i
        parts.append(f"d{idx[i]}" + (f"^{power}" if power > 1 else ""))
        i = j
    return " ".join(parts) + " v"


def lhs_latex(indices: Iterable[int]) -> str:
    parts = []
    idx = sorted(indices, reverse=True)
    i = 0
    while i < len(idx):
        j = i
        while j < len(idx) and idx[j] == idx[i]:
            j += 1
        power = j - i
        sub = f"\\partial_{idx[i]}" if idx[i] < 10 else f"\\partial_{{{idx[i]}}}"
        parts.append(sub + (f"^{power}" if power > 1 else ""))
        i = j
    return " ".join(parts) + " v"


def equation_text(indices, p: Poly) -> str:
    body = _join_terms((*_coeff_text(p[m]), _mono_text(m))
                       for m in display_order(p))
    return f"{lhs_text(indices)} = {body}"


def equation_latex(indices, p: Poly) -> str:
    body = _join_terms((*_coeff_latex(p[m]), _mono_latex(m))
                       for m in display_order(p))
    return f"{lhs_latex(indices)} = {body}"


def equation_json(kind: str, indices, p: Poly, **extra) -> dict:
    doc = {"schema": 1, "kind": kind,
           "lhs": sorted(int(i) for i in indices),
           "terms": poly_to_json(p, order=display_order)}
    doc.update(extra)
    return doc


def xmono_text(m: Tuple[int, ...]) -> str:
    parts = []
    i = 0
    while i < len(m):
        j = i
        while j < len(m) and m[j] == m[i]:
            j += 1
        power = j - i
        parts.append(f"x{m[i]}" + (f"^{power}" if power > 1 else ""))
        i = j
    return " ".join(parts)


def xmono_latex(m: Tuple[int, ...]) -> str:
    parts = []
    i = 0
    while i < len(m):
        j = i
        while j < len(m) and m[j] == m[i]:
            j += 1
        power = j - i
        sub = f"x_{m[i]}" if m[i] < 10 else f"x_{{{m[i]}}}"
        parts.append(sub + (f"^{power}" if power > 1 else ""))
        i = j
    return " ".join(parts)


def series_text(terms: Dict[Tuple[int, ...], "Q"]) -> str:
    keys = sorted(terms, key=lambda m: (len(m), m))
    return _join_terms((*_coeff_text(terms[m]), xmono_text(m)) for m in keys)


def series_latex(terms: Dict[Tuple[int, ...], "Q"]) -> str:
    keys = sorted(terms, key=lambda m: (len(m), m))
    return _join_terms((*_coeff_latex(terms[m]), xmono_latex(m)) for m in keys)
