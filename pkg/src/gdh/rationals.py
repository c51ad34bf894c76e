"""Exact rational scalars.

Everything in this package is computed over exact rationals; no floating
point path exists anywhere.  The canonical public type is
`fractions.Fraction`, but all arithmetic is routed through the `Q`
constructor below, which prefers `gmpy2.mpq` when available (about an
order of magnitude faster, and fully interoperable: `mpq(1,3) ==
Fraction(1,3)` is true and they hash identically).  Both types keep
values in lowest terms with a positive denominator.
"""

from __future__ import annotations

from fractions import Fraction

try:
    from gmpy2 import mpq as Q
except ImportError:  # pragma: no cover - gmpy2 is an optional speedup
    Q = Fraction

QONE = Q(1)
QZERO = Q(0)


def as_fraction(q) -> Fraction:
    """Convert any exact rational (mpq, Fraction, int) to Fraction."""
    return Fraction(q.numerator, q.denominator) if not isinstance(q, int) else Fraction(q)


def rational_to_json(q) -> dict:
    """Serialize to the wire form {"num": ..., "den": ...} (decimal strings).

    The denominator is always positive and the pair is in lowest terms,
    which both rational backends guarantee.
    """
    return {"num": str(q.numerator), "den": str(q.denominator)}


def rational_from_json(obj) -> "Q":
    num = int(obj["num"])
    den = int(obj["den"])
    if den <= 0:
        raise ValueError(f"denominator must be positive, got {den}")
    q = Q(num, den)
    if q.numerator != num or q.denominator != den:
        raise ValueError(f"rational {num}/{den} is not in lowest terms")
    return q
