"""The n-Gelfand-Dikii reduction.

Solutions of the n-th reduced hierarchy are the KP solutions that do
not depend on x_n.  In jet normal form that principle becomes a
rewriting system:

  * u_{n,t} with t >= 1 rewrites to 0 (no x_n dependence);
  * u_{n+r,1} rewrites via the elimination rule of order r, obtained
    by solving 0 = d_{r+1} d_n v for its leading term; u_{n+r,t} is
    d_1^(t-1) of that rule;
  * u_{s,0} with s >= n is rejected: the bare d_s v is a constant the
    reduction never evaluates, and rewriting it silently would hide a
    caller bug.

GD normal form therefore has every factor with 1 <= s <= n-1 and
t >= 1.  Equations for k >= 3 indices are built from the pair
equations by differentiating with one flow at a time (ascending, so
the polynomial stays small until the expensive large flows apply).

Every stored equation is checked against the structural constraints
of the reduced hierarchy: for a monomial with m factors of an
equation with k indices, sum(t) >= m + k - 2 and k + m + sum(t) is
even, and the total weight equals the index sum.
"""

from __future__ import annotations

from typing import Dict, Iterable, Tuple

from .errors import DomainError
from .jets import (Monomial, Poly, TMASK, TSHIFT, d1_iter, d1_total,
                   multideriv, poly_iadd, poly_mul, poly_scale, weight_of)
from .kp import KPTable, VALIDATE
from .rationals import Q, QONE

GDKey = Tuple[int, ...]


class GDContext:
    """Equation table of one n-reduction over a shared KP table."""

    def __init__(self, n: int, kp: KPTable | None = None):
        if n < 2:
            raise DomainError(f"hierarchy order must be >= 2, got {n}")
        self.n = n
        self.kp = kp if kp is not None else KPTable()
        self.elim: Dict[int, Poly] = {}
        self.equations: Dict[GDKey, Poly] = {}
        self._elim_d1: Dict[Tuple[int, int], Poly] = {}
        self._dv_cache: Dict[Tuple[int, int, int], Poly] = {}

    # -------------------------------------------------------- elimination

    def elimination_rule(self, r: int) -> Poly:
        """GD normal form of u_{n+r,1}, from 0 = d_{r+1} d_n v."""
        if r < 1:
            raise DomainError(f"elimination order must be >= 1, got {r}")
        hit = self.elim.get(r)
        if hit is not None:
            return hit
        n = self.n
        eq = self.kp.kp_equation(r + 1, n)
        lead_mono = (((n + r) << TSHIFT) | 1,)
        lead = eq.get(lead_mono)
        if lead != Q((r + 1) * n, n + r):
            raise RuntimeError(f"leading coefficient law broken at ({r+1},{n}): {lead}")
        rest = dict(eq)
        del rest[lead_mono]
        val = self.gd_normalize(poly_scale(Q(-1) / lead, rest))
        self.elim[r] = val
        return val

    def _elim_shifted(self, s: int, t: int) -> Poly:
        """GD normal form of u_{s,t} for s > n, t >= 1."""
        key = (s, t)
        hit = self._elim_d1.get(key)
        if hit is None:
            hit = d1_iter(self.elimination_rule(s - self.n), t - 1)
            self._elim_d1[key] = hit
        return hit

    # ------------------------------------------------------ normalization

    def gd_normalize(self, p: Poly) -> Poly:
        """Rewrite a jet polynomial to GD normal form (idempotent).

        Rejects u_{s,0} with s >= n: the reduction gives the bare
        d_s v no normal form.
        """
        n = self.n
        out: Poly = {}
        for m, c in p.items():
            kept = []
            subs = []
            dead = False
            for v in m:
                s = v >> TSHIFT
                if s < n:
                    kept.append(v)
                    continue
                t = v & TMASK
                if t == 0:
                    raise DomainError(
                        f"u_{{{s},0}} has no normal form in the {n}-reduction")
                if s == n:
                    dead = True
                    break
                subs.append(self._elim_shifted(s, t))
            if dead:
                continue
            if not subs:
                poly_iadd(out, {tuple(kept): c})
                continue
            acc: Poly = {tuple(kept): QONE}
            for sub in subs:
                if not sub:
                    acc = {}
                    break
                acc = poly_mul(acc, sub)
            if acc:
                poly_iadd(out, acc, c)
        return out

    # ------------------------------------------------------- derivations

    def flow_diff(self, a: int, p: Poly) -> Poly:
        """d_a applied to a GD-normal polynomial, staying normal."""
        if a == 1:
            return d1_total(p)
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
                rest = m[:i] + m[i + 1:]
                dv = self._dv(a, v >> TSHIFT, v & TMASK)
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

    def _dv(self, a: int, s: int, t: int) -> Poly:
        # GD normal form of d_a u_{s,t}, a >= 2, s <= n-1
        key = (a, s, t)
        hit = self._dv_cache.get(key)
        if hit is None:
            base = self.gd_equation((min(a, s), max(a, s)))
            hit = d1_iter(base, t)
            self._dv_cache[key] = hit
        return hit

    # ------------------------------------------------------------ builds

    def gd_equation(self, indices: Iterable[int]) -> Poly:
        """GD normal form of d_{i1}..d_{ik} v, k >= 2 (symmetric, cached)."""
        key = multideriv(indices)
        if len(key) < 2:
            raise DomainError("GD equations need at least two indices")
        hit = self.equations.get(key)
        if hit is not None:
            return hit
        if len(key) == 2:
            val = self.gd_normalize(self.kp.kp_equation(*key))
        else:
            val = self.flow_diff(key[-1], self.gd_equation(key[:-1]))
        if VALIDATE:
            self._validate(key, val)
        self.equations[key] = val
        return val

    def n_coeff(self, indices: Iterable[int], monomial) -> "Q":
        """Exact coefficient of a GD-normal monomial in gd_equation.

        Returns 0 without building anything whenever a selection rule
        (weight, flow range, derivative count, parity) already forces
        the coefficient to vanish.
        """
        key = multideriv(indices)
        if len(key) < 2:
            raise DomainError("GD equations need at least two indices")
        m = tuple(sorted(
            v.packed() if hasattr(v, "packed") else (int(v[0]) << TSHIFT) | int(v[1])
            for v in monomial))
        k = len(key)
        nfac = len(m)
        tsum = 0
        wsum = 0
        for v in m:
            s = v >> TSHIFT
            t = v & TMASK
            if s >= self.n or t < 1:
                return Q(0)
            tsum += t
            wsum += s + t
        if wsum != sum(key):
            return Q(0)
        if tsum < nfac + k - 2 or (k + nfac + tsum) % 2:
            return Q(0)
        return self.gd_equation(key).get(m, Q(0))

    # -------------------------------------------------------- validation

    def _validate(self, key: GDKey, val: Poly) -> None:
        k = len(key)
        w = sum(key)
        n = self.n
        for m in val:
            tsum = 0
            wsum = 0
            for v in m:
                s = v >> TSHIFT
                t = v & TMASK
                if s < 1 or s > n - 1 or t < 1:
                    raise RuntimeError(f"{key}: factor out of range in {m}")
                tsum += t
                wsum += s + t
            if wsum != w:
                raise RuntimeError(f"{key}: weight invariant broken at {m}")
            if tsum < len(m) + k - 2 or (k + len(m) + tsum) % 2:
                raise RuntimeError(f"{key}: structural constraint broken at {m}")
