"""Exact scalar arithmetic.

Scalars are rational functions in named symbols with Gaussian-rational
coefficients.  Values are immutable and kept in a canonical form:

* numerator and denominator share no nonconstant common factor,
* the graded-lex leading coefficient of the denominator is 1,

so ``==`` decides mathematical equality.  Multivariate gcd is delegated to
``sympy.polys`` over ``QQ_I``; everything else is plain dictionary arithmetic.

Symbols are real unless registered with :func:`declare_complex`.  A complex
symbol ``V`` has the conjugate symbol ``V_bar``.
"""

from __future__ import annotations

import functools
import re
from fractions import Fraction
from typing import Iterable, Mapping, Union

__all__ = [
    "GaussianRational",
    "ScalarExpr",
    "SymkernelError",
    "ZeroDivision",
    "PoleError",
    "UnknownCoordinate",
    "ParseError",
    "declare_complex",
    "declare_conjugate_pair",
    "is_complex_symbol",
    "conj_symbol",
    "sym",
    "const",
    "parse_expr",
    "differentiate",
    "poly_gcd",
    "eval_at",
    "JET_COORDS",
]

JET_COORDS = ("x1", "x2", "z", "p1", "p2")


class SymkernelError(Exception):
    pass


class ZeroDivision(SymkernelError, ZeroDivisionError):
    pass


class PoleError(SymkernelError):
    pass


class UnknownCoordinate(SymkernelError, KeyError):
    pass


class ParseError(SymkernelError, ValueError):
    def __init__(self, message: str, text: str = "", column: int = 0, line: int = 1):
        self.text = text
        self.column = column
        self.line = line
        super().__init__(f"{message} (line {line}, column {column})")


# --------------------------------------------------------------------------
# Gaussian rationals


class GaussianRational:
    """Exact element of Q(i)."""

    __slots__ = ("re", "im")

    def __init__(self, re: Union[int, Fraction, str] = 0, im: Union[int, Fraction, str] = 0):
        object.__setattr__(self, "re", Fraction(re))
        object.__setattr__(self, "im", Fraction(im))

    def __setattr__(self, name, value):
        raise AttributeError("GaussianRational is immutable")

    @classmethod
    def coerce(cls, value) -> "GaussianRational":
        if isinstance(value, GaussianRational):
            return value
        if isinstance(value, (int, Fraction)):
            return cls(value, 0)
        if isinstance(value, complex):
            return cls(Fraction(value.real), Fraction(value.imag))
        raise TypeError(f"cannot coerce {value!r} to GaussianRational")

    def __add__(self, other):
        try:
            o = GaussianRational.coerce(other)
        except TypeError:
            return NotImplemented
        return GaussianRational(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __neg__(self):
        return GaussianRational(-self.re, -self.im)

    def __sub__(self, other):
        try:
            o = GaussianRational.coerce(other)
        except TypeError:
            return NotImplemented
        return GaussianRational(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        try:
            o = GaussianRational.coerce(other)
        except TypeError:
            return NotImplemented
        return GaussianRational(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def inverse(self) -> "GaussianRational":
        n = self.re * self.re + self.im * self.im
        if n == 0:
            raise ZeroDivision("division by zero in Q(i)")
        return GaussianRational(self.re / n, -self.im / n)

    def __truediv__(self, other):
        try:
            o = GaussianRational.coerce(other)
        except TypeError:
            return NotImplemented
        return self * o.inverse()

    def __rtruediv__(self, other):
        return GaussianRational.coerce(other) * self.inverse()

    def __pow__(self, n: int):
        if n < 0:
            return self.inverse() ** (-n)
        result = GaussianRational(1)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def conj(self) -> "GaussianRational":
        return GaussianRational(self.re, -self.im)

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __eq__(self, other):
        try:
            o = GaussianRational.coerce(other)
        except TypeError:
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        if self.im == 0:
            return hash(self.re)
        return hash((self.re, self.im))

    @property
    def is_real(self) -> bool:
        return self.im == 0

    def __repr__(self):
        return f"GaussianRational({self.re}, {self.im})"

    def __str__(self):
        if self.im == 0:
            return str(self.re)
        if self.re == 0:
            return _imag_str(self.im)
        return f"({self.re}+{_imag_str(self.im)})" if self.im > 0 else f"({self.re}-{_imag_str(-self.im)})"


def _imag_str(q: Fraction) -> str:
    if q == 1:
        return "i"
    if q == -1:
        return "-i"
    if q.denominator == 1:
        return f"{q.numerator}*i"
    return f"{q.numerator}*i/{q.denominator}"


ZERO_Q = GaussianRational(0)
ONE_Q = GaussianRational(1)
I_Q = GaussianRational(0, 1)


# --------------------------------------------------------------------------
# symbol registry and ordering

_CONJ: dict[str, str] = {}


def declare_complex(*names: str) -> None:
    """Register complex-valued symbols; ``name_bar`` becomes the conjugate."""
    for n in names:
        if n.endswith("_bar"):
            raise ValueError(f"register the unbarred stem, not {n!r}")
        declare_conjugate_pair(n, n + "_bar")


def declare_conjugate_pair(a: str, b: str) -> None:
    """Register ``b`` as the complex conjugate of ``a`` (and vice versa)."""
    if a == b:
        return
    for x, y in ((a, b), (b, a)):
        prev = _CONJ.get(x)
        if prev is not None and prev != y:
            raise ValueError(f"{x!r} already has conjugate {prev!r}")
    _CONJ[a] = b
    _CONJ[b] = a


def is_complex_symbol(name: str) -> bool:
    return name in _CONJ


def conj_symbol(name: str) -> str:
    return _CONJ.get(name, name)


_NAT = re.compile(r"(\d+)")


@functools.lru_cache(maxsize=None)
def var_rank(name: str):
    if name in JET_COORDS:
        return (0, JET_COORDS.index(name), ())
    parts = tuple((0, int(p), "") if p.isdigit() else (1, 0, p) for p in _NAT.split(name) if p)
    return (1, 0, parts)


# a monomial is a tuple of (name, exponent) pairs sorted by var_rank
Monomial = tuple


def _mono_mul(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b:
        return a
    d = dict(a)
    for v, e in b:
        d[v] = d.get(v, 0) + e
    return tuple(sorted(d.items(), key=lambda t: var_rank(t[0])))


def _mono_deg(m: Monomial) -> int:
    return sum(e for _, e in m)


def _mono_cmp(a: Monomial, b: Monomial) -> int:
    """Graded lex comparison, earlier symbols heavier."""
    da, db = _mono_deg(a), _mono_deg(b)
    if da != db:
        return -1 if da < db else 1
    for (va, ea), (vb, eb) in zip(a, b):
        if va != vb:
            return 1 if var_rank(va) < var_rank(vb) else -1
        if ea != eb:
            return -1 if ea < eb else 1
    if len(a) != len(b):
        return 1 if len(a) < len(b) else -1
    return 0


_mono_key = functools.cmp_to_key(_mono_cmp)


# --------------------------------------------------------------------------
# polynomials: {monomial: GaussianRational}, no zero coefficients


def _padd(a: dict, b: dict, sign: int = 1) -> dict:
    out = dict(a)
    for m, c in b.items():
        v = out.get(m, ZERO_Q) + (c if sign > 0 else -c)
        if v:
            out[m] = v
        else:
            out.pop(m, None)
    return out


def _pmul(a: dict, b: dict) -> dict:
    if not a or not b:
        return {}
    out: dict = {}
    for ma, ca in a.items():
        for mb, cb in b.items():
            m = _mono_mul(ma, mb)
            v = out.get(m, ZERO_Q) + ca * cb
            if v:
                out[m] = v
            else:
                out.pop(m, None)
    return out


def _pscale(a: dict, c: GaussianRational) -> dict:
    if not c:
        return {}
    return {m: v * c for m, v in a.items()}


def _pconst(a: dict):
    """Return the constant if ``a`` is constant, else None."""
    if not a:
        return ZERO_Q
    if len(a) == 1 and () in a:
        return a[()]
    return None


def _pvars(a: dict) -> set:
    return {v for m in a for v, _ in m}


def _lead(a: dict):
    m = max(a, key=_mono_key)
    return m, a[m]


def _pdiff(a: dict, x: str) -> dict:
    out: dict = {}
    for m, c in a.items():
        d = dict(m)
        e = d.get(x, 0)
        if not e:
            continue
        if e == 1:
            del d[x]
        else:
            d[x] = e - 1
        nm = tuple(sorted(d.items(), key=lambda t: var_rank(t[0])))
        v = out.get(nm, ZERO_Q) + c * e
        if v:
            out[nm] = v
        else:
            out.pop(nm, None)
    return out


def _pconj(a: dict) -> dict:
    out = {}
    for m, c in a.items():
        nm = tuple(sorted(((conj_symbol(v), e) for v, e in m), key=lambda t: var_rank(t[0])))
        out[nm] = c.conj()
    return out


def _ppow(a: dict, n: int) -> dict:
    result = {(): ONE_Q}
    base = a
    while n:
        if n & 1:
            result = _pmul(result, base)
        base = _pmul(base, base)
        n >>= 1
    return result


def _sympy_bridge(*polys: dict):
    from sympy import QQ, QQ_I
    from sympy.polys.rings import ring

    gens = sorted(set().union(*(_pvars(p) for p in polys)), key=var_rank) or ["_one"]
    R, *_ = ring(",".join(gens), QQ_I)
    idx = {g: k for k, g in enumerate(gens)}

    def to_s(p):
        terms = {}
        for m, c in p.items():
            exps = [0] * len(gens)
            for v, e in m:
                exps[idx[v]] = e
            terms[tuple(exps)] = QQ_I(QQ(c.re.numerator, c.re.denominator), QQ(c.im.numerator, c.im.denominator))
        return R(terms)

    def from_s(p):
        out = {}
        for exps, c in p.terms():
            m = tuple((gens[k], e) for k, e in enumerate(exps) if e)
            out[m] = GaussianRational(Fraction(int(c.x.numerator), int(c.x.denominator)),
                                      Fraction(int(c.y.numerator), int(c.y.denominator)))
        return out

    return to_s, from_s


def _sympy_gcd_cancel(num: dict, den: dict):
    to_s, from_s = _sympy_bridge(num, den)
    sn, sd = to_s(num), to_s(den)
    g = sn.gcd(sd)
    if g.is_ground:
        return num, den
    return from_s(sn.exquo(g)), from_s(sd.exquo(g))


def poly_gcd(a: "ScalarExpr", b: "ScalarExpr") -> "ScalarExpr":
    """Monic gcd of two polynomial ScalarExprs (gcd(0, 0) = 0)."""
    if not a.is_polynomial() or not b.is_polynomial():
        raise ValueError("poly_gcd expects polynomials")
    if a.is_zero():
        return b / _lead(b._num)[1] if not b.is_zero() else ZERO
    if b.is_zero():
        return a / _lead(a._num)[1]
    to_s, from_s = _sympy_bridge(a._num, b._num)
    g = from_s(to_s(a._num).gcd(to_s(b._num)))
    return ScalarExpr(g) / _lead(g)[1]


def _poly_str(a: dict) -> str:
    if not a:
        return "0"
    parts = []
    for m in sorted(a, key=_mono_key, reverse=True):
        c = a[m]
        mono = "*".join(v if e == 1 else f"{v}^{e}" for v, e in m)
        neg = False
        if c.im == 0 or c.re == 0:
            q = c.re if c.im == 0 else c.im
            neg = q < 0
            mag = -q if neg else q
            unit = "" if c.im == 0 else "i"
            factors = [f for f in (str(mag.numerator) if mag.numerator != 1 else "", unit, mono) if f]
            body = "*".join(factors) or "1"
            if mag.denominator != 1:
                body += f"/{mag.denominator}"
        else:
            body = f"{c}*{mono}" if mono else str(c)
        parts.append(("-" if neg else "+", body))
    out = ("-" if parts[0][0] == "-" else "") + parts[0][1]
    for sgn, body in parts[1:]:
        out += f" {sgn} {body}"
    return out


# --------------------------------------------------------------------------
# rational functions


class ScalarExpr:
    """Canonical rational function over Q(i)."""

    __slots__ = ("_num", "_den", "_hash")

    def __init__(self, num: dict | None = None, den: dict | None = None, *, _canonical: bool = False):
        num = dict(num or {})
        den = dict(den) if den is not None else {(): ONE_Q}
        if not den:
            raise ZeroDivision("denominator is the zero polynomial")
        if not _canonical:
            num, den = _canonicalize(num, den)
        object.__setattr__(self, "_num", num)
        object.__setattr__(self, "_den", den)
        object.__setattr__(self, "_hash", None)

    def __setattr__(self, name, value):
        raise AttributeError("ScalarExpr is immutable")

    @property
    def numerator(self) -> dict:
        return dict(self._num)

    @property
    def denominator(self) -> dict:
        return dict(self._den)

    @classmethod
    def coerce(cls, value) -> "ScalarExpr":
        if isinstance(value, ScalarExpr):
            return value
        if isinstance(value, str):
            return parse_expr(value)
        c = GaussianRational.coerce(value)
        return cls({(): c} if c else {}, _canonical=True)

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        try:
            o = ScalarExpr.coerce(other)
        except TypeError:
            return NotImplemented
        if self._den == o._den:
            return ScalarExpr(_padd(self._num, o._num), self._den)
        return ScalarExpr(_padd(_pmul(self._num, o._den), _pmul(o._num, self._den)), _pmul(self._den, o._den))

    __radd__ = __add__

    def __neg__(self):
        return ScalarExpr({m: -c for m, c in self._num.items()}, self._den, _canonical=True)

    def __sub__(self, other):
        try:
            o = ScalarExpr.coerce(other)
        except TypeError:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        return ScalarExpr.coerce(other) - self

    def __mul__(self, other):
        try:
            o = ScalarExpr.coerce(other)
        except TypeError:
            return NotImplemented
        if not self._num or not o._num:
            return ZERO
        c = _pconst(o._num)
        if c is not None and o._den == {(): ONE_Q}:
            return ScalarExpr(_pscale(self._num, c), self._den, _canonical=True)
        c = _pconst(self._num)
        if c is not None and self._den == {(): ONE_Q}:
            return ScalarExpr(_pscale(o._num, c), o._den, _canonical=True)
        return ScalarExpr(_pmul(self._num, o._num), _pmul(self._den, o._den))

    __rmul__ = __mul__

    def __truediv__(self, other):
        try:
            o = ScalarExpr.coerce(other)
        except TypeError:
            return NotImplemented
        if not o._num:
            raise ZeroDivision("division by the zero rational function")
        return ScalarExpr(_pmul(self._num, o._den), _pmul(self._den, o._num))

    def __rtruediv__(self, other):
        return ScalarExpr.coerce(other) / self

    def __pow__(self, n: int):
        if not isinstance(n, int):
            raise TypeError("only integer exponents are supported")
        if n < 0:
            return ONE / (self ** (-n))
        return ScalarExpr(_ppow(self._num, n), _ppow(self._den, n), _canonical=True)

    # predicates -----------------------------------------------------------
    def is_zero(self) -> bool:
        return not self._num

    def __bool__(self):
        return bool(self._num)

    def constant_value(self):
        """The value as a GaussianRational if constant, else None."""
        c = _pconst(self._num)
        if c is None or _pconst(self._den) is None:
            return None
        return c / _pconst(self._den)

    def is_constant(self) -> bool:
        return self.constant_value() is not None

    def is_polynomial(self) -> bool:
        return self._den == {(): ONE_Q}

    def free_symbols(self) -> set:
        return _pvars(self._num) | _pvars(self._den)

    def __eq__(self, other):
        try:
            o = ScalarExpr.coerce(other)
        except (TypeError, ParseError):
            return NotImplemented
        return self._num == o._num and self._den == o._den

    def __hash__(self):
        h = self._hash
        if h is None:
            h = hash((frozenset(self._num.items()), frozenset(self._den.items())))
            object.__setattr__(self, "_hash", h)
        return h

    # calculus & friends ---------------------------------------------------
    def diff(self, x: str) -> "ScalarExpr":
        dn = _pdiff(self._num, x)
        dd = _pdiff(self._den, x)
        if not dd:
            return ScalarExpr(dn, self._den)
        return ScalarExpr(_padd(_pmul(dn, self._den), _pmul(self._num, dd), -1), _pmul(self._den, self._den))

    def conj(self) -> "ScalarExpr":
        return ScalarExpr(_pconj(self._num), _pconj(self._den))

    @property
    def real(self) -> "ScalarExpr":
        return (self + self.conj()) * HALF

    @property
    def imag(self) -> "ScalarExpr":
        return (self - self.conj()) * GaussianRational(0, Fraction(-1, 2))

    def subs(self, mapping: Mapping[str, "ScalarExpr"]) -> "ScalarExpr":
        """Substitute symbols by scalar expressions."""
        mapping = {k: ScalarExpr.coerce(v) for k, v in mapping.items()}
        return _peval_expr(self._num, mapping) / _peval_expr(self._den, mapping)

    def eval_at(self, point: Mapping[str, object]) -> GaussianRational:
        point = {k: GaussianRational.coerce(v) for k, v in point.items()}
        missing = self.free_symbols() - set(point)
        if missing:
            raise UnknownCoordinate(f"no value for {sorted(missing, key=var_rank)}")
        d = _peval_num(self._den, point)
        if not d:
            raise PoleError(f"denominator {_poly_str(self._den)} vanishes at {_fmt_point(point)}")
        return _peval_num(self._num, point) / d

    def __repr__(self):
        return f"ScalarExpr({str(self)!r})"

    def __str__(self):
        n = _poly_str(self._num)
        if self._den == {(): ONE_Q}:
            return n
        d = _poly_str(self._den)
        nwrap = n if len(self._num) == 1 else f"({n})"
        dwrap = d if len(self._den) == 1 and "*" not in d and "/" not in d else f"({d})"
        return f"{nwrap}/{dwrap}"


def _fmt_point(point):
    return "{" + ", ".join(f"{k}: {v}" for k, v in sorted(point.items(), key=lambda t: var_rank(t[0]))) + "}"


def _peval_num(p: dict, point) -> GaussianRational:
    total = ZERO_Q
    for m, c in p.items():
        t = c
        for v, e in m:
            t = t * point[v] ** e
        total = total + t
    return total


def _peval_expr(p: dict, mapping) -> ScalarExpr:
    total = ZERO
    for m, c in p.items():
        t = ScalarExpr({(): c}, _canonical=True)
        for v, e in m:
            base = mapping.get(v)
            if base is None:
                base = sym(v)
            t = t * base ** e
        total = total + t
    return total


def _canonicalize(num: dict, den: dict):
    if not num:
        return {}, {(): ONE_Q}
    dc = _pconst(den)
    if dc is None:
        nc = _pconst(num)
        if nc is None and (_pvars(num) & _pvars(den)):
            num, den = _sympy_gcd_cancel(num, den)
        _, lc = _lead(den)
    else:
        lc = dc
    if lc != ONE_Q:
        inv = lc.inverse()
        num = _pscale(num, inv)
        den = _pscale(den, inv)
    return num, den


ZERO = ScalarExpr({}, _canonical=True)
ONE = ScalarExpr({(): ONE_Q}, _canonical=True)
HALF = GaussianRational(Fraction(1, 2))
I = ScalarExpr({(): I_Q}, _canonical=True)


def sym(name: str) -> ScalarExpr:
    if not _IDENT.fullmatch(name):
        raise ValueError(f"invalid symbol name {name!r}")
    return ScalarExpr({((name, 1),): ONE_Q}, _canonical=True)


def const(re=0, im=0) -> ScalarExpr:
    return ScalarExpr.coerce(GaussianRational(re, im))


def differentiate(a: ScalarExpr, coord: str, coords: Iterable[str] | None = None) -> ScalarExpr:
    """Partial derivative; ``coords`` restricts the admissible coordinate names."""
    if coords is not None and coord not in tuple(coords):
        raise UnknownCoordinate(f"{coord!r} is not a declared coordinate")
    return ScalarExpr.coerce(a).diff(coord)


def eval_at(a: ScalarExpr, point: Mapping[str, object]) -> GaussianRational:
    return ScalarExpr.coerce(a).eval_at(point)


# --------------------------------------------------------------------------
# parser: integers, i, + - * / ^ (nonnegative integer exponents), ( ), identifiers

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z_][A-Za-z0-9_]*)|(\*\*|[-+*/^()]))")


def _tokenize(text: str):
    pos = 0
    toks = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            col = pos + len(text[pos:]) - len(text[pos:].lstrip()) + 1
            raise ParseError(f"unexpected character {text[col - 1]!r}", text, col)
        start = m.start(m.lastindex) + 1
        if m.group(1):
            toks.append(("int", m.group(1), start))
        elif m.group(2):
            toks.append(("id", m.group(2), start))
        else:
            toks.append(("op", "^" if m.group(3) == "**" else m.group(3), start))
        pos = m.end()
    toks.append(("end", "", len(text) + 1))
    return toks


class _Parser:
    def __init__(self, text: str, line: int):
        self.text = text
        self.line = line
        self.toks = _tokenize_at(text, line)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def error(self, msg, tok):
        raise ParseError(msg, self.text, tok[2], self.line)

    def parse(self) -> ScalarExpr:
        e = self.expr()
        t = self.peek()
        if t[0] != "end":
            self.error(f"unexpected token {t[1]!r}", t)
        return e

    def expr(self):
        e = self.term()
        while self.peek()[:2] in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            r = self.term()
            e = e + r if op == "+" else e - r
        return e

    def term(self):
        e = self.unary()
        while self.peek()[:2] in (("op", "*"), ("op", "/")):
            tok = self.take()
            r = self.unary()
            if tok[1] == "*":
                e = e * r
            else:
                if r.is_zero():
                    raise ParseError("division by zero", self.text, tok[2], self.line)
                e = e / r
        return e

    def unary(self):
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return -self.unary()
        if self.peek()[:2] == ("op", "+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            t = self.take()
            if t[0] != "int":
                self.error("exponent must be a nonnegative integer literal", t)
            return base ** int(t[1])
        return base

    def atom(self):
        t = self.take()
        if t[0] == "int":
            return ScalarExpr.coerce(int(t[1]))
        if t[0] == "id":
            if self.peek()[:2] == ("op", "("):
                self.error(f"function application {t[1]}(...) is not supported; "
                           "only rational expressions are allowed", t)
            if t[1] == "i":
                return I
            return sym(t[1])
        if t[:2] == ("op", "("):
            e = self.expr()
            c = self.take()
            if c[:2] != ("op", ")"):
                self.error("expected ')'", c)
            return e
        self.error(f"unexpected token {t[1]!r}" if t[1] else "unexpected end of expression", t)


def _tokenize_at(text, line):
    try:
        return _tokenize(text)
    except ParseError as e:
        raise ParseError(str(e).rsplit(" (line", 1)[0], text, e.column, line) from None


def parse_expr(text: str, line: int = 1) -> ScalarExpr:
    """Parse the expression grammar used by system files and the CLI."""
    return _Parser(text, line).parse()
