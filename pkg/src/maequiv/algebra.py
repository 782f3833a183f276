"""The wedge pairing on 2-forms of R^4 and the elliptic structure algebra.

Matrix convention: a 4x4 matrix ``g`` acts on the coframe by
``w^i -> sum_j g[i][j] w^j``; an algebra element ``xi`` acts as the derivation
with ``D(w^i) = sum_j xi[i][j] w^j``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from fractions import Fraction
from itertools import combinations
from typing import Sequence

from maequiv import linalg
from maequiv.exterior import Form, coordinate_frame, substitute, wedge
from maequiv.symkernel import ZERO, GaussianRational, ScalarExpr

__all__ = [
    "FRAME4",
    "alpha_L",
    "alpha_R",
    "alpha_basis",
    "pairing",
    "gram_matrix",
    "pullback_action",
    "infinitesimal_action",
    "signature",
    "LieElement",
    "Sl2CElement",
    "xi_basis",
    "membership",
    "solve_membership_conditions",
    "bracket",
    "xi_coordinates",
    "BRACKETS_G",
    "BRACKETS_SL2C",
    "CORRESPONDENCE",
    "sl2c_basis",
    "phi_map",
    "t_map",
    "check_structure_constants",
    "bracket_rows",
    "check_sl2c_relations",
    "equivariance_checks",
    "homomorphism_checks",
    "jacobi_checks",
    "RelationCheck",
    "Membership",
]

FRAME4 = coordinate_frame(("y1", "y2", "y3", "y4"), labels=("w1", "w2", "w3", "w4"), name="R4*")
_W = FRAME4.forms()


def _w(i: int) -> Form:
    return _W[i - 1]


def alpha_L(a: int) -> Form:
    return {1: wedge(_w(1), _w(2)) + wedge(_w(3), _w(4)),
            2: wedge(_w(1), _w(3)) + wedge(_w(4), _w(2)),
            3: wedge(_w(1), _w(4)) + wedge(_w(2), _w(3))}[a]


def alpha_R(a: int) -> Form:
    return {1: wedge(_w(1), _w(2)) - wedge(_w(3), _w(4)),
            2: wedge(_w(1), _w(3)) - wedge(_w(4), _w(2)),
            3: wedge(_w(1), _w(4)) - wedge(_w(2), _w(3))}[a]


def alpha_basis() -> list[Form]:
    return [alpha_L(1), alpha_L(2), alpha_L(3), alpha_R(1), alpha_R(2), alpha_R(3)]


def _check_two_form(a: Form):
    if a.frame is not FRAME4 or a.degree != 2:
        raise ValueError("expected a 2-form on R^4")
    if any(not c.is_constant() for c in a.terms.values()):
        raise ValueError("2-forms on R^4 must have constant coefficients")


def pairing(a: Form, b: Form) -> Fraction:
    """Volume coefficient of a ^ b."""
    _check_two_form(a)
    _check_two_form(b)
    v = wedge(a, b).coeff("w1", "w2", "w3", "w4").constant_value()
    return v.re if v.is_real else v


def gram_matrix(basis: Sequence[Form] | None = None) -> list[list[Fraction]]:
    basis = list(basis or alpha_basis())
    return [[pairing(a, b) for b in basis] for a in basis]


def _rational_matrix(g) -> list[list[Fraction]]:
    return [[Fraction(v) if not isinstance(v, GaussianRational) else v.re for v in row] for row in g]


def pullback_action(g: Sequence[Sequence], a: Form) -> Form:
    """g* a with g* w^i = sum_j g[i][j] w^j."""
    g = _rational_matrix(g)
    images = {}
    for i in range(4):
        img = Form(FRAME4, 1, {})
        for j in range(4):
            if g[i][j]:
                img = img + _w(j + 1) * g[i][j]
        images[f"w{i + 1}"] = img
    return substitute(a, images, target=FRAME4)


def infinitesimal_action(xi: Sequence[Sequence], a: Form) -> Form:
    """Derivation D_xi applied to a form on R^4."""
    xi = _rational_matrix(xi)
    out = Form(FRAME4, a.degree, {})
    for word, c in a.terms.items():
        for pos, k in enumerate(word):
            for j in range(4):
                if not xi[k][j]:
                    continue
                new = list(word)
                new[pos] = j
                out = out + Form.from_terms(FRAME4, a.degree, {tuple(new): c * xi[k][j]})
    return out


def signature() -> tuple[int, int]:
    pos, neg, _ = linalg.inertia(gram_matrix())
    return pos, neg


# --------------------------------------------------------------------------
# matrices


@dataclass(frozen=True)
class LieElement:
    """4x4 exact rational matrix in the elliptic structure algebra."""

    m: tuple

    @classmethod
    def of(cls, rows) -> "LieElement":
        return cls(tuple(tuple(Fraction(v) for v in row) for row in rows))

    def __add__(self, o):
        return LieElement(tuple(tuple(a + b for a, b in zip(r, s)) for r, s in zip(self.m, o.m)))

    def __sub__(self, o):
        return self + o * -1

    def __mul__(self, c):
        c = Fraction(c)
        return LieElement(tuple(tuple(a * c for a in r) for r in self.m))

    __rmul__ = __mul__

    def __matmul__(self, o):
        if isinstance(o, LieElement):
            return LieElement(tuple(tuple(sum(self.m[i][k] * o.m[k][j] for k in range(4)) for j in range(4))
                                    for i in range(4)))
        return tuple(sum(self.m[i][k] * Fraction(o[k]) for k in range(4)) for i in range(4))

    def trace(self) -> Fraction:
        return sum(self.m[i][i] for i in range(4))

    def rows(self):
        return [list(r) for r in self.m]

    def __str__(self):
        return "[" + "; ".join(" ".join(str(v) for v in r) for r in self.m) + "]"


@dataclass(frozen=True)
class Sl2CElement:
    """Traceless 2x2 matrix over Q(i)."""

    m: tuple

    def __post_init__(self):
        if self.m[0][0] + self.m[1][1] != 0:
            raise ValueError("sl(2,C) elements must be traceless")

    @classmethod
    def of(cls, rows) -> "Sl2CElement":
        return cls(tuple(tuple(GaussianRational.coerce(v) for v in row) for row in rows))

    def __add__(self, o):
        return Sl2CElement(tuple(tuple(a + b for a, b in zip(r, s)) for r, s in zip(self.m, o.m)))

    def __mul__(self, c):
        c = GaussianRational.coerce(c) if not isinstance(c, GaussianRational) else c
        return Sl2CElement(tuple(tuple(a * c for a in r) for r in self.m))

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1

    def __sub__(self, o):
        return self + (-o)

    def apply(self, v):
        return tuple(self.m[i][0] * v[0] + self.m[i][1] * v[1] for i in range(2))

    def __str__(self):
        return "[" + "; ".join(" ".join(str(v) for v in r) for r in self.m) + "]"


def _matprod(a, b, n):
    return tuple(tuple(sum((a[i][k] * b[k][j] for k in range(n)), a[0][0] * 0) for j in range(n))
                 for i in range(n))


def bracket(a, b):
    """Matrix commutator ab - ba within one algebra."""
    if type(a) is not type(b) or not isinstance(a, (LieElement, Sl2CElement)):
        raise TypeError(f"cannot bracket {type(a).__name__} with {type(b).__name__}")
    n = 4 if isinstance(a, LieElement) else 2
    ab = _matprod(a.m, b.m, n)
    ba = _matprod(b.m, a.m, n)
    return type(a)(tuple(tuple(x - y for x, y in zip(r, s)) for r, s in zip(ab, ba)))


def xi_basis() -> list[LieElement]:
    return [
        LieElement.of([[1, 0, 0, 0], [0, -1, 0, 0], [0, 0, 1, 0], [0, 0, 0, -1]]),
        LieElement.of([[0, 0, 0, 0], [0, 0, 1, 0], [0, 0, 0, 0], [1, 0, 0, 0]]),
        LieElement.of([[0, 1, 0, 0], [0, 0, 0, 0], [0, 0, 0, -1], [0, 0, 0, 0]]),
        LieElement.of([[0, 0, 1, 0], [0, 0, 0, 1], [-1, 0, 0, 0], [0, -1, 0, 0]]),
        LieElement.of([[0, 0, 0, 0], [-1, 0, 0, 0], [0, 0, 0, 0], [0, 0, 1, 0]]),
        LieElement.of([[0, 0, 0, 1], [0, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 0]]),
    ]


@dataclass
class Membership:
    member: bool
    trace: Fraction
    residue_L1: Form
    residue_L3: Form

    def __bool__(self):
        return self.member


def membership(xi) -> Membership:
    """Trace zero and D_xi annihilates alpha_L^1 and alpha_L^3."""
    rows = xi.rows() if isinstance(xi, LieElement) else [[Fraction(v) for v in r] for r in xi]
    tr = sum(rows[i][i] for i in range(4))
    r1 = infinitesimal_action(rows, alpha_L(1))
    r3 = infinitesimal_action(rows, alpha_L(3))
    return Membership(tr == 0 and r1.is_zero() and r3.is_zero(), tr, r1, r3)


def solve_membership_conditions() -> list[list[Fraction]]:
    """Kernel of the linear conditions (trace, D alpha_L^1, D alpha_L^3) on 4x4 matrices."""
    rows = []
    rows.append([1 if (k // 4 == k % 4) else 0 for k in range(16)])
    for alpha in (alpha_L(1), alpha_L(3)):
        images = []
        for k in range(16):
            e = [[0] * 4 for _ in range(4)]
            e[k // 4][k % 4] = 1
            images.append(infinitesimal_action(e, alpha))
        words = sorted(set().union(*(f.terms for f in images)))
        for w in words:
            rows.append([f.terms.get(w, ZERO) for f in images])
    return [[v.constant_value().re for v in vec] for vec in linalg.nullspace(rows, 16)]


def xi_coordinates(xi: LieElement) -> list[Fraction]:
    """Coefficients of xi in the basis xi_1..xi_6 (exact solve)."""
    return list(_xi_coordinates(xi))


@lru_cache(maxsize=256)
def _xi_coordinates(xi: LieElement) -> tuple:
    basis = xi_basis()
    rows = [[b.m[i][j] for b in basis] for i in range(4) for j in range(4)]
    rhs = [xi.m[i][j] for i in range(4) for j in range(4)]
    try:
        sol, _ = linalg.solve(rows, rhs)
    except linalg.InconsistentSystem as exc:
        raise ValueError(f"{xi} is not in the span of xi_1..xi_6") from exc
    return tuple(v.constant_value().re for v in sol)


# --------------------------------------------------------------------------
# structure constants of the real algebra: (i, j, {k: coefficient})
BRACKETS_G = [
    (1, 4, {}), (2, 5, {}), (3, 6, {}),
    (1, 2, {2: -2}), (1, 3, {3: 2}), (1, 5, {5: -2}), (1, 6, {6: 2}),
    (4, 2, {5: -2}), (4, 6, {3: 2}), (4, 5, {2: 2}), (4, 3, {6: -2}),
    (2, 6, {1: -1}), (2, 3, {4: -1}), (5, 6, {4: -1}), (5, 3, {1: 1}),
]
# row label for reports: the first three entries form the single row "[xi_a, xi_{3+a}] = 0"

CORRESPONDENCE = {1: "h0", 2: "e0", 3: "f1", 4: "h1", 5: "e1", 6: "f0"}

# matching structure constants of sl(2, C)
BRACKETS_SL2C = [
    ("h0", "h1", {}), ("e0", "e1", {}), ("f0", "f1", {}),
    ("h0", "e0", {"e0": -2}), ("h0", "f1", {"f1": 2}), ("h0", "e1", {"e1": -2}), ("h0", "f0", {"f0": 2}),
    ("h1", "e0", {"e1": -2}), ("h1", "f0", {"f1": 2}), ("h1", "e1", {"e0": 2}), ("h1", "f1", {"f0": -2}),
    ("e0", "f0", {"h0": -1}), ("e0", "f1", {"h1": -1}), ("e1", "f0", {"h1": -1}), ("e1", "f1", {"h0": 1}),
]


def t_map(x: Sequence) -> tuple[GaussianRational, GaussianRational]:
    """R^4 -> C^2, X -> (x3 + i x1, x2 + i x4)."""
    x1, x2, x3, x4 = (Fraction(v) for v in x)
    return GaussianRational(x3, x1), GaussianRational(x2, x4)


def _equivariant_matrix(xi: LieElement) -> Sl2CElement:
    """Solve T(xi X) = A T(X) for a complex 2x2 A over all four basis vectors."""
    # unknowns a11, a12, a21, a22 (complex)
    rows, rhs = [], []
    for k in range(4):
        e = [0, 0, 0, 0]
        e[k] = 1
        tx = t_map(e)
        target = t_map(xi @ e)
        for r in range(2):
            row = [ZERO] * 4
            row[2 * r] = ScalarExpr.coerce(tx[0])
            row[2 * r + 1] = ScalarExpr.coerce(tx[1])
            rows.append(row)
            rhs.append(ScalarExpr.coerce(target[r]))
    sol, kernel = linalg.solve(rows, rhs)
    if kernel:
        raise ValueError("equivariance system is underdetermined")
    a = [v.constant_value() for v in sol]
    return Sl2CElement.of([[a[0], a[1]], [a[2], a[3]]])


def sl2c_basis() -> dict[str, Sl2CElement]:
    """h0, e0, f0, h1, e1, f1 as concrete matrices, derived from T-equivariance."""
    return dict(_sl2c_basis())


@lru_cache(maxsize=1)
def _sl2c_basis() -> tuple:
    out = {}
    for i, xi in enumerate(xi_basis(), start=1):
        out[CORRESPONDENCE[i]] = _equivariant_matrix(xi)
    return tuple((k, out[k]) for k in ("h0", "e0", "f0", "h1", "e1", "f1"))


def phi_map(xi: LieElement) -> Sl2CElement:
    basis = sl2c_basis()
    coeffs = xi_coordinates(xi)
    out = Sl2CElement.of([[0, 0], [0, 0]])
    for i, c in enumerate(coeffs, start=1):
        if c:
            out = out + basis[CORRESPONDENCE[i]] * c
    return out


def _combo(terms: dict, basis: dict, zero):
    out = zero
    for k, c in terms.items():
        out = out + basis[k] * c
    return out


@dataclass
class RelationCheck:
    label: str
    holds: bool
    lhs: str
    rhs: str


def check_structure_constants() -> list[RelationCheck]:
    xs = {i: x for i, x in enumerate(xi_basis(), start=1)}
    zero = LieElement.of([[0] * 4] * 4)
    out = []
    for i, j, terms in BRACKETS_G:
        lhs = bracket(xs[i], xs[j])
        rhs = _combo(terms, xs, zero)
        rhs_s = " + ".join(f"{c}*xi{k}" for k, c in terms.items()) or "0"
        out.append(RelationCheck(f"[xi{i}, xi{j}] = {rhs_s}", lhs == rhs, str(lhs), str(rhs)))
    return out


def bracket_rows() -> list[RelationCheck]:
    """The thirteen printed rows of the left column; the first row bundles [xi_a, xi_(3+a)] = 0."""
    checks = check_structure_constants()
    first = checks[:3]
    head = RelationCheck("[xi_a, xi_(3+a)] = 0 for a = 1, 2, 3", all(c.holds for c in first),
                         "; ".join(c.lhs for c in first), "0")
    return [head] + checks[3:]


def check_sl2c_relations() -> dict[str, list[RelationCheck]]:
    """The sl(2, C) bracket table and the generic index formulas, on the derived matrices.

    The generic formulas ``[h_a, e_b] = -2 i^(a+b) e0``, ``[h_a, f_b] = -2 i^(a+b) f0``
    and ``[e_a, f_b] = -i^(a+b) h0`` are reported separately; they disagree with
    several specific table entries.
    """
    b = sl2c_basis()
    zero = Sl2CElement.of([[0, 0], [0, 0]])
    table = []
    for x, y, terms in BRACKETS_SL2C:
        lhs = bracket(b[x], b[y])
        rhs = _combo(terms, b, zero)
        rhs_s = " + ".join(f"{c}*{k}" for k, c in terms.items()) or "0"
        table.append(RelationCheck(f"[{x}, {y}] = {rhs_s}", lhs == rhs, str(lhs), str(rhs)))
    generic = []
    ipow = [GaussianRational(1), GaussianRational(0, 1), GaussianRational(-1)]
    for fam, other, target, scale in (("h", "e", "e0", -2), ("h", "f", "f0", -2), ("e", "f", "h0", -1)):
        for a in (0, 1):
            for c in (0, 1):
                lhs = bracket(b[f"{fam}{a}"], b[f"{other}{c}"])
                rhs = b[target] * (ipow[a + c] * scale)
                generic.append(RelationCheck(f"[{fam}{a}, {other}{c}] = {scale}*i^{a + c}*{target}",
                                             lhs == rhs, str(lhs), str(rhs)))
    return {"table": table, "generic": generic}


def equivariance_checks() -> list[RelationCheck]:
    """T(xi_i X) = Phi(xi_i) T(X) for the six generators and four basis vectors."""
    out = []
    for i, xi in enumerate(xi_basis(), start=1):
        a = phi_map(xi)
        for k in range(4):
            e = [0, 0, 0, 0]
            e[k] = 1
            lhs = t_map(xi @ e)
            rhs = a.apply(t_map(e))
            out.append(RelationCheck(f"T(xi{i} e{k + 1}) = Phi(xi{i}) T(e{k + 1})", lhs == rhs,
                                     f"({lhs[0]}, {lhs[1]})", f"({rhs[0]}, {rhs[1]})"))
    return out


def homomorphism_checks() -> list[RelationCheck]:
    xs = xi_basis()
    out = []
    for i, j in combinations(range(6), 2):
        lhs = phi_map(bracket(xs[i], xs[j]))
        rhs = bracket(phi_map(xs[i]), phi_map(xs[j]))
        out.append(RelationCheck(f"Phi([xi{i + 1}, xi{j + 1}]) = [Phi(xi{i + 1}), Phi(xi{j + 1})]",
                                 lhs == rhs, str(lhs), str(rhs)))
    return out


def jacobi_checks() -> list[RelationCheck]:
    xs = xi_basis()
    zero = LieElement.of([[0] * 4] * 4)
    out = []
    for i, j, k in combinations(range(6), 3):
        a, b, c = xs[i], xs[j], xs[k]
        s = bracket(a, bracket(b, c)) + bracket(b, bracket(c, a)) + bracket(c, bracket(a, b))
        out.append(RelationCheck(f"Jacobi(xi{i + 1}, xi{j + 1}, xi{k + 1})", s == zero, str(s), "0"))
    return out
