"""Cartan's test for a linear Pfaffian system given by abstract structure equations."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from maequiv import linalg
from maequiv.exterior import Form, FrameSpec, wedge
from maequiv.symkernel import ZERO, ScalarExpr

__all__ = [
    "TableauError",
    "Tableau",
    "build_tableau",
    "zero_tableau",
    "reduced_system_tableau",
    "m_matrix",
    "CharacterReport",
    "reduced_characters",
    "PRINTED_PROBES",
    "PRINTED_M_ROWS",
    "STATED_R",
    "printed_z",
    "PRINTED_CONSTRAINTS",
    "PRINTED_FREE",
    "check_printed_constraints",
    "printed_free_parameters_ok",
]

# the two probes printed with the worked example and its displayed M(X)
PRINTED_PROBES = ((Fraction(-1), Fraction(-1), Fraction(0)), (Fraction(0), Fraction(0), Fraction(-1)))
PRINTED_M_ROWS = (((-1, 0, 0), (0, 0, 0), (0, 0, 0), (0, 0, 0)),
                ((0, 0, 0), (0, -1, 0), (0, 0, -1), (0, 0, 0)),
                ((0, 0, -1), (0, 0, 1), (0, 0, 0), (0, -1, 0)))
# the two values stated for r with the worked example, reported next to the computed one
STATED_R = (5, 4)


class TableauError(ValueError):
    pass


@dataclass(frozen=True)
class Tableau:
    """Linear Pfaffian data: d pi^l = sum_rho psi_rho ^ L^l_rho + (torsion).

    ``a[l][rho][j]`` is the coefficient of pi^j in L^l_rho, so that
    M(X)^l_rho = sum_j a[l][rho][j] x^j.
    """

    equations: tuple  # labels pi^l
    unknowns: tuple  # connection labels psi_rho
    independence: tuple  # labels pi^j spanning the independence condition
    a: tuple
    constraints: tuple = ()  # rows of the absorption system in the z variables
    z_names: tuple = ()

    @property
    def n(self) -> int:
        return len(self.independence)

    def absorption_matrix(self) -> list[list[ScalarExpr]]:
        return [list(r) for r in self.constraints]

    def r1(self) -> int:
        """Degree of indeterminacy: free variables of the homogeneous absorption system."""
        if not self.z_names:
            return 0
        return len(self.z_names) - linalg.rank(self.absorption_matrix()) if self.constraints else len(self.z_names)

    def free_parameters(self) -> list[str]:
        if not self.constraints:
            return list(self.z_names)
        _, pivots = linalg.rref(self.absorption_matrix())
        return [z for k, z in enumerate(self.z_names) if k not in pivots]

    def is_free_parameter_set(self, names: Sequence[str]) -> bool:
        """Whether ``names`` can serve as the free parameters of the absorption system.

        True when the remaining variables are determined uniquely by them:
        the constraint columns of the other variables have full column rank
        and the count matches r1.
        """
        names = list(names)
        if len(names) != self.r1() or any(x not in self.z_names for x in names):
            return False
        others = [k for k, z in enumerate(self.z_names) if z not in names]
        sub = [[row[k] for k in others] for row in self.absorption_matrix()]
        return linalg.rank(sub) == len(others) if others else True

    def relations(self) -> list[dict]:
        """Each pivot variable as a combination of free ones (row-reduced constraints)."""
        if not self.constraints:
            return []
        m, pivots = linalg.rref(self.absorption_matrix())
        out = []
        for row, p in zip(m, pivots):
            rel = {self.z_names[k]: -row[k] for k in range(len(self.z_names)) if k != p and not row[k].is_zero()}
            out.append({"variable": self.z_names[p], "equals": rel})
        return out


def build_tableau(frame: FrameSpec, equations: Sequence[str], unknowns: Sequence[str],
                  independence: Sequence[str]) -> Tableau:
    """Read the tableau off the declared differentials of ``equations``.

    Every term of d pi^l that contains an unknown label must be of the form
    psi_rho ^ pi^j with pi^j among the independence labels; anything else is a
    shape error.  Terms without unknowns are torsion and are ignored here.
    """
    unk = {frame.index[u]: r for r, u in enumerate(unknowns)}
    ind = {frame.index[x]: j for j, x in enumerate(independence)}
    a = []
    for lab in equations:
        row = [[ZERO] * len(independence) for _ in unknowns]
        d = frame.d_label(frame.index[lab])
        for w, c in d.terms.items():
            hits = [k for k in w if k in unk]
            if not hits:
                continue
            if len(hits) != 1:
                raise TableauError(f"d {lab} has a term quadratic in the unknowns")
            other = [k for k in w if k not in unk][0]
            if other not in ind:
                raise TableauError(f"d {lab} pairs an unknown with {frame.labels[other]}, outside the independence span")
            sign = 1 if w[0] == hits[0] else -1  # psi ^ pi order
            row[unk[hits[0]]][ind[other]] = row[unk[hits[0]]][ind[other]] + (c if sign > 0 else -c)
        a.append(tuple(tuple(r) for r in row))
    return _with_absorption(Tableau(tuple(equations), tuple(unknowns), tuple(independence), tuple(a)))


def _with_absorption(t: Tableau) -> Tableau:
    """Attach the homogeneous absorption system for psi_rho -> psi_rho + sum_k z_rho_k pi^k."""
    n = t.n
    z_names = tuple(f"z[{u}]_{k}" for u in t.unknowns for k in range(n))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    rows = []
    for l in range(len(t.equations)):
        for (i, j) in pairs:
            # coefficient of pi^i ^ pi^j in sum z_rho_k pi^k ^ L^l_rho
            row = []
            for rho in range(len(t.unknowns)):
                for k in range(n):
                    c = ZERO
                    if k == i:
                        c = c + t.a[l][rho][j]
                    if k == j:
                        c = c - t.a[l][rho][i]
                    row.append(c)
            if any(not c.is_zero() for c in row):
                rows.append(tuple(row))
    return Tableau(t.equations, t.unknowns, t.independence, t.a, tuple(rows), z_names)


def zero_tableau(n: int = 3, unknowns: int = 0) -> Tableau:
    """A Frobenius system: no unknown connection forms enter the equations."""
    labels = tuple(f"u{r}" for r in range(unknowns))
    a = tuple(tuple(tuple(ZERO for _ in range(n)) for _ in labels) for _ in range(n))
    return _with_absorption(Tableau(tuple(f"e{l}" for l in range(n)), labels, tuple(f"e{j}" for j in range(n)), a))


def reduced_system_tableau() -> Tableau:
    """Tableau of the fully reduced elliptic equations (built-in system)."""
    from maequiv.gstructure import generic_b1_frame

    fr = generic_b1_frame(p_zero=True)
    return build_tableau(fr, ("pi0", "pi1", "pi2"), ("psi00", "psi11", "psi12", "psi21"), ("pi0", "pi1", "pi2"))


def m_matrix(t: Tableau, x: Sequence) -> list[list[ScalarExpr]]:
    if len(x) != t.n:
        raise TableauError(f"probe has length {len(x)}, expected {t.n}")
    xs = [ScalarExpr.coerce(v) for v in x]
    return [[sum((t.a[l][rho][j] * xs[j] for j in range(t.n)), ZERO) for rho in range(len(t.unknowns))]
            for l in range(len(t.equations))]


@dataclass(frozen=True)
class CharacterReport:
    s_prime: tuple
    r_indeterminacy: int
    cartan_sum: int
    involutive: bool
    probe_witnesses: tuple  # per k: the probes achieving the stacked rank
    stacked_ranks: tuple  # max rank of k stacked M's, k = 1..n
    stated_r: tuple = STATED_R
    free_parameters: tuple = ()
    probes_tried: int = 0
    printed_probe_ranks: tuple = field(default=())

    def as_dict(self) -> dict:
        return {
            "s_prime": list(self.s_prime),
            "r_indeterminacy": self.r_indeterminacy,
            "cartan_sum": self.cartan_sum,
            "involutive": self.involutive,
            "stacked_ranks": list(self.stacked_ranks),
            "probe_witnesses": [[[str(v) for v in p] for p in w] for w in self.probe_witnesses],
            "printed_probe_ranks": list(self.printed_probe_ranks),
            "stated_r": list(self.stated_r),
            "free_parameters": list(self.free_parameters),
            "probes_tried": self.probes_tried,
        }


def _stack_rank(t: Tableau, probes) -> int:
    rows = []
    for p in probes:
        rows += m_matrix(t, p)
    return linalg.rank(rows) if rows and rows[0] else 0


def _random_probe(rng: random.Random, n: int):
    return tuple(Fraction(rng.randint(-9, 9), rng.randint(1, 9)) for _ in range(n))


def reduced_characters(t: Tableau, probes: int = 32, seed: int = 0,
                       witnesses: Sequence[Sequence] | None = None) -> CharacterReport:
    """Reduced characters from maximal ranks of stacked M matrices.

    The printed witnesses (or ``witnesses``) are tried first, then ``probes``
    random exact-rational probe families from a generator seeded with
    ``seed``.  A family achieving a higher rank replaces the witness.
    """
    n = t.n
    fixed = [tuple(Fraction(v) for v in w) for w in (witnesses if witnesses is not None else PRINTED_PROBES)]
    fixed = [w for w in fixed if len(w) == n]
    rng = random.Random(seed)
    families = []
    if fixed:
        fam = list(fixed[:n])
        while len(fam) < n:
            fam.append(_random_probe(rng, n))
        families.append(fam)
    for _ in range(probes):
        families.append([_random_probe(rng, n) for _ in range(n)])
    best = [0] * n
    wit: list = [() for _ in range(n)]
    for fam in families:
        for k in range(1, n + 1):
            r = _stack_rank(t, fam[:k])
            if r > best[k - 1]:
                best[k - 1] = r
                wit[k - 1] = tuple(fam[:k])
    s = []
    prev = 0
    for k in range(n):
        s.append(best[k] - prev)
        prev = best[k]
    r1 = t.r1()
    total = sum((k + 1) * v for k, v in enumerate(s))
    printed_ranks = tuple(_stack_rank(t, PRINTED_PROBES[:k]) for k in range(1, len(PRINTED_PROBES) + 1)) \
        if n == len(PRINTED_PROBES[0]) else ()
    return CharacterReport(tuple(s), r1, total, total == r1, tuple(wit), tuple(best),
                           free_parameters=tuple(t.free_parameters()), probes_tried=len(families),
                           printed_probe_ranks=printed_ranks)


def printed_z(i: int, j: int, k: int) -> str:
    """Name of z^i_{jk}, the pi^k component of psi^i_j, in a tableau's variables."""
    return f"z[psi{i}{j}]_{k}"


# printed constraints as (coefficients over printed_z triples); each means sum c * z = 0
PRINTED_CONSTRAINTS = (
    ("z^0_00 = 0", {(0, 0, 0): 1}),
    ("z^0_01 = 0", {(0, 0, 1): 1}),
    ("z^0_02 = 0", {(0, 0, 2): 1}),
    ("z^1_10 = 0", {(1, 1, 0): 1}),
    ("z^1_20 = 0", {(1, 2, 0): 1}),
    ("z^2_10 = 0", {(2, 1, 0): 1}),
    ("z^1_11 = z^2_12", {(1, 1, 1): 1, (2, 1, 2): -1}),
    ("z^1_12 = z^1_21", {(1, 1, 2): 1, (1, 2, 1): -1}),
)
PRINTED_FREE = ((1, 1, 1), (1, 1, 2), (1, 2, 2), (2, 1, 1))


def check_printed_constraints(t: Tableau) -> dict:
    """Whether each printed constraint is implied by the absorption system."""
    base = t.absorption_matrix()
    r0 = linalg.rank(base)
    out = {}
    for name, rel in PRINTED_CONSTRAINTS:
        row = [ZERO] * len(t.z_names)
        for (i, j, k), c in rel.items():
            row[t.z_names.index(printed_z(i, j, k))] = ScalarExpr.coerce(c)
        out[name] = linalg.rank(base + [row]) == r0
    return out


def printed_free_parameters_ok(t: Tableau) -> bool:
    return t.is_free_parameter_set([printed_z(*x) for x in PRINTED_FREE])
