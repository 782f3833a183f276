"""Jet space J^1(R^2, R), contact form and Monge-Ampere systems.

Coefficient slots follow the order

    (psi_p1p2, psi_p1x2, psi_p2x2, psi_p1x1, psi_p2x1, psi_x1x2)

for

    Psi = c0 dp1^dp2 + c1 dp1^dx2 + c2 dp2^dx2 + c3 dp1^dx1 + c4 dp2^dx1 + c5 dx1^dx2.

Expanding ``Psi ^ dtheta`` modulo theta gives ``(c2 + c3) dx1^dx2^dp1^dp2``,
so compatibility is ``psi_p1x1 + psi_p2x2 = 0``.  Pulling Psi back along a
1-jet graph gives

    c0 (u11 u22 - u12^2) + c1 u11 - c4 u22 + (c2 - c3) u12 + c5 = 0.

Both are derived by :func:`compatibility_residue` and :func:`expand_to_pde`
rather than hard-coded.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

from maequiv import linalg
from maequiv.exterior import Form, FrameSpec, coordinate_frame, reduce_mod_ideal, substitute, wedge
from maequiv.symkernel import JET_COORDS, ONE, ZERO, ScalarExpr, poly_gcd, sym

__all__ = [
    "JetChart",
    "JET",
    "MASystemError",
    "MongeAmpereSystem",
    "ScalarPDE",
    "ELVerdict",
    "PSI_SLOTS",
    "contact_form",
    "compatibility_residue",
    "build_ma_system",
    "system_from_psi",
    "expand_to_pde",
    "restrict_to_graph",
    "euler_lagrange_test",
]

PSI_SLOTS = ("psi_p1p2", "psi_p1x2", "psi_p2x2", "psi_p1x1", "psi_p2x1", "psi_x1x2")
_SLOT_WORDS = (("dp1", "dp2"), ("dp1", "dx2"), ("dp2", "dx2"), ("dp1", "dx1"), ("dp2", "dx1"), ("dx1", "dx2"))


class JetChart:
    """The chart (x1, x2, z, p1, p2) with its coordinate coframe."""

    coords = JET_COORDS

    def __init__(self):
        self.frame: FrameSpec = coordinate_frame(JET_COORDS, name="J1(R2,R)")
        self.plane: FrameSpec = coordinate_frame(("x1", "x2"), name="R2")

    def __getattr__(self, name):
        if name in ("dx1", "dx2", "dz", "dp1", "dp2"):
            return self.frame.basis(name)
        raise AttributeError(name)

    def __repr__(self):
        return "JetChart(x1, x2, z, p1, p2)"


JET = JetChart()


class MASystemError(ValueError):
    """Invalid Monge-Ampere data; ``condition`` names the failed check."""

    def __init__(self, condition: str, residue=None, message: str = ""):
        self.condition = condition
        self.residue = residue
        super().__init__(message or f"{condition} fails; residue {residue}")


def contact_form(chart: JetChart = JET) -> Form:
    p1, p2 = sym("p1"), sym("p2")
    return chart.dz - chart.dx1 * p1 - chart.dx2 * p2


@dataclass(frozen=True)
class MongeAmpereSystem:
    chart: JetChart
    theta: Form
    psi: Form
    psi_coeffs: tuple

    def coeff(self, slot: str) -> ScalarExpr:
        return self.psi_coeffs[PSI_SLOTS.index(slot)]

    def scaled(self, lam) -> "MongeAmpereSystem":
        return build_ma_system([c * ScalarExpr.coerce(lam) for c in self.psi_coeffs], self.chart)


def psi_from_coeffs(coeffs: Sequence, chart: JetChart = JET) -> Form:
    return Form.from_terms(chart.frame, 2, {w: ScalarExpr.coerce(c) for w, c in zip(_SLOT_WORDS, coeffs)})


def coeffs_from_psi(psi: Form, chart: JetChart = JET) -> tuple:
    """The six slot coefficients of Psi modulo theta (dz eliminated)."""
    red = reduce_mod_ideal(psi, [contact_form(chart)])
    return tuple(red.coeff(*w) for w in _SLOT_WORDS)


def compatibility_residue(psi: Form, chart: JetChart = JET) -> Form:
    theta = contact_form(chart)
    return reduce_mod_ideal(wedge(psi, theta.d()), [theta])


def build_ma_system(coeffs: Sequence, chart: JetChart = JET) -> MongeAmpereSystem:
    coeffs = tuple(ScalarExpr.coerce(c) for c in coeffs)
    if len(coeffs) != 6:
        raise MASystemError("arity", len(coeffs), f"expected six psi coefficients, got {len(coeffs)}")
    return system_from_psi(psi_from_coeffs(coeffs, chart), chart)


def system_from_psi(psi: Form, chart: JetChart = JET) -> MongeAmpereSystem:
    theta = contact_form(chart)
    dtheta = theta.d()
    contact = wedge(wedge(theta, dtheta), dtheta)
    if contact.is_zero():
        raise MASystemError("contact condition theta^dtheta^dtheta != 0", contact)
    if psi.degree != 2:
        raise MASystemError("degree", psi.degree, "Psi must be a 2-form")
    if reduce_mod_ideal(psi, [theta]).is_zero():
        raise MASystemError("nondegeneracy Psi != 0 mod theta", psi, "Psi vanishes modulo theta")
    residue = compatibility_residue(psi, chart)
    if not residue.is_zero():
        raise MASystemError("compatibility Psi^dtheta = 0 mod theta", residue)
    return MongeAmpereSystem(chart, theta, psi, coeffs_from_psi(psi, chart))


@dataclass(frozen=True)
class ScalarPDE:
    """c_det (u11 u22 - u12^2) + c11 u11 + c22 u22 + c12 u12 + c0 = 0."""

    det: ScalarExpr
    u11: ScalarExpr
    u22: ScalarExpr
    u12: ScalarExpr
    zeroth: ScalarExpr

    def residual(self, u: ScalarExpr) -> ScalarExpr:
        """Left-hand side evaluated on the 2-jet of ``u(x1, x2)``."""
        u = ScalarExpr.coerce(u)
        u1, u2 = u.diff("x1"), u.diff("x2")
        u11, u22, u12 = u1.diff("x1"), u2.diff("x2"), u1.diff("x2")
        at = {"z": u, "p1": u1, "p2": u2}
        return (self.det.subs(at) * (u11 * u22 - u12 * u12) + self.u11.subs(at) * u11
                + self.u22.subs(at) * u22 + self.u12.subs(at) * u12 + self.zeroth.subs(at))

    def as_dict(self) -> dict:
        return {k: str(getattr(self, k)) for k in ("det", "u11", "u22", "u12", "zeroth")}

    def __str__(self):
        parts = []
        for coef, name in ((self.det, "(u11*u22 - u12^2)"), (self.u11, "u11"), (self.u22, "u22"),
                           (self.u12, "u12"), (self.zeroth, "")):
            if coef.is_zero():
                continue
            c = str(coef)
            if not name:
                parts.append(c if len(coef.numerator) == 1 else f"({c})")
            elif c == "1":
                parts.append(name)
            elif c == "-1":
                parts.append("-" + name)
            else:
                parts.append(f"({c})*{name}")
        return (" + ".join(parts) or "0").replace("+ -", "- ") + " = 0"


def expand_to_pde(system: MongeAmpereSystem) -> ScalarPDE:
    """Pull Psi back along the 2-jet prolongation of a graph.

    dz -> p1 dx1 + p2 dx2, dp1 -> u11 dx1 + u12 dx2, dp2 -> u12 dx1 + u22 dx2
    with u11, u12, u22 formal symbols; the dx1^dx2 coefficient is the PDE.
    """
    plane = coordinate_frame(("x1", "x2"), constants=("z", "p1", "p2", "u11", "u12", "u22"), name="prolongation")
    dx1, dx2 = plane.forms()
    p1, p2, a, b, c = (sym(n) for n in ("p1", "p2", "u11", "u12", "u22"))
    images = {"dx1": dx1, "dx2": dx2, "dz": dx1 * p1 + dx2 * p2,
              "dp1": dx1 * a + dx2 * b, "dp2": dx1 * b + dx2 * c}
    lhs = substitute(system.psi, images, target=plane).coeff("dx1", "dx2")
    zero = {"u11": 0, "u12": 0, "u22": 0}
    c0 = lhs.subs(zero)
    lin = lhs - c0
    c11 = lin.diff("u11").subs(zero)
    c22 = lin.diff("u22").subs(zero)
    c12 = lin.diff("u12").subs(zero)
    cdet = lhs.diff("u11").diff("u22")
    pde = ScalarPDE(cdet, c11, c22, c12, c0)
    check = cdet * (a * c - b * b) + c11 * a + c22 * c + c12 * b + c0
    if check != lhs:
        raise MASystemError("Monge-Ampere form", lhs - check, "pullback is not of Monge-Ampere type")
    return pde


def restrict_to_graph(f: Form, u, chart: JetChart = JET) -> Form:
    """Pull a form on the jet chart back along j^1 u for polynomial u(x1, x2)."""
    u = ScalarExpr.coerce(u)
    if not u.is_polynomial() or not u.free_symbols() <= {"x1", "x2"}:
        raise ValueError("u must be a polynomial in x1, x2")
    plane = chart.plane
    dx1, dx2 = plane.forms()
    u1, u2 = u.diff("x1"), u.diff("x2")

    def d(g):
        return dx1 * g.diff("x1") + dx2 * g.diff("x2")

    images = {"dx1": dx1, "dx2": dx2, "dz": d(u), "dp1": d(u1), "dp2": d(u2)}
    return substitute(f, images, scalars={"z": u, "p1": u1, "p2": u2}, target=plane)


# --------------------------------------------------------------------------
# Poincare-Cartan closure test


@dataclass
class ELVerdict:
    """Outcome of the bounded search for dPi = phi ^ Pi.

    ``status`` is ``"certified"`` (phi found and d phi = 0 mod {theta, dtheta, Psi}),
    ``"side-condition-fails"`` (phi found, side condition not met) or
    ``"not-certified"`` (no phi within the degree bound).  Not finding phi
    does not disprove the Euler-Lagrange property.
    """

    status: str
    degree_bound: int
    phi: Form | None = None
    side_condition: bool | None = None
    closed: bool = False
    ansatz_denominator: ScalarExpr = field(default_factory=lambda: ONE)

    @property
    def certified(self) -> bool:
        return self.status == "certified"

    def as_dict(self) -> dict:
        return {
            "status": self.status,
            "degree_bound": self.degree_bound,
            "phi": None if self.phi is None else str(self.phi),
            "side_condition": self.side_condition,
            "d_pi_zero": self.closed,
            "ansatz_denominator": str(self.ansatz_denominator),
        }


def _monomials(names: Sequence[str], degree: int):
    out = []
    for d in range(degree + 1):
        for combo in itertools.combinations_with_replacement(names, d):
            m = ONE
            for n in combo:
                m = m * sym(n)
            out.append(m)
    return out


def _poly_coefficients(p: ScalarExpr) -> dict:
    """Monomial -> coefficient for a polynomial (Gaussian rational values)."""
    return {m: c for m, c in p.numerator.items()}


def _ansatz_denominator(pi: Form) -> ScalarExpr:
    content = ZERO
    den = ONE
    for c in pi.terms.values():
        content = poly_gcd(content, ScalarExpr(c.numerator))
        d = ScalarExpr(c.denominator)
        den = den * d / poly_gcd(den, d)
    return content * den


def euler_lagrange_test(system: MongeAmpereSystem, degree: int = 2) -> ELVerdict:
    """Search phi with dPi = phi ^ Pi, Pi = theta ^ Psi.

    phi = (sum of polynomials of total degree <= ``degree``) / g, where g is the
    gcd of the numerators of Pi times the lcm of its denominators, so that
    rescalings Pi -> lambda Pi by rational lambda stay in reach.
    """
    fr = system.chart.frame
    theta, psi = system.theta, system.psi
    pi = wedge(theta, psi)
    dpi = pi.d()
    if dpi.is_zero():
        phi = Form(fr, 1, {})
        return ELVerdict("certified", degree, phi, True, True)
    g = _ansatz_denominator(pi)
    monos = _monomials(system.chart.coords, degree)
    unknowns = [(k, m) for k in range(fr.dim) for m in monos]
    # each unknown contributes (m/g) e_k ^ Pi
    columns = []
    for k, m in unknowns:
        columns.append(wedge(Form(fr, 1, {(k,): m / g}), pi))
    words = sorted(set(dpi.terms).union(*(c.terms for c in columns)))
    rows, rhs = [], []
    for w in words:
        entries = [col.terms.get(w, ZERO) for col in columns] + [dpi.terms.get(w, ZERO)]
        common = ONE
        for e in entries:
            d = ScalarExpr(e.denominator)
            common = common * d / poly_gcd(common, d)
        polys = [e * common for e in entries]
        monos_w = set()
        for p in polys:
            monos_w.update(_poly_coefficients(p))
        for mono in sorted(monos_w, key=str):
            rows.append([_poly_coefficients(p).get(mono, 0) for p in polys[:-1]])
            rhs.append(_poly_coefficients(polys[-1]).get(mono, 0))
    try:
        sol, _ = linalg.solve(rows, rhs)
    except linalg.InconsistentSystem:
        return ELVerdict("not-certified", degree, ansatz_denominator=g)
    phi = Form(fr, 1, {})
    for (k, m), c in zip(unknowns, sol):
        if not c.is_zero():
            phi = phi + Form(fr, 1, {(k,): c * m / g})
    side = _dphi_in_ideal(phi.d(), theta, psi)
    return ELVerdict("certified" if side else "side-condition-fails", degree, phi, side, False, g)


def _dphi_in_ideal(dphi: Form, theta: Form, psi: Form) -> bool:
    """Is the 2-form dphi in the algebraic ideal {theta, dtheta, Psi}?"""
    gens = [theta]
    r = reduce_mod_ideal(dphi, gens)
    if r.is_zero():
        return True
    a = reduce_mod_ideal(theta.d(), gens)
    b = reduce_mod_ideal(psi, gens)
    words = sorted(set(r.terms) | set(a.terms) | set(b.terms))
    rows = [[a.terms.get(w, ZERO), b.terms.get(w, ZERO)] for w in words]
    try:
        linalg.solve(rows, [r.terms.get(w, ZERO) for w in words])
    except linalg.InconsistentSystem:
        return False
    return True
