"""Graded exterior algebra over a declared basis of 1-forms.

A :class:`FrameSpec` names the basis 1-forms.  Each label is either the
differential of a coordinate or an abstract 1-form with a declared exterior
derivative.  Forms live in exactly one frame; moving between frames goes
through :func:`substitute`.
"""

from __future__ import annotations

from typing import Iterable, Mapping, Sequence

from maequiv import linalg
from maequiv.symkernel import ONE, ZERO, ScalarExpr

__all__ = [
    "ExteriorError",
    "FrameMismatch",
    "FrameInconsistent",
    "UndeclaredDifferential",
    "DependentGenerators",
    "IncompleteSubstitution",
    "FrameSpec",
    "Form",
    "wedge",
    "exterior_derivative",
    "reduce_mod_ideal",
    "IdealReduction",
    "substitute",
    "coordinate_frame",
]


class ExteriorError(Exception):
    pass


class FrameMismatch(ExteriorError):
    pass


class FrameInconsistent(ExteriorError):
    pass


class UndeclaredDifferential(ExteriorError):
    pass


class DependentGenerators(ExteriorError):
    pass


class IncompleteSubstitution(ExteriorError, KeyError):
    pass


def _sort_sign(word: Sequence[int]):
    """Sorted word and permutation sign, or (None, 0) on a repeated index."""
    w = list(word)
    sign = 1
    for i in range(1, len(w)):
        j = i
        while j > 0 and w[j - 1] > w[j]:
            w[j - 1], w[j] = w[j], w[j - 1]
            sign = -sign
            j -= 1
    for a, b in zip(w, w[1:]):
        if a == b:
            return None, 0
    return tuple(w), sign


class FrameSpec:
    """An ordered coframe.

    Parameters
    ----------
    labels:
        distinct basis names.
    coords:
        ``label -> coordinate`` for labels that are coordinate differentials.
    declared_d:
        ``label -> {(a, b): coefficient}`` (or a degree-2 Form) giving d of each
        abstract label.
    symbol_d:
        ``symbol -> {label: coefficient}`` differentials of non-coordinate symbols.
    constants:
        symbols whose differential is zero.
    conjugates:
        ``label -> label`` complex conjugation on the basis (self-conjugate if absent).
    check:
        verify d(d e) = 0 on every label at construction.
    """

    def __init__(
        self,
        labels: Sequence[str],
        coords: Mapping[str, str] | None = None,
        declared_d: Mapping[str, object] | None = None,
        symbol_d: Mapping[str, object] | None = None,
        constants: Iterable[str] = (),
        conjugates: Mapping[str, str] | None = None,
        check: bool = True,
        name: str = "",
    ):
        self.labels = tuple(labels)
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("frame labels must be distinct")
        self.name = name
        self.index = {lab: k for k, lab in enumerate(self.labels)}
        self.coords = dict(coords or {})
        declared_d = dict(declared_d or {})
        for lab in self.coords:
            if lab not in self.index:
                raise ValueError(f"coordinate label {lab!r} not in frame")
        abstract = [lab for lab in self.labels if lab not in self.coords]
        if set(declared_d) != set(abstract):
            missing = sorted(set(abstract) - set(declared_d))
            extra = sorted(set(declared_d) - set(abstract))
            raise ValueError(f"declared_d must cover exactly the abstract labels (missing {missing}, extra {extra})")
        self._coord_label = {c: lab for lab, c in self.coords.items()}
        self.constants = frozenset(constants)
        conj = dict(conjugates or {})
        for a, b in list(conj.items()):
            conj.setdefault(b, a)
        self.conjugates = {lab: conj.get(lab, lab) for lab in self.labels}
        self._symbol_d_raw = dict(symbol_d or {})
        self._declared_raw = declared_d
        self._declared: dict[int, Form] = {}
        self._symbol_d: dict[str, Form] = {}
        for lab, v in declared_d.items():
            f = v if isinstance(v, Form) else Form.from_terms(self, 2, v)
            if f.frame is not self or f.degree != 2:
                raise ValueError(f"declared d({lab}) must be a 2-form on this frame")
            self._declared[self.index[lab]] = f
        for s, v in self._symbol_d_raw.items():
            f = v if isinstance(v, Form) else Form.from_terms(self, 1, {(k,): c for k, c in dict(v).items()})
            self._symbol_d[s] = f
        if check:
            self.check_consistency()

    @property
    def dim(self) -> int:
        return len(self.labels)

    def is_abstract(self, label: str) -> bool:
        return label not in self.coords

    def d_label(self, idx: int) -> "Form":
        f = self._declared.get(idx)
        if f is None:
            return Form(self, 2, {})
        return f

    def d_scalar(self, f: ScalarExpr) -> "Form":
        out: dict = {}
        for s in sorted(f.free_symbols()):
            if s in self.constants:
                continue
            df = f.diff(s)
            if df.is_zero():
                continue
            lab = self._coord_label.get(s)
            if lab is not None:
                k = (self.index[lab],)
                out[k] = out.get(k, ZERO) + df
                continue
            ds = self._symbol_d.get(s)
            if ds is None:
                raise UndeclaredDifferential(f"no differential declared for symbol {s!r} in frame {self.name or self.labels}")
            for w, c in ds.terms.items():
                out[w] = out.get(w, ZERO) + df * c
        return Form(self, 1, out)

    def check_consistency(self) -> None:
        bad = []
        for k, lab in enumerate(self.labels):
            if k in self._declared:
                dd = exterior_derivative(self._declared[k])
                if not dd.is_zero():
                    bad.append((lab, dd))
        if bad:
            detail = "; ".join(f"d(d {lab}) = {dd}" for lab, dd in bad)
            raise FrameInconsistent(f"declared differentials violate d^2 = 0: {detail}")

    def basis(self, label: str) -> "Form":
        return Form(self, 1, {(self.index[label],): ONE})

    def forms(self) -> list["Form"]:
        return [self.basis(lab) for lab in self.labels]

    def volume(self) -> "Form":
        return Form(self, self.dim, {tuple(range(self.dim)): ONE})

    def with_symbol_d(self, extra: Mapping[str, object], check: bool = False) -> "FrameSpec":
        """A copy with additional symbol differentials."""
        sd = dict(self._symbol_d_raw)
        sd.update(extra)
        declared = {lab: {tuple(self.labels[i] for i in w): c for w, c in self._declared[self.index[lab]].terms.items()}
                    for lab in self._declared_raw}
        return FrameSpec(self.labels, self.coords, declared, sd, self.constants,
                         self.conjugates, check=check, name=self.name)

    def __repr__(self):
        return f"FrameSpec({self.name or ','.join(self.labels)})"


def coordinate_frame(coords: Sequence[str], labels: Sequence[str] | None = None, constants=(), name="") -> FrameSpec:
    labels = tuple(labels) if labels else tuple("d" + c for c in coords)
    return FrameSpec(labels, dict(zip(labels, coords)), constants=constants, name=name or "d(" + ",".join(coords) + ")")


class Form:
    """Homogeneous exterior form ``sum_I c_I e^I`` with increasing index words."""

    __slots__ = ("frame", "degree", "terms")

    def __init__(self, frame: FrameSpec, degree: int, terms: Mapping[tuple, ScalarExpr]):
        if degree < 0:
            raise ValueError("negative degree")
        self.frame = frame
        self.degree = degree
        clean = {}
        for w, c in terms.items():
            if len(w) != degree:
                raise ValueError(f"word {w} has wrong degree for a {degree}-form")
            c = ScalarExpr.coerce(c)
            if not c.is_zero():
                clean[w] = c
        self.terms = clean

    @classmethod
    def from_terms(cls, frame: FrameSpec, degree: int, terms: Mapping) -> "Form":
        """Build from label words in any order, summing repeated words."""
        out: dict = {}
        for w, c in dict(terms).items():
            if isinstance(w, str):
                w = (w,)
            idx = [frame.index[x] if isinstance(x, str) else x for x in w]
            sw, sign = _sort_sign(idx)
            if sw is None:
                continue
            c = ScalarExpr.coerce(c)
            out[sw] = out.get(sw, ZERO) + (c if sign > 0 else -c)
        return cls(frame, degree, out)

    @classmethod
    def scalar(cls, frame: FrameSpec, f) -> "Form":
        return cls(frame, 0, {(): ScalarExpr.coerce(f)})

    @classmethod
    def zero(cls, frame: FrameSpec, degree: int) -> "Form":
        return cls(frame, degree, {})

    def _check(self, other: "Form"):
        if other.frame is not self.frame:
            raise FrameMismatch(f"forms live in different frames: {self.frame!r} vs {other.frame!r}")

    def __add__(self, other):
        if isinstance(other, (int, ScalarExpr)) and self.degree == 0:
            other = Form.scalar(self.frame, other)
        if not isinstance(other, Form):
            return NotImplemented
        self._check(other)
        if other.degree != self.degree:
            if not other.terms:
                return self
            if not self.terms:
                return other
            raise ValueError(f"cannot add a {self.degree}-form and a {other.degree}-form")
        out = dict(self.terms)
        for w, c in other.terms.items():
            out[w] = out.get(w, ZERO) + c
        return Form(self.frame, self.degree, out)

    __radd__ = __add__

    def __neg__(self):
        return Form(self.frame, self.degree, {w: -c for w, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Form):
            return wedge(self, other)
        c = ScalarExpr.coerce(other)
        return Form(self.frame, self.degree, {w: v * c for w, v in self.terms.items()})

    def __rmul__(self, other):
        c = ScalarExpr.coerce(other)
        return Form(self.frame, self.degree, {w: c * v for w, v in self.terms.items()})

    def __xor__(self, other):
        return wedge(self, other)

    def __eq__(self, other):
        if isinstance(other, int) and other == 0:
            return self.is_zero()
        if not isinstance(other, Form):
            return NotImplemented
        return self.frame is other.frame and (self.degree == other.degree or not (self.terms or other.terms)) \
            and self.terms == other.terms

    def __hash__(self):
        return hash((id(self.frame), self.degree, frozenset(self.terms.items())))

    def is_zero(self) -> bool:
        return not self.terms

    def coeff(self, *labels: str) -> ScalarExpr:
        """Coefficient on the basis word ``labels`` (any order, sign adjusted)."""
        idx = [self.frame.index[x] for x in labels]
        sw, sign = _sort_sign(idx)
        if sw is None:
            return ZERO
        c = self.terms.get(sw, ZERO)
        return c if sign > 0 else -c

    def labels_of(self, word: tuple) -> tuple:
        return tuple(self.frame.labels[i] for i in word)

    def map_coeffs(self, fn) -> "Form":
        return Form(self.frame, self.degree, {w: fn(c) for w, c in self.terms.items()})

    def conj(self) -> "Form":
        fr = self.frame
        return Form.from_terms(fr, self.degree, {
            tuple(fr.conjugates[fr.labels[i]] for i in w): c.conj() for w, c in self.terms.items()})

    def d(self) -> "Form":
        return exterior_derivative(self)

    def __repr__(self):
        return f"Form({self.degree}, {self})"

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for w in sorted(self.terms):
            c = self.terms[w]
            name = "^".join(self.frame.labels[i] for i in w)
            cs = str(c)
            if not w:
                parts.append(cs)
            elif cs == "1":
                parts.append(name)
            elif cs == "-1":
                parts.append("-" + name)
            else:
                parts.append(f"({cs})*{name}")
        return " + ".join(parts).replace("+ -", "- ")


def wedge(a: Form, b: Form) -> Form:
    if not isinstance(a, Form) or not isinstance(b, Form):
        raise TypeError("wedge expects two Forms")
    a._check(b)
    deg = a.degree + b.degree
    if deg > a.frame.dim:
        return Form(a.frame, deg, {})
    out: dict = {}
    bt = b.terms
    for wa, ca in a.terms.items():
        sa = set(wa)
        for wb, cb in bt.items():
            if sa.intersection(wb):
                continue
            sw, sign = _sort_sign(wa + wb)
            v = ca * cb
            out[sw] = out.get(sw, ZERO) + (v if sign > 0 else -v)
    return Form(a.frame, deg, out)


def exterior_derivative(a: Form) -> Form:
    fr = a.frame
    out = Form(fr, a.degree + 1, {})
    for w, c in a.terms.items():
        dc = fr.d_scalar(c)
        basis = Form(fr, a.degree, {w: ONE})
        if dc.terms:
            out = out + wedge(dc, basis)
        for pos, k in enumerate(w):
            dk = fr.d_label(k)
            if not dk.terms:
                continue
            left = Form(fr, pos, {w[:pos]: ONE})
            right = Form(fr, a.degree - pos - 1, {w[pos + 1:]: ONE})
            term = wedge(wedge(left, dk), right)
            out = out + (term * c if pos % 2 == 0 else term * (-c))
    return out


def substitute(a: Form, mapping: Mapping[str, Form], scalars: Mapping[str, ScalarExpr] | None = None,
               target: FrameSpec | None = None) -> Form:
    """Algebra homomorphism sending each basis label to a 1-form of another frame.

    ``scalars`` optionally substitutes symbols inside the coefficients (pullback).
    """
    fr = a.frame
    images = {}
    for w in a.terms:
        for k in w:
            lab = fr.labels[k]
            if lab not in mapping:
                raise IncompleteSubstitution(f"no image given for basis label {lab!r}")
            images[k] = mapping[lab]
    frames = {f.frame for f in mapping.values()}
    if target is None:
        if len(frames) != 1:
            if not frames:
                raise IncompleteSubstitution("empty substitution needs an explicit target frame")
            raise FrameMismatch("substitution images must share one frame")
        target = next(iter(frames))
    for f in mapping.values():
        if f.frame is not target or f.degree != 1:
            raise FrameMismatch("substitution images must be 1-forms in the target frame")
    out = Form(target, a.degree, {})
    for w, c in a.terms.items():
        if scalars:
            c = c.subs(scalars)
        piece = Form(target, 0, {(): c})
        for k in w:
            piece = wedge(piece, images[k])
        out = out + piece
    return out


class IdealReduction:
    """Normal form of a form modulo an algebraic ideal of 1-forms plus witnesses.

    ``residue`` is the normal form; ``witnesses[k]`` are forms with
    ``form - residue == sum(gens[k] ^ witnesses[k])``.
    """

    def __init__(self, form, residue, gens, witnesses, eliminated):
        self.form = form
        self.residue = residue
        self.gens = gens
        self.witnesses = witnesses
        self.eliminated = eliminated

    def is_zero(self) -> bool:
        return self.residue.is_zero()


def reduce_mod_ideal(a: Form, gens: Sequence[Form], with_witness: bool = False,
                     prefer: Sequence[str] | None = None):
    """Representative of ``a`` modulo the algebraic ideal generated by ``gens``.

    The generators are completed to a basis by row reduction; each pivot label
    is eliminated in favour of the generators and the remaining labels, and
    every term containing a generator is dropped.  Pivot labels are taken
    from ``prefer`` first, then labels on which some generator has a nonzero
    constant coefficient, then frame order.  Over a jet chart with
    ``gens = [theta]`` this eliminates ``dz``.
    """
    fr = a.frame
    gens = list(gens)
    for g in gens:
        a._check(g)
        if g.degree != 1:
            raise ValueError("ideal generators must be 1-forms")
    if not gens:
        return IdealReduction(a, a, [], [], []) if with_witness else a
    n = fr.dim
    m = len(gens)
    prefer = [fr.index[x] for x in (prefer or ())]

    def priority(j):
        if j in prefer:
            return (0, prefer.index(j))
        const = any(g.terms.get((j,), ZERO).is_constant() and (j,) in g.terms for g in gens)
        return (1 if const else 2, j)

    order = sorted(range(n), key=priority)
    gmat = [[g.terms.get((j,), ZERO) for j in order] for g in gens]
    aug = [row + [ONE if i == k else ZERO for k in range(m)] for i, row in enumerate(gmat)]
    red, pivots = linalg.rref(aug)
    pivots = [p for p in pivots if p < n]
    # back to frame column indices
    red = [[row[order.index(j)] for j in range(n)] + row[n:] for row in red]
    pivots = [order[p] for p in pivots]
    if len(pivots) < m:
        raise DependentGenerators("ideal generators are linearly dependent")
    # row k of red: e_{p_k} + sum_{j not pivot} R_kj e_j = sum_l E_kl g_l
    free = [j for j in range(n) if j not in pivots]
    tmp = FrameSpec([f"__r{k}" for k in range(m)] + [fr.labels[j] for j in free],
                    coords={f"__r{k}": f"__r{k}" for k in range(m)} | {fr.labels[j]: f"__c{j}" for j in free},
                    check=False, name="ideal-completion")
    images = {}
    for j in free:
        images[fr.labels[j]] = tmp.basis(fr.labels[j])
    for k, p in enumerate(pivots):
        img = tmp.basis(f"__r{k}")
        for j in free:
            c = red[k][j]
            if not c.is_zero():
                img = img - tmp.basis(fr.labels[j]) * c
        images[fr.labels[p]] = img
    moved = substitute(a, images, target=tmp)
    kept = Form(tmp, moved.degree, {w: c for w, c in moved.terms.items() if all(i >= m for i in w)})
    residue = _pull_back_free(kept, fr, free, m)
    if not with_witness:
        return residue
    # split the rest by first generator index: r_k ^ sigma'_k
    sig_tmp = [Form(tmp, max(moved.degree - 1, 0), {}) for _ in range(m)]
    for w, c in moved.terms.items():
        if w and w[0] < m:
            sig_tmp[w[0]] = sig_tmp[w[0]] + Form(tmp, moved.degree - 1, {w[1:]: c})
    # r_k = sum_l E_kl g_l, so witness_l = sum_k E_kl sigma'_k
    emat = [row[n:] for row in red[:m]]
    sig_fr = [_pull_back_mixed(s, fr, free, m, pivots, red, tmp) for s in sig_tmp]
    witnesses = []
    for l in range(m):
        w = Form(fr, max(a.degree - 1, 0), {})
        for k in range(m):
            if not emat[k][l].is_zero():
                w = w + sig_fr[k] * emat[k][l]
        witnesses.append(w)
    return IdealReduction(a, residue, gens, witnesses, [fr.labels[p] for p in pivots])


def _pull_back_free(f: Form, fr: FrameSpec, free, m) -> Form:
    out = {}
    for w, c in f.terms.items():
        out[tuple(free[i - m] for i in w)] = c
    return Form(fr, f.degree, out)


def _pull_back_mixed(f: Form, fr, free, m, pivots, red, tmp) -> Form:
    # express r_k back in the original frame: r_k = e_{p_k} + sum_j R_kj e_j
    images = {}
    for j in free:
        images[fr.labels[j]] = fr.basis(fr.labels[j])
    for k, p in enumerate(pivots):
        img = fr.basis(fr.labels[p])
        for j in free:
            if not red[k][j].is_zero():
                img = img + fr.basis(fr.labels[j]) * red[k][j]
        images[f"__r{k}"] = img
    return substitute(f, images, target=fr)
