"""Abstract coframes built from explicit 1-forms on the jet chart."""

from __future__ import annotations

from typing import Mapping, Sequence

from maequiv import linalg
from maequiv.exterior import Form, FrameSpec, coordinate_frame, substitute
from maequiv.jet_contact import JET, JetChart
from maequiv.symkernel import ZERO, ScalarExpr

__all__ = ["CoframeMap", "coframe_from_forms"]


class CoframeMap:
    """An abstract frame whose labels stand for given 1-forms on the jet chart.

    ``frame`` carries declared differentials and the coordinate differentials
    expanded in the new basis, so exterior derivatives can be taken directly
    in the new labels.  :meth:`to_frame` rewrites jet forms in the new basis.
    """

    def __init__(self, chart: JetChart, forms: Sequence[Form], labels: Sequence[str],
                 conjugates: Mapping[str, str] | None = None, name: str = ""):
        self.chart = chart
        self.forms = list(forms)
        self.labels = tuple(labels)
        base = chart.frame
        for f in self.forms:
            if f.frame is not base or f.degree != 1:
                raise ValueError("coframe entries must be 1-forms on the jet chart")
        matrix = [[f.terms.get((k,), ZERO) for k in range(base.dim)] for f in self.forms]
        det = linalg.det(matrix)
        if det.is_zero():
            raise ValueError("the given 1-forms are not a coframe (wedge product vanishes)")
        self.matrix = matrix
        self.inverse = linalg.inverse(matrix)
        self.det = det
        # scratch frame with the same labels, used only to collect label words
        scratch = coordinate_frame(tuple(f"__s{k}" for k in range(len(self.labels))), labels=self.labels,
                                   name="scratch")
        images = self._images(scratch)
        declared = {}
        for lab, f in zip(self.labels, self.forms):
            df = substitute(f.d(), images, target=scratch)
            declared[lab] = {tuple(self.labels[i] for i in w): c for w, c in df.terms.items()}
        symbol_d = {c: {self.labels[i]: self.inverse[k][i] for i in range(len(self.labels))
                        if not self.inverse[k][i].is_zero()}
                    for k, c in enumerate(chart.coords)}
        self.frame = FrameSpec(self.labels, declared_d=declared, symbol_d=symbol_d,
                               conjugates=conjugates, check=True, name=name)
        self._to = self._images(self.frame)

    def _images(self, target: FrameSpec) -> dict:
        out = {}
        for k, lab in enumerate(self.chart.frame.labels):
            img = Form(target, 1, {})
            for i in range(len(self.labels)):
                c = self.inverse[k][i]
                if not c.is_zero():
                    img = img + target.basis(self.labels[i]) * c
            out[lab] = img
        return out

    def to_frame(self, f: Form) -> Form:
        """Rewrite a jet-chart form in this coframe."""
        return substitute(f, self._to, target=self.frame)

    def to_chart(self, f: Form) -> Form:
        images = {lab: g for lab, g in zip(self.labels, self.forms)}
        return substitute(f, images, target=self.chart.frame)


def coframe_from_forms(forms: Sequence[Form], labels: Sequence[str], chart: JetChart = JET,
                       conjugates=None, name="") -> CoframeMap:
    return CoframeMap(chart, forms, labels, conjugates, name)
