from __future__ import annotations

import random

from helpers import random_form
from maequiv.coframe import coframe_from_forms
from maequiv.jet_contact import JET, contact_form
from maequiv.symkernel import sym

LABELS = ("e0", "e1", "e2", "e3", "e4")


def _cmap():
    th = contact_form()
    z = sym("z")
    return coframe_from_forms([th, JET.dx1, JET.dp1 + JET.dx1 * z, JET.dx2, JET.dp2 * (1 + z ** 2)], LABELS)


def test_round_trip_random_forms():
    cm = _cmap()
    rng = random.Random(2)
    for deg in (1, 2, 3):
        f = random_form(rng, deg)
        assert cm.to_chart(cm.to_frame(f)) == f


def test_basis_forms_map_to_labels():
    cm = _cmap()
    th = contact_form()
    assert cm.to_frame(th) == cm.frame.basis("e0")


def test_declared_differentials_agree_with_chart():
    cm = _cmap()
    for lab, form in zip(LABELS, cm.frame.forms()):
        assert cm.to_chart(form.d()) == cm.to_chart(form).d()
