"""Random exact objects shared by the property tests."""

from __future__ import annotations

import itertools
import random
from fractions import Fraction

from maequiv.exterior import Form
from maequiv.jet_contact import JET
from maequiv.symkernel import ScalarExpr, parse_expr

COORDS = ("x1", "x2", "z", "p1", "p2")


def random_poly(rng: random.Random, names=COORDS, max_terms: int = 3, max_deg: int = 2) -> ScalarExpr:
    out = ScalarExpr.coerce(0)
    for _ in range(rng.randint(1, max_terms)):
        c = Fraction(rng.randint(-5, 5), rng.randint(1, 4))
        mono = ScalarExpr.coerce(c)
        for _ in range(rng.randint(0, max_deg)):
            mono = mono * parse_expr(rng.choice(names))
        out = out + mono
    return out


def random_form(rng: random.Random, degree: int, frame=None, density: float = 0.5) -> Form:
    frame = frame or JET.frame
    terms = {}
    for word in itertools.combinations(range(frame.dim), degree):
        if rng.random() < density:
            terms[word] = random_poly(rng)
    return Form(frame, degree, terms)


# one "criterion N: PASS|FAIL ..." line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []
