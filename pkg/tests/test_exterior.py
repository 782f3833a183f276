from __future__ import annotations

import random

import pytest

from helpers import random_form, random_poly
from maequiv.exterior import (
    Form,
    FrameMismatch,
    FrameSpec,
    IncompleteSubstitution,
    coordinate_frame,
    exterior_derivative,
    reduce_mod_ideal,
    substitute,
    wedge,
)
from maequiv.jet_contact import JET, contact_form
from maequiv.symkernel import I, sym

R4 = coordinate_frame(("y1", "y2", "y3", "y4"), labels=("w1", "w2", "w3", "w4"))


def _flat(labels, conjugates=None):
    return FrameSpec(labels, declared_d={lab: {} for lab in labels}, conjugates=conjugates, check=False)


OMEGA = _flat(("w0", "w1", "w2", "w3", "w4"))
PI = _flat(("pi0", "pi1", "pi2", "pib1", "pib2"), {"pi1": "pib1", "pi2": "pib2"})


def test_wedge_basics():
    w1, w2, w3, w4 = R4.forms()
    assert wedge(JET.dx1, JET.dx1).is_zero()
    assert wedge(w1 ^ w2, w3 ^ w4) == R4.volume()
    a = (w1 ^ w2) + (w3 ^ w4)
    assert wedge(a, a) == R4.volume() * 2


def test_derivative_of_function_and_contact_form():
    assert exterior_derivative(Form.scalar(JET.frame, sym("z"))) == JET.dz
    theta = JET.dz - JET.dx1 * sym("p1") - JET.dx2 * sym("p2")
    assert exterior_derivative(theta) == -(JET.dp1 ^ JET.dx1) - (JET.dp2 ^ JET.dx2)


def test_reduce_mod_ideal_examples():
    theta = contact_form()
    rng = random.Random(3)
    sigma = random_form(rng, 2)
    assert reduce_mod_ideal(theta ^ sigma, [theta]).is_zero()
    psi = (JET.dp1 ^ JET.dx2) - (JET.dp2 ^ JET.dx1)
    assert reduce_mod_ideal(theta.d() ^ psi, [theta]).is_zero()
    plane = JET.dx1 ^ JET.dx2
    assert reduce_mod_ideal(plane, [theta]) == plane


def test_reduction_witness_reconstructs():
    theta = contact_form()
    rng = random.Random(11)
    f = random_form(rng, 2, density=0.7)
    red = reduce_mod_ideal(f, [theta], with_witness=True)
    rebuilt = red.residue
    for g, w in zip(red.gens, red.witnesses):
        rebuilt = rebuilt + (g ^ w)
    assert rebuilt == f


def test_substitution_to_complex_frame_and_back():
    w = dict(zip(OMEGA.labels, OMEGA.forms()))
    p = dict(zip(PI.labels, PI.forms()))
    half = sym("x1") ** 0 / 2
    # w1 = (pi1 - pib1)/(2i), w3 = (pi1 + pib1)/2 and similarly for w2, w4
    to_pi = {
        "w0": p["pi0"],
        "w1": (p["pi1"] - p["pib1"]) * (half / I),
        "w3": (p["pi1"] + p["pib1"]) * half,
        "w4": (p["pi2"] - p["pib2"]) * (half / I),
        "w2": (p["pi2"] + p["pib2"]) * half,
    }
    to_omega = {
        "pi0": w["w0"],
        "pi1": w["w3"] + w["w1"] * I,
        "pib1": w["w3"] - w["w1"] * I,
        "pi2": w["w2"] + w["w4"] * I,
        "pib2": w["w2"] - w["w4"] * I,
    }
    assert substitute(w["w3"] + w["w1"] * I, to_pi) == p["pi1"]
    for lab, form in w.items():
        assert substitute(substitute(form, to_pi), to_omega) == form
    for lab, form in p.items():
        assert substitute(substitute(form, to_omega), to_pi) == form


def test_identity_substitution():
    rng = random.Random(5)
    f = random_form(rng, 3)
    assert substitute(f, dict(zip(JET.frame.labels, JET.frame.forms()))) == f


def test_substitution_errors():
    with pytest.raises(IncompleteSubstitution):
        substitute(JET.dx1, {"dx2": JET.dx2})
    with pytest.raises(FrameMismatch):
        _ = JET.dx1 + R4.forms()[0]


def test_abstract_frame_derivative():
    fr = FrameSpec(("a", "b", "c"), declared_d={"a": {("b", "c"): 1}, "b": {}, "c": {}})
    a, b, c = fr.forms()
    assert a.d() == (b ^ c)
    assert (a ^ b).d() == (b ^ c ^ b)  # zero
    assert (a ^ b).d().is_zero()


def test_conjugation_on_frame():
    p = dict(zip(PI.labels, PI.forms()))
    f = p["pi1"] * (1 + I) + p["pi0"]
    assert f.conj() == p["pib1"] * (1 - I) + p["pi0"]


@pytest.mark.parametrize("seed", range(25))
def test_graded_identities(seed):
    rng = random.Random(seed)
    da, db = rng.randint(0, 2), rng.randint(0, 2)
    a, b = random_form(rng, da), random_form(rng, db)
    assert a.d().d().is_zero()
    assert (a ^ b).d() == (a.d() ^ b) + (a ^ b.d()) * (-1) ** da
    assert (a ^ b) == (b ^ a) * (-1) ** (da * db)
    f = random_poly(rng)
    assert (a * f).d() == (Form.scalar(a.frame, f).d() ^ a) + a.d() * f
