from __future__ import annotations

import random

import pytest

from helpers import random_poly
from maequiv.exterior import reduce_mod_ideal
from maequiv.jet_contact import (
    JET,
    MASystemError,
    build_ma_system,
    compatibility_residue,
    contact_form,
    euler_lagrange_test,
    expand_to_pde,
    psi_from_coeffs,
    restrict_to_graph,
)
from maequiv.symkernel import parse_expr, sym

LAPLACE = (0, 1, 0, 0, -1, 0)
DET_HESSIAN = (1, 0, 0, 0, 0, -1)
x1, x2 = sym("x1"), sym("x2")


def test_contact_form_and_derivative():
    theta = contact_form()
    assert theta == JET.dz - JET.dx1 * sym("p1") - JET.dx2 * sym("p2")
    assert theta.d() == -(JET.dp1 ^ JET.dx1) - (JET.dp2 ^ JET.dx2)
    top = theta ^ theta.d() ^ theta.d()
    assert not top.is_zero()
    # d theta = dx1^dp1 + dx2^dp2, so d theta ^ d theta = 2 dx1^dp1^dx2^dp2
    assert top == (JET.dz ^ JET.dx1 ^ JET.dp1 ^ JET.dx2 ^ JET.dp2) * 2


def test_laplace_system():
    s = build_ma_system(LAPLACE)
    assert s.psi == (JET.dp1 ^ JET.dx2) - (JET.dp2 ^ JET.dx1)
    assert compatibility_residue(s.psi).is_zero()
    assert str(expand_to_pde(s)) == "u11 + u22 = 0"


def test_det_hessian_system():
    s = build_ma_system(DET_HESSIAN)
    assert s.psi == (JET.dp1 ^ JET.dp2) - (JET.dx1 ^ JET.dx2)
    pde = expand_to_pde(s)
    assert (pde.det, pde.u11, pde.u22, pde.u12, pde.zeroth) == (1, 0, 0, 0, -1)


def test_single_slot_pde():
    pde = expand_to_pde(build_ma_system((0, 1, 0, 0, 0, 0)))
    assert str(pde) == "u11 = 0"


def test_incompatible_system_rejected():
    with pytest.raises(MASystemError) as info:
        build_ma_system((0, 0, 0, 1, 0, 0))
    assert "residue" in str(info.value).lower() or info.value.args


def test_arity():
    with pytest.raises((ValueError, TypeError)):
        build_ma_system((0, 1, 0, 0, -1))


def test_restrict_to_graph_examples():
    psi = build_ma_system(LAPLACE).psi
    assert restrict_to_graph(contact_form(), x1 ** 3 * x2 - 2 * x2).is_zero()
    assert restrict_to_graph(psi, (x1 ** 2 - x2 ** 2) / 2).is_zero()
    plane = JET.plane.forms()
    assert restrict_to_graph(psi, x1 ** 2) == (plane[0] ^ plane[1]) * 2


@pytest.mark.parametrize("seed", range(6))
def test_pde_matches_pullback_on_random_graphs(seed):
    rng = random.Random(seed)
    coeffs = [random_poly(rng, names=("x1", "x2"), max_terms=2, max_deg=1) for _ in range(6)]
    # the residue of Psi ^ d theta mod theta is (psi_p2x2 + psi_p1x1) dx1^dx2^dp1^dp2 up to sign
    coeffs[3] = -coeffs[2]
    s = build_ma_system(coeffs)
    pde = expand_to_pde(s)
    u = random_poly(rng, names=("x1", "x2"), max_terms=4, max_deg=3)
    lhs = restrict_to_graph(s.psi, u).coeff("dx1", "dx2")
    assert lhs == pde.residual(u)


def test_euler_lagrange_flat_models():
    for coeffs in (LAPLACE, DET_HESSIAN):
        v = euler_lagrange_test(build_ma_system(coeffs))
        assert v.certified
        assert v.phi is None or v.phi.is_zero()


def test_euler_lagrange_rescaled():
    s = build_ma_system(LAPLACE).scaled(sym("z") + 2)
    v = euler_lagrange_test(s)
    assert v.certified
    theta = contact_form()
    # phi = d log(z + 2) modulo theta
    expected = reduce_mod_ideal(JET.dz * (1 / (sym("z") + 2)), [theta])
    assert reduce_mod_ideal(v.phi, [theta]) == expected


def test_psi_from_coefficients_parsed():
    coeffs = [parse_expr(t) for t in ("0", "1", "0", "0", "-1", "z^2")]
    psi = psi_from_coeffs(coeffs)
    assert psi.coeff("dx1", "dx2") == sym("z") ** 2
