from __future__ import annotations

import json
from pathlib import Path

import pytest

from maequiv.cli import InputError, builtin_text, main, parse_system, parse_system_text, run
from maequiv.symkernel import sym

DATA = Path(__file__).resolve().parents[1] / "src" / "maequiv" / "data"


def _write(tmp_path: Path, name: str, text: str) -> Path:
    p = tmp_path / name
    p.write_text(text)
    return p


def _json_run(capsys, *argv):
    code = main(list(argv) + ["--format", "json"])
    return code, json.loads(capsys.readouterr().out)


def _stages(report: dict) -> dict:
    return {s["name"]: s for s in report["stages"]}


def test_bundled_laplace_coefficients():
    sf = parse_system(DATA / "laplace.masys")
    assert sf.psi_coeffs == tuple(sym("x1") ** 0 * c for c in (0, 1, 0, 0, -1, 0))
    assert sf.name == "laplace"


@pytest.mark.parametrize("name", ["laplace", "wave", "det-hessian"])
def test_bundled_files_parse(name):
    assert len(parse_system_text(builtin_text(name)).psi_coeffs) == 6


def test_arity_error(tmp_path):
    p = _write(tmp_path, "five.masys", "psi = 0, 1, 0, 0, -1\n")
    with pytest.raises(InputError) as info:
        parse_system(p)
    assert "exactly 6" in info.value.message and info.value.line == 1


def test_missing_slot_is_arity_error():
    text = "\n".join(f"{k} = 0" for k in ("psi_p1p2", "psi_p1x2", "psi_p2x2", "psi_p1x1", "psi_p2x1"))
    with pytest.raises(InputError, match="exactly 6"):
        parse_system_text(text)


def test_transcendental_rejected_with_position(tmp_path):
    p = _write(tmp_path, "sin.masys", "# comment\npsi = 0, 1, 0, sin(x1), -1, 0\n")
    with pytest.raises(InputError) as info:
        parse_system(p)
    assert (info.value.line, info.value.column) == (2, 16)


def test_unknown_identifier_and_key():
    with pytest.raises(InputError, match="unknown identifier"):
        parse_system_text("psi = 0, 1, 0, 0, -1, w\n")
    with pytest.raises(InputError, match="unknown key"):
        parse_system_text("psi = 0, 1, 0, 0, -1, 0\ncolour = 3\n")


def test_missing_file():
    with pytest.raises(InputError, match="cannot read"):
        parse_system("/nonexistent/file.masys")


def test_json_form_matches_keyed_form():
    keyed = parse_system_text(builtin_text("laplace"))
    as_json = parse_system_text(json.dumps({"name": "laplace", "psi": ["0", "1", "0", "0", "-1", "0"]}))
    assert keyed.psi_coeffs == as_json.psi_coeffs
    slots = parse_system_text(json.dumps({"psi": {"p1x2": "1", "p2x1": "-1", "p1p2": 0, "p2x2": 0,
                                                  "p1x1": 0, "x1x2": 0}}))
    assert slots.psi_coeffs == keyed.psi_coeffs


def test_json_syntax_error_position():
    with pytest.raises(InputError) as info:
        parse_system_text('{\n  "psi": [1, 2,\n}')
    assert info.value.line == 3


def test_coordinate_renaming_and_coframe():
    sf = parse_system_text(
        "coordinates = x, y, u, p, q\n"
        "psi = 0, 1, 0, 0, -1, u^2\n"
        "coframe = theta, dx, dp + (u^2/2)*dx, dy, dq + (u^2/2)*dy\n")
    assert sf.psi_coeffs[5] == sym("z") ** 2
    assert len(sf.coframe) == 5
    with pytest.raises(InputError, match="unknown identifier"):
        parse_system_text("coordinates = x, y, u, p, q\npsi = 0, 1, 0, 0, -1, z\n")


def test_non_linear_one_form_rejected():
    with pytest.raises(InputError, match="linear"):
        parse_system_text("psi = 0, 1, 0, 0, -1, 0\ncoframe = theta, dx1*dx2, dp1, dx2, dp2\n")
    with pytest.raises(InputError, match="differential"):
        parse_system_text("psi = 0, 1, 0, 0, -1, 0\ncoframe = theta, dx1 + 1, dp1, dx2, dp2\n")


def test_options_from_file():
    sf = parse_system_text("psi = 0, 1, 0, 0, -1, 0\nseed = 5\nprobes = 3\nel_degree = 1\n")
    assert sf.options == {"seed": 5, "probes": 3, "el_degree": 1}


def test_run_laplace_all(capsys):
    code, rep = _json_run(capsys, "run", str(DATA / "laplace.masys"), "all")
    st = _stages(rep)
    assert code == 0 and rep["exit_code"] == 0
    assert all(s["status"] == "ok" for s in rep["stages"])
    assert st["classify"]["result"]["orbit"] == "Elliptic"
    inv = st["invariants"]["result"]
    assert inv["S1"] == [["0", "0"], ["0", "0"]] == inv["S2"]
    assert st["euler_lagrange"]["result"]["status"] == "certified"


def test_run_builtin_reduced_cartan(capsys):
    code, rep = _json_run(capsys, "run", "--builtin", "elliptic-reduced", "cartan")
    res = _stages(rep)["cartan"]["result"]
    assert code == 0
    assert res["s_prime"] == [3, 1, 0] and res["r1"] == 4 and res["involutive"] is False
    assert all(s["status"] == "skipped" for s in rep["stages"] if s["name"] != "cartan")


def test_cartan_test_alias(capsys):
    code, rep = _json_run(capsys, "cartan-test", "--builtin", "elliptic-reduced")
    assert code == 0 and rep["subcommand"] == "cartan"


def test_verify_algebra(capsys):
    code, rep = _json_run(capsys, "run", "verify-algebra")
    res = _stages(rep)["algebra"]["result"]
    assert code == 0
    assert res["bracket_rows"] == {"total": 13, "passed": 13, "failed": []}
    assert res["signature"] == [3, 3]


def test_wave_skips_elliptic_stages(capsys):
    code, rep = _json_run(capsys, "all", str(DATA / "wave.masys"))
    st = _stages(rep)
    assert code == 0
    assert st["classify"]["result"]["orbit"] == "Hyperbolic"
    for name in ("adapt", "structure_b0", "structure_b1", "invariants", "cartan"):
        assert st[name]["status"] == "skipped" and st[name]["reason"]


def test_stage_error_propagates(tmp_path, capsys):
    p = _write(tmp_path, "tricomi.masys", "psi = 0, 1, 0, 0, -x1, 0\n")
    code, rep = _json_run(capsys, "run", str(p), "invariants")
    st = _stages(rep)
    assert code == 1
    assert st["classify"]["status"] == "error"
    assert "orbit-pure" in st["classify"]["diagnostic"]
    assert st["adapt"]["status"] == "skipped"
    # the Poincare-Cartan search only needs the system
    assert st["euler_lagrange"]["status"] == "ok"


def test_variable_elliptic_without_coframe_fails_adaptation(tmp_path, capsys):
    p = _write(tmp_path, "var.masys", "psi = 0, 1, 0, 0, -(1 + x1^2), 0\n")
    code, rep = _json_run(capsys, "invariants", str(p), "--el-degree", "0")
    st = _stages(rep)
    assert code == 1
    assert st["adapt"]["status"] == "error"
    assert st["invariants"]["status"] == "skipped"


def test_input_errors_exit_2(tmp_path, capsys):
    p = _write(tmp_path, "bad.masys", "psi = 0, 1, 0, 0, -1\n")
    assert main(["run", str(p), "all"]) == 2
    assert "exactly 6" in capsys.readouterr().err
    assert main(["run", "classify"]) == 2
    assert main(["run", "--builtin", "elliptic-reduced", "classify"]) == 2
    assert main(["run", str(p), "frobnicate"]) == 2


def test_incompatible_system_is_stage_error(tmp_path, capsys):
    p = _write(tmp_path, "inc.masys", "psi = 0, 0, 0, 1, 0, 0\n")
    code, rep = _json_run(capsys, "classify", str(p))
    assert code == 1 and _stages(rep)["system"]["status"] == "error"


def test_text_output(capsys):
    assert main(["run", "--builtin", "laplace", "classify"]) == 0
    out = capsys.readouterr().out
    assert "[ok]      classify" in out and "orbit: Elliptic" in out


def test_json_is_deterministic():
    a = run(DATA / "det-hessian.masys", "all", seed=7).to_json()
    b = run(DATA / "det-hessian.masys", "all", seed=7).to_json()
    assert a == b
