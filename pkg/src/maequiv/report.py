"""Staged pipelines behind the command line, with skip propagation and stable serialization."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

from maequiv import __version__
from maequiv import algebra, cartan
from maequiv import gstructure as G
from maequiv.jet_contact import MongeAmpereSystem, build_ma_system, euler_lagrange_test, expand_to_pde

SUBCOMMANDS = ("classify", "invariants", "cartan", "verify-algebra", "all")

_SYSTEM_CHAIN = ("system", "classify", "adapt", "structure_b0", "structure_b1", "invariants")
PLAN = {
    "classify": ("system", "classify"),
    "invariants": _SYSTEM_CHAIN + ("euler_lagrange",),
    "cartan": _SYSTEM_CHAIN + ("cartan",),
    "verify-algebra": ("algebra",),
    "all": _SYSTEM_CHAIN + ("euler_lagrange", "cartan", "algebra"),
}
# Stages each stage needs; the builtin reduced system feeds "cartan" directly.
DEPENDS = {
    "system": (),
    "classify": ("system",),
    "adapt": ("classify",),
    "structure_b0": ("adapt",),
    "structure_b1": ("structure_b0",),
    "invariants": ("structure_b1",),
    "euler_lagrange": ("system",),
    "cartan": ("invariants",),
    "algebra": (),
}


class StageError(Exception):
    """A stage could not produce its result; ``details`` go into the report."""

    def __init__(self, message: str, details: dict | None = None):
        super().__init__(message)
        self.details = details or {}


class StageSkip(Exception):
    """A stage does not apply to this input."""


@dataclass(frozen=True)
class RunOptions:
    el_degree: int = 2
    probes: int = 32
    seed: int = 0

    def as_dict(self) -> dict:
        return {"el_degree": self.el_degree, "probes": self.probes, "seed": self.seed}


@dataclass
class Stage:
    name: str
    status: str  # ok | error | skipped
    result: dict | None = None
    diagnostic: str | None = None
    reason: str | None = None
    details: dict | None = None

    def as_dict(self) -> dict:
        out: dict = {"name": self.name, "status": self.status}
        if self.status == "ok":
            out["result"] = self.result
        elif self.status == "error":
            out["diagnostic"] = self.diagnostic
            if self.details:
                out["details"] = self.details
        else:
            out["reason"] = self.reason
        return out


@dataclass
class Report:
    subcommand: str
    source: str
    inputs: dict
    options: RunOptions
    stages: list[Stage] = field(default_factory=list)

    def stage(self, name: str) -> Stage | None:
        return next((s for s in self.stages if s.name == name), None)

    @property
    def exit_code(self) -> int:
        return 1 if any(s.status == "error" for s in self.stages) else 0

    def as_dict(self) -> dict:
        return {
            "tool": "maequiv",
            "version": __version__,
            "subcommand": self.subcommand,
            "source": self.source,
            "input": self.inputs,
            "options": self.options.as_dict(),
            "stages": [s.as_dict() for s in self.stages],
            "exit_code": self.exit_code,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, ensure_ascii=False) + "\n"

    def to_text(self) -> str:
        lines = [f"maequiv {__version__}  {self.subcommand}  [{self.source}]"]
        for s in self.stages:
            if s.status == "ok":
                lines.append(f"[ok]      {s.name}")
                lines.extend("    " + ln for ln in _text_lines(s.result))
            elif s.status == "error":
                lines.append(f"[error]   {s.name}: {s.diagnostic}")
                lines.extend("    " + ln for ln in _text_lines(s.details or {}))
            else:
                lines.append(f"[skipped] {s.name}: {s.reason}")
        lines.append(f"exit code {self.exit_code}")
        return "\n".join(lines) + "\n"


def _text_lines(value, prefix: str = "") -> list[str]:
    out = []
    if isinstance(value, dict):
        for k, v in value.items():
            if isinstance(v, (dict, list)) and v and not _flat_list(v):
                out.append(f"{prefix}{k}:")
                out.extend(_text_lines(v, prefix + "  "))
            else:
                out.append(f"{prefix}{k}: {_scalar_text(v)}")
    elif isinstance(value, list):
        for v in value:
            if isinstance(v, (dict, list)) and not _flat_list(v):
                out.append(f"{prefix}-")
                out.extend(_text_lines(v, prefix + "  "))
            else:
                out.append(f"{prefix}- {_scalar_text(v)}")
    else:
        out.append(prefix + _scalar_text(value))
    return out


def _flat_list(v) -> bool:
    return isinstance(v, list) and all(not isinstance(x, dict) for x in v) and \
        all(not isinstance(x, list) or _flat_list(x) for x in v)


def _scalar_text(v) -> str:
    if isinstance(v, list):
        return "[" + ", ".join(_scalar_text(x) for x in v) + "]"
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return "-"
    return str(v)


# --------------------------------------------------------------------------
# stage bodies


def _matrix(m) -> list[list[str]]:
    return [[str(c) for c in row] for row in m]


def _checks(items: Sequence[algebra.RelationCheck]) -> dict:
    failed = [c.label for c in items if not c.holds]
    return {"total": len(items), "passed": len(items) - len(failed), "failed": failed}


class _Context:
    def __init__(self, coeffs, coframe, options: RunOptions):
        self.coeffs = coeffs
        self.coframe = coframe  # five jet 1-forms or None
        self.options = options
        self.system: MongeAmpereSystem | None = None
        self.user_cof: G.AdaptedCoframe | None = None
        self.orbit: G.OrbitClass | None = None
        self.cof: G.AdaptedCoframe | None = None
        self.b0 = None
        self.b1 = None
        self.el_verdict = None

    # ---- stages

    def system_stage(self) -> dict:
        try:
            self.system = build_ma_system(self.coeffs)
        except ValueError as exc:
            raise StageError(str(exc)) from exc
        return {"psi": str(self.system.psi), "pde": str(expand_to_pde(self.system))}

    def classify_stage(self) -> dict:
        source = "standard (theta, dx1, dp1, dx2, dp2)"
        cof = G.laplace_coframe()
        if self.coframe is not None:
            try:
                cof = G.adapted_coframe(self.coframe)
            except G.AdaptationError as exc:
                raise StageError(f"supplied coframe is not adapted: {exc}",
                                 {"residue": str(exc.residue)}) from exc
            self.user_cof = cof
            source = "supplied"
        try:
            self.orbit = G.classify(self.system, cof)
        except G.NotOrbitPure as exc:
            raise StageError(str(exc), {"multiplier": str(exc.multiplier)}) from exc
        return {**self.orbit.as_dict(), "coframe": source}

    def adapt_stage(self) -> dict:
        if self.orbit.label != "Elliptic":
            raise StageSkip(f"orbit is {self.orbit.label}; the invariants are defined for elliptic systems")
        candidates = []
        if self.user_cof is not None:
            candidates.append(("supplied", self.user_cof))
        candidates.append(("standard", G.laplace_coframe()))
        for source, cof in candidates:
            if G.normal_form_residue(self.system, cof).is_zero():
                self.cof = cof
                return {"coframe": source, "forms": [str(f) for f in cof.forms], "scale": "1"}
        try:
            cof, _, scale = G.adapt_constant(self.system)
        except G.AdaptationError as exc:
            raise StageError("no coframe bringing Psi to its elliptic normal form is available; "
                             f"supply one in the system file ({exc})") from exc
        self.cof = cof
        return {"coframe": "constant-coefficient adapter", "forms": [str(f) for f in cof.forms],
                "scale": str(scale)}

    def b0_stage(self) -> dict:
        cc = G.complexify(self.cof)
        try:
            eqs, ti = G.absorb(G.initial_structure(cc))
        except G.AbsorptionError as exc:
            raise StageError(str(exc), {"residual": str(exc.residual)}) from exc
        rel = G.integrability_relations(ti)
        bad = {k: str(v) for k, v in rel.items() if not v.is_zero()}
        if bad:
            raise StageError("integrability relations between U and V fail", bad)
        self.b0 = (eqs, ti)
        return {"torsion": ti.as_dict(), "relations": {k: str(v) for k, v in rel.items()}}

    def b1_stage(self) -> dict:
        eqs, ti = self.b0
        try:
            b1, ti1, log = G.reduce_to_b1(eqs, ti)
        except G.AbsorptionError as exc:
            raise StageError(str(exc), {"residual": str(exc.residual)}) from exc
        mismatch = G.dpsi00_check(b1, ti1)
        if mismatch:
            raise StageError("the expansion of d psi00 in P^i_j does not reconstruct it",
                             {"^".join(k): [str(a), str(b)] for k, (a, b) in mismatch.items()})
        printed = G.dpsi00_check(b1, ti1, printed=True)
        self.b1 = (b1, ti1)
        return {
            "torsion": ti1.as_dict(),
            "normalization": {k: [str(x) for x in v] if isinstance(v, (list, tuple)) else str(v)
                              for k, v in log.items()},
            "dpsi00_reconstructed": True,
            "dpsi00_printed_coefficients_mismatch": sorted("^".join(k) for k in printed),
        }

    def invariants_stage(self) -> dict:
        b1, ti = self.b1
        s1, s2 = G.invariants_s(ti)
        return {
            "S1": _matrix(s1),
            "S2": _matrix(s2),
            "laplace_test": G.laplace_test(ti),
            "el_test": G.el_test(ti),
            "dpsi00_closed": G.dpsi00_closed(b1),
        }

    def el_stage(self) -> dict:
        v = euler_lagrange_test(self.system, self.options.el_degree)
        self.el_verdict = v
        out = v.as_dict()
        if self.b1 is not None:
            el = G.el_test(self.b1[1])
            out["el_test"] = el
            out["agreement"] = ("agree" if v.certified == el else
                                "inconclusive" if not v.certified else "disagree")
            if out["agreement"] == "disagree":
                raise StageError("Poincare-Cartan certificate contradicts the invariant test", out)
        return out

    def cartan_stage(self) -> dict:
        return cartan_result(self.options)

    def algebra_stage(self) -> dict:
        return algebra_result()


def cartan_result(options: RunOptions) -> dict:
    t = cartan.reduced_system_tableau()
    rep = cartan.reduced_characters(t, probes=options.probes, seed=options.seed)
    d17 = cartan.check_printed_constraints(t)
    return {
        **rep.as_dict(),
        "r1": t.r1(),
        "printed_free_parameters_valid": cartan.printed_free_parameters_ok(t),
        "printed_constraints_implied": {k: v for k, v in d17.items()},
    }


def algebra_result() -> dict:
    table = algebra.check_structure_constants()
    sl2 = algebra.check_sl2c_relations()
    gram = algebra.gram_matrix()
    sig = algebra.signature()
    equi = algebra.equivariance_checks()
    hom = algebra.homomorphism_checks()
    jac = algebra.jacobi_checks()
    expected_gram = [[(2 if i < 3 else -2) if i == j else 0 for j in range(6)] for i in range(6)]
    out = {
        "brackets": _checks(table),
        "bracket_rows": _checks(algebra.bracket_rows()),
        "sl2c_brackets": _checks(sl2["table"]),
        "sl2c_index_formulas": _checks(sl2["generic"]),
        "gram_matrix": [[str(c) for c in row] for row in gram],
        "gram_diagonal_2_2_2_m2_m2_m2": gram == expected_gram,
        "signature": list(sig),
        "equivariance": _checks(equi),
        "homomorphism": _checks(hom),
        "jacobi": _checks(jac),
    }
    failing = [k for k in ("brackets", "equivariance", "homomorphism", "jacobi") if out[k]["failed"]]
    if failing or not out["gram_diagonal_2_2_2_m2_m2_m2"] or tuple(sig) != (3, 3):
        raise StageError("algebra verification failed", {"failing_suites": failing, **out})
    return out


# --------------------------------------------------------------------------
# driver


def run_pipeline(subcommand: str, coeffs=None, coframe=None, options: RunOptions | None = None,
                 source: str = "", inputs: dict | None = None, builtin_reduced: bool = False) -> Report:
    """Run the stages planned for ``subcommand`` and collect a Report.

    ``coeffs`` are the six psi coefficients (ScalarExpr); ``builtin_reduced``
    replaces the system chain by the shipped reduced elliptic system, so only
    the Cartan and algebra stages can run.
    """
    if subcommand not in SUBCOMMANDS:
        raise ValueError(f"unknown subcommand {subcommand!r}")
    options = options or RunOptions()
    report = Report(subcommand, source, inputs or {}, options)
    ctx = _Context(coeffs, coframe, options)
    bodies: dict[str, Callable[[], dict]] = {
        "system": ctx.system_stage,
        "classify": ctx.classify_stage,
        "adapt": ctx.adapt_stage,
        "structure_b0": ctx.b0_stage,
        "structure_b1": ctx.b1_stage,
        "invariants": ctx.invariants_stage,
        "euler_lagrange": ctx.el_stage,
        "cartan": ctx.cartan_stage,
        "algebra": ctx.algebra_stage,
    }
    status: dict[str, str] = {}
    for name in PLAN[subcommand]:
        if builtin_reduced and name not in ("cartan", "algebra"):
            stage = Stage(name, "skipped", reason="the builtin reduced system has no Monge-Ampere form")
        else:
            deps = () if (builtin_reduced and name == "cartan") else DEPENDS[name]
            blocked = [d for d in deps if status.get(d) != "ok"]
            if blocked:
                stage = Stage(name, "skipped", reason=f"depends on {', '.join(blocked)}, which did not succeed")
            else:
                try:
                    stage = Stage(name, "ok", result=bodies[name]())
                except StageSkip as exc:
                    stage = Stage(name, "skipped", reason=str(exc))
                except StageError as exc:
                    stage = Stage(name, "error", diagnostic=str(exc), details=exc.details)
                except (ValueError, ArithmeticError) as exc:
                    stage = Stage(name, "error", diagnostic=f"{type(exc).__name__}: {exc}")
        status[name] = stage.status
        report.stages.append(stage)
    return report
