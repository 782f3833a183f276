"""Command line: system files in, staged reports out.

System files are either keyed text (``key = value`` per line, ``#`` comments)
or a JSON object.  Keys:

* ``psi_p1p2 psi_p1x2 psi_p2x2 psi_p1x1 psi_p2x1 psi_x1x2``: the six
  coefficients, or all six at once as ``psi = c1, c2, c3, c4, c5, c6``;
* ``eta0`` .. ``eta4`` (or ``coframe = f0, ..., f4``): optional adapted
  coframe, each a 1-form written with ``dx1 dx2 dz dp1 dp2`` and ``theta``;
* ``coordinates = a, b, c, d, e``: optional renaming of ``x1 x2 z p1 p2``;
* ``name``, ``el_degree``, ``probes``, ``seed``.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from maequiv.exterior import Form
from maequiv.jet_contact import JET, PSI_SLOTS, contact_form
from maequiv.report import SUBCOMMANDS, Report, RunOptions, run_pipeline
from maequiv.symkernel import JET_COORDS, ParseError, ScalarExpr, parse_expr

DIFFERENTIALS = ("dx1", "dx2", "dz", "dp1", "dp2")
BUILTINS = ("laplace", "wave", "det-hessian", "elliptic-reduced")
_OPTION_KEYS = ("el_degree", "probes", "seed")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


class InputError(ValueError):
    """Malformed system file; carries the position when one is known."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None, source: str = ""):
        self.message, self.line, self.column, self.source = message, line, column, source
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "")
        prefix = ": ".join(p for p in (source, where) if p)
        super().__init__(f"{prefix}: {message}" if prefix else message)


@dataclass
class SystemFile:
    psi_coeffs: tuple  # six ScalarExpr in slot order
    psi_text: tuple  # the expressions as written
    coframe: tuple | None = None  # five jet 1-forms
    coframe_text: tuple | None = None
    coordinates: tuple = JET_COORDS
    name: str = ""
    options: dict = field(default_factory=dict)

    def inputs(self) -> dict:
        return {
            "name": self.name,
            "coordinates": list(self.coordinates),
            "psi_coeffs": dict(zip(PSI_SLOTS, (str(c) for c in self.psi_coeffs))),
            "coframe": None if self.coframe is None else [str(f) for f in self.coframe],
        }


# --------------------------------------------------------------------------
# parsing


@dataclass
class _Entry:
    value: str
    line: int | None
    column: int | None  # 1-based column where the value starts


def _split_list(entry: _Entry) -> list[_Entry]:
    out, col = [], entry.column
    for piece in entry.value.split(","):
        lead = len(piece) - len(piece.lstrip())
        out.append(_Entry(piece.strip(), entry.line, None if col is None else col + lead))
        if col is not None:
            col += len(piece) + 1
    return out


def _parse_keyed(text: str, source: str) -> dict[str, _Entry]:
    entries: dict[str, _Entry] = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        if not body.strip():
            continue
        if "=" not in body:
            raise InputError("expected 'key = value'", n, len(body) - len(body.lstrip()) + 1, source)
        key, value = body.split("=", 1)
        key = key.strip()
        if not _IDENT.match(key):
            raise InputError(f"invalid key {key!r}", n, 1, source)
        if key in entries:
            raise InputError(f"duplicate key {key!r}", n, 1, source)
        col = len(body) - len(value) + (len(value) - len(value.lstrip())) + 1
        entries[key] = _Entry(value.strip(), n, col)
    return entries


def _locate(text: str, needle: str) -> tuple[int | None, int | None]:
    pos = text.find(json.dumps(needle))
    if pos < 0:
        return None, None
    line = text.count("\n", 0, pos) + 1
    return line, pos - (text.rfind("\n", 0, pos) + 1) + 2


def _parse_json(text: str, source: str) -> dict[str, _Entry]:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(exc.msg, exc.lineno, exc.colno, source) from exc
    if not isinstance(data, dict):
        raise InputError("top-level JSON value must be an object", 1, 1, source)

    def entry(value) -> _Entry:
        if isinstance(value, bool) or not isinstance(value, (str, int)):
            raise InputError(f"expected a string or integer, got {json.dumps(value)}", source=source)
        s = str(value)
        line, col = _locate(text, s) if isinstance(value, str) else (None, None)
        return _Entry(s, line, col)

    def listed(value) -> _Entry:
        if not isinstance(value, list):
            return entry(value)
        parts = [entry(v) for v in value]
        if any("," in p.value for p in parts):
            raise InputError("list items may not contain commas", source=source)
        e = _Entry(", ".join(p.value for p in parts), None, None)
        e.items = parts  # type: ignore[attr-defined]
        return e

    entries: dict[str, _Entry] = {}
    for key, value in data.items():
        if key == "options":
            if not isinstance(value, dict):
                raise InputError("'options' must be an object", source=source)
            for k, v in value.items():
                entries[k] = entry(v)
        elif key == "psi" and isinstance(value, dict):
            for k, v in value.items():
                entries[k if k.startswith("psi_") else "psi_" + k] = entry(v)
        elif key in ("psi", "coframe", "coordinates"):
            entries[key] = listed(value)
        else:
            entries[key] = entry(value)
    return entries


def _items(e: _Entry) -> list[_Entry]:
    return getattr(e, "items", None) or _split_list(e)


def _expr(e: _Entry, source: str, rename: dict[str, str], allowed: set[str]) -> ScalarExpr:
    try:
        value = parse_expr(e.value, e.line or 1)
    except ParseError as exc:
        col = None if e.column is None else e.column + exc.column - 1
        raise InputError(str(exc).rsplit(" (line", 1)[0], e.line, col, source) from exc
    unknown = value.free_symbols() - allowed
    if unknown:
        raise InputError(f"unknown identifier(s) {', '.join(sorted(unknown))}", e.line, e.column, source)
    if rename:
        value = value.subs({k: _sym(v) for k, v in rename.items() if k in value.free_symbols()})
    return value


def _sym(name: str) -> ScalarExpr:
    return parse_expr(name)


def _one_form(e: _Entry, source: str, rename: dict[str, str], coords: tuple) -> Form:
    theta_name = "theta"
    allowed = set(coords) | {"d" + c for c in coords} | {theta_name}
    value = _expr(e, source, rename, allowed)
    zero = {d: 0 for d in DIFFERENTIALS + (theta_name,)}
    if not value.subs(zero).is_zero():
        raise InputError("1-form has a term without a differential", e.line, e.column, source)
    f = Form(JET.frame, 1, {})
    theta = contact_form()
    basis = dict(zip(DIFFERENTIALS, (JET.dx1, JET.dx2, JET.dz, JET.dp1, JET.dp2)))
    basis[theta_name] = theta
    rebuilt = ScalarExpr.coerce(0)
    for d, form in basis.items():
        c = value.diff(d)
        if c.free_symbols() & set(basis):
            raise InputError("1-form must be linear in the differentials", e.line, e.column, source)
        f = f + form * c
        rebuilt = rebuilt + c * _sym(d)
    if rebuilt != value:
        raise InputError("1-form must be linear in the differentials", e.line, e.column, source)
    return f


def parse_system_text(text: str, source: str = "<text>") -> SystemFile:
    """Parse a system description given as keyed text or JSON."""
    entries = _parse_json(text, source) if text.lstrip().startswith("{") else _parse_keyed(text, source)

    rename: dict[str, str] = {}
    coords = JET_COORDS
    if "coordinates" in entries:
        items = _items(entries.pop("coordinates"))
        names = tuple(i.value for i in items)
        if len(names) != 5:
            raise InputError(f"coordinates needs 5 names, got {len(names)}", items[0].line, items[0].column, source)
        for i in items:
            if not _IDENT.match(i.value) or i.value in ("i", "theta") or i.value.startswith("d"):
                raise InputError(f"invalid coordinate name {i.value!r}", i.line, i.column, source)
        if len(set(names)) != 5:
            raise InputError("coordinate names must be distinct", items[0].line, items[0].column, source)
        coords = names
        # substitution is simultaneous, so permutations of the standard names are fine
        rename = {n: std for n, std in zip(names, JET_COORDS) if n != std}
        rename.update({"d" + n: "d" + std for n, std in zip(names, JET_COORDS) if n != std})

    # psi coefficients
    slot_keys = [k for k in entries if k.startswith("psi_")]
    if "psi" in entries and slot_keys:
        e = entries["psi"]
        raise InputError("give the coefficients either as 'psi' or as psi_* keys, not both", e.line, 1, source)
    if "psi" in entries:
        items = _items(entries.pop("psi"))
        if len(items) != 6:
            raise InputError(f"expected exactly 6 psi coefficients, got {len(items)}",
                             items[0].line, items[0].column, source)
    else:
        bad = [k for k in slot_keys if k not in PSI_SLOTS]
        if bad:
            e = entries[bad[0]]
            raise InputError(f"unknown coefficient key {bad[0]!r}; expected one of {', '.join(PSI_SLOTS)}",
                             e.line, 1, source)
        if len(slot_keys) != 6:
            missing = [k for k in PSI_SLOTS if k not in entries]
            raise InputError(f"expected exactly 6 psi coefficients, got {len(slot_keys)} "
                             f"(missing {', '.join(missing)})", source=source)
        items = [entries.pop(k) for k in PSI_SLOTS]
    for it in items:
        if not it.value:
            raise InputError("empty coefficient", it.line, it.column, source)
    coeffs = tuple(_expr(it, source, _scalar_rename(rename), set(coords)) for it in items)
    psi_text = tuple(it.value for it in items)

    # coframe
    coframe = coframe_text = None
    eta_keys = [f"eta{k}" for k in range(5)]
    if "coframe" in entries or any(k in entries for k in eta_keys):
        if "coframe" in entries:
            cf = _items(entries.pop("coframe"))
        else:
            missing = [k for k in eta_keys if k not in entries]
            if missing:
                raise InputError(f"coframe is incomplete (missing {', '.join(missing)})", source=source)
            cf = [entries.pop(k) for k in eta_keys]
        if len(cf) != 5:
            raise InputError(f"coframe needs 5 one-forms, got {len(cf)}", cf[0].line, cf[0].column, source)
        coframe = tuple(_one_form(e, source, rename, coords) for e in cf)
        coframe_text = tuple(e.value for e in cf)

    options = {}
    for k in _OPTION_KEYS:
        if k in entries:
            e = entries.pop(k)
            try:
                options[k] = int(e.value)
            except ValueError:
                raise InputError(f"{k} must be an integer", e.line, e.column, source) from None
    name = entries.pop("name").value if "name" in entries else ""
    if entries:
        k, e = next(iter(entries.items()))
        raise InputError(f"unknown key {k!r}", e.line, 1 if e.line else None, source)
    return SystemFile(coeffs, psi_text, coframe, coframe_text, coords, name, options)


def _scalar_rename(rename: dict[str, str]) -> dict[str, str]:
    return {k: v for k, v in rename.items() if v in JET_COORDS and not k.startswith("d")}


def parse_system(path: str | Path) -> SystemFile:
    """Read and validate a system file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read file: {exc.strerror or exc}", source=str(path)) from exc
    return parse_system_text(text, str(path))


def builtin_text(name: str) -> str:
    return resources.files("maequiv.data").joinpath(f"{name}.masys").read_text(encoding="utf-8")


# --------------------------------------------------------------------------
# running


def run(path: str | Path | None, subcommand: str, *, builtin: str | None = None,
        el_degree: int | None = None, probes: int | None = None, seed: int | None = None) -> Report:
    """Parse the input (file or builtin) and run the pipeline; raises InputError on bad input."""
    if subcommand not in SUBCOMMANDS:
        raise InputError(f"unknown subcommand {subcommand!r}; choose from {', '.join(SUBCOMMANDS)}")
    if path is not None and builtin is not None:
        raise InputError("give either a system file or --builtin, not both")
    if builtin is not None and builtin not in BUILTINS:
        raise InputError(f"unknown builtin {builtin!r}; choose from {', '.join(BUILTINS)}")

    file_opts: dict = {}
    sysf = None
    if builtin == "elliptic-reduced":
        source = "builtin:elliptic-reduced"
    elif builtin is not None:
        source = f"builtin:{builtin}"
        sysf = parse_system_text(builtin_text(builtin), source)
    elif path is not None:
        source = str(path)
        sysf = parse_system(path)
    elif subcommand == "verify-algebra":
        source = "none"
    else:
        raise InputError(f"'{subcommand}' needs a system file or --builtin")
    if sysf is not None:
        file_opts = sysf.options

    def pick(cli, key, default):
        value = cli if cli is not None else file_opts.get(key, default)
        if value < 0 or (key == "el_degree" and value > 6):
            raise InputError(f"{key} out of range: {value}")
        return value

    options = RunOptions(el_degree=pick(el_degree, "el_degree", 2),
                         probes=pick(probes, "probes", 32), seed=pick(seed, "seed", 0))
    if sysf is None:
        if subcommand in ("classify", "invariants") and builtin == "elliptic-reduced":
            raise InputError(f"'{subcommand}' needs a Monge-Ampere system; the reduced builtin has none")
        return run_pipeline(subcommand, options=options, source=source,
                            builtin_reduced=builtin == "elliptic-reduced")
    return run_pipeline(subcommand, sysf.psi_coeffs, sysf.coframe, options, source, sysf.inputs())


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="maequiv",
        description="Classify Monge-Ampere systems, compute their elliptic invariants, "
                    "run the Cartan test on the reduced system and verify the structure algebra.")
    p.add_argument("words", nargs="+", metavar="ARG",
                   help="[run] [FILE] SUBCOMMAND, SUBCOMMAND one of: " + ", ".join(SUBCOMMANDS)
                        + " (cartan-test is an alias of cartan)")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--seed", type=int)
    p.add_argument("--probes", type=int)
    p.add_argument("--el-degree", type=int, dest="el_degree")
    p.add_argument("--builtin", choices=BUILTINS)
    return p


def _split_words(words: list[str]) -> tuple[str | None, str]:
    if words and words[0] == "run":
        words = words[1:]
    words = ["cartan" if w == "cartan-test" else w for w in words]
    subs = [w for w in words if w in SUBCOMMANDS]
    if len(subs) != 1 or len(words) > 2:
        raise InputError("usage: maequiv [run] [FILE] SUBCOMMAND  (subcommands: " + ", ".join(SUBCOMMANDS) + ")")
    files = [w for w in words if w not in SUBCOMMANDS]
    return (files[0] if files else None), subs[0]


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_intermixed_args(argv)
    try:
        path, sub = _split_words(args.words)
        report = run(path, sub, builtin=args.builtin, el_degree=args.el_degree,
                     probes=args.probes, seed=args.seed)
    except InputError as exc:
        print(f"maequiv: input error: {exc}", file=sys.stderr)
        return 2
    out = report.to_json() if args.format == "json" else report.to_text()
    sys.stdout.write(out)
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
