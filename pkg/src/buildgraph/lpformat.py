"""Textual LP export/import of the 0-1 programs.

Canonical layout (one space of indentation inside sections, numbers with 9
significant digits, unit coefficients omitted)::

    Maximize
     obj: 0.523 e_0_1 + 0.075 d_0_b3 - su_0
    Subject To
     endpoint_0: e_0_1 - c_0 <= 0
    Bounds
     0 <= su_0 <= 1
    Binary
     c_0
     e_0_1
     d_0_b3
    End

Constraint names are family_index with a per-family counter; every section
header always appears, even when the section is empty.  The parser accepts
exactly this shape and rebuilds a structurally identical program, with
numbers quantized at the writer's 9 significant digits.
"""

from __future__ import annotations

import re

from .ipbuild import (
    BinaryProgram,
    EQ,
    GE,
    KIND_CORNER,
    KIND_DIR,
    KIND_EDGE,
    KIND_REGION,
    KIND_SLACK_LO,
    KIND_SLACK_UP,
    LE,
    LinearConstraint,
    Variable,
    VarRef,
)


class LPParseError(ValueError):
    """The LP text deviates from the canonical grammar."""


def _fmt(v: float) -> str:
    return "%.9g" % v


_NAME_PATTERNS = [
    (re.compile(r"^c_(\d+)$"), lambda m: VarRef(KIND_CORNER, (int(m[1]),))),
    (re.compile(r"^e_(\d+)_(\d+)$"),
     lambda m: VarRef(KIND_EDGE, (int(m[1]), int(m[2])))),
    (re.compile(r"^r_(\d+)$"), lambda m: VarRef(KIND_REGION, (int(m[1]),))),
    (re.compile(r"^d_(\d+)_b(\d+)$"),
     lambda m: VarRef(KIND_DIR, (int(m[1]), int(m[2])))),
    (re.compile(r"^su_(\d+)$"),
     lambda m: VarRef(KIND_SLACK_UP, (int(m[1]),))),
    (re.compile(r"^sl_(\d+)$"),
     lambda m: VarRef(KIND_SLACK_LO, (int(m[1]),))),
]


def parse_var_name(name: str) -> VarRef:
    for pat, make in _NAME_PATTERNS:
        m = pat.match(name)
        if m:
            return make(m)
    raise LPParseError(f"unrecognized variable name {name!r}")


def _format_terms(terms: list[tuple[float, VarRef]]) -> str:
    if not terms:
        return "0"
    parts: list[str] = []
    for i, (coef, ref) in enumerate(terms):
        mag = abs(coef)
        body = ref.name if mag == 1.0 else f"{_fmt(mag)} {ref.name}"
        if i == 0:
            parts.append(f"- {body}" if coef < 0 else body)
        else:
            parts.append(f"- {body}" if coef < 0 else f"+ {body}")
    return " ".join(parts)


def write_lp(p: BinaryProgram) -> str:
    """Serialize a program to the canonical LP text."""
    lines = ["Maximize"]
    obj_terms = [(coef, v.ref) for v in p.variables
                 if (coef := p.objective.get(v.ref, 0.0)) != 0.0]
    lines.append(f" obj: {_format_terms(obj_terms)}")
    lines.append("Subject To")
    counters: dict[str, int] = {}
    for con in p.constraints:
        i = counters.get(con.family, 0)
        counters[con.family] = i + 1
        lines.append(f" {con.family}_{i}: {_format_terms(con.terms)} "
                     f"{con.relation} {_fmt(con.rhs)}")
    lines.append("Bounds")
    for v in p.variables:
        if v.binary:
            if (v.lb, v.ub) != (0.0, 1.0):
                raise ValueError(
                    f"binary {v.ref.name} has non-default bounds "
                    f"({v.lb}, {v.ub})")
        else:
            lines.append(f" {_fmt(v.lb)} <= {v.ref.name} <= {_fmt(v.ub)}")
    lines.append("Binary")
    for v in p.variables:
        if v.binary:
            lines.append(f" {v.ref.name}")
    lines.append("End")
    return "\n".join(lines) + "\n"


def _parse_terms(tokens: list[str], where: str) -> list[tuple[float, VarRef]]:
    if tokens == ["0"]:
        return []
    terms: list[tuple[float, VarRef]] = []
    sign = 1.0
    coef: float | None = None
    for tok in tokens:
        if tok == "+":
            if coef is not None:
                raise LPParseError(f"dangling coefficient in {where}")
            sign = 1.0
        elif tok == "-":
            if coef is not None:
                raise LPParseError(f"dangling coefficient in {where}")
            sign = -1.0
        else:
            try:
                value = float(tok)
            except ValueError:
                ref = parse_var_name(tok)
                terms.append((sign * (1.0 if coef is None else coef), ref))
                sign, coef = 1.0, None
            else:
                if coef is not None:
                    raise LPParseError(f"two coefficients in a row in {where}")
                coef = value
    if coef is not None:
        raise LPParseError(f"dangling coefficient in {where}")
    return terms


def parse_lp(text: str) -> BinaryProgram:
    """Parse canonical LP text back into a BinaryProgram."""
    section = None
    objective: dict[VarRef, float] = {}
    constraints: list[LinearConstraint] = []
    bounds: list[tuple[VarRef, float, float]] = []
    binaries: list[VarRef] = []
    seen_sections: list[str] = []

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line in ("Maximize", "Subject To", "Bounds", "Binary", "End"):
            section = line
            seen_sections.append(line)
            continue
        if section == "Maximize":
            if not line.startswith("obj:"):
                raise LPParseError(f"line {lineno}: expected 'obj:'")
            for coef, ref in _parse_terms(line[4:].split(), "objective"):
                objective[ref] = objective.get(ref, 0.0) + coef
        elif section == "Subject To":
            if ":" not in line:
                raise LPParseError(f"line {lineno}: missing constraint name")
            name, rest = line.split(":", 1)
            name = name.strip()
            if "_" not in name:
                raise LPParseError(f"line {lineno}: bad constraint name "
                                   f"{name!r}")
            family = name.rsplit("_", 1)[0]
            tokens = rest.split()
            rel_pos = [i for i, t in enumerate(tokens) if t in (LE, GE, EQ)]
            if len(rel_pos) != 1:
                raise LPParseError(
                    f"line {lineno}: expected exactly one relation")
            k = rel_pos[0]
            if k != len(tokens) - 2:
                raise LPParseError(f"line {lineno}: malformed right-hand side")
            terms = _parse_terms(tokens[:k], f"line {lineno}")
            try:
                rhs = float(tokens[-1])
            except ValueError as exc:
                raise LPParseError(
                    f"line {lineno}: bad rhs {tokens[-1]!r}") from exc
            softened = any(r.kind in (KIND_SLACK_UP, KIND_SLACK_LO)
                           for _, r in terms)
            constraints.append(LinearConstraint(terms, tokens[k], rhs,
                                                family, softened=softened))
        elif section == "Bounds":
            tokens = line.split()
            if len(tokens) != 5 or tokens[1] != "<=" or tokens[3] != "<=":
                raise LPParseError(f"line {lineno}: malformed bound")
            try:
                lb, ub = float(tokens[0]), float(tokens[4])
            except ValueError as exc:
                raise LPParseError(f"line {lineno}: bad bound value") from exc
            bounds.append((parse_var_name(tokens[2]), lb, ub))
        elif section == "Binary":
            binaries.append(parse_var_name(line))
        elif section == "End":
            raise LPParseError(f"line {lineno}: content after End")
        else:
            raise LPParseError(f"line {lineno}: content outside any section")

    if seen_sections != ["Maximize", "Subject To", "Bounds", "Binary", "End"]:
        raise LPParseError(
            f"sections out of order or missing: {seen_sections}")

    variables = [Variable(ref, True, 0.0, 1.0) for ref in binaries]
    variables += [Variable(ref, False, lb, ub) for ref, lb, ub in bounds]
    program = BinaryProgram(variables=variables, constraints=constraints,
                            objective=objective)
    try:
        program.validate()
    except ValueError as exc:
        raise LPParseError(str(exc)) from exc
    return program
