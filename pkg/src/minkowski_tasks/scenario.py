"""Scenario files: a line-oriented description of a task, strategies and checks.

Sections::

    [scenario]   name, dimension, seed, caption, param.NAME = value
    [points]     NAME = t; x[, y, z]
    [regions]    NAME = box t=a..b x=c..d [| box ...] ; impenetrable | penetrable [bits=N] [qubits=N]
    [inputs]     NAME = quantum|classical (@POINT | at EXPR) options
                 group NAME = I1, ~REF : state=maxent|singlet|ghz
    [outputs]    NAME = at EXPR (state INPUT | value EXPR | free) [needs A, B]
    [predicate]  exact | fidelity >= THETA | probability OP BOUND : EVENT
    [strategy NAME]  station / pair / shared / use lines, and STATION: statement
    [variant NAME]   replacement output lines
    [analyze]    CHECK key=value ... expect=VALUE

Comments start with ``#``.  Expressions may not contain whitespace outside
parentheses except in the predicate event and in handler conditions.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any

from . import engine as en
from .expr import Expr, ExprError
from .geometry import Box, GeometryError, Region, SpacetimePoint
from .tasks import (
    ClassicalDistribution,
    InputEvent,
    OutputRequirement,
    PrepGroup,
    QuantumSource,
    SuccessPredicate,
    TaskError,
    TaskSpec,
    validate,
)

SECTIONS = ("scenario", "points", "regions", "inputs", "outputs", "predicate", "strategy", "variant", "analyze")
REQUIRED = ("points", "inputs", "outputs")
SCENARIO_KEYS = ("name", "dimension", "seed", "caption")
AXES = ("x", "y", "z")
CHECKS = ("routing", "clone", "summoning", "family", "simulate", "nosignal", "budget",
          "commitment", "unveiling", "relation", "rac")


class ScenarioError(ValueError):
    def __init__(self, line: int, col: int, message: str):
        super().__init__(f"line {line}, column {col}: {message}")
        self.line, self.col, self.message = line, col, message


@dataclass
class Directive:
    kind: str
    options: dict[str, str]
    expect: tuple[str, str] | None
    line: int
    text: str


@dataclass
class Scenario:
    name: str
    task: TaskSpec
    strategies: dict[str, Any]
    directives: list[Directive]
    variants: dict[str, TaskSpec] = field(default_factory=dict)
    seed: int = 0
    caption: str = ""

    def strategy(self, name: str | None = None, task: TaskSpec | None = None, resolution: int = 64) -> en.Strategy:
        if name is None:
            if not self.strategies:
                raise KeyError("scenario declares no strategy")
            name = next(iter(self.strategies))
        if name not in self.strategies:
            raise KeyError(f"unknown strategy {name!r}")
        s = self.strategies[name]
        if callable(s) and not isinstance(s, en.Strategy):
            return s(task or self.task, resolution)
        return s

    def variant(self, name: str | None) -> TaskSpec:
        if name is None:
            return self.task
        if name not in self.variants:
            raise KeyError(f"unknown variant {name!r}")
        return self.variants[name]


# --- tokenizing -----------------------------------------------------------------

@dataclass
class _Tok:
    text: str
    col: int


def _tokens(text: str, offset: int) -> list[_Tok]:
    """Split on whitespace outside parentheses; columns are 1-based."""
    out, depth, start = [], 0, None
    for i, ch in enumerate(text + " "):
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        if ch.isspace() and depth <= 0:
            if start is not None:
                out.append(_Tok(text[start:i], offset + start + 1))
                start = None
        elif start is None:
            start = i
    return out


def _split_top(text: str, sep: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        if ch == sep and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return parts


class _Parser:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.sections: dict[str, list] = {}
        self.params: dict[str, Any] = {}
        self.points: dict[str, SpacetimePoint] = {}
        self.meta: dict[str, Any] = {}

    def error(self, line, col, msg):
        raise ScenarioError(line, max(col, 1), msg)

    def split_sections(self):
        current = None
        for n, raw in enumerate(self.lines, start=1):
            line = raw.split("#", 1)[0].rstrip()
            if not line.strip():
                continue
            stripped = line.strip()
            col = len(line) - len(line.lstrip()) + 1
            if stripped.startswith("["):
                m = re.fullmatch(r"\[\s*([A-Za-z_]+)(?:\s+([A-Za-z_][\w]*))?\s*\]", stripped)
                if not m:
                    self.error(n, col, f"malformed section header {stripped!r}")
                kind, arg = m.group(1), m.group(2)
                if kind not in SECTIONS:
                    self.error(n, col, f"unknown section [{kind}]")
                if kind in ("strategy", "variant"):
                    if not arg:
                        self.error(n, col, f"[{kind}] needs a name")
                    key = (kind, arg)
                else:
                    if arg:
                        self.error(n, col, f"[{kind}] takes no name")
                    key = kind
                if key in self.sections:
                    self.error(n, col, f"duplicate section {stripped}")
                self.sections[key] = []
                current = key
                continue
            if current is None:
                self.error(n, col, "content before the first section")
            self.sections[current].append((n, col - 1, line))
        for req in REQUIRED:
            if req not in self.sections:
                raise ScenarioError(len(self.lines) + 1 if self.lines else 1, 1, f"missing required section [{req}]")

    # helpers
    def expr(self, text, n, col) -> Expr:
        try:
            return Expr(text)
        except ExprError as exc:
            self.error(n, col, str(exc))

    def value(self, text, n, col, env=None):
        e = self.expr(text, n, col)
        try:
            return e.evaluate({**self.params, **self.points, **(env or {})})
        except ExprError as exc:
            self.error(n, col, str(exc))

    def assignment(self, n, off, line):
        if "=" not in line:
            self.error(n, off + 1, "expected NAME = ...")
        lhs, rhs = line.split("=", 1)
        name = lhs.strip()
        if not re.fullmatch(r"[A-Za-z_][\w.]*", name):
            self.error(n, off + 1 + len(lhs) - len(lhs.lstrip()), f"bad name {name!r}")
        rhs_off = len(lhs) + 1 + len(rhs) - len(rhs.lstrip())
        return name, rhs.strip(), rhs_off

    # sections
    def parse_meta(self):
        for n, off, line in self.sections.get("scenario", []):
            key, val, voff = self.assignment(n, off, line)
            if key.startswith("param."):
                self.params[key[6:]] = self.value(val, n, voff + 1)
            elif key in SCENARIO_KEYS:
                self.meta[key] = val
            else:
                self.error(n, off + 1, f"unknown key {key!r} in [scenario]")
        try:
            self.dim = int(self.meta.get("dimension", 1))
        except ValueError:
            self.error(1, 1, "dimension must be an integer")
        if self.dim < 1:
            self.error(1, 1, "dimension must be positive")

    def parse_points(self):
        for n, off, line in self.sections["points"]:
            name, rhs, roff = self.assignment(n, off, line)
            if name in self.points:
                self.error(n, off + 1, f"duplicate point {name!r}")
            parts = rhs.split(";")
            if len(parts) != 2:
                self.error(n, roff + 1, "points are written t; x[, y, z]")
            t = self.value(parts[0], n, roff + 1)
            xs = [self.value(v, n, roff + 1) for v in _split_top(parts[1], ",")]
            if len(xs) != self.dim:
                self.error(n, roff + len(parts[0]) + 2, f"point {name} needs {self.dim} spatial coordinates")
            self.points[name] = SpacetimePoint(float(t), tuple(float(v) for v in xs))

    def parse_regions(self):
        regions = []
        for n, off, line in self.sections.get("regions", []):
            name, rhs, roff = self.assignment(n, off, line)
            body, _, opts = rhs.partition(";")
            boxes = []
            for part in body.split("|"):
                toks = _tokens(part, 0)
                if not toks or toks[0].text != "box":
                    self.error(n, roff + 1, "regions are unions of 'box t=a..b x=c..d' terms")
                ranges = {}
                for tok in toks[1:]:
                    m = re.fullmatch(r"([a-z])=(.+)\.\.(.+)", tok.text)
                    if not m or m.group(1) not in ("t",) + AXES[: self.dim]:
                        self.error(n, roff + tok.col, f"bad box extent {tok.text!r}")
                    ranges[m.group(1)] = (self.value(m.group(2), n, roff + tok.col), self.value(m.group(3), n, roff + tok.col))
                need = ("t",) + AXES[: self.dim]
                if set(ranges) != set(need):
                    self.error(n, roff + 1, f"box needs extents for {', '.join(need)}")
                try:
                    boxes.append(Box(ranges["t"], tuple(ranges[a] for a in AXES[: self.dim])))
                except GeometryError as exc:
                    self.error(n, roff + 1, str(exc))
            penetrable, bits, qubits = False, None, None
            for tok in _tokens(opts, 0):
                if tok.text == "impenetrable":
                    penetrable = False
                elif tok.text == "penetrable":
                    penetrable = True
                elif tok.text.startswith("bits="):
                    penetrable, bits = True, int(self.value(tok.text[5:], n, 1))
                elif tok.text.startswith("qubits="):
                    penetrable, qubits = True, int(self.value(tok.text[7:], n, 1))
                else:
                    self.error(n, roff + len(body) + 1 + tok.col, f"unknown region option {tok.text!r}")
            try:
                regions.append(Region(name, tuple(boxes), penetrable, bits, qubits))
            except GeometryError as exc:
                self.error(n, off + 1, str(exc))
        self.regions = tuple(regions)

    def _location(self, toks, n, roff):
        """Consume '@POINT' or 'at EXPR' from the token list."""
        if not toks:
            self.error(n, roff + 1, "missing location")
        head = toks.pop(0)
        if head.text.startswith("@"):
            ref = head.text[1:]
            if ref not in self.points:
                self.error(n, roff + head.col, f"unknown point {ref!r}")
            return self.points[ref]
        if head.text == "at":
            if not toks:
                self.error(n, roff + head.col, "'at' needs an expression")
            e = toks.pop(0)
            return self.expr(e.text, n, roff + e.col)
        self.error(n, roff + head.col, f"expected '@POINT' or 'at EXPR', got {head.text!r}")

    def parse_inputs(self):
        inputs, groups = [], []
        for n, off, line in self.sections["inputs"]:
            if line.strip().startswith("group "):
                name, rhs, roff = self.assignment(n, off + 6, line.strip()[6:])
                members, _, opts = rhs.partition(":")
                mem = [m.strip() for m in members.split(",") if m.strip()]
                refs = tuple(m[1:] for m in mem if m.startswith("~"))
                real = tuple(m for m in mem if not m.startswith("~"))
                state = "maxent"
                for tok in _tokens(opts, 0):
                    if tok.text.startswith("state="):
                        state = tok.text[6:]
                    else:
                        self.error(n, off + 1, f"unknown group option {tok.text!r}")
                groups.append(PrepGroup(name, real, state, refs))
                continue
            name, rhs, roff = self.assignment(n, off, line)
            toks = _tokens(rhs, roff)
            if not toks:
                self.error(n, roff + 1, "missing input kind")
            kind = toks.pop(0)
            loc = self._location(toks, n, 0)
            opts = {}
            for tok in toks:
                if "=" not in tok.text:
                    self.error(n, tok.col, f"expected key=value, got {tok.text!r}")
                k, v = tok.text.split("=", 1)
                opts[k] = (v, tok.col)
            inside = opts.pop("inside", (None, 0))[0]
            if kind.text == "quantum":
                dim = int(opts.pop("dim", ("2", 0))[0])
                prep = opts.pop("prep", ("haar", 0))[0]
                group = opts.pop("group", (None, 0))[0]
                payload = QuantumSource(dim, "group" if group else prep, None, group)
            elif kind.text == "classical":
                payload = self._distribution(opts, n, kind.col)
            else:
                self.error(n, kind.col, f"input kind must be quantum or classical, not {kind.text!r}")
            if opts:
                k, (_, col) = next(iter(opts.items()))
                self.error(n, col, f"unknown input option {k!r}")
            inputs.append(InputEvent(name, loc, payload, inside))
        # group membership recorded on the members
        for g in groups:
            for m in g.members:
                for k, ev in enumerate(inputs):
                    if ev.name == m and ev.quantum:
                        p = ev.payload
                        inputs[k] = InputEvent(ev.name, ev.point, QuantumSource(p.dim, "group", None, g.name), ev.inside_region)
        self.inputs, self.groups = tuple(inputs), tuple(groups)

    def _distribution(self, opts, n, col) -> ClassicalDistribution:
        nums = lambda v, c: [self.value(x, n, c) for x in _split_top(v, ",")]
        probs = opts.pop("probs", None)
        if "values" in opts:
            v, c = opts.pop("values")
            vals = nums(v, c)
            if probs is None:
                return ClassicalDistribution.uniform(vals)
            return ClassicalDistribution(tuple(vals), tuple(float(p) for p in nums(*probs)))
        if "grid" in opts:
            v, c = opts.pop("grid")
            args = nums(v, c)
            if len(args) != 3:
                self.error(n, c, "grid=lo,hi,n")
            return ClassicalDistribution.grid(float(args[0]), float(args[1]), int(args[2]))
        if "const" in opts:
            v, c = opts.pop("const")
            return ClassicalDistribution.constant(self.value(v, n, c))
        if "strings" in opts:
            v, c = opts.pop("strings")
            return ClassicalDistribution.bit_strings(int(self.value(v, n, c)))
        self.error(n, col, "classical input needs values=, grid=, const= or strings=")

    def parse_outputs(self, lines):
        outs = []
        for n, off, line in lines:
            name, rhs, roff = self.assignment(n, off, line)
            toks = _tokens(rhs, roff)
            where = self._location(toks, n, 0)
            if isinstance(where, SpacetimePoint):
                where = Expr(f"point({where.t!r}, {', '.join(repr(v) for v in where.x)})")
            if not toks:
                self.error(n, roff + 1, "output needs 'state INPUT', 'value EXPR' or 'free'")
            kind = toks.pop(0)
            value = state = None
            if kind.text == "state":
                if not toks:
                    self.error(n, kind.col, "'state' needs an input name")
                state = toks.pop(0).text
                okind = "quantum"
            elif kind.text == "value":
                if not toks:
                    self.error(n, kind.col, "'value' needs an expression")
                t = toks.pop(0)
                value = self.expr(t.text, n, t.col)
                okind = "classical"
            elif kind.text == "free":
                okind = "free"
            else:
                self.error(n, kind.col, f"unknown output kind {kind.text!r}")
            deps = frozenset()
            if toks:
                head = toks.pop(0)
                if head.text != "needs":
                    self.error(n, head.col, f"unexpected {head.text!r}")
                deps = frozenset(d.strip() for d in " ".join(t.text for t in toks).split(",") if d.strip())
            outs.append(OutputRequirement(name, where, okind, value, state, deps))
        return tuple(outs)

    def parse_predicate(self):
        lines = self.sections.get("predicate", [])
        if not lines:
            return SuccessPredicate("exact")
        if len(lines) > 1:
            self.error(lines[1][0], 1, "[predicate] holds a single line")
        n, off, line = lines[0]
        text = line.strip()
        if text == "exact":
            return SuccessPredicate("exact")
        m = re.fullmatch(r"fidelity\s*>=\s*(\S+)", text)
        if m:
            return SuccessPredicate("fidelity", float(self.value(m.group(1), n, off + 1)))
        m = re.fullmatch(r"probability\s*(>=|<=|>|<)\s*([^:]+):(.+)", text)
        if m:
            bound = float(self.value(m.group(2).strip(), n, off + 1))
            event = self.expr(m.group(3), n, off + text.index(":") + 2)
            return SuccessPredicate("probability", 1.0, event, bound, m.group(1))
        self.error(n, off + 1, "predicate is 'exact', 'fidelity >= THETA' or 'probability OP BOUND : EVENT'")

    # strategies
    def parse_strategy(self, name, lines):
        stations, programs, pairs, shared = [], {}, [], []
        builtin = None
        for n, off, line in lines:
            text = line.strip()
            col = off + 1
            head = text.split()[0]
            if head == "use":
                from .strategies import BUILTIN

                which = text[3:].strip()
                if which not in BUILTIN:
                    self.error(n, col + 4, f"unknown builtin strategy {which!r}")
                builtin = BUILTIN[which]
            elif head == "station":
                toks = _tokens(text, off)[1:]
                if len(toks) < 2:
                    self.error(n, col, "station NAME (@POINT | @INPUT | @OUTPUT | at EXPR)")
                sname = toks.pop(0).text
                loc = toks[0].text
                if loc.startswith("@") and loc[1:] in self.points:
                    where = self.points[loc[1:]]
                elif loc.startswith("@"):
                    where = loc
                elif loc == "at" and len(toks) == 2:
                    where = self.expr(toks[1].text, n, toks[1].col)
                else:
                    self.error(n, toks[0].col, f"bad station location {loc!r}")
                stations.append(en.Station(sname, where))
            elif head == "pair":
                m = re.fullmatch(r"pair\s+(\w+)@(\w+)\s+(\w+)@(\w+)\s+(maxent|singlet)(?:\s+dim=(\d+))?", text)
                if not m:
                    self.error(n, col, "pair A@S1 B@S2 maxent|singlet [dim=d]")
                pairs.append(en.Pair((m.group(1), m.group(3)), (m.group(2), m.group(4)), m.group(5), int(m.group(6) or 2)))
            elif head == "shared":
                m = re.fullmatch(r"shared\s+(\w+)\s*=\s*(\S+)\s+@([\w,]+)(?:\s+bits=(\d+))?", text)
                if not m:
                    self.error(n, col, "shared NAME = VALUE @S1,S2 [bits=k]")
                shared.append(en.SharedString(m.group(1), self.value(m.group(2), n, col),
                                              tuple(m.group(3).split(",")), int(m.group(4) or 1)))
            elif ":" in head or re.match(r"\w+\s*:", text):
                st, _, stmt = text.partition(":")
                st = st.strip()
                programs.setdefault(st, []).append(self.statement(stmt.strip(), n, col + len(st) + 1))
            else:
                self.error(n, col, f"unknown strategy line {head!r}")
        if builtin is not None:
            if stations or programs or pairs:
                self.error(lines[0][0], 1, "a 'use' strategy cannot declare stations")
            return builtin
        known = {s.name for s in stations}
        for st in programs:
            if st not in known:
                line = next(n for n, off, l in lines if l.strip().startswith(st))
                self.error(line, 1, f"handler for undeclared station {st!r}")
        return en.Strategy(name, tuple(stations), {k: tuple(v) for k, v in programs.items()}, tuple(pairs), tuple(shared))

    def statement(self, text, n, col):
        E = lambda s: self.expr(s, n, col)
        if text.startswith("if "):
            cond, sep, body = (p for p in _partition_top(text[3:], ":"))
            if not sep:
                self.error(n, col, "if COND: STATEMENT")
            cond = cond.strip()
            inner = self.statement(body.strip(), n, col)
            if cond.startswith("have "):
                return en.If(None, inner, have=cond[5:].strip())
            return en.If(E(cond), inner)
        toks = text.split()
        op = toks[0] if toks else ""
        opts = {}
        words = []
        for t in toks[1:]:
            if re.fullmatch(r"(bits|via|dim)=\S+", t):
                k, v = t.split("=", 1)
                opts[k] = v
            else:
                words.append(t)
        bits = int(opts["bits"]) if "bits" in opts else None
        via = tuple(opts["via"].split(",")) if "via" in opts else ()
        try:
            if op == "let":
                m = re.fullmatch(r"let\s+(\w+)(?::(\d+))?\s*=\s*(.+)", text)
                return en.Let(m.group(1), E(m.group(3)), int(m.group(2)) if m.group(2) else None)
            if op == "send":
                arrow = words.index("->")
                expr = E("".join(words[:arrow]))
                dest = words[arrow + 1]
                var = expr.bare_name
                if len(words) > arrow + 2:
                    if words[arrow + 2] != "as":
                        raise ValueError
                    var = words[arrow + 3]
                if var is None:
                    self.error(n, col, "sending an expression needs 'as NAME'")
                return en.Send(expr, dest, var, bits, via)
            if op == "sendq":
                reg, arrow, dest = words
                if arrow != "->":
                    raise ValueError
                return en.SendQ(reg, dest, via)
            if op == "broadcast":
                (var,) = words
                return en.Broadcast(var, bits)
            if op == "tsend":
                reg, local, arrow, var = words
                if arrow != "->":
                    raise ValueError
                return en.TeleportSend(reg, local, var)
            if op == "treceive":
                reg, var = words
                return en.TeleportReceive(reg, var)
            if op == "measure":
                reg, basis, arrow, var = words
                if arrow != "->":
                    raise ValueError
                m = re.fullmatch(r"angle\((.+)\)", basis)
                if m:
                    return en.Measure(reg, "angle", var, E(m.group(1)))
                if basis not in ("z", "x", "y"):
                    self.error(n, col, f"unknown basis {basis!r}")
                return en.Measure(reg, basis, var)
            if op == "apply":
                gate, regs = words
                return en.Apply(gate, tuple(regs.split(",")))
            if op == "prepare":
                reg, spec = words
                m = re.fullmatch(r"(z|x|y|bloch)\((.+)\)", spec)
                if not m:
                    raise ValueError
                arg = m.group(2) if m.group(1) != "bloch" else f"({m.group(2)})"
                return en.Prepare(reg, m.group(1), E(arg), int(opts.get("dim", 2)))
            if op == "output":
                return en.Output(E(" ".join(words)))
            if op == "discard":
                (reg,) = words
                return en.Discard(reg)
        except (ValueError, IndexError, AttributeError):
            self.error(n, col, f"malformed {op} statement {text!r}")
        self.error(n, col, f"unknown statement {op!r}")

    def parse_directives(self):
        out = []
        for n, off, line in self.sections.get("analyze", []):
            toks = _tokens(line, 0)
            kind = toks[0]
            if kind.text not in CHECKS:
                self.error(n, kind.col, f"unknown check {kind.text!r}")
            opts, expect, positional = {}, None, []
            for tok in toks[1:]:
                m = re.fullmatch(r"expect(<=|>=|=)(.+)", tok.text)
                if m:
                    expect = (m.group(1), m.group(2))
                elif "=" in tok.text:
                    k, v = tok.text.split("=", 1)
                    opts[k] = v
                else:
                    positional.append(tok.text)
            if positional:
                opts["args"] = ",".join(positional)
            out.append(Directive(kind.text, opts, expect, n, line.strip()))
        return out


def _partition_top(text, sep):
    parts = _split_top(text, sep)
    if len(parts) == 1:
        return text, "", ""
    return parts[0], sep, sep.join(parts[1:])


def parse_scenario(text: str, validate_task: bool = True) -> Scenario:
    """Parse scenario text into a task, its strategies, variants and checks."""
    p = _Parser(text)
    p.split_sections()
    p.parse_meta()
    p.parse_points()
    p.parse_regions()
    p.parse_inputs()
    outputs = p.parse_outputs(p.sections["outputs"])
    predicate = p.parse_predicate()
    constants = {**p.params, **p.points}
    name = p.meta.get("name", "scenario")

    def build(outs, tag=""):
        task = TaskSpec(name + tag, p.dim, p.inputs, outs, predicate, p.regions, p.groups, constants,
                        p.meta.get("caption", ""))
        if validate_task:
            diags = validate(task)
            if diags:
                line = p.sections["outputs"][0][0] if p.sections["outputs"] else 1
                raise ScenarioError(line, 1, "; ".join(str(d) for d in diags))
        return task

    try:
        task = build(outputs)
    except TaskError as exc:
        raise ScenarioError(1, 1, str(exc)) from None
    variants = {}
    strategies: dict[str, Any] = {}
    for key, lines in p.sections.items():
        if isinstance(key, tuple) and key[0] == "variant":
            variants[key[1]] = build(p.parse_outputs(lines), f"/{key[1]}")
        elif isinstance(key, tuple) and key[0] == "strategy":
            if not lines:
                raise ScenarioError(1, 1, f"strategy {key[1]!r} is empty")
            strategies[key[1]] = p.parse_strategy(key[1], lines)
    try:
        seed = int(p.meta.get("seed", 0))
    except ValueError:
        raise ScenarioError(1, 1, "seed must be an integer") from None
    return Scenario(name, task, strategies, p.parse_directives(), variants, seed, p.meta.get("caption", ""))


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())
