"""Plain-text file formats.

Every format starts with a header line of ``key=value`` fields; blank lines
and lines starting with ``#`` are ignored.  Numbers are written exactly
(``p/2^k`` for dyadic rationals, ``p/q`` otherwise) so that
``parse(format(x)) == x`` always holds.

* set:         ``rank=k rows=R [weights=...]`` then ``column,row`` per cell
* permutation: ``rank=k rows=R kind=square|discrete [weights=...]`` then either
  ``c,r -> c,r`` per cell or cycles of 1-based row-major labels ``(1 11 5 3)(13 15)``
* function:    ``rank=k rows=R kind=... weights=...`` then one value per cell,
  row-major
* deviation sequence: CSV ``n,deviation,cesaro,deviation_sq_exact``
"""

from __future__ import annotations

import csv
import io as _io
import re
from fractions import Fraction

from .dyadic import format_exact, parse_exact
from .errors import DyadextError, ParseError
from .grid import DyadicSet, GridGeometry
from .mixing import DeviationSequence, GridFunction, render_root
from .perms import CellPermutation

__all__ = [
    "format_geometry",
    "parse_geometry",
    "format_set",
    "parse_set",
    "format_permutation",
    "parse_permutation",
    "format_function",
    "parse_function",
    "format_sequence",
    "parse_sequence",
    "read_text",
    "write_text",
]

_CYCLE = re.compile(r"\(([^()]*)\)")
_ARROW = re.compile(r"^\s*(\d+)\s*,\s*(\d+)\s*->\s*(\d+)\s*,\s*(\d+)\s*$")


def _lines(text):
    out = []
    for raw in text.splitlines():
        line = raw.strip()
        if line and not line.startswith("#"):
            out.append(line)
    if not out:
        raise ParseError("empty input")
    return out


def format_geometry(g, with_kind=True):
    parts = [f"rank={g.rank}", f"rows={g.rows}"]
    if with_kind:
        parts.append(f"kind={g.kind}")
    if g.kind == "discrete":
        parts.append("weights=" + ",".join(format_exact(w) for w in g.weights))
    return " ".join(parts)


def parse_geometry(header):
    fields = {}
    for token in header.split():
        key, sep, value = token.partition("=")
        if not sep:
            raise ParseError(f"header field {token!r} is not key=value")
        fields[key] = value
    try:
        rank = int(fields["rank"])
        rows = int(fields["rows"])
        kind = fields.get("kind", "discrete" if "weights" in fields else "square")
        if kind == "square":
            g = GridGeometry.square(rank)
            if "weights" in fields:
                given = tuple(parse_exact(w) for w in fields["weights"].split(","))
                if given != g.weights:
                    raise ParseError("square grid weights must all be 2^-rank")
        elif kind == "discrete":
            g = GridGeometry.discrete(rank, [parse_exact(w) for w in fields["weights"].split(",")])
        else:
            raise ParseError(f"unknown kind {kind!r}")
    except KeyError as exc:
        raise ParseError(f"header lacks field {exc.args[0]!r}") from exc
    except ParseError:
        raise
    except (ValueError, DyadextError) as exc:
        raise ParseError(f"bad header {header!r}: {exc}") from exc
    if g.rows != rows:
        raise ParseError(f"header says rows={rows} but the grid has {g.rows}")
    return g


def _pair(text, what):
    try:
        a, b = text.split(",")
        return int(a), int(b)
    except ValueError as exc:
        raise ParseError(f"bad {what} {text!r}") from exc


def format_set(dset):
    g = dset.geometry
    lines = [format_geometry(g, with_kind=False)]
    lines += [f"{c.column},{c.row}" for c in dset.cells()]
    return "\n".join(lines) + "\n"


def parse_set(text):
    lines = _lines(text)
    g = parse_geometry(lines[0])
    cells = [_pair(line, "cell") for line in lines[1:]]
    try:
        return DyadicSet.from_cells(g, cells)
    except DyadextError as exc:
        raise ParseError(str(exc)) from exc


def format_permutation(p, cycles=False):
    g = p.geometry
    lines = [format_geometry(g)]
    if cycles:
        body = "".join(
            "(" + " ".join(str(x + 1) for x in c) + ")" for c in p.cycles() if len(c) > 1
        )
        lines.append(body or "()")
    else:
        for i, j in enumerate(p.image):
            a, b = g.cell_at(i), g.cell_at(int(j))
            lines.append(f"{a.column},{a.row} -> {b.column},{b.row}")
    return "\n".join(lines) + "\n"


def parse_permutation(text):
    lines = _lines(text)
    g = parse_geometry(lines[0])
    body = lines[1:]
    try:
        if body and body[0].startswith("("):
            joined = "".join(body)
            if _CYCLE.sub("", joined).strip():
                raise ParseError("text outside parentheses in cycle notation")
            cycles = []
            for group in _CYCLE.findall(joined):
                labels = group.replace(",", " ").split()
                if labels:
                    cycles.append([int(x) for x in labels])
            return CellPermutation.from_cycles(g, cycles)
        mapping = {}
        for line in body:
            m = _ARROW.match(line)
            if not m:
                raise ParseError(f"bad mapping line {line!r}")
            src = (int(m.group(1)), int(m.group(2)))
            if src in mapping:
                raise ParseError(f"cell {src} mapped twice")
            mapping[src] = (int(m.group(3)), int(m.group(4)))
        return CellPermutation.from_mapping(g, mapping)
    except ParseError:
        raise
    except (ValueError, DyadextError) as exc:
        raise ParseError(str(exc)) from exc


def format_function(f):
    g = f.geometry
    header = f"rank={g.rank} rows={g.rows} kind={g.kind} weights=" + ",".join(
        format_exact(w) for w in g.weights
    )
    lines = [header] + [format_exact(v) for v in f.values.reshape(-1)]
    return "\n".join(lines) + "\n"


def parse_function(text):
    lines = _lines(text)
    g = parse_geometry(lines[0])
    try:
        values = [parse_exact(v) for v in lines[1:]]
    except ValueError as exc:
        raise ParseError(str(exc)) from exc
    if len(values) != g.ncells:
        raise ParseError(f"expected {g.ncells} values, got {len(values)}")
    return GridFunction(g, values)


SEQUENCE_FIELDS = ["n", "deviation", "cesaro", "deviation_sq_exact"]


def format_sequence(seq):
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SEQUENCE_FIELDS)
    for (n, sq), ces in zip(seq.terms, seq.cesaro):
        w.writerow([n, render_root(sq), f"{ces:.12g}", format_exact(sq)])
    return buf.getvalue()


def parse_sequence(text):
    reader = csv.DictReader(_io.StringIO(text))
    if reader.fieldnames != SEQUENCE_FIELDS:
        raise ParseError(f"expected columns {SEQUENCE_FIELDS}")
    terms = []
    try:
        for row in reader:
            terms.append((int(row["n"]), Fraction(parse_exact(row["deviation_sq_exact"]))))
    except ValueError as exc:
        raise ParseError(str(exc)) from exc
    return DeviationSequence(terms)


def read_text(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from exc


def write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)

