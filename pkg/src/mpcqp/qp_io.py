"""Text interchange format for the three QP types.

Layout (version 1): a header line ``mpcqp_qp 1 <dense|ocp|tree>``, dimension
lines, then one section per stage/node with every catalog field in a fixed
order.  A field is its name on one line followed by its values: one line per
matrix row (row-major), a single line for vectors and index sets, nothing
for empty matrices.  Floats are written with ``repr`` (shortest exact
round-trip); infinities appear as ``inf``/``-inf``.

    mpcqp_qp 1 ocp
    N 2
    nx 2 2 2
    nu 1 1 0
    nb 3 3 2
    ng 0 0 0
    ns 0 0 0
    stage 0
    Q
    1.0 0.0
    0.0 1.0
    ...

Stage sections list the cost, constraint and soft fields first and close
with the dynamics blocks A B b (absent for the terminal stage / the root
node).  Tree files add a ``parents`` line; dense files replace the stage
sections with one flat field list.

Reading is strict: unexpected field names, malformed numbers, wrong counts
and truncated files raise :class:`ParseError` with the offending line
number; an unsupported version raises :class:`VersionMismatch`.  A write
followed by a read reproduces every field bit-exactly.
"""

from __future__ import annotations

import numpy as np

from .errors import ParseError, VersionMismatch
from .qp_data import DenseQp, OcpQp, OcpQpDim, TreeOcpQp, TreeOcpQpDim

__all__ = ["qp_read", "qp_write"]

_MAGIC = "mpcqp_qp"
_VERSION = 1

_STAGE_ORDER = [
    "Q", "S", "R", "q", "r",
    "idxb", "lb", "ub",
    "C", "D", "lg", "ug",
    "idxs", "Zl", "Zu", "zl", "zu", "sl_lb", "su_lb",
    "maskl", "masku",
]
_DYN_ORDER = ["A", "B", "b"]
_DENSE_ORDER = [
    "H", "g", "A", "b",
    "idxb", "lb", "ub",
    "C", "lg", "ug",
    "idxs", "Zl", "Zu", "zl", "zu", "sl_lb", "su_lb",
    "maskl", "masku",
]


def _fmt(x):
    return repr(float(x))


def _write_array(out, name, arr):
    out.append(name)
    arr = np.asarray(arr)
    if arr.ndim == 1:
        if np.issubdtype(arr.dtype, np.integer):
            out.append(" ".join(str(int(v)) for v in arr))
        else:
            out.append(" ".join(_fmt(v) for v in arr))
    else:
        for row in arr:
            out.append(" ".join(_fmt(v) for v in row))


class _Reader:
    def __init__(self, text):
        self.lines = text.splitlines()
        self.pos = 0

    @property
    def lineno(self):
        return self.pos  # 1-based number of the line just consumed

    def next(self):
        if self.pos >= len(self.lines):
            raise ParseError("unexpected end of file", line=len(self.lines))
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def expect(self, token):
        line = self.next().strip()
        if line != token:
            raise ParseError(
                f"expected field '{token}', found '{line}'", line=self.pos
            )

    def keyword_ints(self, key, count):
        toks = self.next().split()
        if not toks or toks[0] != key:
            raise ParseError(
                f"expected '{key}' line, found "
                f"'{' '.join(toks) if toks else ''}'", line=self.pos
            )
        if len(toks) != count + 1:
            raise ParseError(
                f"'{key}' expects {count} integers, found {len(toks) - 1}",
                line=self.pos,
            )
        try:
            return [int(t) for t in toks[1:]]
        except ValueError as exc:
            raise ParseError(f"bad integer in '{key}' line: {exc}", line=self.pos)

    def floats(self, count):
        toks = self.next().split()
        if len(toks) != count:
            raise ParseError(
                f"expected {count} numbers, found {len(toks)}", line=self.pos
            )
        try:
            return np.array([float(t) for t in toks])
        except ValueError as exc:
            raise ParseError(f"bad number: {exc}", line=self.pos)

    def ints(self, count):
        toks = self.next().split()
        if len(toks) != count:
            raise ParseError(
                f"expected {count} integers, found {len(toks)}", line=self.pos
            )
        try:
            return np.array([int(t) for t in toks], dtype=int)
        except ValueError as exc:
            raise ParseError(f"bad integer: {exc}", line=self.pos)

    def matrix(self, rows, cols):
        return np.array([self.floats(cols) for _ in range(rows)]).reshape(rows, cols)

    def done(self):
        while self.pos < len(self.lines):
            if self.lines[self.pos].strip():
                raise ParseError("trailing content", line=self.pos + 1)
            self.pos += 1


def _field_shape(name, dim, n, kind_tree=False):
    d = dim
    if name == "Q":
        return (d.nx[n], d.nx[n])
    if name == "S":
        return (d.nu[n], d.nx[n])
    if name == "R":
        return (d.nu[n], d.nu[n])
    if name == "q":
        return (d.nx[n],)
    if name == "r":
        return (d.nu[n],)
    if name in ("idxb", "lb", "ub"):
        return (d.nb[n],)
    if name == "C":
        return (d.ng[n], d.nx[n])
    if name == "D":
        return (d.ng[n], d.nu[n])
    if name in ("lg", "ug"):
        return (d.ng[n],)
    if name in ("idxs", "Zl", "Zu", "zl", "zu", "sl_lb", "su_lb"):
        return (d.ns[n],)
    if name in ("maskl", "masku"):
        return (d.nb[n] + d.ng[n],)
    raise AssertionError(name)


def _write_stage_fields(out, qp, n):
    for name in _STAGE_ORDER:
        _write_array(out, name, qp.get_field(name, n))


def _read_stage_fields(rd, qp, dim, n):
    for name in _STAGE_ORDER:
        shape = _field_shape(name, dim, n)
        rd.expect(name)
        if name in ("idxb", "idxs"):
            val = rd.ints(shape[0])
        elif len(shape) == 1:
            val = rd.floats(shape[0])
        else:
            val = rd.matrix(*shape)
        qp.set_field(name, n, val)


def qp_write(path, qp):
    """Serialize a QP to the documented text format (overwrites ``path``)."""
    out = []
    if isinstance(qp, DenseQp):
        out.append(f"{_MAGIC} {_VERSION} dense")
        out.append(
            f"dims {qp.nv} {qp.ne} {qp.nb} {qp.ng} {qp.ns}"
        )
        for name in _DENSE_ORDER:
            _write_array(out, name, qp.get_field(name))
    elif isinstance(qp, OcpQp):
        d = qp.dim
        out.append(f"{_MAGIC} {_VERSION} ocp")
        out.append(f"N {d.N}")
        for key in ("nx", "nu", "nb", "ng", "ns"):
            out.append(key + " " + " ".join(str(int(v)) for v in getattr(d, key)))
        for n in range(d.N + 1):
            out.append(f"stage {n}")
            _write_stage_fields(out, qp, n)
            if n < d.N:
                for name in _DYN_ORDER:
                    _write_array(out, name, qp.get_field(name, n))
    elif isinstance(qp, TreeOcpQp):
        d = qp.dim
        out.append(f"{_MAGIC} {_VERSION} tree")
        out.append(f"nodes {d.n_node}")
        out.append("parents " + " ".join(str(int(v)) for v in d.parents))
        for key in ("nx", "nu", "nb", "ng", "ns"):
            out.append(key + " " + " ".join(str(int(v)) for v in getattr(d, key)))
        for m in range(d.n_node):
            out.append(f"node {m}")
            _write_stage_fields(out, qp, m)
            if m >= 1:
                for name in _DYN_ORDER:
                    _write_array(out, name, qp.get_field(name, m))
    else:
        raise TypeError(f"not a QP container: {type(qp)!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")


def qp_read(path):
    """Parse a QP file; the returned type follows the header."""
    with open(path) as fh:
        rd = _Reader(fh.read())
    head = rd.next().split()
    if len(head) != 3 or head[0] != _MAGIC:
        raise ParseError("not a QP file (bad magic line)", line=1)
    if head[1] != str(_VERSION):
        raise VersionMismatch(
            f"unsupported format version '{head[1]}'", line=1
        )
    kind = head[2]
    if kind == "dense":
        nv, ne, nb, ng, ns = rd.keyword_ints("dims", 5)
        qp = DenseQp(nv, ne, nb, ng, ns)
        for name in _DENSE_ORDER:
            rd.expect(name)
            shape = {
                "H": (nv, nv), "g": (nv,), "A": (ne, nv), "b": (ne,),
                "idxb": (nb,), "lb": (nb,), "ub": (nb,),
                "C": (ng, nv), "lg": (ng,), "ug": (ng,),
                "idxs": (ns,), "Zl": (ns,), "Zu": (ns,), "zl": (ns,),
                "zu": (ns,), "sl_lb": (ns,), "su_lb": (ns,),
                "maskl": (nb + ng,), "masku": (nb + ng,),
            }[name]
            if name in ("idxb", "idxs"):
                val = rd.ints(shape[0])
            elif len(shape) == 1:
                val = rd.floats(shape[0])
            else:
                val = rd.matrix(*shape)
            qp.set_field(name, val)
        rd.done()
        return qp
    if kind == "ocp":
        (N,) = rd.keyword_ints("N", 1)
        counts = {k: rd.keyword_ints(k, N + 1) for k in ("nx", "nu", "nb", "ng", "ns")}
        dim = OcpQpDim(N, **counts)
        qp = OcpQp(dim)
        for n in range(N + 1):
            rd.expect(f"stage {n}")
            _read_stage_fields(rd, qp, dim, n)
            if n < N:
                rd.expect("A")
                qp.set_field("A", n, rd.matrix(dim.nx[n + 1], dim.nx[n]))
                rd.expect("B")
                qp.set_field("B", n, rd.matrix(dim.nx[n + 1], dim.nu[n]))
                rd.expect("b")
                qp.set_field("b", n, rd.floats(dim.nx[n + 1]))
        rd.done()
        return qp
    if kind == "tree":
        (n_node,) = rd.keyword_ints("nodes", 1)
        parents = rd.keyword_ints("parents", n_node)
        counts = {k: rd.keyword_ints(k, n_node) for k in ("nx", "nu", "nb", "ng", "ns")}
        dim = TreeOcpQpDim(parents, **counts)
        qp = TreeOcpQp(dim)
        for m in range(n_node):
            rd.expect(f"node {m}")
            _read_stage_fields(rd, qp, dim, m)
            if m >= 1:
                p = dim.parents[m]
                rd.expect("A")
                qp.set_field("A", m, rd.matrix(dim.nx[m], dim.nx[p]))
                rd.expect("B")
                qp.set_field("B", m, rd.matrix(dim.nx[m], dim.nu[p]))
                rd.expect("b")
                qp.set_field("b", m, rd.floats(dim.nx[m]))
        rd.done()
        return qp
    raise ParseError(f"unknown QP kind '{kind}'", line=1)
