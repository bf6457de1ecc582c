"""Problem containers for the three supported QP types.

Three convex QP formulations share one constraint vocabulary:

* ``DenseQp``: min over v of ``1/2 v'Hv + g'v`` subject to ``Av = b``, two-sided
  box constraints on selected components of v, two-sided general constraints
  ``lg <= Cv <= ug``, and optional soft constraints.
* ``OcpQp``: stage-wise cost ``1/2 [u;x]' [R S; S' Q] [u;x] + [r;q]'[u;x]``
  coupled by dynamics ``x[n+1] = A[n] x[n] + B[n] u[n] + b[n]``, with per-stage
  box constraints on components of ``(u, x)`` and general constraints
  ``lg <= D u + C x <= ug``.
* ``TreeOcpQp``: the same stage data attached to the nodes of a rooted tree,
  with dynamics attached to each non-root node m linking it to its parent n:
  ``x[m] = A[m] x[n] + B[m] u[n] + b[m]``.

Soft constraints: a subset ``idxs`` of the ``nb + ng`` constraint rows is
relaxed by lower/upper slack variables with diagonal quadratic penalties
``Zl, Zu``, linear penalties ``zl, zu`` and slack lower bounds
``sl_lb, su_lb``.  Slacks never enter the dynamics.

Every constraint row is two-sided.  Per-row masks ``maskl``/``masku``
activate or deactivate the lower/upper side individually; additionally a side
whose bound is infinite is treated as deactivated, so one-sided constraints
need no special representation.  Deactivated sides are excluded from
multiplier updates, residuals and the duality measure.

All data is accessed through ``set_field``/``get_field`` with the documented
field catalog; a set followed by a get returns exactly the stored values.
Internal storage is private and may differ from the accessor layout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    IndexOutOfRange,
    InvalidDim,
    UnknownField,
)

__all__ = [
    "OcpQpDim",
    "TreeOcpQpDim",
    "DenseQp",
    "OcpQp",
    "TreeOcpQp",
    "Violation",
    "validate",
]


def _intvec(values, name):
    arr = np.asarray(values, dtype=int)
    if arr.ndim != 1:
        raise InvalidDim(f"{name} must be a 1-d integer sequence")
    if np.any(arr < 0):
        raise InvalidDim(f"{name} entries must be nonnegative")
    return arr


@dataclass(frozen=True)
class OcpQpDim:
    """Stage-wise dimensions of an optimal-control QP with horizon N.

    There are N + 1 stages (0..N); dynamics link consecutive stages, so there
    are N dynamics blocks.  ``nb[n] <= nu[n] + nx[n]`` box rows select
    components of the stacked stage variable ``(u[n], x[n])`` (inputs first);
    ``ns[n] <= nb[n] + ng[n]`` rows are softened.
    """

    N: int
    nx: np.ndarray
    nu: np.ndarray
    nb: np.ndarray
    ng: np.ndarray
    ns: np.ndarray

    def __init__(self, N, nx, nu, nb=None, ng=None, ns=None):
        if N < 0:
            raise InvalidDim("horizon N must be >= 0")
        object.__setattr__(self, "N", int(N))
        n_stage = self.N + 1

        def prep(v, name, default=0):
            if v is None:
                v = [default] * n_stage
            arr = _intvec(v, name)
            if arr.shape[0] != n_stage:
                raise InvalidDim(f"{name} must have N+1 = {n_stage} entries")
            return arr

        object.__setattr__(self, "nx", prep(nx, "nx"))
        object.__setattr__(self, "nu", prep(nu, "nu"))
        object.__setattr__(self, "nb", prep(nb, "nb"))
        object.__setattr__(self, "ng", prep(ng, "ng"))
        object.__setattr__(self, "ns", prep(ns, "ns"))
        for n in range(n_stage):
            if self.nb[n] > self.nu[n] + self.nx[n]:
                raise InvalidDim(
                    f"stage {n}: nb = {self.nb[n]} exceeds nu + nx = "
                    f"{self.nu[n] + self.nx[n]}"
                )
            if self.ns[n] > self.nb[n] + self.ng[n]:
                raise InvalidDim(
                    f"stage {n}: ns = {self.ns[n]} exceeds nb + ng = "
                    f"{self.nb[n] + self.ng[n]}"
                )


@dataclass(frozen=True)
class TreeOcpQpDim:
    """Node-wise dimensions of a tree-structured optimal-control QP.

    ``parents[m]`` is the parent index of node m, with ``parents[0] == -1``
    for the root; parents must precede children (``0 <= parents[m] < m``), so
    the stored node order is a topological order.
    """

    parents: np.ndarray
    nx: np.ndarray
    nu: np.ndarray
    nb: np.ndarray
    ng: np.ndarray
    ns: np.ndarray

    def __init__(self, parents, nx, nu, nb=None, ng=None, ns=None):
        par = np.asarray(parents, dtype=int)
        if par.ndim != 1 or par.shape[0] < 1:
            raise InvalidDim("parents must be a nonempty 1-d integer sequence")
        if par[0] != -1:
            raise InvalidDim("root parent index must be -1")
        for m in range(1, par.shape[0]):
            if not 0 <= par[m] < m:
                raise InvalidDim(
                    f"node {m}: parent {par[m]} must satisfy 0 <= parent < {m}"
                )
        object.__setattr__(self, "parents", par)
        n_node = par.shape[0]

        def prep(v, name, default=0):
            if v is None:
                v = [default] * n_node
            arr = _intvec(v, name)
            if arr.shape[0] != n_node:
                raise InvalidDim(f"{name} must have one entry per node ({n_node})")
            return arr

        object.__setattr__(self, "nx", prep(nx, "nx"))
        object.__setattr__(self, "nu", prep(nu, "nu"))
        object.__setattr__(self, "nb", prep(nb, "nb"))
        object.__setattr__(self, "ng", prep(ng, "ng"))
        object.__setattr__(self, "ns", prep(ns, "ns"))
        for m in range(n_node):
            if self.nb[m] > self.nu[m] + self.nx[m]:
                raise InvalidDim(f"node {m}: nb exceeds nu + nx")
            if self.ns[m] > self.nb[m] + self.ng[m]:
                raise InvalidDim(f"node {m}: ns exceeds nb + ng")

    @property
    def n_node(self):
        return self.parents.shape[0]

    def children(self):
        """Child index lists per node, in node-index order."""
        out = [[] for _ in range(self.n_node)]
        for m in range(1, self.n_node):
            out[self.parents[m]].append(m)
        return out


# --------------------------------------------------------------------------
# field catalog machinery
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class _Field:
    attr: str
    shape: object          # callable (qp, n) -> tuple
    dtype: type = float
    dyn: bool = False      # indexed by dynamics block / non-root node


def _check_value(name, value, shape, dtype):
    arr = np.array(value, dtype=dtype)
    if arr.shape != shape:
        raise DimensionMismatch(
            f"field '{name}': expected shape {shape}, got {arr.shape}"
        )
    return arr


class _FieldAccess:
    """set_field/get_field over a declarative catalog (mixin)."""

    _FIELDS: dict = {}
    _VIRTUAL: dict = {}

    def _resolve(self, name, n):
        try:
            f = self._FIELDS[name]
        except KeyError:
            raise UnknownField(name) from None
        self._check_stage(name, n, f.dyn)
        return f

    def _bump(self):
        self._rev += 1

    def field_names(self):
        return sorted(set(self._FIELDS) | set(self._VIRTUAL))


# --------------------------------------------------------------------------
# stage data shared by OCP and tree nodes
# --------------------------------------------------------------------------

def _zero_stage(nx, nu, nb, ng, ns):
    inf = np.inf
    return {
        "Q": np.zeros((nx, nx)),
        "S": np.zeros((nu, nx)),
        "R": np.zeros((nu, nu)),
        "q": np.zeros(nx),
        "r": np.zeros(nu),
        "idxb": np.arange(nb, dtype=int),
        "lb": np.full(nb, -inf),
        "ub": np.full(nb, inf),
        "C": np.zeros((ng, nx)),
        "D": np.zeros((ng, nu)),
        "lg": np.full(ng, -inf),
        "ug": np.full(ng, inf),
        "idxs": np.arange(ns, dtype=int),
        "Zl": np.zeros(ns),
        "Zu": np.zeros(ns),
        "zl": np.zeros(ns),
        "zu": np.zeros(ns),
        "sl_lb": np.zeros(ns),
        "su_lb": np.zeros(ns),
        "maskl": np.ones(nb + ng),
        "masku": np.ones(nb + ng),
    }


_STAGE_FIELDS = {
    "Q": _Field("Q", lambda d, n: (d.nx[n], d.nx[n])),
    "S": _Field("S", lambda d, n: (d.nu[n], d.nx[n])),
    "R": _Field("R", lambda d, n: (d.nu[n], d.nu[n])),
    "q": _Field("q", lambda d, n: (d.nx[n],)),
    "r": _Field("r", lambda d, n: (d.nu[n],)),
    "idxb": _Field("idxb", lambda d, n: (d.nb[n],), int),
    "lb": _Field("lb", lambda d, n: (d.nb[n],)),
    "ub": _Field("ub", lambda d, n: (d.nb[n],)),
    "C": _Field("C", lambda d, n: (d.ng[n], d.nx[n])),
    "D": _Field("D", lambda d, n: (d.ng[n], d.nu[n])),
    "lg": _Field("lg", lambda d, n: (d.ng[n],)),
    "ug": _Field("ug", lambda d, n: (d.ng[n],)),
    "idxs": _Field("idxs", lambda d, n: (d.ns[n],), int),
    "Zl": _Field("Zl", lambda d, n: (d.ns[n],)),
    "Zu": _Field("Zu", lambda d, n: (d.ns[n],)),
    "zl": _Field("zl", lambda d, n: (d.ns[n],)),
    "zu": _Field("zu", lambda d, n: (d.ns[n],)),
    "sl_lb": _Field("sl_lb", lambda d, n: (d.ns[n],)),
    "su_lb": _Field("su_lb", lambda d, n: (d.ns[n],)),
    "maskl": _Field("maskl", lambda d, n: (d.nb[n] + d.ng[n],)),
    "masku": _Field("masku", lambda d, n: (d.nb[n] + d.ng[n],)),
}

# bounds restricted to input / state box rows, derived from idxb
_STAGE_VIRTUAL = {"lbu", "ubu", "lbx", "ubx"}


class _StageQpBase(_FieldAccess):
    """Common stage-indexed accessors for OcpQp and TreeOcpQp."""

    def _box_split(self, n):
        idxb = self._stages[n]["idxb"]
        return idxb < self.dim.nu[n]

    def set_field(self, name, stage, value):
        """Store ``value`` for ``name`` at the given stage/node index."""
        if name in _STAGE_VIRTUAL:
            self._check_stage(name, stage, dyn=False)
            is_u = self._box_split(stage)
            sel = is_u if name[-1] == "u" else ~is_u
            dst = "lb" if name[0] == "l" else "ub"
            arr = _check_value(name, value, (int(np.sum(sel)),), float)
            self._stages[stage][dst] = self._stages[stage][dst].copy()
            self._stages[stage][dst][sel] = arr
            self._bump()
            return
        f = self._resolve(name, stage)
        arr = _check_value(name, value, f.shape(self.dim, stage), f.dtype)
        if f.dyn:
            self._dyn[stage][f.attr] = arr
        else:
            self._stages[stage][f.attr] = arr
        self._bump()

    def get_field(self, name, stage):
        """Return a copy of the stored values for ``name`` at a stage/node."""
        if name in _STAGE_VIRTUAL:
            self._check_stage(name, stage, dyn=False)
            is_u = self._box_split(stage)
            sel = is_u if name[-1] == "u" else ~is_u
            src = "lb" if name[0] == "l" else "ub"
            return self._stages[stage][src][sel].copy()
        f = self._resolve(name, stage)
        store = self._dyn[stage] if f.dyn else self._stages[stage]
        return store[f.attr].copy()


class OcpQp(_StageQpBase):
    """Optimal-control QP over stages 0..N, zero-initialized.

    Freshly created problems have zero matrices, infinite (inactive) bounds,
    all-one masks, ``idxb = 0..nb-1``, ``idxs = 0..ns-1`` and zero slack
    lower bounds.

    Stage-indexed fields: Q S R q r idxb lb ub C D lg ug idxs Zl Zu zl zu
    sl_lb su_lb maskl masku (stages 0..N) and A B b (dynamics blocks 0..N-1,
    where ``A[n]`` maps ``x[n]`` to ``x[n+1]``).  Virtual fields lbu/ubu and
    lbx/ubx address the input-box / state-box subsets of lb/ub.
    """

    _FIELDS = dict(_STAGE_FIELDS)
    _FIELDS.update(
        {
            "A": _Field("A", lambda d, n: (d.nx[n + 1], d.nx[n]), float, dyn=True),
            "B": _Field("B", lambda d, n: (d.nx[n + 1], d.nu[n]), float, dyn=True),
            "b": _Field("b", lambda d, n: (d.nx[n + 1],), float, dyn=True),
        }
    )
    _VIRTUAL = {v: None for v in _STAGE_VIRTUAL}
    kind = "ocp"

    def __init__(self, dim: OcpQpDim):
        if not isinstance(dim, OcpQpDim):
            raise InvalidDim("OcpQp requires an OcpQpDim")
        self.dim = dim
        d = dim
        self._stages = [
            _zero_stage(d.nx[n], d.nu[n], d.nb[n], d.ng[n], d.ns[n])
            for n in range(d.N + 1)
        ]
        self._dyn = [
            {
                "A": np.zeros((d.nx[n + 1], d.nx[n])),
                "B": np.zeros((d.nx[n + 1], d.nu[n])),
                "b": np.zeros(d.nx[n + 1]),
            }
            for n in range(d.N)
        ]
        self._rev = 0

    def _check_stage(self, name, n, dyn):
        hi = self.dim.N - 1 if dyn else self.dim.N
        if not 0 <= n <= hi:
            raise IndexOutOfRange(
                f"field '{name}': stage {n} outside 0..{hi}"
            )


class TreeOcpQp(_StageQpBase):
    """Tree-structured optimal-control QP, zero-initialized.

    Node-indexed fields match :class:`OcpQp` stages; the dynamics fields
    A B b are indexed by the *child* node m >= 1 and describe
    ``x[m] = A[m] x[parent(m)] + B[m] u[parent(m)] + b[m]``.
    """

    _FIELDS = dict(_STAGE_FIELDS)
    _FIELDS.update(
        {
            "A": _Field(
                "A",
                lambda d, m: (d.nx[m], d.nx[d.parents[m]]),
                float,
                dyn=True,
            ),
            "B": _Field(
                "B",
                lambda d, m: (d.nx[m], d.nu[d.parents[m]]),
                float,
                dyn=True,
            ),
            "b": _Field("b", lambda d, m: (d.nx[m],), float, dyn=True),
        }
    )
    _VIRTUAL = {v: None for v in _STAGE_VIRTUAL}
    kind = "tree"

    def __init__(self, dim: TreeOcpQpDim):
        if not isinstance(dim, TreeOcpQpDim):
            raise InvalidDim("TreeOcpQp requires a TreeOcpQpDim")
        self.dim = dim
        d = dim
        self._stages = [
            _zero_stage(d.nx[m], d.nu[m], d.nb[m], d.ng[m], d.ns[m])
            for m in range(d.n_node)
        ]
        # dynamics data per non-root node; slot 0 unused
        self._dyn = [None]
        for m in range(1, d.n_node):
            p = d.parents[m]
            self._dyn.append(
                {
                    "A": np.zeros((d.nx[m], d.nx[p])),
                    "B": np.zeros((d.nx[m], d.nu[p])),
                    "b": np.zeros(d.nx[m]),
                }
            )
        self._rev = 0

    def _check_stage(self, name, m, dyn):
        lo = 1 if dyn else 0
        if not lo <= m < self.dim.n_node:
            raise IndexOutOfRange(
                f"field '{name}': node {m} outside {lo}..{self.dim.n_node - 1}"
            )


class DenseQp(_FieldAccess):
    """Dense QP over nv variables, zero-initialized.

    Fields: H g A b idxb lb ub C lg ug idxs Zl Zu zl zu sl_lb su_lb maskl
    masku.  ``idxb`` selects the box-constrained components of v; masks cover
    the nb + ng constraint rows (box rows first).
    """

    kind = "dense"

    _FIELDS = {
        "H": _Field("H", lambda d, n: (d.nv, d.nv)),
        "g": _Field("g", lambda d, n: (d.nv,)),
        "A": _Field("A", lambda d, n: (d.ne, d.nv)),
        "b": _Field("b", lambda d, n: (d.ne,)),
        "idxb": _Field("idxb", lambda d, n: (d.nb,), int),
        "lb": _Field("lb", lambda d, n: (d.nb,)),
        "ub": _Field("ub", lambda d, n: (d.nb,)),
        "C": _Field("C", lambda d, n: (d.ng, d.nv)),
        "lg": _Field("lg", lambda d, n: (d.ng,)),
        "ug": _Field("ug", lambda d, n: (d.ng,)),
        "idxs": _Field("idxs", lambda d, n: (d.ns,), int),
        "Zl": _Field("Zl", lambda d, n: (d.ns,)),
        "Zu": _Field("Zu", lambda d, n: (d.ns,)),
        "zl": _Field("zl", lambda d, n: (d.ns,)),
        "zu": _Field("zu", lambda d, n: (d.ns,)),
        "sl_lb": _Field("sl_lb", lambda d, n: (d.ns,)),
        "su_lb": _Field("su_lb", lambda d, n: (d.ns,)),
        "maskl": _Field("maskl", lambda d, n: (d.nb + d.ng,)),
        "masku": _Field("masku", lambda d, n: (d.nb + d.ng,)),
    }

    def __init__(self, nv, ne=0, nb=0, ng=0, ns=0):
        for name, val in (("nv", nv), ("ne", ne), ("nb", nb), ("ng", ng), ("ns", ns)):
            if val < 0:
                raise InvalidDim(f"{name} must be >= 0")
        if nb > nv:
            raise InvalidDim(f"nb = {nb} exceeds nv = {nv}")
        if ns > nb + ng:
            raise InvalidDim(f"ns = {ns} exceeds nb + ng = {nb + ng}")
        self.nv, self.ne, self.nb, self.ng, self.ns = nv, ne, nb, ng, ns
        inf = np.inf
        self._data = {
            "H": np.zeros((nv, nv)),
            "g": np.zeros(nv),
            "A": np.zeros((ne, nv)),
            "b": np.zeros(ne),
            "idxb": np.arange(nb, dtype=int),
            "lb": np.full(nb, -inf),
            "ub": np.full(nb, inf),
            "C": np.zeros((ng, nv)),
            "lg": np.full(ng, -inf),
            "ug": np.full(ng, inf),
            "idxs": np.arange(ns, dtype=int),
            "Zl": np.zeros(ns),
            "Zu": np.zeros(ns),
            "zl": np.zeros(ns),
            "zu": np.zeros(ns),
            "sl_lb": np.zeros(ns),
            "su_lb": np.zeros(ns),
            "maskl": np.ones(nb + ng),
            "masku": np.ones(nb + ng),
        }
        self._rev = 0

    def _check_stage(self, name, n, dyn):
        if n is not None:
            raise IndexOutOfRange(f"dense QP field '{name}' takes no stage index")

    def set_field(self, name, value):
        f = self._resolve(name, None)
        self._data[f.attr] = _check_value(name, value, f.shape(self, None), f.dtype)
        self._bump()

    def get_field(self, name):
        f = self._resolve(name, None)
        return self._data[f.attr].copy()


# --------------------------------------------------------------------------
# validation
# --------------------------------------------------------------------------

@dataclass
class Violation:
    """One diagnostic from :func:`validate`; severity is 'error' or 'warning'."""

    field: str
    stage: object
    message: str
    severity: str = "error"

    def __str__(self):
        where = "" if self.stage is None else f" [stage {self.stage}]"
        return f"{self.severity}: {self.field}{where}: {self.message}"


def _sym_violation(M, name, stage, out):
    if M.shape[0] and not np.allclose(M, M.T, rtol=0.0, atol=1e-10 * max(1.0, np.max(np.abs(M)))):
        out.append(Violation(name, stage, "matrix is not symmetric"))


def _index_set_violation(idx, limit, name, stage, out):
    if idx.size and (np.any(idx < 0) or np.any(idx >= limit)):
        out.append(Violation(name, stage, f"entries must lie in [0, {limit})"))
    if idx.size > 1 and np.any(np.diff(idx) <= 0):
        out.append(Violation(name, stage, "entries must be strictly increasing"))


def _mask_violation(mask, name, stage, out):
    if mask.size and not np.all((mask == 0.0) | (mask == 1.0)):
        out.append(Violation(name, stage, "mask entries must be 0 or 1"))


def _stage_violations(st, nu, nx, nb, ng, stage, out):
    _sym_violation(st["Q"], "Q", stage, out)
    _sym_violation(st["R"], "R", stage, out)
    for zn in ("Zl", "Zu"):
        if np.any(st[zn] < 0.0):
            out.append(Violation(zn, stage, "slack penalty diagonal must be >= 0"))
    _index_set_violation(st["idxb"], nu + nx, "idxb", stage, out)
    _index_set_violation(st["idxs"], nb + ng, "idxs", stage, out)
    _mask_violation(st["maskl"], "maskl", stage, out)
    _mask_violation(st["masku"], "masku", stage, out)
    lo = np.concatenate([st["lb"], st["lg"]])
    up = np.concatenate([st["ub"], st["ug"]])
    both = (st["maskl"] != 0.0) & (st["masku"] != 0.0)
    bad = both & np.isfinite(lo) & np.isfinite(up) & (lo > up)
    for i in np.flatnonzero(bad):
        # infeasibility is a solver status, not a structural defect: warn only
        out.append(
            Violation("lb/ub" if i < nb else "lg/ug", stage,
                      f"row {i}: lower bound exceeds upper bound",
                      severity="warning")
        )
    if np.any(st["sl_lb"] < 0.0) or np.any(st["su_lb"] < 0.0):
        out.append(
            Violation("sl_lb/su_lb", stage,
                      "negative slack lower bound (allowed, check intent)",
                      severity="warning")
        )


def validate(qp):
    """Collect diagnostics for a QP; an empty list means valid.

    Checks symmetry of Hessian blocks, nonnegativity of slack penalties,
    lower > upper bound rows with both sides active, malformed index sets and
    masks, and (for trees) the parent structure.  Diagnostics are returned,
    never raised; entries with severity ``warning`` do not block a solve.
    """
    out = []
    if isinstance(qp, DenseQp):
        d = qp._data
        _sym_violation(d["H"], "H", None, out)
        for zn in ("Zl", "Zu"):
            if np.any(d[zn] < 0.0):
                out.append(Violation(zn, None, "slack penalty diagonal must be >= 0"))
        _index_set_violation(d["idxb"], qp.nv, "idxb", None, out)
        _index_set_violation(d["idxs"], qp.nb + qp.ng, "idxs", None, out)
        _mask_violation(d["maskl"], "maskl", None, out)
        _mask_violation(d["masku"], "masku", None, out)
        lo = np.concatenate([d["lb"], d["lg"]])
        up = np.concatenate([d["ub"], d["ug"]])
        both = (d["maskl"] != 0.0) & (d["masku"] != 0.0)
        bad = both & np.isfinite(lo) & np.isfinite(up) & (lo > up)
        for i in np.flatnonzero(bad):
            out.append(
                Violation("lb/ub" if i < qp.nb else "lg/ug", None,
                          f"row {i}: lower bound exceeds upper bound",
                          severity="warning")
            )
        if np.any(d["sl_lb"] < 0.0) or np.any(d["su_lb"] < 0.0):
            out.append(
                Violation("sl_lb/su_lb", None,
                          "negative slack lower bound (allowed, check intent)",
                          severity="warning")
            )
        return out

    if isinstance(qp, OcpQp):
        dm = qp.dim
        for n in range(dm.N + 1):
            _stage_violations(qp._stages[n], dm.nu[n], dm.nx[n],
                              dm.nb[n], dm.ng[n], n, out)
        return out

    if isinstance(qp, TreeOcpQp):
        dm = qp.dim
        par = np.asarray(dm.parents)
        if par[0] != -1:
            out.append(Violation("parents", 0, "root parent must be -1"))
        for m in range(1, par.shape[0]):
            if not 0 <= par[m] < m:
                out.append(
                    Violation("parents", m,
                              f"parent {par[m]} must satisfy 0 <= parent < {m}")
                )
        for m in range(dm.n_node):
            _stage_violations(qp._stages[m], dm.nu[m], dm.nx[m],
                              dm.nb[m], dm.ng[m], m, out)
        return out

    raise TypeError(f"not a QP container: {type(qp)!r}")


def errors_only(violations):
    """Filter a validate() result down to blocking entries."""
    return [v for v in violations if v.severity == "error"]
