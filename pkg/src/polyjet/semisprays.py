"""Semisprays of polymomenta: temporal and spatial second-order fields.

Both kinds are (m, n, n) blocks of expressions, G1[b][j][i] for the
temporal family and G2[b][j][i] for the spatial one.  Neither transforms
as a d-tensor: the chart-change law picks up an inhomogeneous correction
built from derivatives of the induced momentum map, and the exact
symbolic form of that map (``TransitionMap.momentum_forward_dt/dx``)
supplies it here.  Differences of two semisprays of the same kind do
transform homogeneously, which ``decompose`` exploits to split a
semispray into its metric-canonical part plus a d-tensor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .charts import JetChart, TransitionMap
from .dtensors import DTensorField, builtin_dtensors, lower_x, upper_t
from .errors import ConfigError
from .metrics import Metric, christoffel
from .report import ResidualTracker, VerificationReport
from .symbolic import Const, SampleDomain, add, as_expr, evaluate, mul, variables


def _coerce_block3(m: int, n: int, components, label: str):
    allowed = set(JetChart(m, n).names)
    rows = tuple(tuple(tuple(as_expr(e) for e in row) for row in sheet)
                 for sheet in components)
    if len(rows) != m or any(len(sheet) != n or any(len(row) != n for row in sheet)
                             for sheet in rows):
        raise ConfigError(f"{label} components must form an (m, n, n) block")
    for sheet in rows:
        for row in sheet:
            for e in row:
                extra = variables(e) - allowed
                if extra:
                    raise ConfigError(
                        f"{label} component uses foreign variables {sorted(extra)}")
    return rows


def _eval_block3(components, assignment) -> np.ndarray:
    m, n = len(components), len(components[0])
    out = np.zeros((m, n, n))
    for b in range(m):
        for j in range(n):
            for i in range(n):
                out[b, j, i] = evaluate(components[b][j][i], assignment)
    return out


@dataclass(frozen=True)
class TemporalSemispray:
    """First-kind semispray block G1[b][j][i] (expressions in t, x, p)."""

    m: int
    n: int
    components: tuple

    def __post_init__(self):
        object.__setattr__(self, "components",
                           _coerce_block3(self.m, self.n, self.components,
                                          "temporal semispray"))

    def at(self, assignment) -> np.ndarray:
        return _eval_block3(self.components, assignment)

    def map_components(self, f) -> "TemporalSemispray":
        return TemporalSemispray(self.m, self.n, tuple(
            tuple(tuple(f(e) for e in row) for row in sheet)
            for sheet in self.components))


@dataclass(frozen=True)
class SpatialSemispray:
    """Second-kind semispray block G2[b][j][i] (expressions in t, x, p)."""

    m: int
    n: int
    components: tuple

    def __post_init__(self):
        object.__setattr__(self, "components",
                           _coerce_block3(self.m, self.n, self.components,
                                          "spatial semispray"))

    def at(self, assignment) -> np.ndarray:
        return _eval_block3(self.components, assignment)

    def map_components(self, f) -> "SpatialSemispray":
        return SpatialSemispray(self.m, self.n, tuple(
            tuple(tuple(f(e) for e in row) for row in sheet)
            for sheet in self.components))


def _symbolic_christoffel(g: Metric):
    field = christoffel(g)
    if field.components is None:
        raise ConfigError(
            "canonical semisprays need symbolic Christoffel symbols; "
            f"metric dimension {g.dim} exceeds the symbolic-inverse limit")
    return field.components


def canonical_temporal(h: Metric, n: int) -> TemporalSemispray:
    """G1[a][j][k] = 1/2 kappa^a_bc(t) p_j^b p_k^c for a temporal metric h."""
    if h.kind != "temporal":
        raise ConfigError("canonical temporal semispray requires a temporal metric")
    m = h.dim
    chart = JetChart(m, n)
    kappa = _symbolic_christoffel(h)
    comps = [[[None] * n for _ in range(n)] for _ in range(m)]
    for a in range(m):
        for j in range(n):
            for k in range(n):
                terms = [mul(kappa[a][b][c], chart.p_var(j, b), chart.p_var(k, c))
                         for b in range(m) for c in range(m)]
                comps[a][j][k] = mul(Const(0.5), add(*terms))
    return TemporalSemispray(m, n, comps)


def canonical_spatial(phi: Metric, m: int) -> SpatialSemispray:
    """G2[b][j][k] = -1/2 gamma^i_jk(x) p_i^b for a spatial metric phi."""
    if phi.kind != "spatial":
        raise ConfigError("canonical spatial semispray requires a spatial metric")
    n = phi.dim
    chart = JetChart(m, n)
    gamma = _symbolic_christoffel(phi)
    comps = [[[None] * n for _ in range(n)] for _ in range(m)]
    for b in range(m):
        for j in range(n):
            for k in range(n):
                terms = [mul(gamma[i][j][k], chart.p_var(i, b)) for i in range(n)]
                comps[b][j][k] = mul(Const(-0.5), add(*terms))
    return SpatialSemispray(m, n, comps)


def _momentum_dt_at(tm: TransitionMap, assignment) -> np.ndarray:
    m, n = tm.m, tm.n
    out = np.zeros((n, m, m))
    table = tm.momentum_forward_dt
    for i in range(n):
        for a in range(m):
            for b in range(m):
                out[i, a, b] = evaluate(table[i][a][b], assignment)
    return out


def _momentum_dx_at(tm: TransitionMap, assignment) -> np.ndarray:
    m, n = tm.m, tm.n
    out = np.zeros((n, m, n))
    table = tm.momentum_forward_dx
    for i in range(n):
        for a in range(m):
            for j in range(n):
                out[i, a, j] = evaluate(table[i][a][j], assignment)
    return out


def transform_temporal_semispray(S: TemporalSemispray, tm: TransitionMap, q) -> np.ndarray:
    """Numeric target-chart block G1~[c][k][r] at the image of q."""
    chart = tm.chart
    asg = chart.assignment(q)
    jt, jx, kt, kx = tm.jacobians_at(asg)
    two_g = 2.0 * np.einsum("bji,cb,jk,ir->ckr", S.at(asg), jt, kx, kx)
    dpdt = _momentum_dt_at(tm, asg)  # dpdt[k, c, a] = d ptilde_k^c / d t^a
    correction = np.einsum("ir,kca,ia->ckr", kx, dpdt, q.p)
    return 0.5 * (two_g - correction)


def transform_spatial_semispray(S: SpatialSemispray, tm: TransitionMap, q) -> np.ndarray:
    """Numeric target-chart block G2~[d][s][k] at the image of q."""
    chart = tm.chart
    asg = chart.assignment(q)
    jt, jx, kt, kx = tm.jacobians_at(asg)
    two_g = 2.0 * np.einsum("bji,db,js,ik->dsk", S.at(asg), jt, kx, kx)
    dpdx = _momentum_dx_at(tm, asg)  # dpdx[s, d, i] = d ptilde_s^d / d x^i
    correction = np.einsum("ik,sdi->dsk", kx, dpdx)
    return 0.5 * (two_g - correction)


def verify_semispray_law(S_A, S_B, tm: TransitionMap,
                         dom: SampleDomain | None = None, tol: float = 1e-8,
                         name: str | None = None) -> VerificationReport:
    """Check the inhomogeneous chart-change law between two semisprays."""
    if type(S_A) is not type(S_B):
        raise ConfigError("cannot compare semisprays of different kinds")
    if isinstance(S_A, TemporalSemispray):
        kind, transform = "temporal", transform_temporal_semispray
    elif isinstance(S_A, SpatialSemispray):
        kind, transform = "spatial", transform_spatial_semispray
    else:
        raise ConfigError(f"not a semispray: {type(S_A).__name__}")
    chart = tm.chart
    if dom is None:
        dom = chart.sample_domain()
    tracker = ResidualTracker(name or f"semispray-law:{kind}", tol)
    label = "G1" if kind == "temporal" else "G2"
    for asg in dom.points():
        q = chart.point(asg)
        lhs = transform(S_A, tm, q)
        rhs = S_B.at(chart.assignment(tm.map_point(q)))
        diff = np.abs(lhs - rhs)
        idx = np.unravel_index(np.argmax(diff), diff.shape)
        tracker.update(float(diff.max()), asg,
                       f"{label}[{idx[0] + 1},{idx[1] + 1},{idx[2] + 1}]")
        tracker.count_sample()
    return tracker.report()


def check_characterization(block, kind: str, h: Metric,
                           dom: SampleDomain | None = None,
                           tol: float = 1e-9) -> VerificationReport:
    """Algebraic test singling out the metric-canonical first block.

    ``block`` holds expressions: shape (m, n) for kind 'temporal'
    (entries B[c][i]) or (n, n) for kind 'spatial' (entries B[k][i]).
    The temporal block passes iff contracting it into the builtin J field
    reproduces L, which pins B[c][i] = p_i^c; the spatial one passes iff
    the contraction reproduces J itself, pinning B[k][i] = delta^k_i.
    """
    if kind not in ("temporal", "spatial"):
        raise ConfigError(f"unknown characterization kind {kind!r}")
    if h.kind != "temporal":
        raise ConfigError("characterization requires the temporal metric h")
    m = h.dim
    rows = tuple(tuple(as_expr(e) for e in row) for row in block)
    n = len(rows[0]) if kind == "temporal" else len(rows)
    if kind == "temporal" and len(rows) != m:
        raise ConfigError("temporal block must have shape (m, n)")
    if kind == "spatial" and any(len(r) != n for r in rows):
        raise ConfigError("spatial block must have shape (n, n)")
    chart = JetChart(m, n)
    built = builtin_dtensors(h, n)
    if dom is None:
        dom = chart.sample_domain()
    tracker = ResidualTracker(f"characterization:{kind}", tol)
    for asg in dom.points():
        jv = built["J"].at(asg)  # jv[i, a, b, j]
        bv = np.array([[evaluate(e, asg) for e in r] for r in rows])
        if kind == "temporal":
            lhs = np.einsum("iabj,ci->cjab", jv, bv)
            rhs = built["L"].at(asg)  # rhs[c, j, a, b]
        else:
            lhs = np.einsum("iabj,ki->kjab", jv, bv)
            rhs = np.transpose(jv, (0, 3, 1, 2))  # J[k][a][b][j] -> [k, j, a, b]
        diff = np.abs(lhs - rhs)
        idx = np.unravel_index(np.argmax(diff), diff.shape)
        tracker.update(float(diff.max()), asg,
                       "[" + ",".join(str(i + 1) for i in idx) + "]")
        tracker.count_sample()
    return tracker.report()


def decompose(S, metric: Metric):
    """Split S into (deviation d-tensor, metric-canonical semispray).

    The deviation T = S - S0 transforms homogeneously (the inhomogeneous
    corrections cancel), so it is returned as a DTensorField with slots
    (upper temporal doubled, lower spatial doubled, lower spatial).
    """
    if isinstance(S, TemporalSemispray):
        canonical = canonical_temporal(metric, S.n)
    elif isinstance(S, SpatialSemispray):
        canonical = canonical_spatial(metric, S.m)
    else:
        raise ConfigError(f"not a semispray: {type(S).__name__}")
    comps = np.empty((S.m, S.n, S.n), dtype=object)
    for a in range(S.m):
        for j in range(S.n):
            for k in range(S.n):
                comps[a, j, k] = add(S.components[a][j][k],
                                     mul(Const(-1.0), canonical.components[a][j][k]))
    slots = (upper_t(1), lower_x(0), lower_x())
    kind = "T1" if isinstance(S, TemporalSemispray) else "T2"
    return DTensorField(S.m, S.n, slots, comps, name=kind), canonical
