"""Nonlinear connections on the dual 1-jet bundle.

A connection is a pair of blocks N1[a][i][b] (shape (m, n, m)) and
N2[a][i][j] (shape (m, n, n)) of expressions in (t, x, p).  Like the
semisprays they correspond to, connections transform with an
inhomogeneous correction under chart changes; the correction again comes
from exact derivatives of the induced momentum map.

The adapted coframe rows delta p_i^a = dp_i^a + N1[a][i][b] dt^b
+ N2[a][i][j] dx^j are the practical payoff: when both connections
satisfy the chart-change law, those rows mix tensorially with the same
coefficients as the polymomenta themselves, which is what
``verify_adapted_coframe`` checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .charts import JetChart, TransitionMap, p_name
from .errors import ConfigError
from .metrics import Metric, christoffel
from .report import ResidualTracker, VerificationReport
from .semisprays import (
    SpatialSemispray,
    TemporalSemispray,
    _momentum_dt_at,
    _momentum_dx_at,
)
from .symbolic import (
    Const,
    SampleDomain,
    add,
    as_expr,
    differentiate,
    evaluate,
    mul,
    variables,
)


def _coerce_block(m: int, n: int, components, shape, label: str):
    allowed = set(JetChart(m, n).names)
    rows = tuple(tuple(tuple(as_expr(e) for e in row) for row in sheet)
                 for sheet in components)
    if len(rows) != shape[0] or any(
            len(sheet) != shape[1] or any(len(row) != shape[2] for row in sheet)
            for sheet in rows):
        raise ConfigError(f"{label} must have shape {shape}")
    for sheet in rows:
        for row in sheet:
            for e in row:
                extra = variables(e) - allowed
                if extra:
                    raise ConfigError(
                        f"{label} component uses foreign variables {sorted(extra)}")
    return rows


@dataclass(frozen=True)
class NonlinearConnection:
    """Connection blocks N1 (m, n, m) and N2 (m, n, n)."""

    m: int
    n: int
    n1: tuple
    n2: tuple

    def __post_init__(self):
        object.__setattr__(self, "n1", _coerce_block(
            self.m, self.n, self.n1, (self.m, self.n, self.m), "N1"))
        object.__setattr__(self, "n2", _coerce_block(
            self.m, self.n, self.n2, (self.m, self.n, self.n), "N2"))

    def n1_at(self, assignment) -> np.ndarray:
        out = np.zeros((self.m, self.n, self.m))
        for a in range(self.m):
            for i in range(self.n):
                for b in range(self.m):
                    out[a, i, b] = evaluate(self.n1[a][i][b], assignment)
        return out

    def n2_at(self, assignment) -> np.ndarray:
        out = np.zeros((self.m, self.n, self.n))
        for a in range(self.m):
            for i in range(self.n):
                for j in range(self.n):
                    out[a, i, j] = evaluate(self.n2[a][i][j], assignment)
        return out

    def map_components(self, f) -> "NonlinearConnection":
        n1 = tuple(tuple(tuple(f(e) for e in row) for row in sheet) for sheet in self.n1)
        n2 = tuple(tuple(tuple(f(e) for e in row) for row in sheet) for sheet in self.n2)
        return NonlinearConnection(self.m, self.n, n1, n2)


def canonical_metric_connection(h: Metric, phi: Metric, n: int | None = None) -> NonlinearConnection:
    """The connection induced by a temporal metric h and spatial metric phi:

    N1[a][i][b] = kappa^a_cb(t) p_i^c,   N2[a][i][j] = -gamma^k_ij(x) p_k^a.
    """
    if h.kind != "temporal" or phi.kind != "spatial":
        raise ConfigError("canonical connection requires temporal h and spatial phi")
    m, nn = h.dim, phi.dim
    chart = JetChart(m, nn)
    kappa = christoffel(h).components
    gamma = christoffel(phi).components
    if kappa is None or gamma is None:
        raise ConfigError("canonical connection needs symbolic Christoffel symbols")
    n1 = [[[add(*[mul(kappa[a][c][b], chart.p_var(i, c)) for c in range(m)])
            for b in range(m)] for i in range(nn)] for a in range(m)]
    n2 = [[[mul(Const(-1.0), add(*[mul(gamma[k][i][j], chart.p_var(k, a))
                                   for k in range(nn)]))
            for j in range(nn)] for i in range(nn)] for a in range(m)]
    return NonlinearConnection(m, nn, n1, n2)


def transform_connection(N: NonlinearConnection, tm: TransitionMap, q):
    """Numeric target-chart blocks (N1~, N2~) at the image of q."""
    chart = tm.chart
    asg = chart.assignment(q)
    jt, jx, kt, kx = tm.jacobians_at(asg)
    n1 = np.einsum("cka,bc,kj,ad->bjd", N.n1_at(asg), jt, kx, kt)
    dpdt = _momentum_dt_at(tm, asg)  # dpdt[j, b, a] = d ptilde_j^b / d t^a
    n1 -= np.einsum("ad,jba->bjd", kt, dpdt)
    n2 = np.einsum("cki,bc,kj,ir->bjr", N.n2_at(asg), jt, kx, kx)
    dpdx = _momentum_dx_at(tm, asg)  # dpdx[j, b, i] = d ptilde_j^b / d x^i
    n2 -= np.einsum("ir,jbi->bjr", kx, dpdx)
    return n1, n2


def verify_connection_law(N_A: NonlinearConnection, N_B: NonlinearConnection,
                          tm: TransitionMap, dom: SampleDomain | None = None,
                          tol: float = 1e-8, name: str | None = None) -> VerificationReport:
    """Check the inhomogeneous chart-change law for both connection blocks."""
    chart = tm.chart
    if dom is None:
        dom = chart.sample_domain()
    tracker = ResidualTracker(name or "connection-law", tol)
    for asg in dom.points():
        q = chart.point(asg)
        image_asg = chart.assignment(tm.map_point(q))
        lhs1, lhs2 = transform_connection(N_A, tm, q)
        for label, lhs, rhs in (("N1", lhs1, N_B.n1_at(image_asg)),
                                ("N2", lhs2, N_B.n2_at(image_asg))):
            diff = np.abs(lhs - rhs)
            idx = np.unravel_index(np.argmax(diff), diff.shape)
            tracker.update(float(diff.max()), asg,
                           f"{label}[{idx[0] + 1},{idx[1] + 1},{idx[2] + 1}]")
        tracker.count_sample()
    return tracker.report()


def connection_from_semispray(G1: TemporalSemispray, G2: SpatialSemispray,
                              phi: Metric) -> NonlinearConnection:
    """Connection associated to a semispray pair.

    N2 = 2 G2 directly.  N1 needs the spatial metric to strip the momenta
    off the quadratic temporal block:

        N1[a][r][b] = phi^{jk} (d G1[a][j][k] / d p_i^b) phi_{ir}.

    For p-quadratic blocks K^a_cb p_j^c p_k^b this returns the
    (c, b)-symmetric part of K contracted with p, so it inverts
    ``semispray_from_connection`` exactly on connections whose N1 is
    p-linear with symmetric coefficients (the metric-canonical class).
    """
    if phi.kind != "spatial":
        raise ConfigError("semispray-to-connection conversion needs a spatial metric")
    m, n = G1.m, G1.n
    if (G2.m, G2.n) != (m, n) or phi.dim != n:
        raise ConfigError("semispray pair and metric dimensions disagree")
    chart = JetChart(m, n)
    phi_upper = phi.inverse_components
    n1 = [[[None] * m for _ in range(n)] for _ in range(m)]
    for a in range(m):
        for b in range(m):
            # d G1[a][j][k] / d p_i^b, then sandwich with phi
            for r in range(n):
                terms = []
                for i in range(n):
                    for j in range(n):
                        for k in range(n):
                            terms.append(mul(
                                phi_upper[j][k],
                                differentiate(G1.components[a][j][k], p_name(i, b)),
                                phi.components[i][r]))
                n1[a][r][b] = add(*terms)
    n2 = [[[mul(Const(2.0), G2.components[b][j][k]) for k in range(n)]
           for j in range(n)] for b in range(m)]
    return NonlinearConnection(m, n, n1, n2)


def semispray_from_connection(N: NonlinearConnection):
    """The semispray pair associated to a connection:

    G1[a][i][j] = 1/2 N1[a][i][b] p_j^b, G2 = 1/2 N2.
    """
    m, n = N.m, N.n
    chart = JetChart(m, n)
    g1 = [[[mul(Const(0.5), add(*[mul(N.n1[a][i][b], chart.p_var(j, b))
                                  for b in range(m)]))
            for j in range(n)] for i in range(n)] for a in range(m)]
    g2 = [[[mul(Const(0.5), N.n2[b][j][k]) for k in range(n)]
           for j in range(n)] for b in range(m)]
    return TemporalSemispray(m, n, g1), SpatialSemispray(m, n, g2)


def adapted_coframe(N: NonlinearConnection, q) -> np.ndarray:
    """Rows of delta p_i^a in the chart's (dt, dx, dp) basis at q.

    Row (i, a) sits at flat position i*m + a, matching the chart's
    momentum ordering; columns are dt^b, dx^j, then dp in the same flat
    order.
    """
    m, n = N.m, N.n
    chart = JetChart(m, n)
    asg = chart.assignment(q)
    n1, n2 = N.n1_at(asg), N.n2_at(asg)
    rows = np.zeros((m * n, m + n + m * n))
    for i in range(n):
        for a in range(m):
            r = i * m + a
            rows[r, :m] = n1[a][i]
            rows[r, m:m + n] = n2[a][i]
            rows[r, m + n + r] = 1.0
    return rows


def verify_adapted_coframe(N_A: NonlinearConnection, N_B: NonlinearConnection,
                           tm: TransitionMap, dom: SampleDomain | None = None,
                           tol: float = 1e-8, name: str | None = None) -> VerificationReport:
    """Check that the adapted coframe rows transform tensorially.

    Chart-A rows are rewritten in chart-B differentials through the full
    coordinate coframe, then mixed with the polymomentum coefficients
    Kx[i][j] Jt[b][a]; the result must equal chart-B's own rows at the
    image point.
    """
    if not tm.has_inverse:
        raise ConfigError("coframe verification requires inverse expressions")
    chart = tm.chart
    m, n = tm.m, tm.n
    if dom is None:
        dom = chart.sample_domain()
    col_names = ["d" + nm for nm in chart.names]
    tracker = ResidualTracker(name or "adapted-coframe", tol)
    for asg in dom.points():
        q = chart.point(asg)
        image = tm.map_point(q)
        jt, jx, kt, kx = tm.jacobians_at(asg)
        pushed = adapted_coframe(N_A, q) @ tm.coframe_matrix(q)
        pushed = pushed.reshape(n, m, -1)
        expected = np.einsum("ij,ba,iak->jbk", kx, jt, pushed).reshape(n * m, -1)
        got = adapted_coframe(N_B, image)
        diff = np.abs(got - expected)
        r, c = np.unravel_index(np.argmax(diff), diff.shape)
        j, b = divmod(int(r), m)
        tracker.update(float(diff.max()), asg,
                       f"coframe[{p_name(j, b)}, {col_names[int(c)]}]")
        tracker.count_sample()
    return tracker.report()
