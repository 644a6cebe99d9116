"""The coupled and intrinsic flow distances on finite spaces.

dtilde_t(x, y) = W_2(H_t(delta_x), H_t(delta_y)) is the chord distance of the
heat-kernel embedding; d_t is the induced arc distance, discretized as
shortest paths over the original edge set with dtilde_t edge weights (curves
are constrained to the original graph exactly as the length competitors are
constrained to be d-Lipschitz). t = 0 short-circuits to the original metric,
where the equality dtilde_0 = d_0 = d is exact.

The module also provides the report-style experiments: contraction ratios
against e^{-Kt}, time continuity of t -> dtilde_t, and the grid-refinement
stability study on circles embedded in a common circle. Sphere contraction
uses the azimuthal symmetry reduction: zonal measures evolve by Legendre
coefficient decay and their W_2 is the one-dimensional quantile distance
between colatitude profiles (meridian coupling attains the colatitude lower
bound for product-with-uniform-azimuth measures).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import shortest_path

from .geometry import SphereGeometry, legendre_table
from .heat import heat_measure_from_point, spectral_decompose
from .spaces import model_circle
from .transport import w2_exact

__all__ = [
    "FlowError",
    "FlowDistanceMatrix",
    "dtilde_matrix",
    "dtilde_pairs",
    "dt_arc_matrix",
    "flow_matrices",
    "ContractionRecord",
    "ContractionReport",
    "contraction_report",
    "ZonalMeasure",
    "sphere_contraction_report",
    "TimeContinuityReport",
    "time_continuity_report",
    "RefinementReport",
    "refinement_stability",
]

FULL_MATRIX_CAP = 256


class FlowError(ValueError):
    """Invalid flow-module request."""


@dataclass(frozen=True)
class FlowDistanceMatrix:
    """Chord and arc distance matrices at a fixed time."""

    t: float
    dtilde: np.ndarray
    dt: np.ndarray

    def max_axiom_violation(self) -> float:
        """Worst violation of the pseudo-distance axioms over both matrices."""
        worst = 0.0
        for mat in (self.dtilde, self.dt):
            worst = max(worst, float(np.abs(mat - mat.T).max()))
            worst = max(worst, float(np.abs(np.diag(mat)).max()))
            worst = max(worst, _triangle_violation(mat))
        worst = max(worst, float((self.dtilde - self.dt).max()))
        return worst


def _triangle_violation(mat) -> float:
    # max over (i, j, k) of d(i,k) - d(i,j) - d(j,k)
    n = mat.shape[0]
    worst = -np.inf
    for j in range(n):
        worst = max(worst, float((mat - mat[:, j][:, None] - mat[j][None, :]).max()))
    return worst


def heat_delta_measures(space, hs, t):
    """All measures H_t(delta_x) as columns of an (n, n) array."""
    return np.stack([heat_measure_from_point(hs, t, x) for x in range(space.n)], axis=1)


def dtilde_matrix(space, hs, t, cap=FULL_MATRIX_CAP) -> np.ndarray:
    """Full matrix of dtilde_t(x, y) = W_2(H_t delta_x, H_t delta_y).

    t = 0 returns the original metric exactly. Assembling the full matrix is
    O(n^2) exact transport solves; spaces beyond `cap` points are rejected
    (use dtilde_pairs for a pair list).
    """
    if t < 0:
        raise FlowError("negative time")
    if t == 0:
        return space.dist.copy()
    if space.n > cap:
        raise FlowError(f"full dtilde matrix capped at n = {cap}; use dtilde_pairs")
    measures = heat_delta_measures(space, hs, t)
    out = np.zeros((space.n, space.n))
    for x in range(space.n):
        for y in range(x + 1, space.n):
            val = w2_exact(measures[:, x], measures[:, y], space.dist).value
            out[x, y] = out[y, x] = val
    return out


def dtilde_pairs(space, hs, t, pairs) -> np.ndarray:
    """dtilde_t for an explicit list of point pairs."""
    if t < 0:
        raise FlowError("negative time")
    vals = []
    for x, y in pairs:
        if t == 0:
            vals.append(space.dist[x, y])
        else:
            mx = heat_measure_from_point(hs, t, x)
            my = heat_measure_from_point(hs, t, y)
            vals.append(w2_exact(mx, my, space.dist).value)
    return np.array(vals)


def dt_arc_matrix(space, dtilde) -> np.ndarray:
    """Arc distance: all-pairs shortest paths over the original edge set with
    dtilde edge weights. Dominates dtilde entrywise by its triangle
    inequality; at t = 0 it reproduces the original metric exactly."""
    dtilde = np.asarray(dtilde)
    i, j = space.edges[:, 0], space.edges[:, 1]
    w = dtilde[i, j]
    adj = sp.coo_matrix(
        (np.concatenate([w, w]), (np.concatenate([i, j]), np.concatenate([j, i]))),
        shape=(space.n, space.n),
    ).tocsr()
    dt = shortest_path(adj, directed=False)
    dt = np.minimum(dt, dt.T)
    np.fill_diagonal(dt, 0.0)
    return dt


def flow_matrices(space, hs, t, cap=FULL_MATRIX_CAP) -> FlowDistanceMatrix:
    dtil = dtilde_matrix(space, hs, t, cap=cap)
    return FlowDistanceMatrix(t=float(t), dtilde=dtil, dt=dt_arc_matrix(space, dtil))


# ---------------------------------------------------------------------------
# contraction

@dataclass(frozen=True)
class ContractionRecord:
    t: float
    pair: tuple
    w2_initial: float
    w2_evolved: float
    bound: float

    @property
    def ratio(self) -> float:
        return self.w2_evolved / self.w2_initial

    @property
    def excess(self) -> float:
        """Relative excess of the ratio over the bound (<= 0 when satisfied)."""
        return self.ratio / self.bound - 1.0


@dataclass(frozen=True)
class ContractionReport:
    K: float
    records: list
    rel_tol: float = 1e-6

    @property
    def max_excess(self) -> float:
        return max(r.excess for r in self.records)

    @property
    def violations(self) -> list:
        return [r for r in self.records if r.excess > self.rel_tol]

    def passed(self) -> bool:
        return not self.violations


def _as_measure_pair(space, pair):
    a, b = pair
    if np.isscalar(a):
        return space.delta(int(a)), space.delta(int(b)), (int(a), int(b))
    return np.asarray(a, float), np.asarray(b, float), ("mu", "nu")


def contraction_report(space, hs, times, pairs, K=None, rel_tol=1e-6) -> ContractionReport:
    """Contraction ratios W_2(H_t mu, H_t nu) / W_2(mu, nu) against e^{-Kt}.

    pairs may list point-index pairs (delta measures) or explicit measure
    pairs. K defaults to the space's declared bound and is required.
    """
    K = space.K if K is None else K
    if K is None:
        raise FlowError("contraction needs a declared curvature bound K")
    records = []
    for pair in pairs:
        mu, nu, label = _as_measure_pair(space, pair)
        w0 = w2_exact(mu, nu, space.dist).value
        for t in times:
            if t < 0:
                raise FlowError("negative time")
            wt = w0 if t == 0 else w2_exact(
                _heat_measure(hs, t, mu), _heat_measure(hs, t, nu), space.dist
            ).value
            records.append(ContractionRecord(
                t=float(t), pair=label, w2_initial=w0, w2_evolved=wt,
                bound=float(np.exp(-K * t)),
            ))
    return ContractionReport(K=float(K), records=records, rel_tol=rel_tol)


def _heat_measure(hs, t, mu):
    from .heat import heat_apply

    return heat_apply(hs, t, mu)


# ---------------------------------------------------------------------------
# zonal measures on the sphere (azimuthal symmetry reduction)

@dataclass(frozen=True)
class ZonalMeasure:
    """Rotation-invariant probability measure on the sphere.

    Either a finite list of latitude-ring atoms [(colatitude, mass)] or a
    density given by Legendre coefficients of its profile with respect to
    the volume measure. Heat evolution multiplies the coefficients by
    e^{-l(l+1)t/r^2}; ring atoms are expanded with the exact coefficients
    (2l+1) P_l(cos theta0) / (4 pi r^2) when evolved.
    """

    geometry: SphereGeometry
    coeffs: np.ndarray | None = None
    atoms: tuple | None = None

    @staticmethod
    def ring(geometry, colatitude, mass=1.0):
        return ZonalMeasure(geometry, atoms=((float(colatitude), float(mass)),))

    @staticmethod
    def pole(geometry, south=False):
        return ZonalMeasure.ring(geometry, np.pi if south else 0.0)

    @staticmethod
    def heat_kernel(geometry, t, south=False):
        """H_t of a pole mass, as exact coefficients."""
        return ZonalMeasure.pole(geometry, south=south).evolve(t)

    def _atom_coeffs(self):
        ls = np.arange(self.geometry.l_max + 1)
        c = np.zeros(self.geometry.l_max + 1)
        for theta0, mass in self.atoms:
            P = legendre_table(self.geometry.l_max, np.array([np.cos(theta0)]))[:, 0]
            c += mass * (2 * ls + 1) * P / (4 * np.pi * self.geometry.r**2)
        return c

    def evolve(self, t) -> "ZonalMeasure":
        if t == 0:
            return self
        c = self.coeffs if self.coeffs is not None else self._atom_coeffs()
        ls = np.arange(self.geometry.l_max + 1)
        decay = np.exp(-ls * (ls + 1) * t / self.geometry.r**2)
        return ZonalMeasure(self.geometry, coeffs=c * decay)

    def cell_masses(self) -> np.ndarray:
        """Exact integrals of the density over the colatitude cells."""
        geom = self.geometry
        if self.coeffs is None:
            # atoms: deposit each ring in its cell
            masses = np.zeros(geom.n_theta)
            faces = geom.faces()
            for theta0, mass in self.atoms:
                i = min(np.searchsorted(faces, theta0, side="right") - 1, geom.n_theta - 1)
                masses[max(i, 0)] += mass
            return masses
        xf = np.cos(geom.faces())
        lmax = geom.l_max
        Pf = legendre_table(lmax + 1, xf)
        anti = np.empty((lmax + 1, xf.size))
        anti[0] = xf
        for l in range(1, lmax + 1):
            anti[l] = (Pf[l + 1] - Pf[l - 1]) / (2 * l + 1)
        masses = 2 * np.pi * geom.r**2 * (self.coeffs @ (anti[:, :-1] - anti[:, 1:]))
        return np.clip(masses, 0.0, None)


def w2_zonal(mu: ZonalMeasure, nu: ZonalMeasure, levels=200000) -> float:
    """W_2 between zonal measures via the colatitude quantile coupling.

    Transport runs along meridians, so the sphere distance reduces to
    r |theta - theta'| and the optimal coupling is monotone in colatitude.
    Pure atom pairs are matched exactly; otherwise piecewise-linear CDFs on
    the cell faces are compared on a uniform quantile grid.
    """
    geom = mu.geometry
    if mu.atoms is not None and nu.atoms is not None:
        qa = _atom_quantiles(mu.atoms)
        qb = _atom_quantiles(nu.atoms)
        grid = np.unique(np.concatenate([[0.0], qa[0], qb[0], [1.0]]))
        cost = 0.0
        for lo, hi in zip(grid[:-1], grid[1:]):
            mid = 0.5 * (lo + hi)
            ta = _atom_quantile_value(qa, mid)
            tb = _atom_quantile_value(qb, mid)
            cost += (hi - lo) * (ta - tb) ** 2
        return geom.r * float(np.sqrt(cost))
    faces = geom.faces()
    Fa = np.concatenate([[0.0], np.cumsum(_normalized(mu.cell_masses()))])
    Fb = np.concatenate([[0.0], np.cumsum(_normalized(nu.cell_masses()))])
    Fa[-1] = Fb[-1] = 1.0
    u = (np.arange(levels) + 0.5) / levels
    qa = np.interp(u, Fa, faces)
    qb = np.interp(u, Fb, faces)
    return geom.r * float(np.sqrt(np.mean((qa - qb) ** 2)))


def _normalized(masses):
    return masses / masses.sum()


def _atom_quantiles(atoms):
    atoms = sorted(atoms)
    thetas = np.array([a[0] for a in atoms])
    masses = np.array([a[1] for a in atoms])
    cum = np.cumsum(masses) / masses.sum()
    return cum, thetas


def _atom_quantile_value(qa, u):
    cum, thetas = qa
    return thetas[np.searchsorted(cum, u, side="left")]


def sphere_contraction_report(geometry, times, pairs, rel_tol=1e-6) -> ContractionReport:
    """Contraction ratios on the sphere (K = 1/r^2) for zonal measure pairs."""
    K = geometry.K
    records = []
    for idx, (mu, nu) in enumerate(pairs):
        w0 = w2_zonal(mu, nu)
        for t in times:
            if t < 0:
                raise FlowError("negative time")
            wt = w0 if t == 0 else w2_zonal(mu.evolve(t), nu.evolve(t))
            records.append(ContractionRecord(
                t=float(t), pair=(f"zonal{idx}a", f"zonal{idx}b"),
                w2_initial=w0, w2_evolved=wt, bound=float(np.exp(-K * t)),
            ))
    return ContractionReport(K=float(K), records=records, rel_tol=rel_tol)


# ---------------------------------------------------------------------------
# time continuity and refinement stability

@dataclass(frozen=True)
class TimeContinuityReport:
    t: float
    deltas: np.ndarray
    sup_differences: np.ndarray
    semigroup_excess: float
    decreasing: bool

    def passed(self, tol=1e-8) -> bool:
        return self.decreasing and self.semigroup_excess <= tol


def time_continuity_report(space, hs, t, deltas, K=None, cap=FULL_MATRIX_CAP) -> TimeContinuityReport:
    """Right continuity of the flow: sup |dtilde_{t+d} - dtilde_t| per delta,
    plus the semigroup bounds dtilde_{t+d} <= e^{-Kd} dtilde_t and
    d_{t+d} <= e^{-Kd} d_t entrywise."""
    K = space.K if K is None else K
    if K is None:
        raise FlowError("time continuity bounds need a declared K")
    deltas = np.asarray(sorted(deltas, reverse=True), dtype=float)
    if np.any(deltas < 0):
        raise FlowError("deltas must be >= 0")
    base = flow_matrices(space, hs, t, cap=cap)
    sups, excess = [], 0.0
    for d in deltas:
        if d == 0:
            sups.append(0.0)
            continue
        shifted = flow_matrices(space, hs, t + d, cap=cap)
        sups.append(float(np.abs(shifted.dtilde - base.dtilde).max()))
        factor = np.exp(-K * d)
        excess = max(excess, float((shifted.dtilde - factor * base.dtilde).max()))
        excess = max(excess, float((shifted.dt - factor * base.dt).max()))
    sups = np.array(sups)
    pos = sups[deltas > 0]
    decreasing = bool(np.all(np.diff(pos) <= 1e-12)) if pos.size > 1 else True
    return TimeContinuityReport(t=float(t), deltas=deltas, sup_differences=sups,
                                semigroup_excess=excess, decreasing=decreasing)


@dataclass(frozen=True)
class RefinementReport:
    grid_sizes: tuple
    t: float
    probe_values: np.ndarray  # (n_probes, n_grids)
    differences: np.ndarray   # successive |value_{k+1} - value_k|
    orders: np.ndarray        # log2 ratios of successive differences

    @property
    def min_order(self) -> float:
        return float(self.orders.min())

    def limit_consistent(self) -> bool:
        """Finest value sits within the last difference of the extrapolated
        limit, for every probe."""
        last = self.differences[:, -1]
        return bool(np.all(last <= np.maximum(self.differences[:, -2], 1e-15)))


def refinement_stability(L, t, grid_sizes, probe_pairs) -> RefinementReport:
    """Common-embedding refinement study on circle grids.

    probe_pairs are pairs of circle fractions in [0, 1); each must land on a
    node of every grid. Reports dtilde_{n,t} at the matched nodes, successive
    differences, and the empirical convergence order (expected >= 1).
    """
    sizes = tuple(int(n) for n in grid_sizes)
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise FlowError("grid sizes must be strictly increasing")
    vals = np.zeros((len(probe_pairs), len(sizes)))
    for gi, n in enumerate(sizes):
        _, space = model_circle(L, n)
        hs = spectral_decompose(space)
        pairs_idx = []
        for fa, fb in probe_pairs:
            ia, ib = fa * n, fb * n
            if abs(ia - round(ia)) > 1e-9 or abs(ib - round(ib)) > 1e-9:
                raise FlowError(f"probe ({fa}, {fb}) not representable on n={n}")
            pairs_idx.append((int(round(ia)) % n, int(round(ib)) % n))
        vals[:, gi] = dtilde_pairs(space, hs, t, pairs_idx)
    diffs = np.abs(np.diff(vals, axis=1))
    safe = np.maximum(diffs, 1e-300)
    orders = np.log2(safe[:, :-1] / safe[:, 1:])
    return RefinementReport(grid_sizes=sizes, t=float(t), probe_values=vals,
                            differences=diffs, orders=orders)
