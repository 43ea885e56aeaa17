"""Stationary measures, Lyapunov exponents, and the entropy estimators.

A circle probability measure is stored as its CDF on a uniform grid
(monotone, pinned at 0 and 1).  Stationary measures are produced either
by iterating the averaged pushforward operator on the CDF (transfer
iteration) or by Monte Carlo over walk endpoints; both are exposed and
cross-checked.  On top of the measure sit the three numbers the theory
revolves around: the Lyapunov exponent lambda, the boundary entropy
h_nu (mean negative log Radon-Nikodym derivative of one step), and the
asymptotic entropy h = lim H(mu^{*n})/n, estimated from exact
convolution powers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circle import Arc, unwrap_increasing
from .convolve import ConvolutionSeries, convolve_exact
from .maps import MobiusMap, Word
from .rng import stream
from .walk import StepDistribution

_TAG_STATIONARY = 0x53544154
_TAG_LYAPUNOV = 0x4C594150
_TAG_BOUNDARY = 0x424E4452
_TAG_SBM = 0x53424D31
_TAG_DIRAC = 0x44495243


class StationarityError(RuntimeError):
    def __init__(self, residual, message):
        super().__init__(message)
        self.residual = residual


class MeasureGapError(RuntimeError):
    """A Radon-Nikodym window carries no measure (legitimate inside Cantor gaps)."""


class EstimatorDisagreement(RuntimeError):
    """Two independent estimators of the same quantity differ beyond tolerance."""


class GridMeasure:
    """Circle probability measure as a monotone CDF on an N-point grid."""

    def __init__(self, cdf, atom_tolerance: float = 0.05):
        cdf = np.asarray(cdf, dtype=float)
        if cdf.ndim != 1 or len(cdf) < 2:
            raise ValueError("cdf must be a 1-d array of at least 2 values")
        if abs(cdf[0]) > 1e-12 or abs(cdf[-1] - 1.0) > 1e-12:
            raise ValueError("cdf endpoints must be pinned at 0 and 1")
        if np.any(np.diff(cdf) < -1e-12):
            raise ValueError("cdf must be nondecreasing")
        self.cdf = np.maximum.accumulate(np.clip(cdf, 0.0, 1.0))
        self.cdf[0] = 0.0
        self.cdf[-1] = 1.0
        self.N = len(cdf) - 1
        self.grid = np.arange(self.N + 1) / self.N
        self.atom_tolerance = atom_tolerance

    # -- mass queries -------------------------------------------------------

    @property
    def max_cell_mass(self) -> float:
        return float(np.max(np.diff(self.cdf)))

    @property
    def atom_warning(self) -> bool:
        """True when some grid cell carries more mass than atom_tolerance.

        The measures of interest are atomless; a heavy cell signals either
        an atom (elementary input) or an under-resolved grid.  Reported,
        never silently accepted.
        """
        return self.max_cell_mass > self.atom_tolerance

    def cdf_at(self, x):
        return np.interp(np.asarray(x, dtype=float) % 1.0, self.grid, self.cdf)

    def cdf_lifted(self, y):
        y = np.asarray(y, dtype=float)
        return np.floor(y) + self.cdf_at(y)

    def interval_mass(self, lo, hi):
        """Mass of the positively oriented arc from lo to hi."""
        lo = np.asarray(lo, dtype=float)
        span = (np.asarray(hi, dtype=float) - lo) % 1.0
        return self.cdf_lifted(lo + span) - self.cdf_lifted(lo)

    def arc_mass(self, arc: Arc):
        return float(self.cdf_lifted(arc.left + arc.length) - self.cdf_lifted(arc.left))

    def cell_density(self, x) -> float:
        """Density of the piecewise-linear CDF on the cell containing x."""
        i = min(int((float(x) % 1.0) * self.N), self.N - 1)
        return float((self.cdf[i + 1] - self.cdf[i]) * self.N)

    def quantile(self, u):
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        idx = np.clip(np.searchsorted(self.cdf, u, side="left"), 1, self.N)
        c0 = self.cdf[idx - 1]
        c1 = self.cdf[idx]
        w = np.where(c1 > c0, (u - c0) / np.where(c1 > c0, c1 - c0, 1.0), 0.0)
        return (self.grid[idx - 1] + np.clip(w, 0.0, 1.0) / self.N) % 1.0

    def sample(self, rng: np.random.Generator, size):
        return self.quantile(rng.random(size))

    # -- constructions ------------------------------------------------------

    @staticmethod
    def lebesgue(N: int) -> "GridMeasure":
        return GridMeasure(np.arange(N + 1) / N)

    @staticmethod
    def from_samples(xs, N: int) -> "GridMeasure":
        xs = np.sort(np.asarray(xs, dtype=float) % 1.0)
        grid = np.arange(N + 1) / N
        cdf = np.searchsorted(xs, grid, side="right") / len(xs)
        cdf[0] = 0.0
        cdf[-1] = 1.0
        return GridMeasure(cdf)

    def pushforward(self, map_like) -> "GridMeasure":
        """Image measure under an orientation-preserving circle map."""
        ginv = map_like.inverse()
        ylift = unwrap_increasing(np.asarray(ginv.apply(self.grid), dtype=float))
        vals = self.cdf_lifted(ylift) - self.cdf_lifted(ylift[0])
        vals[0] = 0.0
        vals[-1] = 1.0
        return GridMeasure(np.maximum.accumulate(np.clip(vals, 0.0, 1.0)))


# ---------------------------------------------------------------------------
# stationary measure
# ---------------------------------------------------------------------------


@dataclass
class StationaryInfo:
    method: str
    residual: float
    iterations: int
    grid_size: int
    samples: int = 0
    max_cell_mass: float = 0.0
    atom_warning: bool = False


def _rotation_angles(mu: StepDistribution):
    """Rotation amounts when every atom is a rigid rotation, else None."""
    angles = []
    for a in mu.atoms:
        if not isinstance(a, MobiusMap):
            return None
        m = a.matrix
        if not (np.allclose(m @ m.T, np.eye(2), atol=1e-12)):
            return None
        angles.append(float(np.asarray(a.apply(0.0))))
    return np.array(angles)


def _transfer_apply(mu: StepDistribution, nu: GridMeasure, inv_lifts) -> np.ndarray:
    """One application of the averaged pushforward operator to the CDF."""
    out = np.zeros_like(nu.cdf)
    for p, ylift in zip(mu.probs, inv_lifts):
        out += p * (nu.cdf_lifted(ylift) - nu.cdf_lifted(ylift[:1]))
    out[0] = 0.0
    out[-1] = 1.0
    return out


def _inverse_lifts(mu: StepDistribution, grid: np.ndarray):
    lifts = []
    for a in mu.atoms:
        y = np.asarray(a.inverse().apply(grid), dtype=float)
        lifts.append(unwrap_increasing(y))
    return lifts


def stationarity_residual(mu: StepDistribution, nu: GridMeasure) -> float:
    """sup_x |F(x) - sum_g mu(g) (g nu)([0, x])| on the grid."""
    lifts = _inverse_lifts(mu, nu.grid)
    return float(np.max(np.abs(_transfer_apply(mu, nu, lifts) - nu.cdf)))


def estimate_stationary_measure(
    mu: StepDistribution,
    method: str = "transfer_iteration",
    grid_size: int = 8192,
    tol: float = 1e-3,
    max_iterations: int = 2000,
    stop_residual: float = 1e-10,
    mc_samples: int = 200_000,
    mc_steps: int = 300,
    seed: int = 0,
    atom_tolerance: float = 0.05,
) -> GridMeasure:
    """Estimate the mu-stationary measure on an N-point CDF grid.

    transfer_iteration: iterate the averaged pushforward of the CDF with
    monotone re-interpolation until the update is below stop_residual.
    monte_carlo: empirical law of walk endpoints after mc_steps steps.
    Either way the stationarity residual is measured with the same
    discrete operator and must come out below tol.
    """
    if grid_size < 256:
        raise ValueError("grid_size must be >= 256")
    grid = np.arange(grid_size + 1) / grid_size
    inv_lifts = _inverse_lifts(mu, grid)

    if method in ("transfer_iteration", "transfer"):
        nu = GridMeasure.lebesgue(grid_size)
        iterations = 0
        for iterations in range(1, max_iterations + 1):
            new = _transfer_apply(mu, nu, inv_lifts)
            new = np.maximum.accumulate(np.clip(new, 0.0, 1.0))
            new[0] = 0.0
            new[-1] = 1.0
            delta = float(np.max(np.abs(new - nu.cdf)))
            nu = GridMeasure(new, atom_tolerance)
            if delta < stop_residual:
                break
        samples = 0
    elif method == "monte_carlo":
        rng = stream(seed, _TAG_STATIONARY)
        x = rng.random(mc_samples)
        angles = _rotation_angles(mu)
        if angles is not None:
            # commuting isometries: the endpoint law only depends on the
            # atom counts, so sample those directly (same distribution,
            # O(samples) instead of O(samples * steps))
            counts = rng.multinomial(mc_steps, mu.probs, size=mc_samples)
            x = (x + counts @ angles) % 1.0
        else:
            for _ in range(mc_steps):
                idx = mu.sample_indices(rng, mc_samples)
                for j in range(len(mu)):
                    sel = idx == j
                    if np.any(sel):
                        x[sel] = mu.atoms[j].apply(x[sel])
        nu = GridMeasure.from_samples(x, grid_size)
        nu.atom_tolerance = atom_tolerance
        iterations = mc_steps
        samples = mc_samples
    else:
        raise ValueError(f"unknown method {method!r}")

    residual = float(np.max(np.abs(_transfer_apply(mu, nu, inv_lifts) - nu.cdf)))
    if method in ("transfer_iteration", "transfer") and residual > tol:
        raise StationarityError(
            residual,
            f"stationarity residual {residual:.3e} exceeds tol {tol:.1e} after "
            f"{iterations} iterations (elementary input or insufficient grid?)",
        )
    nu.info = StationaryInfo(method, residual, iterations, grid_size, samples,
                             nu.max_cell_mass, nu.atom_warning)
    return nu


# ---------------------------------------------------------------------------
# Lyapunov exponent
# ---------------------------------------------------------------------------


@dataclass
class LyapunovEstimate:
    value: float            # pathwise slope (primary estimate)
    stderr: float
    integral: float         # Monte Carlo of log g' against mu x nu
    integral_stderr: float
    agreement_sigma: float
    n_steps: int
    trajectories: int

    def as_dict(self):
        return self.__dict__.copy()


def _apply_indexed(mu: StepDistribution, idx: np.ndarray, x: np.ndarray, want_d1=False):
    """Apply atom idx[i] to x[i] for all i (grouped by atom)."""
    out = np.empty_like(x)
    d1 = np.empty_like(x) if want_d1 else None
    for j in range(len(mu)):
        sel = idx == j
        if not np.any(sel):
            continue
        if want_d1:
            jet = mu.atoms[j].jet(x[sel])
            out[sel] = jet.value
            d1[sel] = jet.d1
        else:
            out[sel] = mu.atoms[j].apply(x[sel])
    return (out, d1) if want_d1 else out


def lyapunov_exponent(
    mu: StepDistribution,
    nu: GridMeasure,
    n_steps: int = 10_000,
    trajectories: int = 100,
    integral_samples: int = 100_000,
    seed: int = 0,
) -> LyapunovEstimate:
    """lambda = int log g'(x) dmu(g) dnu(x), two ways.

    The integral estimator samples (g, x) from mu x nu directly; the
    pathwise estimator averages (1/n) log l_n'(x) over seeded walks.
    They must agree within 3 combined sigma (hard error beyond 5).
    """
    rng_i = stream(seed, _TAG_LYAPUNOV, 1)
    x = nu.sample(rng_i, integral_samples)
    idx = mu.sample_indices(rng_i, integral_samples)
    _, d1 = _apply_indexed(mu, idx, x, want_d1=True)
    logs = np.log(d1)
    lam_int = float(logs.mean())
    se_int = float(logs.std(ddof=1) / np.sqrt(len(logs)))

    rng_p = stream(seed, _TAG_LYAPUNOV, 2)
    xs = nu.sample(rng_p, trajectories)
    acc = np.zeros(trajectories)
    for _ in range(n_steps):
        idx = mu.sample_indices(rng_p, trajectories)
        xs, d1 = _apply_indexed(mu, idx, xs, want_d1=True)
        acc += np.log(d1)
    slopes = acc / n_steps
    lam_path = float(slopes.mean())
    se_path = float(slopes.std(ddof=1) / np.sqrt(trajectories)) if trajectories > 1 else 0.0

    # absolute floor keeps near-deterministic cases (zero-variance
    # integrands, grid-resolution effects) from tripping the z-test
    combined = float(max(np.hypot(se_int, se_path), 2e-4 * max(1.0, abs(lam_path))))
    z = abs(lam_int - lam_path) / combined
    if z > 5.0:
        raise EstimatorDisagreement(
            f"lyapunov estimators disagree: integral {lam_int:.4f}+-{se_int:.4f} vs "
            f"pathwise {lam_path:.4f}+-{se_path:.4f} ({z:.1f} sigma); bad nu?"
        )
    return LyapunovEstimate(lam_path, se_path, lam_int, se_int, float(z), n_steps, trajectories)


# ---------------------------------------------------------------------------
# Radon-Nikodym windows and boundary entropy
# ---------------------------------------------------------------------------


def rn_derivative(g, nu: GridMeasure, x: float, delta_cells: int = 8) -> float:
    """Window surrogate nu(g[x-d, x+d]) / nu([x-d, x+d]) for d(g^{-1}nu)/dnu at x."""
    if delta_cells < 2:
        raise ValueError("delta must span at least 2 grid cells")
    d = delta_cells / nu.N
    den = float(nu.interval_mass(x - d, x + d))
    lo = float(np.asarray(g.apply(x - d)))
    hi = float(np.asarray(g.apply(x + d)))
    num = float(nu.interval_mass(lo, hi))
    if den <= 0.0 or num <= 0.0:
        raise MeasureGapError("measure gap: window carries no mass")
    return num / den


@dataclass
class BoundaryEntropyEstimate:
    value: float
    stderr: float
    delta_cells: int
    refined_value: float      # same estimator at delta/2
    refined_stderr: float
    gap_fraction: float
    samples: int

    @property
    def refinement_consistent(self) -> bool:
        tol = 2.0 * np.hypot(self.stderr, self.refined_stderr)
        return abs(self.value - self.refined_value) <= max(tol, 1e-12)

    def as_dict(self):
        d = self.__dict__.copy()
        d["refinement_consistent"] = self.refinement_consistent
        return d


def boundary_entropy(
    mu: StepDistribution,
    nu: GridMeasure,
    samples: int = 100_000,
    delta_cells: int = 8,
    seed: int = 0,
) -> BoundaryEntropyEstimate:
    """h_nu = -E log d(g^{-1}nu)/dnu over (g, x) ~ mu x nu, window surrogate.

    Samples landing in measure gaps are discarded and counted; more than
    10% gap hits raises (use a larger window).
    """
    rng = stream(seed, _TAG_BOUNDARY)
    x = nu.sample(rng, samples)
    idx = mu.sample_indices(rng, samples)

    def estimate(cells):
        d = cells / nu.N
        den = nu.interval_mass(x - d, x + d)
        lo = _apply_indexed(mu, idx, (x - d) % 1.0)
        hi = _apply_indexed(mu, idx, (x + d) % 1.0)
        num = nu.interval_mass(lo, hi)
        ok = (num > 0) & (den > 0)
        vals = -np.log(num[ok] / den[ok])
        return vals, 1.0 - ok.mean()

    vals, gap_frac = estimate(delta_cells)
    if gap_frac > 0.10:
        raise MeasureGapError(
            f"{gap_frac:.1%} of samples hit measure gaps; increase delta (currently {delta_cells} cells)"
        )
    half_cells = max(2, delta_cells // 2)
    vals_h, _ = estimate(half_cells)
    return BoundaryEntropyEstimate(
        float(vals.mean()),
        float(vals.std(ddof=1) / np.sqrt(len(vals))),
        delta_cells,
        float(vals_h.mean()),
        float(vals_h.std(ddof=1) / np.sqrt(len(vals_h))),
        float(gap_frac),
        int(len(vals)),
    )


# ---------------------------------------------------------------------------
# asymptotic entropy
# ---------------------------------------------------------------------------


@dataclass
class AsymptoticEntropyEstimate:
    value: float                 # extrapolated first-difference estimate
    plain_difference: float      # H(mu^{*n}) - H(mu^{*(n-1)}) at n = n_max
    n_max: int
    entropies: np.ndarray        # H(mu^{*k}), k = 0..n_max
    support_sizes: np.ndarray
    fit_window: tuple
    fit_powers: tuple
    sbm_mean: float              # mean of -(1/n) log mu^{*n}(r_n)
    sbm_stderr: float
    sbm_target: float            # H(mu^{*n})/n, the exact expectation
    sbm_samples: int

    @property
    def sbm_consistent(self) -> bool:
        return abs(self.sbm_mean - self.sbm_target) <= 3.0 * max(self.sbm_stderr, 1e-15)

    def as_dict(self):
        d = {k: v for k, v in self.__dict__.items() if not isinstance(v, np.ndarray)}
        d["entropies"] = [float(v) for v in self.entropies]
        d["support_sizes"] = [int(v) for v in self.support_sizes]
        d["sbm_consistent"] = self.sbm_consistent
        return d


def extrapolate_entropy_differences(entropies: np.ndarray, n_max: int):
    """Extrapolate dH_n = H_n - H_{n-1} -> h with a least-squares fit.

    First differences of a subadditive sequence approach the limit like
    h + a/n + b/n^{3/2} + c/n^2 (the fractional power carries the local
    CLT correction of the word-length distribution); fitting the tail of
    the difference sequence removes the bias that a bare last difference
    would keep.
    """
    diffs = np.diff(entropies)
    ns = np.arange(1, n_max + 1)
    window = ns[ns >= 3]
    if len(window) >= 6:
        powers = (1.0, 1.5, 2.0)
    elif len(window) >= 4:
        powers = (1.0, 1.5)
    elif len(window) >= 2:
        powers = (1.0,)
    else:
        return float(diffs[-1]), (n_max, n_max), ()
    d = diffs[window - 1]
    A = np.column_stack([np.ones(len(window))] + [window ** (-p) for p in powers])
    coef, *_ = np.linalg.lstsq(A, d, rcond=None)
    return float(coef[0]), (int(window[0]), int(window[-1])), powers


def asymptotic_entropy(
    mu: StepDistribution,
    n_max: int,
    sbm_samples: int = 2000,
    seed: int = 0,
    quantized: bool = False,
    max_support: int = 40_000_000,
) -> AsymptoticEntropyEstimate:
    """h(G, mu) from exact convolution powers up to n_max.

    Returns the extrapolated first-difference estimate together with the
    full H(mu^{*n}) table and a sampled Shannon-McMillan-Breiman
    diagnostic: the mean of -(1/n) log mu^{*n}(r_n), whose exact
    expectation is H(mu^{*n})/n, must agree within 3 sigma.
    """
    series = convolve_exact(mu, n_max, max_support=max_support, quantized=quantized)
    h_fit, window, powers = extrapolate_entropy_differences(series.entropies, n_max)
    plain = float(series.entropies[-1] - series.entropies[-2]) if n_max >= 1 else 0.0

    mats = mu.matrices()
    rng = stream(seed, _TAG_SBM)
    if series.quantized:
        cur = np.broadcast_to(np.eye(2), (sbm_samples, 2, 2)).copy()
    else:
        mats = np.round(mats).astype(np.int64)
        cur = np.broadcast_to(np.eye(2, dtype=np.int64), (sbm_samples, 2, 2)).copy()
    for _ in range(n_max):
        idx = mu.sample_indices(rng, sbm_samples)
        cur = cur @ mats[idx]
    vals = np.array([series.table.mass_of_matrix(c) for c in cur])
    if np.any(vals <= 0):
        raise AssertionError("sampled walk endpoint missing from the exact convolution support")
    logs = -np.log(vals) / n_max
    return AsymptoticEntropyEstimate(
        value=max(h_fit, 0.0),
        plain_difference=plain,
        n_max=n_max,
        entropies=series.entropies,
        support_sizes=series.support_sizes,
        fit_window=window,
        fit_powers=tuple(powers),
        sbm_mean=float(logs.mean()),
        sbm_stderr=float(logs.std(ddof=1) / np.sqrt(sbm_samples)),
        sbm_target=float(series.entropies[-1] / n_max),
        sbm_samples=sbm_samples,
    )


# ---------------------------------------------------------------------------
# the entropy-gap report
# ---------------------------------------------------------------------------


@dataclass
class EntropyReport:
    h_asymptotic: float
    h_asymptotic_stderr: float      # extrapolation spread, not statistical
    h_boundary: float
    h_boundary_stderr: float
    n_used: int
    boundary_samples: int
    ratio: float | None
    ratio_stderr: float | None
    poisson_consistent: bool | None
    ratio_undefined: bool
    inequality_ok: bool              # 0 <= h_nu <= h + 2 sigma

    def as_dict(self):
        return self.__dict__.copy()


def entropy_gap_report(
    mu: StepDistribution,
    nu: GridMeasure | None = None,
    n_max: int = 12,
    grid_size: int = 8192,
    samples: int = 100_000,
    delta_cells: int = 8,
    seed: int = 0,
    tol: float = 0.2,
    quantized: bool = False,
    boundary: BoundaryEntropyEstimate | None = None,
    asymptotic: AsymptoticEntropyEstimate | None = None,
) -> EntropyReport:
    """Bundle h, h_nu, and their ratio; the Poisson-boundary criterion
    holds exactly when the ratio is 1, flagged within +-tol.

    Precomputed boundary/asymptotic estimates may be supplied to avoid
    recomputing the convolution powers.
    """
    if boundary is None:
        if nu is None:
            nu = estimate_stationary_measure(mu, grid_size=grid_size, seed=seed)
        boundary = boundary_entropy(mu, nu, samples=samples, delta_cells=delta_cells, seed=seed)
    be = boundary
    ae = asymptotic if asymptotic is not None else asymptotic_entropy(
        mu, n_max, seed=seed, quantized=quantized)
    # spread between the fitted estimate and the plain difference is the
    # honest systematic scale of the extrapolation
    h_se = abs(ae.value - ae.plain_difference) / 2.0
    h = ae.value
    h_nu = be.value
    undefined = h <= max(3.0 * h_se, 1e-3)
    if undefined:
        ratio = ratio_se = None
        consistent = None
    else:
        ratio = h_nu / h
        ratio_se = abs(ratio) * float(np.hypot(be.stderr / max(h_nu, 1e-12), h_se / h))
        consistent = bool(1.0 - tol <= ratio <= 1.0 + tol)
    ineq = (h_nu >= -2.0 * be.stderr) and (h_nu <= h + 2.0 * np.hypot(be.stderr, h_se))
    return EntropyReport(
        h_asymptotic=h,
        h_asymptotic_stderr=h_se,
        h_boundary=h_nu,
        h_boundary_stderr=be.stderr,
        n_used=n_max,
        boundary_samples=be.samples,
        ratio=ratio,
        ratio_stderr=ratio_se,
        poisson_consistent=consistent,
        ratio_undefined=undefined,
        inequality_ok=bool(ineq),
    )


# ---------------------------------------------------------------------------
# weak-convergence probe
# ---------------------------------------------------------------------------


@dataclass
class ConcentrationCurve:
    ns: np.ndarray
    median_width: np.ndarray     # median over trials of the smallest arc with `quantile` mass
    quantile: float
    trials: int

    def as_dict(self):
        return {
            "ns": [int(v) for v in self.ns],
            "median_width": [float(v) for v in self.median_width],
            "quantile": self.quantile,
            "trials": self.trials,
        }


def _smallest_arc_width(nu_cdf: np.ndarray, grid: np.ndarray, q: float) -> float:
    ext = np.concatenate([nu_cdf, nu_cdf[1:] + 1.0])
    xg = np.concatenate([grid, grid[1:] + 1.0])
    idx = np.searchsorted(ext, nu_cdf + q, side="left").clip(0, len(ext) - 1)
    return float(np.min(xg[idx] - grid))


def dirac_convergence_probe(
    mu: StepDistribution,
    nu: GridMeasure,
    horizon: int = 50,
    trials: int = 20,
    quantile: float = 0.99,
    seed: int = 0,
) -> ConcentrationCurve:
    """Concentration of r_n nu: per n, the median over seeded trials of the
    smallest arc carrying `quantile` of the pushed-forward mass.

    r_n grows by composition on the inside, so it is maintained as an
    exact matrix product for Mobius families (constant cost per step)
    and as a word otherwise.
    """
    from .maps import ProjectiveMatrixMap

    mats = mu.matrices()
    widths = np.zeros((trials, horizon + 1))
    for t in range(trials):
        rng = stream(seed, _TAG_DIRAC, t)
        widths[t, 0] = _smallest_arc_width(nu.cdf, nu.grid, quantile)
        rmat = np.eye(2)
        word_maps: list = []
        for n in range(1, horizon + 1):
            idx = int(mu.sample_indices(rng, 1)[0])
            if mats is not None:
                # rescale every step: the action is scale-invariant and the
                # raw product's determinant drowns in float cancellation
                rmat = rmat @ mats[idx]
                rmat = rmat / np.max(np.abs(rmat))
                rn = ProjectiveMatrixMap(rmat)
            else:
                word_maps.insert(0, mu.atoms[idx])  # g_n is applied first
                rn = Word(tuple(word_maps))
            pushed = nu.pushforward(rn)
            widths[t, n] = _smallest_arc_width(pushed.cdf, pushed.grid, quantile)
    return ConcentrationCurve(np.arange(horizon + 1), np.median(widths, axis=0), quantile, trials)
