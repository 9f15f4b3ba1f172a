"""Synthetic piecewise-stationary Gaussian data.

Three regime-covariance designs are provided: uniformly sparse (I),
banded with thresholding and random sign flips (II), and a sparse factor
model (III).  Break locations are drawn uniformly subject to a minimum
regime length.  All randomness flows through ``numpy.random.Generator``
streams spawned from a single ``SeedSequence``, so a scenario's seed
fully determines its output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import ObservationSeries, Segmentation

SETTINGS = ("I", "II", "III")


@dataclass(frozen=True)
class Scenario:
    """One synthetic configuration: design, dimensions, break count, seed.

    ``kappa`` is the minimum regime length as a fraction of T; the
    default 1 / (m_star + 8) shrinks as more breaks must fit.
    """

    setting: str
    T: int
    p: int
    m_star: int
    kappa: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.setting not in SETTINGS:
            raise ValueError(f"setting must be one of {SETTINGS}")
        if self.T < 1 or self.p < 2 or self.m_star < 0:
            raise ValueError("need T >= 1, p >= 2, m_star >= 0")
        kappa = self.kappa
        if kappa is None:
            kappa = 1.0 / (self.m_star + 8)
        if not 0.0 < kappa <= 1.0:
            raise ValueError("kappa must lie in (0, 1]")
        if (self.m_star + 1) * math.ceil(kappa * self.T) > self.T:
            raise ValueError("m_star breaks with minimum gap kappa*T do not fit in T")
        object.__setattr__(self, "kappa", float(kappa))


@dataclass(frozen=True)
class GroundTruth:
    """True break set, per-block covariances, expanded path and supports."""

    breakpoints: tuple
    sigmas: tuple
    path: np.ndarray
    supports: tuple

    @property
    def segmentation(self) -> Segmentation:
        return Segmentation(
            breakpoints=self.breakpoints,
            block_covs=self.sigmas,
            T=self.path.shape[0],
        )


def place_changepoints(T: int, m: int, kappa: float, rng: np.random.Generator) -> tuple:
    """Draw m break indices uniformly over configurations whose every gap
    (boundaries included) is at least kappa * T.

    Rejection sampling from the unconstrained uniform draw keeps the
    conditional law exact.  Breaks are 1-based in (1, T].
    """
    if m == 0:
        return ()
    min_gap = kappa * T
    if (m + 1) * math.ceil(min_gap) > T:
        raise ValueError("infeasible break placement")
    while True:
        breaks = np.sort(rng.choice(np.arange(2, T + 1), size=m, replace=False))
        edges = np.concatenate(([1], breaks, [T + 1]))
        if np.min(np.diff(edges)) >= min_gap:
            return tuple(int(b) for b in breaks)


def pd_repair(s: np.ndarray, floor: float = 0.01) -> np.ndarray:
    """Shift the spectrum up until the smallest eigenvalue clears ``floor``.

    If lambda_min(s) >= floor the input is returned unchanged; otherwise
    s + (zeta + |lambda_min|) I with zeta the first value of the
    sequence 0.005, 0.010, 0.015, ... giving lambda_min > floor.
    """
    s = np.asarray(s, dtype=float)
    lam_min = float(np.linalg.eigvalsh(s).min())
    if lam_min >= floor:
        return s
    zeta = 0.005
    # tolerance keeps the strict > comparison faithful to exact arithmetic
    while lam_min + zeta + abs(lam_min) <= floor + 1e-12:
        zeta += 0.005
    return s + (zeta + abs(lam_min)) * np.eye(s.shape[0])


def gen_sigma_setting_i(p: int, rng: np.random.Generator) -> np.ndarray:
    """Uniformly sparse regime covariance.

    Exactly ceil(0.8 * p(p-1)/2) strict-lower-triangle positions are
    zeroed (chosen without replacement); surviving off-diagonals are
    U[-2, 2], diagonal U[1.5, 3.5], then the spectrum is repaired.
    """
    n_low = p * (p - 1) // 2
    n_zero = math.ceil(0.8 * n_low)
    low = np.tril_indices(p, -1)
    vals = rng.uniform(-2.0, 2.0, size=n_low)
    zero_pos = rng.choice(n_low, size=n_zero, replace=False)
    vals[zero_pos] = 0.0
    s = np.zeros((p, p))
    s[low] = vals
    s = s + s.T
    s[np.arange(p), np.arange(p)] = rng.uniform(1.5, 3.5, size=p)
    return pd_repair(s)


def gen_sigma_setting_ii(p: int, rng: np.random.Generator) -> np.ndarray:
    """Banded regime covariance with thresholding and random sign flips.

    Sigma = D^{1/2} C D^{1/2} with D diagonal U[1.5, 4] and
    C_{uv} = a^{|u-v|}, a drawn from {0.3, 0.8} with equal probability.
    Entries below 0.05 in magnitude are zeroed, surviving off-diagonal
    pairs get a symmetric random sign, then the spectrum is repaired.
    """
    d = rng.uniform(1.5, 4.0, size=p)
    a = 0.3 if rng.random() < 0.5 else 0.8
    idx = np.arange(p)
    c = a ** np.abs(idx[:, None] - idx[None, :])
    s = np.sqrt(d)[:, None] * c * np.sqrt(d)[None, :]
    s[np.abs(s) < 0.05] = 0.0
    low = np.tril_indices(p, -1)
    flips = np.where(rng.random(size=low[0].size) < 0.5, -1.0, 1.0)
    sign = np.ones((p, p))
    sign[low] = flips
    sign[(low[1], low[0])] = flips
    return pd_repair(s * sign)


def gen_sigma_setting_iii(p: int, rng: np.random.Generator) -> np.ndarray:
    """Sparse factor-model regime covariance: Lambda Lambda' + Psi.

    The factor count r is uniform on {2..6}; exactly ceil(0.8 p r)
    loadings are zero, the rest U([-2, -0.5] union [0.5, 2]); Psi is
    diagonal U[0.5, 1], so the result is PD without repair.
    """
    r = int(rng.integers(2, 7))
    n_load = p * r
    lam = rng.uniform(0.5, 2.0, size=n_load) * np.where(
        rng.random(size=n_load) < 0.5, -1.0, 1.0
    )
    zero_pos = rng.choice(n_load, size=math.ceil(0.8 * n_load), replace=False)
    lam[zero_pos] = 0.0
    lam = lam.reshape(p, r)
    psi = rng.uniform(0.5, 1.0, size=p)
    return lam @ lam.T + np.diag(psi)


_GENERATORS = {
    "I": gen_sigma_setting_i,
    "II": gen_sigma_setting_ii,
    "III": gen_sigma_setting_iii,
}


def sample_gaussian(truth: GroundTruth, rng: np.random.Generator) -> ObservationSeries:
    """Independent X_t ~ N(0, path_t) via per-block Cholesky factors."""
    path = truth.path
    T, p = path.shape[0], path.shape[1]
    seg = truth.segmentation
    x = np.empty((T, p))
    eps = rng.standard_normal((T, p))
    for (start, end), cov in zip(seg.block_bounds(), seg.block_covs):
        chol = np.linalg.cholesky(cov)
        x[start - 1 : end] = eps[start - 1 : end] @ chol.T
    return ObservationSeries(x)


def _support_set(sigma: np.ndarray) -> frozenset:
    p = sigma.shape[0]
    off = ~np.eye(p, dtype=bool)
    return frozenset(
        (int(u), int(v)) for u, v in zip(*np.nonzero((sigma != 0.0) & off))
    )


def make_scenario(scenario: Scenario) -> tuple:
    """Build (GroundTruth, ObservationSeries) for one scenario.

    The scenario seed is split into three independent streams (break
    placement, regime covariances, noise) so that, e.g., a longer series
    with the same seed keeps the same regime matrices.
    """
    ss = np.random.SeedSequence(scenario.seed)
    rng_breaks, rng_sigma, rng_noise = (np.random.default_rng(s) for s in ss.spawn(3))

    breaks = place_changepoints(scenario.T, scenario.m_star, scenario.kappa, rng_breaks)
    gen = _GENERATORS[scenario.setting]
    sigmas = tuple(gen(scenario.p, rng_sigma) for _ in range(scenario.m_star + 1))
    seg = Segmentation(breakpoints=breaks, block_covs=sigmas, T=scenario.T)
    truth = GroundTruth(
        breakpoints=breaks,
        sigmas=sigmas,
        path=seg.expand_path(),
        supports=tuple(_support_set(s) for s in sigmas),
    )
    return truth, sample_gaussian(truth, rng_noise)


def extra_samples(
    truth: GroundTruth, n: int, seed: int, stream: int = 1
) -> list:
    """Independent held-out series from the same ground truth.

    ``stream`` offsets the seed derivation so held-out batches never
    collide with the training stream of :func:`make_scenario`.
    """
    ss = np.random.SeedSequence((seed, stream))
    return [sample_gaussian(truth, np.random.default_rng(s)) for s in ss.spawn(n)]
