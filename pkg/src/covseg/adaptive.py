"""Two-stage adaptive fitting: preliminary fused fit, data-driven weights,
then the weighted sparse fit."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .admm import AdmmResult, admm_solve
from .core import ObservationSeries, PenaltySpec, WeightSet


@dataclass(frozen=True)
class AdaptiveParams:
    """Exponents and floor of the adaptive weight map.

    ``a_t`` bounds the weight arguments away from zero; ``mu1`` acts on
    entry magnitudes, ``mu2`` on difference norms.  Defaults follow the
    fixed configuration used throughout: (0.8, 1.5) with a_t = T^{-1/2}.
    """

    a_t: float
    mu1: float = 0.8
    mu2: float = 1.5

    def __post_init__(self):
        if self.a_t <= 0 or self.mu1 <= 0 or self.mu2 <= 0:
            raise ValueError("a_t, mu1, mu2 must be positive")

    @classmethod
    def for_length(cls, T: int, mu1: float = 0.8, mu2: float = 1.5) -> "AdaptiveParams":
        return cls(a_t=T ** -0.5, mu1=mu1, mu2=mu2)


def uniform_weights(T: int, p: int) -> WeightSet:
    """Unit weights: all off-diagonal xi1 = 1, all xi2 = 1."""
    xi1 = np.ones((T, p, p))
    xi1[:, np.arange(p), np.arange(p)] = 0.0
    return WeightSet(xi1=xi1, xi2=np.ones(max(T - 1, 0)))


def adaptive_weights(theta_tilde: np.ndarray, params: AdaptiveParams) -> WeightSet:
    """Weights from a preliminary path: larger magnitudes get smaller weights.

    xi1[t,u,v] = max(|theta[t,u,v]|, a_t)^(-mu1) for u != v,
    xi2[t]     = max(||theta_t - theta_{t-1}||_F, a_t)^(-mu2).
    """
    theta_tilde = np.asarray(theta_tilde, dtype=float)
    T, p = theta_tilde.shape[0], theta_tilde.shape[1]
    if T < 2:
        raise ValueError("adaptive weights need a path of length >= 2")
    xi1 = np.maximum(np.abs(theta_tilde), params.a_t) ** (-params.mu1)
    xi1[:, np.arange(p), np.arange(p)] = 0.0
    diffs = theta_tilde[1:] - theta_tilde[:-1]
    norms = np.sqrt(np.sum(diffs**2, axis=(1, 2)))
    xi2 = np.maximum(norms, params.a_t) ** (-params.mu2)
    return WeightSet(xi1=xi1, xi2=xi2)


def two_stage_fit(
    data: ObservationSeries,
    lam: float,
    lambda1: float,
    lambda2: float,
    params: AdaptiveParams | None = None,
    spec: PenaltySpec | None = None,
    tol: float = 1e-3,
    max_iter: int = 20000,
    gap_stride: int = 1,
) -> tuple[AdmmResult, AdmmResult]:
    """Run the two-stage procedure; returns (stage-1 result, stage-2 result).

    Stage 1 is the non-adaptive fused fit (lambda1 = 0, fusion level
    ``lam``, unit weights); stage 2 reuses its path through the adaptive
    weights with (lambda1, lambda2).
    """
    if lam <= 0:
        raise ValueError("stage-1 fusion level must be positive")
    if params is None:
        params = AdaptiveParams.for_length(data.T)
    if spec is None:
        spec = PenaltySpec(lambda1=lambda1, lambda2=lambda2)

    stage1_spec = PenaltySpec(
        lambda1=0.0, lambda2=lam, epsilon=spec.epsilon, beta=spec.beta, gamma=spec.gamma
    )
    stage1 = admm_solve(
        data,
        stage1_spec,
        uniform_weights(data.T, data.p),
        tol=tol,
        max_iter=max_iter,
        gap_stride=gap_stride,
    )

    weights = adaptive_weights(stage1.theta, params)
    stage2_spec = PenaltySpec(
        lambda1=lambda1,
        lambda2=lambda2,
        epsilon=spec.epsilon,
        beta=spec.beta,
        gamma=spec.gamma,
    )
    stage2 = admm_solve(
        data,
        stage2_spec,
        weights,
        tol=tol,
        max_iter=max_iter,
        gap_stride=gap_stride,
    )
    return stage1, stage2
