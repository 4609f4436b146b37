"""Proposal kernels and the tempered Metropolis-Hastings test.

Three kernels share one Gaussian form ``theta* ~ N(theta + drift, rw_std**2 I)``:

* random walk: ``drift = 0``;
* Langevin gradient (``lg``): ``drift = lr * grad``;
* adaptive Langevin gradient (``adapt_lg``): ``drift`` is a bias-corrected
  Adam direction built from the running gradient moments.

Proposal log-densities are reported without the shared normalizing constant;
only ``log_q_reverse - log_q_forward`` is ever used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

__all__ = [
    "KINDS",
    "Q_RATIO_MODES",
    "ProposalConfig",
    "AdamMoments",
    "Proposal",
    "propose_rw",
    "langevin_mean",
    "adapt_step",
    "propose_lg",
    "mh_log_alpha",
    "mh_accept",
]

KINDS = ("random_walk", "lg", "adapt_lg")
Q_RATIO_MODES = ("exact", "omit")
DEFAULT_LR = {"random_walk": 0.0, "lg": 0.1, "adapt_lg": 0.01}


@dataclass(frozen=True)
class ProposalConfig:
    kind: str = "adapt_lg"
    lr: Optional[float] = None  # gradient step scale; None picks the per-kind default
    rw_std: float = 0.005
    lg_rate: float = 0.5
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    # "exact": reverse density from a fresh drift at theta*; "omit": treat gradient moves as symmetric
    q_ratio: str = "exact"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown proposal kind {self.kind!r}; expected one of {KINDS}")
        if self.lr is None:
            object.__setattr__(self, "lr", DEFAULT_LR[self.kind])

    def errors(self) -> list[str]:
        errs = []
        if self.kind != "random_walk" and not self.lr > 0:
            errs.append("lr: must be > 0")
        if not self.rw_std > 0:
            errs.append("rw_std: must be > 0")
        if not 0.0 <= self.lg_rate <= 1.0:
            errs.append("lg_rate: must lie in [0, 1]")
        if not (0.0 <= self.adam_beta1 < 1.0 and 0.0 <= self.adam_beta2 < 1.0):
            errs.append("adam_beta1/adam_beta2: must lie in [0, 1)")
        if not self.adam_eps > 0:
            errs.append("adam_eps: must be > 0")
        if self.q_ratio not in Q_RATIO_MODES:
            errs.append(f"q_ratio: must be one of {Q_RATIO_MODES}")
        return errs

    def validate(self) -> "ProposalConfig":
        errs = self.errors()
        if errs:
            raise ValueError("; ".join(errs))
        return self

    @property
    def uses_gradient(self) -> bool:
        return self.kind != "random_walk" and self.lg_rate > 0


@dataclass
class AdamMoments:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def zeros(cls, dim: int) -> "AdamMoments":
        return cls(np.zeros(dim), np.zeros(dim), 0)

    def copy(self) -> "AdamMoments":
        return AdamMoments(self.m.copy(), self.v.copy(), self.step)


@dataclass
class Proposal:
    theta_star: np.ndarray
    log_q_forward: float
    log_q_reverse: float
    used_gradient: bool
    # gradient at theta_star, when the kernel had to compute it
    grad_star: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def log_q_ratio(self) -> float:
        """``log Q(theta | theta*) - log Q(theta* | theta)``."""
        return self.log_q_reverse - self.log_q_forward


def _gauss_log_kernel(x: np.ndarray, mean: np.ndarray, std: float) -> float:
    d = x - mean
    return float(-0.5 * np.dot(d, d) / (std * std))


def propose_rw(theta: np.ndarray, cfg: ProposalConfig, rng: np.random.Generator) -> Proposal:
    theta_star = theta + cfg.rw_std * rng.standard_normal(theta.shape[0])
    return Proposal(theta_star, 0.0, 0.0, used_gradient=False)


def langevin_mean(theta: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
    grad = np.asarray(grad, dtype=np.float64)
    if not np.all(np.isfinite(grad)):
        raise ValueError("non-finite gradient")
    return theta + lr * grad


def adapt_step(grad: np.ndarray, moments: AdamMoments, lr: float, beta1: float = 0.9,
               beta2: float = 0.999, eps: float = 1e-8) -> tuple[np.ndarray, AdamMoments]:
    """One bias-corrected Adam direction; ``moments`` is left untouched."""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != moments.m.shape:
        raise ValueError(f"gradient length {grad.shape} does not match moments {moments.m.shape}")
    step = moments.step + 1
    m = beta1 * moments.m + (1.0 - beta1) * grad
    v = beta2 * moments.v + (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1**step)
    v_hat = v / (1.0 - beta2**step)
    direction = lr * m_hat / (np.sqrt(v_hat) + eps)
    return direction, AdamMoments(m, v, step)


def _drift(grad, cfg: ProposalConfig, moments: AdamMoments):
    if not np.all(np.isfinite(grad)):
        raise ValueError("non-finite gradient")
    if cfg.kind == "adapt_lg":
        return adapt_step(grad, moments, cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    return cfg.lr * grad, moments


def propose_lg(theta: np.ndarray, grad_fn: Callable[[np.ndarray], np.ndarray], cfg: ProposalConfig,
               moments: AdamMoments, rng: np.random.Generator,
               grad_theta: Optional[np.ndarray] = None) -> tuple[Proposal, AdamMoments]:
    """Gradient-shifted Gaussian proposal with its forward and reverse densities.

    The reverse mean is a fresh drift from ``theta*``.  For ``adapt_lg`` it is
    taken from a copy of the moments already advanced by the forward gradient,
    so the returned moments see exactly one update per call.

    With ``cfg.q_ratio == "omit"`` the reverse density is not evaluated, no
    gradient is taken at ``theta*`` and both log-densities are reported as 0.
    """
    if grad_theta is None:
        grad_theta = grad_fn(theta)
    drift, new_moments = _drift(grad_theta, cfg, moments)
    mean_fwd = theta + drift
    theta_star = mean_fwd + cfg.rw_std * rng.standard_normal(theta.shape[0])
    if cfg.q_ratio == "omit":
        return Proposal(theta_star, 0.0, 0.0, used_gradient=True), new_moments

    grad_star = np.asarray(grad_fn(theta_star), dtype=np.float64)
    drift_rev, _ = _drift(grad_star, cfg, new_moments.copy())
    mean_rev = theta_star + drift_rev

    proposal = Proposal(
        theta_star=theta_star,
        log_q_forward=_gauss_log_kernel(theta_star, mean_fwd, cfg.rw_std),
        log_q_reverse=_gauss_log_kernel(theta, mean_rev, cfg.rw_std),
        used_gradient=True,
        grad_star=grad_star,
    )
    return proposal, new_moments


def mh_log_alpha(log_lik_star, log_lik, log_prior_star, log_prior, log_q_ratio, temperature) -> float:
    """Log acceptance probability; only the likelihood is tempered."""
    vals = (log_lik_star, log_lik, log_prior_star, log_prior, log_q_ratio, temperature)
    if any(math.isnan(x) for x in vals):
        raise ValueError("NaN passed to Metropolis-Hastings test")
    if temperature < 1:
        raise ValueError("temperature must be >= 1")
    a = (log_lik_star - log_lik) / temperature + (log_prior_star - log_prior) + log_q_ratio
    if math.isnan(a):
        # inf - inf: both states impossible under the target
        a = -math.inf
    return min(0.0, a)


def mh_accept(log_lik_star, log_lik, log_prior_star, log_prior, log_q_ratio, temperature,
              rng: np.random.Generator) -> bool:
    log_alpha = mh_log_alpha(log_lik_star, log_lik, log_prior_star, log_prior, log_q_ratio, temperature)
    # always consume one uniform so the stream position does not depend on alpha
    u = rng.random()
    return bool(u < math.exp(log_alpha))


def with_kind(cfg: ProposalConfig, kind: str) -> ProposalConfig:
    return replace(cfg, kind=kind, lr=None)
