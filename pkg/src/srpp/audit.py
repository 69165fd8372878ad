"""Empirical privacy auditing.

A prior-aware Gaussian MAP attack infers the secret behind a privatized
output from known per-secret means, and a loss-threshold membership
attack scores examples by negative loss; both report standard metrics
(accuracy, advantage over the prior baseline, ROC AUC).
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AttackSpec:
    """Known per-secret output means, the secret prior, and the noise
    variance used by the mechanism under attack."""

    group_means: np.ndarray
    prior: np.ndarray
    sigma2: float

    def __post_init__(self):
        means = np.asarray(self.group_means, dtype=np.float64)
        prior = np.asarray(self.prior, dtype=np.float64)
        if means.ndim != 2 or prior.ndim != 1 or means.shape[0] != prior.shape[0]:
            raise ValueError("need k mean vectors and a length-k prior")
        if np.any(prior < 0) or abs(float(prior.sum()) - 1.0) > 1e-9:
            raise ValueError("prior must be nonnegative and sum to 1")
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")
        object.__setattr__(self, "group_means", means)
        object.__setattr__(self, "prior", prior)


@dataclass(frozen=True)
class AuditReport:
    """Attack accuracy, advantage over the prior baseline, optional AUC."""

    accuracy: float
    advantage: float
    auc: float | None = None

    def __post_init__(self):
        if self.auc is not None and not 0.0 <= self.auc <= 1.0:
            raise ValueError("auc must lie in [0, 1]")


def map_attack(outputs, spec: AttackSpec):
    """Most probable secret per output: argmax of log prior minus the
    squared distance to the secret's mean over 2 sigma2.

    Zero-prior secrets score -inf; exact score ties break toward the
    smallest secret index.
    """
    outputs = np.atleast_2d(np.asarray(outputs, dtype=np.float64))
    if outputs.shape[1] != spec.group_means.shape[1]:
        raise ValueError("output dimension does not match the group means")
    with np.errstate(divide="ignore"):
        log_prior = np.where(spec.prior > 0, np.log(spec.prior), -np.inf)
    d2 = ((outputs[:, None, :] - spec.group_means[None, :, :]) ** 2).sum(axis=2)
    scores = log_prior[None, :] - d2 / (2.0 * spec.sigma2)
    return scores.argmax(axis=1)


def attack_metrics(predictions, truth, prior) -> AuditReport:
    """Accuracy and advantage over the prior-only (majority) baseline."""
    predictions = np.asarray(predictions)
    truth = np.asarray(truth)
    prior = np.asarray(prior, dtype=np.float64)
    if predictions.size == 0 or truth.size == 0:
        raise ValueError("predictions and truth must be nonempty")
    if predictions.shape != truth.shape:
        raise ValueError("predictions and truth must have equal length")
    accuracy = float((predictions == truth).mean())
    return AuditReport(accuracy=accuracy, advantage=accuracy - float(prior.max()))


def loss_threshold_mia(member_losses, nonmember_losses) -> float:
    """ROC AUC of negative loss as a membership score, by exact pair
    counting with half credit for ties."""
    member = -np.asarray(member_losses, dtype=np.float64)
    nonmember = -np.asarray(nonmember_losses, dtype=np.float64)
    if member.size == 0 or nonmember.size == 0:
        raise ValueError("both loss vectors must be nonempty")
    diff = member[:, None] - nonmember[None, :]
    wins = np.count_nonzero(diff > 0) + 0.5 * np.count_nonzero(diff == 0)
    return float(wins / (member.size * nonmember.size))


def monotone_violations(values, direction: str) -> int:
    """Number of consecutive steps violating a monotone trend."""
    values = np.asarray(values, dtype=np.float64)
    if values.size < 2:
        return 0
    steps = np.diff(values)
    if direction == "nondecreasing":
        return int(np.sum(steps < 0))
    if direction == "nonincreasing":
        return int(np.sum(steps > 0))
    raise ValueError("direction must be 'nondecreasing' or 'nonincreasing'")
