"""Desk-scale clipped noisy SGD on multinomial logistic regression.

Per-example gradients are computed in closed form (no autodiff), clipped
in L2 norm, averaged, and perturbed with gradient-space Gaussian noise
before the step-size multiplication.  Training operates on one realized
world; the counterfactual world only feeds the coupled directional-shift
check behind the worst-case cap inequality.
"""

from dataclasses import dataclass

import numpy as np

from srpp.accountant import SgdHyper
from srpp.calibrate import NoiseSpec
from srpp.caps import SubsamplingSpec, subsample_with
from srpp.rng import rng_stream


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix with integer class labels."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if features.ndim != 2 or labels.ndim != 1:
            raise ValueError("features must be n x d, labels a length-n vector")
        if features.shape[0] != labels.shape[0]:
            raise ValueError("features and labels disagree on n")
        if not np.all(np.isfinite(features)):
            raise ValueError("features must be finite")
        if labels.size and labels.min() < 0:
            raise ValueError("labels must be nonnegative integers")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0


@dataclass(frozen=True)
class TwoWorldPair:
    """Two label vectors differing only in the prevalence of one class."""

    y0: np.ndarray
    y1: np.ndarray
    edit_count: int
    p_low: float
    p_high: float
    secret_class: int

    def __post_init__(self):
        y0 = np.asarray(self.y0, dtype=np.int64)
        y1 = np.asarray(self.y1, dtype=np.int64)
        if y0.shape != y1.shape or y0.ndim != 1:
            raise ValueError("y0 and y1 must be label vectors of equal length")
        n = y0.size
        if int(np.sum(y0 != y1)) != self.edit_count:
            raise ValueError("edit_count must equal the Hamming distance")
        if int(np.sum(y0 == self.secret_class)) != int(self.p_low * n):
            raise ValueError("y0 prevalence does not match floor(p_low * n)")
        if int(np.sum(y1 == self.secret_class)) != int(self.p_high * n):
            raise ValueError("y1 prevalence does not match floor(p_high * n)")
        object.__setattr__(self, "y0", y0)
        object.__setattr__(self, "y1", y1)


@dataclass(frozen=True)
class Trajectory:
    """Iterates and diagnostics of one simulated run."""

    iterates: np.ndarray
    losses: np.ndarray
    seed: int
    hyper: SgdHyper
    noise: NoiseSpec
    shift_norms: np.ndarray | None = None
    k_realized: np.ndarray | None = None

    def __post_init__(self):
        iterates = np.asarray(self.iterates, dtype=np.float64)
        losses = np.asarray(self.losses, dtype=np.float64)
        if iterates.shape[0] != losses.shape[0] + 1:
            raise ValueError("need T+1 iterates for T per-iteration losses")
        object.__setattr__(self, "iterates", iterates)
        object.__setattr__(self, "losses", losses)

    @property
    def final(self) -> np.ndarray:
        return self.iterates[-1]


def make_synthetic(
    n: int, d: int, classes: int = 2, separation: float = 2.0, seed: int = 0
) -> LabeledDataset:
    """Gaussian class blobs with exactly balanced labels."""
    if n < classes or d < 1 or classes < 2:
        raise ValueError("need n >= classes >= 2 and d >= 1")
    rng = rng_stream(seed, 0xDA7A)
    means = rng.standard_normal((classes, d))
    means *= separation / 2.0 / np.linalg.norm(means, axis=1, keepdims=True)
    labels = rng.permutation(np.arange(n) % classes)
    features = means[labels] + rng.standard_normal((n, d))
    return LabeledDataset(features=features, labels=labels)


def _relabel_to_count(labels, secret_class, target, rng, other_classes):
    labels = labels.copy()
    current = int(np.sum(labels == secret_class))
    if current < target:
        pool = np.flatnonzero(labels != secret_class)
        if pool.size < target - current:
            raise ValueError(
                f"cannot reach {target} records of class {secret_class}: "
                f"only {pool.size} non-secret records available"
            )
        picks = rng.choice(pool, size=target - current, replace=False)
        labels[picks] = secret_class
    elif current > target:
        if not other_classes.size:
            raise ValueError("no non-secret class available for relabeling")
        pool = np.flatnonzero(labels == secret_class)
        picks = rng.choice(pool, size=current - target, replace=False)
        labels[picks] = rng.choice(other_classes, size=picks.size, replace=True)
    return labels


def build_two_world(
    labels, secret_class: int, p_low: float, p_high: float, seed: int
) -> TwoWorldPair:
    """Construct aligned worlds differing only in secret-class prevalence.

    Base labels are minimally relabeled to exactly floor(p_low * n)
    secret-class records (world 0), then minimally edited to
    floor(p_high * n) (world 1); the worlds differ on exactly
    |floor(p_high n) - floor(p_low n)| records.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if labels.ndim != 1 or labels.size == 0:
        raise ValueError("labels must be a nonempty vector")
    for name, p in (("p_low", p_low), ("p_high", p_high)):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1]")
    n = labels.size
    n0 = int(p_low * n)
    n1 = int(p_high * n)
    rng = rng_stream(seed, 0x2081D)
    other = np.setdiff1d(np.unique(labels), [secret_class])
    y0 = _relabel_to_count(labels, secret_class, n0, rng, other)
    y1 = _relabel_to_count(y0, secret_class, n1, rng, other)
    return TwoWorldPair(
        y0=y0,
        y1=y1,
        edit_count=abs(n1 - n0),
        p_low=p_low,
        p_high=p_high,
        secret_class=secret_class,
    )


def clip_gradient(g, C: float) -> np.ndarray:
    """Scale a gradient by min(1, C / ||g||); the zero vector is fixed."""
    if not C > 0:
        raise ValueError("C must be positive")
    g = np.asarray(g, dtype=np.float64)
    norm = float(np.linalg.norm(g))
    if norm <= C:
        return g.copy()
    return g * (C / norm)


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def _batch_gradients(W, X, y):
    # Per-example multinomial logistic gradients (p - onehot(y)) x^T.
    probs = _softmax(X @ W.T)
    resid = probs
    resid[np.arange(X.shape[0]), y] -= 1.0
    return resid[:, :, None] * X[:, None, :]


def _clipped_mean_gradient(W, X, y, C):
    grads = _batch_gradients(W, X, y)
    flat = grads.reshape(grads.shape[0], -1)
    norms = np.linalg.norm(flat, axis=1)
    factors = np.where(norms > C, C / np.maximum(norms, 1e-300), 1.0)
    return (flat * factors[:, None]).mean(axis=0).reshape(W.shape), norms


def run_sgd(
    data: LabeledDataset,
    hyper: SgdHyper,
    sub: SubsamplingSpec,
    noise: NoiseSpec,
    seed: int,
    counterfactual_labels=None,
) -> Trajectory:
    """Clipped noisy SGD on the realized world, deterministic given seed.

    Per iteration: subsample a batch, clip per-example gradients at C,
    average, add N(0, sigma2 I) in gradient space, and step with the
    per-iteration rate.  If a counterfactual label vector is supplied,
    the per-iteration directional shift of the pre-noise update against
    that world (from the same iterate and batch) and the realized batch
    discrepancy are recorded for the cap inequality check.
    """
    k = data.num_classes
    if k < 2:
        raise ValueError("need at least two classes")
    if sub.population != data.n:
        raise ValueError("subsampling population must equal the dataset size")
    D = k * data.dim
    if noise.dim != D:
        raise ValueError(f"noise dim {noise.dim} != parameter dim {D}")
    y_cf = None
    if counterfactual_labels is not None:
        y_cf = np.asarray(counterfactual_labels, dtype=np.int64)
        if y_cf.shape != data.labels.shape:
            raise ValueError("counterfactual labels must match the dataset length")
        if y_cf.max() >= k:
            raise ValueError("counterfactual labels exceed the class count")

    T = hyper.iterations
    C = hyper.clip
    rng = rng_stream(seed, 0x56D)
    W = np.zeros((k, data.dim))
    iterates = np.empty((T + 1, k, data.dim))
    iterates[0] = W
    losses = np.empty(T)
    shifts = np.empty(T) if y_cf is not None else None
    k_real = np.empty(T, dtype=np.int64) if y_cf is not None else None

    for t in range(T):
        idx = subsample_with(sub, rng)
        X = data.features[idx]
        y = data.labels[idx]
        losses[t] = float(
            -_log_softmax(X @ W.T)[np.arange(idx.size), y].mean()
        )
        grad, norms = _clipped_mean_gradient(W, X, y, C)
        eta = hyper.step_size(t)
        if y_cf is not None:
            grad_cf, _ = _clipped_mean_gradient(W, X, y_cf[idx], C)
            shifts[t] = eta * float(np.linalg.norm(grad - grad_cf))
            k_real[t] = int(np.sum(data.labels[idx] != y_cf[idx]))
        if noise.sigma2 > 0:
            grad = grad + rng.normal(0.0, noise.sigma, size=(k, data.dim))
        W = W - eta * grad
        iterates[t + 1] = W

    return Trajectory(
        iterates=iterates,
        losses=losses,
        seed=seed,
        hyper=hyper,
        noise=noise,
        shift_norms=shifts,
        k_realized=k_real,
    )


def evaluate(trajectory: Trajectory, test: LabeledDataset):
    """Accuracy, mean loss, and per-example cross-entropy losses of the
    final iterate on a labeled set."""
    if test.n == 0:
        raise ValueError("test set must be nonempty")
    W = trajectory.final
    if test.dim != W.shape[1]:
        raise ValueError("test features do not match the model dimension")
    if test.labels.max() >= W.shape[0]:
        raise ValueError("test labels exceed the model's class count")
    logits = test.features @ W.T
    losses = -_log_softmax(logits)[np.arange(test.n), test.labels]
    accuracy = float((logits.argmax(axis=1) == test.labels).mean())
    return accuracy, float(losses.mean()), losses
