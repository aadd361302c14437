"""Numerical checks of the InfoNCE mutual-information bounds, the lambda
weight conditions, and evaluation metrics for trained models.

The bound checks use small discrete joints p(z, w) and the optimal critic
``f(z, w) = p(w | z) / p(w)``. For a batch with one positive ``w_1 ~ p(w|z)``
and ``M - 1`` negatives, the loss is
``-log f(z, w_1) / sum_k f(z, w_k)`` and the two inequalities checked are

    I(w; z)                 >= log M - E[loss]    (independent negatives)
    I(w; z) - I_neg(w; z)   >= log M - E[loss]    (negatives ~ q(w | z))

where ``I_neg`` is the mutual information of ``p(z) q(w | z)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .binning import BinSpec, assign_bins
from .errors import EmptyDatasetError, ShapeMismatchError
from .losses import compute_lambda, degenerate_rows
from .model import forward

PMF_TOL = 1e-12
BOUND_TOL = 1e-9
MAX_ALPHABET_CELLS = 64
MAX_EXHAUSTIVE_CONFIGS = 10**6


@dataclass(frozen=True)
class DiscreteJoint:
    """Joint pmf table, rows indexed by z and columns by w."""

    table: np.ndarray

    def __post_init__(self):
        t = np.array(self.table, dtype=np.float64)
        if t.ndim != 2 or np.any(t < 0) or not np.all(np.isfinite(t)):
            raise ValueError("joint must be a 2-D table of non-negative finite numbers")
        if abs(t.sum() - 1.0) > PMF_TOL:
            raise ValueError(f"joint sums to {t.sum()!r}, not 1")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    @property
    def p_z(self) -> np.ndarray:
        return self.table.sum(axis=1)

    @property
    def p_w(self) -> np.ndarray:
        return self.table.sum(axis=0)

    def conditional(self) -> np.ndarray:
        """p(w | z) with rows indexed by z."""
        return self.table / self.p_z[:, None]

    def density_ratio(self) -> np.ndarray:
        """p(w | z) / p(w); zero where the joint is zero."""
        return self.table / np.outer(self.p_z, self.p_w)


def exact_mi(joint: DiscreteJoint | np.ndarray) -> float:
    """Mutual information in nats, with 0 log 0 = 0."""
    if not isinstance(joint, DiscreteJoint):
        joint = DiscreteJoint(joint)
    t = joint.table
    outer = np.outer(joint.p_z, joint.p_w)
    nz = t > 0
    return float(np.sum(t[nz] * np.log(t[nz] / outer[nz])))


def ordinal_neighbor_sampler(n_z: int, n_w: int, decay: float = 1.0) -> np.ndarray:
    """q(w | z) proportional to exp(-decay * |z - w|) on symbol indices."""
    d = np.abs(np.arange(n_z)[:, None] - np.arange(n_w)[None, :])
    q = np.exp(-decay * d)
    return q / q.sum(axis=1, keepdims=True)


@dataclass(frozen=True)
class MIReport:
    exact_mi: float
    infonce_value: float
    bound_lhs: float
    general_lhs: float
    holds_eq2: bool
    holds_eq3: bool
    # not serialized
    std_error: float = field(default=0.0, compare=False)
    mode: str = field(default="exhaustive", compare=False)
    negative_mi: float = field(default=0.0, compare=False)

    def to_dict(self) -> dict:
        return {
            "exact-mi": self.exact_mi,
            "infonce-value": self.infonce_value,
            "bound-lhs": self.bound_lhs,
            "general-lhs": self.general_lhs,
            "holds-eq2": self.holds_eq2,
            "holds-eq3": self.holds_eq3,
        }


def _enumerate_loss(ratio, pos_cond, neg_cond, p_z, m):
    n_w = ratio.shape[1]
    tuples = np.array(list(itertools.product(range(n_w), repeat=m - 1)), dtype=np.intp)
    expected = 0.0
    for z in range(ratio.shape[0]):
        f = ratio[z]
        neg_prob = np.prod(neg_cond[z][tuples], axis=1)
        neg_sum = f[tuples].sum(axis=1)
        for w1 in range(n_w):
            if pos_cond[z, w1] == 0.0:
                continue
            per_tuple = np.log(f[w1] + neg_sum) - np.log(f[w1])
            expected += p_z[z] * pos_cond[z, w1] * float(np.dot(neg_prob, per_tuple))
    return expected


def _sample_rows(rng, cdf, rows, size):
    u = rng.random(size)
    idx = (u[..., None] > cdf[rows]).sum(axis=-1)
    return np.minimum(idx, cdf.shape[1] - 1)


def _monte_carlo_loss(ratio, pos_cond, neg_cond, p_z, m, trials, seed):
    rng = np.random.default_rng(seed)
    z = np.minimum(np.searchsorted(np.cumsum(p_z), rng.random(trials), side="right"), p_z.size - 1)
    w1 = _sample_rows(rng, np.cumsum(pos_cond, axis=1), z, trials)
    negs = _sample_rows(rng, np.cumsum(neg_cond, axis=1), z[:, None], (trials, m - 1))
    f_pos = ratio[z, w1]
    f_neg = ratio[z[:, None], negs].sum(axis=1)
    loss = np.log(f_pos + f_neg) - np.log(f_pos)
    return float(loss.mean()), float(loss.std(ddof=1) / math.sqrt(trials))


def verify_mi_bound(
    joint: DiscreteJoint | np.ndarray,
    m: int,
    trials: int = 100_000,
    seed: int = 0,
    negatives: np.ndarray | str | None = None,
    mode: str = "auto",
) -> MIReport:
    """Estimate E[InfoNCE] under the optimal critic and check both bounds.

    ``negatives`` is None for negatives drawn from the marginal p(w), a
    conditional table q(w | z), or ``"ordinal-neighbor"``. ``mode`` is
    ``"exhaustive"``, ``"montecarlo"`` or ``"auto"`` (exhaustive when the
    number of batch configurations is at most 10**6). Monte-Carlo checks
    allow three standard errors of slack, exhaustive ones 1e-9.
    """
    if not isinstance(joint, DiscreteJoint):
        joint = DiscreteJoint(joint)
    if m < 2:
        raise ValueError("batch size must be at least 2")
    n_z, n_w = joint.table.shape
    if n_z * n_w > MAX_ALPHABET_CELLS:
        raise ValueError(f"alphabet too large: {n_z} x {n_w} > {MAX_ALPHABET_CELLS} cells")
    p_z, p_w = joint.p_z, joint.p_w
    if np.any(p_z == 0) or np.any(p_w == 0):
        raise ValueError("degenerate marginal: a symbol has zero probability")

    if negatives is None:
        neg_cond = np.tile(p_w, (n_z, 1))
    elif isinstance(negatives, str):
        if negatives != "ordinal-neighbor":
            raise ValueError(f"unknown negative sampler {negatives!r}")
        neg_cond = ordinal_neighbor_sampler(n_z, n_w)
    else:
        neg_cond = np.asarray(negatives, dtype=np.float64)
        if neg_cond.shape != (n_z, n_w) or np.any(neg_cond < 0):
            raise ValueError("negative sampler must be a non-negative |Z| x |W| table")
        if np.any(np.abs(neg_cond.sum(axis=1) - 1.0) > PMF_TOL):
            raise ValueError("negative sampler rows must sum to 1")

    configs = n_z * n_w**m
    if mode == "auto":
        mode = "exhaustive" if configs <= MAX_EXHAUSTIVE_CONFIGS else "montecarlo"
    ratio, pos_cond = joint.density_ratio(), joint.conditional()
    if mode == "exhaustive":
        if configs > MAX_EXHAUSTIVE_CONFIGS:
            raise ValueError(f"{configs} configurations is too many to enumerate")
        loss, se = _enumerate_loss(ratio, pos_cond, neg_cond, p_z, m), 0.0
    elif mode == "montecarlo":
        loss, se = _monte_carlo_loss(ratio, pos_cond, neg_cond, p_z, m, trials, seed)
    else:
        raise ValueError(f"unknown mode {mode!r}")

    mi = exact_mi(joint)
    neg_mi = exact_mi(p_z[:, None] * neg_cond)
    bound_lhs = math.log(m) - loss
    general_lhs = mi - neg_mi
    slack = max(BOUND_TOL, 3.0 * se)
    return MIReport(
        exact_mi=mi,
        infonce_value=loss,
        bound_lhs=bound_lhs,
        general_lhs=general_lhs,
        holds_eq2=bool(mi >= bound_lhs - slack),
        holds_eq3=bool(general_lhs >= bound_lhs - slack),
        std_error=se,
        mode=mode,
        negative_mi=neg_mi,
    )


def preset_joints() -> dict[str, tuple[np.ndarray, str | None]]:
    """Named joints with their negative samplers, used by the CLI check suite."""
    ordinal = ordinal_neighbor_sampler(3, 3, decay=1.5) / 3.0
    return {
        "independent": (np.outer([0.2, 0.3, 0.5], [0.5, 0.25, 0.25]), None),
        "correlated-2x2": (np.array([[0.5, 0.0], [0.0, 0.5]]), None),
        "noisy-2x2": (np.array([[0.4, 0.1], [0.1, 0.4]]), None),
        "ordinal-neighbor": (ordinal, "ordinal-neighbor"),
    }


# ---------------------------------------------------------------------------
# lambda conditions


def pooled_covariance(a, b) -> float:
    """Sample covariance written as a mean over pairs.

    ``sum_{p,q} (a_p - a_q)(b_p - b_q) / (2 n (n - 1))`` is exactly zero when
    either input is constant, which the centered formula only is up to
    rounding.
    """
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    n = a.size
    if n < 2:
        return 0.0
    da = a[:, None] - a[None, :]
    db = b[:, None] - b[None, :]
    return float((da * db).sum() / (2.0 * n * (n - 1)))


def lambda_ratio_covariance(labels, kind, ratios, beta: float = 1.0, mode: str = "mean") -> float:
    lam = compute_lambda(labels, kind, beta, mode=mode)
    ratios = np.asarray(ratios, dtype=np.float64)
    if ratios.shape != lam.shape:
        raise ShapeMismatchError(f"ratios {ratios.shape} vs lambda {lam.shape}")
    off = ~np.eye(lam.shape[0], dtype=bool)
    return pooled_covariance(lam[off], ratios[off])


def lambda_condition_check(labels, kind, ratios, beta: float = 1.0, mode: str = "mean") -> tuple[bool, bool]:
    """``(condition1, condition2)`` for the lambda weights of a label batch.

    condition1: lambda and the density ratios have negative covariance
    (pooled over every anchor/negative pair). condition2: every
    non-degenerate row of lambda averages to 1 over its negatives.
    """
    lam = compute_lambda(labels, kind, beta, mode=mode)
    m = lam.shape[0]
    row_means = (lam.sum(axis=1) - np.diag(lam)) / (m - 1)
    keep = ~degenerate_rows(labels, kind) if mode == "mean" else np.ones(m, dtype=bool)
    condition2 = bool(np.all(np.abs(row_means[keep] - 1.0) <= BOUND_TOL))
    condition1 = bool(lambda_ratio_covariance(labels, kind, ratios, beta, mode) < 0.0)
    return condition1, condition2


# ---------------------------------------------------------------------------
# evaluation metrics


@dataclass(frozen=True)
class Metrics:
    mae: float
    coarse_accuracy: float
    ordinality_spearman: float

    def to_dict(self) -> dict:
        return {
            "mae": self.mae,
            "coarse-accuracy": self.coarse_accuracy,
            "ordinality-spearman": self.ordinality_spearman,
        }


def ordinality_spearman(rows) -> float:
    """Rank correlation between row index and position along the first principal axis.

    The axis is oriented so that projections grow with the row index.
    """
    rows = np.asarray(rows, dtype=np.float64)
    centered = rows - rows.mean(axis=0)
    if not np.any(centered):
        return 0.0
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    proj = centered @ vt[0]
    index = np.arange(rows.shape[0], dtype=np.float64)
    if np.dot(proj, index - index.mean()) < 0:
        proj = -proj
    if np.ptp(proj) == 0:
        return 0.0
    ranks = stats.rankdata(proj)
    if np.unique(ranks).size < ranks.size:
        return float(stats.spearmanr(index, proj).statistic)
    # without ties rho is a ratio of integers; one division rounds it
    # correctly (0.9 rather than 0.8999999999999998)
    n = ranks.size
    d2 = int(((ranks - 1 - index) ** 2).sum())
    denom = n * (n * n - 1)
    return (denom - 6 * d2) / denom


def metrics_from_predictions(values, coarse, y, bins, prompt_rows) -> Metrics:
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.size == 0:
        raise EmptyDatasetError("cannot evaluate on an empty dataset")
    mae = float(np.mean(np.abs(values - y)))
    acc = float(np.mean(np.asarray(coarse).reshape(-1) == np.asarray(bins).reshape(-1)))
    return Metrics(mae, acc, ordinality_spearman(prompt_rows))


def evaluate(model, data, spec: BinSpec) -> Metrics:
    """MAE, coarse accuracy and prompt-table ordinality of ``model`` on ``data``."""
    if len(data) == 0:
        raise EmptyDatasetError("cannot evaluate on an empty dataset")
    bins = data.bins if data.bins is not None else assign_bins(data.y, spec)
    out = forward(model, data.X, spec)
    return metrics_from_predictions(
        out.predictions.value[:, 0],
        out.probabilities.value.argmax(axis=1),
        data.y,
        bins,
        out.prompt_table.value,
    )


# ---------------------------------------------------------------------------
# gradient suite


def _gradient_cases():
    # name -> (builder factory, sampler); the factory closes over fixed
    # non-trainable inputs so builders stay deterministic
    from . import numcore as nc
    from .binning import default_bins
    from .embeddings import EncoderParams, encode, prompt_rows, similarity_logits
    from .head import DeltaNet, class_probabilities, delta_from_network, predict, predict_with_shifts
    from .losses import fcrc, infonce, regression_loss

    spec = default_bins(16.0, 77.0, 5)
    m, d = 4, 3

    def weights(rng, shape):
        return nc.constant(rng.normal(size=shape))

    def contrastive(direction, uniform):
        def sample(rng):
            labels = rng.uniform(16.0, 77.0, size=m)
            lam = np.ones((m, m)) if uniform else compute_lambda(labels)
            params = [rng.normal(size=(m, d)), rng.normal(size=(m, d))]

            def build(z, w):
                s = similarity_logits(nc.l2_normalize_rows(z), nc.l2_normalize_rows(w), 0.5)
                return infonce(s, direction) if uniform else fcrc(s, lam, direction)

            return build, params

        return sample

    def regression(rng):
        targets = rng.normal(size=m)
        pred = targets + rng.choice([-1.0, 1.0], size=m) * rng.uniform(0.1, 2.0, size=m)
        return (lambda p: regression_loss(p, targets)), [pred.reshape(-1, 1)]

    def softmax_head(rng):
        # cross-entropy against random targets keeps every gradient entry away from zero
        onehot = nc.constant(np.eye(spec.k)[rng.integers(0, spec.k, size=m)])
        return (lambda x: nc.neg(nc.sum_(nc.mul(nc.log(class_probabilities(x)), onehot)))), [rng.normal(size=(m, spec.k))]

    def predict_case(rng):
        def build(logits, delta):
            return nc.mean(predict(class_probabilities(logits), spec, delta))

        return build, [rng.normal(size=(m, spec.k)), rng.uniform(-0.3, 0.3, size=(1, spec.k))]

    def predict_shifts(rng):
        def build(logits, shifts):
            return nc.mean(predict_with_shifts(class_probabilities(logits), spec, shifts))

        return build, [rng.normal(size=(m, spec.k)), rng.uniform(-0.3, 0.3, size=(m, spec.k))]

    def delta_net(rng):
        h = 3
        probs = class_probabilities(rng.normal(size=(m, spec.k)))

        def build(A, a, B, c):
            shifts = delta_from_network(DeltaNet(A, a, B, c), probs)
            return nc.mean(predict_with_shifts(probs, spec, shifts))

        shapes = [(spec.k, h), (1, h), (h, spec.k), (1, spec.k)]
        return build, [rng.normal(size=s) * 0.5 for s in shapes]

    def encoder(rng):
        d_in, hidden = 3, 4
        X = rng.normal(size=(m, d_in))
        w = weights(rng, (m, d))

        def build(W1, b1, W2, b2):
            return nc.sum_(nc.mul(encode(EncoderParams(W1, b1, W2, b2), X), w))

        shapes = [(d_in, hidden), (1, hidden), (hidden, d), (1, d)]
        return build, [rng.normal(size=s) for s in shapes]

    def normalization(rng):
        w = weights(rng, (m, d))
        return (lambda x: nc.sum_(nc.mul(nc.l2_normalize_rows(x), w))), [rng.normal(size=(m, d))]

    def prompts(rng):
        bins = rng.integers(0, spec.k, size=m)
        w = weights(rng, (m, d))
        return (lambda t: nc.sum_(nc.mul(prompt_rows(t, bins), w))), [rng.normal(size=(spec.k, d))]

    return {
        "fcrc-image": contrastive("image", False),
        "fcrc-text": contrastive("text", False),
        "infonce-image": contrastive("image", True),
        "infonce-text": contrastive("text", True),
        "regression": regression,
        "softmax-head": softmax_head,
        "predict": predict_case,
        "predict-shifts": predict_shifts,
        "delta-network": delta_net,
        "encoder": encoder,
        "normalization": normalization,
        "prompt-rows": prompts,
    }


GRADIENT_CHECK_NAMES = tuple(_gradient_cases())


@dataclass(frozen=True)
class GradientSuiteResult:
    name: str
    instances: int
    max_relative_error: float
    worst_instance: int
    worst_coordinate: tuple
    passed: bool

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "instances": self.instances,
            "max-relative-error": self.max_relative_error,
            "worst-instance": self.worst_instance,
            "worst-coordinate": list(self.worst_coordinate),
            "passed": self.passed,
        }


def gradient_suite(seed: int = 0, tolerance: float = 1e-5, instances: int = 100, names=None, step: float = 1e-5):
    """Finite-difference check of every loss and head operation on seeded random inputs.

    The default step is 1e-5 rather than 1e-6: several outputs are in label
    units (tens), where rounding at the smaller step swamps small gradient
    entries.
    """
    from .numcore import gradient_check

    cases = _gradient_cases()
    names = list(cases) if names is None else list(names)
    results = []
    for index, name in enumerate(cases):
        if name not in names:
            continue
        rng = np.random.default_rng(np.random.SeedSequence([seed, index]))
        worst, worst_i, worst_at = -1.0, 0, (0, 0, 0)
        for i in range(instances):
            builder, params = cases[name](rng)
            report = gradient_check(builder, params, tolerance=tolerance, step=step)
            if report.max_relative_error > worst:
                worst, worst_i, worst_at = report.max_relative_error, i, report.worst_coordinate
        results.append(GradientSuiteResult(name, instances, worst, worst_i, worst_at, worst < tolerance))
    return results
