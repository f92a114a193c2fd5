"""Monte Carlo lower bounds on the tuning protocol's privacy level.

Simulates the univariate Gaussian distinguishing game that best-of-many
selection over a noisy-gradient mechanism reduces to: each trial flips a
fair truth bit, draws a run count, draws that many unit-variance scores
whose means encode the truth bit, and reports the maximum. Thresholding
the maxima gives false-positive and false-negative rates; upper
confidence limits on those rates convert into a lower confidence bound
on the privacy parameter that any valid guarantee must exceed.
"""

from __future__ import annotations

import dataclasses
import math
import os
from concurrent import futures

import numpy as np
from scipy import optimize, stats
from scipy.special import ndtri

from .runcount import RunCountDist
from .tradeoff import DpSgdConfig, gdp_approx_mu, gdp_mu_from_eps_delta

__all__ = [
    "GameConfig",
    "AuditReport",
    "ThresholdSweep",
    "THREADS_ENV_VAR",
    "thread_count",
    "calibrate_sigma_gdp",
    "simulate_game",
    "clopper_pearson_upper",
    "eps_lower_bound",
    "sweep_thresholds",
    "run_audit",
]

THREADS_ENV_VAR = "PRIVTUNE_THREADS"
_BLOCK_SIZE = 1 << 20
_N_BULK_LEVELS = 256
_N_TAIL_LEVELS = 256
_TAIL_FLOOR = 1e-5


@dataclasses.dataclass(frozen=True)
class GameConfig:
    """Parameters of one distinguishing-game experiment.

    Attributes:
      config: noise multiplier, sampling rate, and iteration count of
        the base mechanism.
      dist: run-count distribution of the tuning protocol.
      trials: number of simulated games.
      seed: base seed of the reproducible random stream.
      confidence: two-sided confidence level for the error-rate bounds.
      delta: additive slack of the privacy guarantee being tested.
    """

    config: DpSgdConfig
    dist: RunCountDist
    trials: int = 10**7
    seed: int = 0
    confidence: float = 0.95
    delta: float = 1e-5

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if not 0.0 < self.confidence < 1.0:
            raise ValueError(
                f"confidence must be in (0, 1), got {self.confidence}"
            )
        if not 0.0 <= self.delta < 1.0:
            raise ValueError(f"delta must be in [0, 1), got {self.delta}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(
                f"seed must be a 64-bit unsigned integer, got {self.seed}"
            )


@dataclasses.dataclass(frozen=True)
class AuditReport:
    """Outcome of a threshold-swept distinguishing experiment.

    Attributes:
      best_threshold: score threshold maximizing the concluded bound.
      counts: (true positive, false positive, true negative, false
        negative) trial counts at the best threshold; sums to trials.
      fp_upper: upper confidence limit on the false-positive rate.
      fn_upper: upper confidence limit on the false-negative rate.
      eps_lower: concluded lower confidence bound, nonnegative.
    """

    best_threshold: float
    counts: tuple[int, int, int, int]
    fp_upper: float
    fn_upper: float
    eps_lower: float

    def __post_init__(self) -> None:
        if len(self.counts) != 4 or any(c < 0 for c in self.counts):
            raise ValueError(
                f"counts must be four nonnegative integers, got {self.counts}"
            )
        if self.eps_lower < 0.0:
            raise ValueError(f"eps_lower must be >= 0, got {self.eps_lower}")


def thread_count() -> int:
    """Worker count: the PRIVTUNE_THREADS env var, else all logical cores."""
    raw = os.environ.get(THREADS_ENV_VAR)
    if raw is not None:
        try:
            count = int(raw)
        except ValueError:
            count = 0
        if count < 1:
            raise ValueError(
                f"{THREADS_ENV_VAR} must be a positive integer, got {raw!r}"
            )
        return count
    return os.cpu_count() or 1


def calibrate_sigma_gdp(
    eps_b: float, delta: float, tau: float, n_iters: int
) -> float:
    """Noise multiplier whose composed Gaussian-DP level matches a budget.

    Inverts the composed noisy-gradient Gaussian-DP approximation so
    that the base mechanism satisfies (eps_b, delta)-DP.

    Args:
      eps_b: target privacy parameter of the base mechanism.
      delta: target additive slack.
      tau: sampling rate in (0, 1].
      n_iters: number of composed iterations.

    Returns:
      The calibrated noise multiplier, searched in [1, 1e5].
    """
    mu_target = gdp_mu_from_eps_delta(eps_b, delta)
    return float(
        optimize.brentq(
            lambda s: gdp_approx_mu(DpSgdConfig(s, tau, n_iters)) - mu_target,
            1.0,
            1e5,
            xtol=1e-10,
        )
    )


def _simulate_block(
    cfg: GameConfig,
    block: int,
    truth_out: np.ndarray,
    score_out: np.ndarray,
) -> None:
    """Fills one fixed-size block of trials from its own keyed stream."""
    lo = block * _BLOCK_SIZE
    hi = min(lo + _BLOCK_SIZE, cfg.trials)
    size = hi - lo
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, block]))
    truth = rng.integers(0, 2, size=size)
    counts = cfg.dist.sample(rng, size)
    mech = cfg.config
    shift = math.sqrt(mech.n_iters) / mech.sigma
    if mech.tau == 1.0:
        uniform = rng.random(size)
        with np.errstate(divide="ignore"):
            top = ndtri(np.exp(np.log(uniform) / counts))
        scores = top + shift * truth
    else:
        scores = np.empty(size)
        for k in np.unique(counts):
            rows = np.nonzero(counts == k)[0]
            normals = rng.standard_normal((rows.size, int(k)))
            fractions = rng.binomial(
                mech.n_iters, mech.tau, size=(rows.size, int(k))
            ) / float(mech.n_iters)
            means = fractions * shift * truth[rows, None]
            scores[rows] = np.max(normals + means, axis=1)
    truth_out[lo:hi] = truth
    score_out[lo:hi] = scores


def simulate_game(cfg: GameConfig) -> tuple[np.ndarray, np.ndarray]:
    """Runs the distinguishing game for every trial.

    Each trial flips a fair truth bit and draws a run count k. Run
    scores are unit-variance Gaussians: mean zero when the truth bit is
    0, and mean (Binomial(N, tau) / N) * sqrt(N) / sigma, drawn
    independently per run, when it is 1. At tau = 1 the mean is exactly
    sqrt(N) / sigma, and the maximum of the k standard draws is sampled
    in closed form through the quantile function.

    Trials are partitioned into fixed-size blocks, each driven by a
    stream keyed by (seed, block index), so results are bit-identical
    for any degree of parallelism.

    Args:
      cfg: game parameters.

    Returns:
      (truth bits, maximum scores), each an array of length trials.
    """
    truth = np.empty(cfg.trials, dtype=np.int64)
    scores = np.empty(cfg.trials, dtype=float)
    blocks = range((cfg.trials + _BLOCK_SIZE - 1) // _BLOCK_SIZE)
    workers = min(thread_count(), len(blocks))
    if workers > 1:
        with futures.ThreadPoolExecutor(max_workers=workers) as pool:
            jobs = [
                pool.submit(_simulate_block, cfg, b, truth, scores)
                for b in blocks
            ]
            for job in jobs:
                job.result()
    else:
        for b in blocks:
            _simulate_block(cfg, b, truth, scores)
    return truth, scores


def clopper_pearson_upper(
    successes: int, trials: int, confidence: float
) -> float:
    """One-sided upper confidence limit for a binomial proportion.

    Args:
      successes: observed success count.
      trials: number of draws, at least successes.
      confidence: one-sided confidence level in (0, 1).

    Returns:
      The exact upper limit via the beta quantile; 1.0 when every draw
      succeeded.
    """
    if not 0 <= successes <= trials:
        raise ValueError(
            f"need 0 <= successes <= trials, got ({successes}, {trials})"
        )
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence must be in (0, 1), got {confidence}")
    if successes == trials:
        return 1.0
    return float(stats.beta.ppf(confidence, successes + 1, trials - successes))


def eps_lower_bound(fp_upper: float, fn_upper: float, delta: float) -> float:
    """Privacy lower bound implied by bounded error rates.

    Evaluates max(log((1 - delta - FP) / FN),
    log((1 - delta - FN) / FP), 0) at the confidence-upper-bounded
    false-positive and false-negative rates.

    Args:
      fp_upper: upper confidence limit on the false-positive rate.
      fn_upper: upper confidence limit on the false-negative rate.
      delta: additive slack of the guarantee being tested.

    Returns:
      A nonnegative bound; infinite only if an error rate is exactly 0
      while the opposing numerator is positive.
    """
    for name, value in (
        ("fp_upper", fp_upper),
        ("fn_upper", fn_upper),
        ("delta", delta),
    ):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{name} must be in [0, 1], got {value}")
    best = 0.0
    for numerator, denominator in (
        (1.0 - delta - fp_upper, fn_upper),
        (1.0 - delta - fn_upper, fp_upper),
    ):
        if numerator <= 0.0:
            continue
        if denominator == 0.0:
            return math.inf
        best = max(best, math.log(numerator / denominator))
    return best


@dataclasses.dataclass(frozen=True)
class ThresholdSweep:
    """Per-threshold confusion summary of one simulated experiment.

    Attributes:
      thresholds: deduplicated candidate thresholds, increasing.
      fp_counts: truth-0 trials scoring above each threshold.
      fn_counts: truth-1 trials scoring at or below each threshold.
      fp_upper: Clopper-Pearson upper limits on the false-positive rate.
      fn_upper: Clopper-Pearson upper limits on the false-negative rate.
      eps_lower: implied lower bound at each threshold.
      n_null: number of truth-0 trials.
      n_alternative: number of truth-1 trials.
    """

    thresholds: np.ndarray
    fp_counts: np.ndarray
    fn_counts: np.ndarray
    fp_upper: np.ndarray
    fn_upper: np.ndarray
    eps_lower: np.ndarray
    n_null: int
    n_alternative: int


def sweep_thresholds(
    truth: np.ndarray,
    scores: np.ndarray,
    confidence: float,
    delta: float,
) -> ThresholdSweep:
    """Evaluates the lower bound over a fixed grid of score thresholds.

    Candidate thresholds are 512 empirical quantiles of the pooled
    max-score sample: 256 uniform levels covering the bulk plus 256
    log-spaced levels resolving the upper tail, where the
    bound-maximizing threshold of a max-score game sits. A trial
    guesses truth 1 when its score exceeds the threshold.
    False-positive and false-negative counts at each threshold receive
    one-sided Clopper-Pearson upper limits at the level matching the
    given two-sided confidence.

    Args:
      truth: truth bits of the simulated trials.
      scores: max scores of the simulated trials.
      confidence: two-sided confidence level for the rate bounds.
      delta: additive slack of the guarantee being tested.

    Returns:
      The per-threshold summary.
    """
    s0 = np.sort(scores[truth == 0])
    s1 = np.sort(scores[truth == 1])
    n0, n1 = s0.size, s1.size
    levels = np.sort(
        np.concatenate(
            [
                np.arange(1, _N_BULK_LEVELS + 1) / (_N_BULK_LEVELS + 1),
                1.0
                - np.geomspace(
                    1.0 / (_N_BULK_LEVELS + 1), _TAIL_FLOOR, _N_TAIL_LEVELS
                ),
            ]
        )
    )
    thresholds = np.unique(np.quantile(scores, levels))
    fp_cnt = n0 - np.searchsorted(s0, thresholds, side="right")
    fn_cnt = np.searchsorted(s1, thresholds, side="right")
    side = 1.0 - (1.0 - confidence) / 2.0
    fp_up = _upper_limits(fp_cnt, n0, side)
    fn_up = _upper_limits(fn_cnt, n1, side)
    with np.errstate(divide="ignore", invalid="ignore"):
        first = np.log(np.maximum(1.0 - delta - fp_up, 0.0) / fn_up)
        second = np.log(np.maximum(1.0 - delta - fn_up, 0.0) / fp_up)
    eps = np.maximum(np.maximum(first, second), 0.0)
    eps[np.isnan(eps)] = 0.0
    return ThresholdSweep(
        thresholds=thresholds,
        fp_counts=fp_cnt,
        fn_counts=fn_cnt,
        fp_upper=fp_up,
        fn_upper=fn_up,
        eps_lower=eps,
        n_null=n0,
        n_alternative=n1,
    )


def run_audit(cfg: GameConfig) -> AuditReport:
    """Simulates the game and concludes the best threshold's lower bound.

    Sweeps the threshold grid of ``sweep_thresholds`` over the simulated
    max scores and reports the threshold maximizing the implied bound.

    Args:
      cfg: game parameters.

    Returns:
      The report at the maximizing threshold.
    """
    truth, scores = simulate_game(cfg)
    sweep = sweep_thresholds(truth, scores, cfg.confidence, cfg.delta)
    best = int(np.argmax(sweep.eps_lower))
    return AuditReport(
        best_threshold=float(sweep.thresholds[best]),
        counts=(
            sweep.n_alternative - int(sweep.fn_counts[best]),
            int(sweep.fp_counts[best]),
            sweep.n_null - int(sweep.fp_counts[best]),
            int(sweep.fn_counts[best]),
        ),
        fp_upper=float(sweep.fp_upper[best]),
        fn_upper=float(sweep.fn_upper[best]),
        eps_lower=float(sweep.eps_lower[best]),
    )


def _upper_limits(counts: np.ndarray, n: int, side: float) -> np.ndarray:
    """Vectorized one-sided Clopper-Pearson upper limits."""
    if n == 0:
        return np.ones_like(counts, dtype=float)
    return np.where(
        counts == n,
        1.0,
        stats.beta.ppf(side, counts + 1, np.maximum(n - counts, 1)),
    )
