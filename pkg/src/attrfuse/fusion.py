"""Sequential MAP posterior over objects from ternary, environment-tagged observations.

All weight arithmetic is in log domain. An adopted positive observation of
attribute ``i`` multiplies object ``j``'s weight by ``ppv / prior(i)`` when
``j`` has the attribute and by ``(1 - ppv) / (1 - prior(i))`` when it does
not; an adopted negative observation mirrors this with the NPV. Uncertain
outcomes and observations from outside a classifier's reliable region are
exact no-ops: their conditional factor reduces to the attribute prior itself,
so the ratio is 1. The normalization constant of the posterior is never
computed; normalizing over the finite object set replaces it exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from attrfuse.catalog import CatalogStats, NonDiscriminativeAttributeError, ObjectCatalog
from attrfuse.classifier import ClassifierModel, Outcome, classify

# Contradiction floor: a weight hit by a log(0) factor is clamped here instead
# of -inf, so later evidence can still revise a saturated hypothesis.
LOG_TINY = math.log(1e-300)

TIE_RELATIVE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Observation:
    """One classifier outcome tagged with its environment bin.

    ``in_reliable_region`` is precomputed from the classifier model; an
    observation outside the reliable region is always uncertain.
    """

    attribute_index: int
    bin_index: int
    outcome: Outcome
    in_reliable_region: bool

    def __post_init__(self):
        if self.outcome not in ("positive", "negative", "uncertain"):
            raise ValueError(f"unknown outcome {self.outcome!r}")
        if not self.in_reliable_region and self.outcome != "uncertain":
            raise ValueError("outcome must be uncertain outside the reliable region")


@dataclass(frozen=True)
class PosteriorState:
    """Log-domain unnormalized posterior plus adopted-observation bookkeeping."""

    log_weights: np.ndarray
    n_pos: np.ndarray
    n_neg: np.ndarray
    adopted_pos: frozenset[int]
    adopted_neg: frozenset[int]
    saturated: bool = False


@dataclass(frozen=True)
class Decision:
    """MAP decision: unique winner, or a tied candidate set with the break used.

    ``tie_broken_by`` is "none" for a unique maximum (and for unresolved ties
    when no generator was supplied, in which case ``winner`` is None),
    "prior" when the prior argmax resolved a posterior tie, and "random" for
    a seeded uniform pick among prior-tied candidates.
    """

    winner: int | None
    candidates: tuple[int, ...]
    tie_broken_by: str


def make_observation(model: ClassifierModel, bin_index: int, score: float) -> Observation:
    """Classify a raw score and tag it with the model's reliability for that bin."""
    reliable = bin_index in model.reliable_region
    outcome = classify(model, bin_index, score)
    return Observation(
        attribute_index=model.attribute_index,
        bin_index=bin_index,
        outcome=outcome,
        in_reliable_region=reliable,
    )


def init_posterior(catalog: ObjectCatalog) -> PosteriorState:
    """Posterior initialized to the catalog priors with no adopted observations."""
    log_weights = np.log(catalog.priors)
    n_pos = np.zeros(catalog.n_attributes, dtype=np.int64)
    n_neg = np.zeros(catalog.n_attributes, dtype=np.int64)
    for arr in (log_weights, n_pos, n_neg):
        arr.setflags(write=False)
    return PosteriorState(log_weights, n_pos, n_neg, frozenset(), frozenset())


def posterior(state: PosteriorState) -> np.ndarray:
    """Normalized posterior probabilities (max-shifted before exponentiation)."""
    shifted = np.exp(state.log_weights - state.log_weights.max())
    return shifted / shifted.sum()


def _log(x: float) -> float:
    return math.log(x) if x > 0.0 else -math.inf


def update(
    state: PosteriorState,
    observation: Observation,
    model: ClassifierModel,
    stats: CatalogStats,
) -> PosteriorState:
    """Fold one observation into the posterior; uncertain/unreliable ones are no-ops."""
    if observation.outcome == "uncertain" or not observation.in_reliable_region:
        return state
    i = observation.attribute_index
    if not stats.usable[i]:
        raise NonDiscriminativeAttributeError(
            f"attribute index {i} is constant across the catalog and cannot be fused"
        )
    try:
        cal = model.calibrations[observation.bin_index]
    except KeyError:
        raise ValueError(f"bin {observation.bin_index} is not calibrated") from None
    if not cal.reliable:
        return state

    w = float(stats.attribute_priors[i])
    has_attribute = stats.positive_mask[i]
    if observation.outcome == "positive":
        if cal.ppv is None:
            raise ValueError("adopted positive observation without a calibrated PPV")
        on_match = _log(cal.ppv) - math.log(w)
        on_other = _log(1.0 - cal.ppv) - math.log(1.0 - w)
    else:
        if cal.npv is None:
            raise ValueError("adopted negative observation without a calibrated NPV")
        on_match = _log(1.0 - cal.npv) - math.log(w)
        on_other = _log(cal.npv) - math.log(1.0 - w)

    log_weights = state.log_weights + np.where(has_attribute, on_match, on_other)
    saturating = np.isneginf(log_weights)
    if saturating.any():
        log_weights = np.where(saturating, LOG_TINY, log_weights)

    n_pos = state.n_pos.copy()
    n_neg = state.n_neg.copy()
    adopted_pos, adopted_neg = state.adopted_pos, state.adopted_neg
    if observation.outcome == "positive":
        n_pos[i] += 1
        adopted_pos = adopted_pos | {i}
    else:
        n_neg[i] += 1
        adopted_neg = adopted_neg | {i}
    for arr in (log_weights, n_pos, n_neg):
        arr.setflags(write=False)
    return PosteriorState(
        log_weights=log_weights,
        n_pos=n_pos,
        n_neg=n_neg,
        adopted_pos=adopted_pos,
        adopted_neg=adopted_neg,
        saturated=state.saturated or bool(saturating.any()),
    )


def decide(
    state: PosteriorState,
    catalog: ObjectCatalog,
    rng: np.random.Generator | None = None,
    rel_tol: float = TIE_RELATIVE_TOLERANCE,
) -> Decision:
    """Argmax over the posterior; posterior ties fall back to the prior argmax.

    When priors tie as well, the full tied set is returned and, if a
    generator is supplied, a uniform pick among the prior-tied candidates is
    recorded as the winner (experiments that must output a single object use
    this seeded pick).
    """
    log_weights = state.log_weights
    cutoff = log_weights.max() + math.log1p(-rel_tol)
    tied = np.flatnonzero(log_weights >= cutoff)
    if tied.size == 1:
        winner = int(tied[0])
        return Decision(winner=winner, candidates=(winner,), tie_broken_by="none")
    candidates = tuple(int(j) for j in tied)
    tied_priors = catalog.priors[tied]
    prior_cutoff = tied_priors.max() * (1.0 - rel_tol)
    prior_best = tied[tied_priors >= prior_cutoff]
    if prior_best.size == 1:
        return Decision(winner=int(prior_best[0]), candidates=candidates, tie_broken_by="prior")
    if rng is None:
        return Decision(winner=None, candidates=candidates, tie_broken_by="none")
    winner = int(prior_best[rng.integers(prior_best.size)])
    return Decision(winner=winner, candidates=candidates, tie_broken_by="random")


def posterior_ratio(state: PosteriorState, object_a: int, object_b: int) -> float:
    """Log ratio of the unnormalized posterior weights of two objects."""
    n = state.log_weights.shape[0]
    for j in (object_a, object_b):
        if not 0 <= j < n:
            raise IndexError(f"object index {j} out of range")
    return float(state.log_weights[object_a] - state.log_weights[object_b])
