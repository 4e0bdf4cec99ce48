"""Zone sequencing by one-step lookahead over a greedy PPM baseline policy.

Each lookahead candidate is scored by its immediate conditional probability
plus the reward-to-go of the greedy completion that follows it. All sliding
windows cross the prefix/completion boundary, so the objective stays
additive over one whole sequence and the classic rollout improvement
guarantee applies. Ties break lexicographically on zone id everywhere,
which makes runs reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

from .core import DEPOT_ZONE, ValidationError, ZoneSequence
from .ppm import PpmModel


@dataclass(frozen=True)
class RolloutState:
    """Partial zone sequence (prefix) plus the set of unvisited zones."""

    prefix: Tuple[str, ...]
    remaining: FrozenSet[str]

    def __post_init__(self):
        if set(self.prefix) & self.remaining:
            raise ValidationError("prefix and remaining overlap")

    @property
    def k(self) -> int:
        return len(self.prefix)


def apply_action(state: RolloutState, zone: str) -> RolloutState:
    """Move `zone` from remaining to the end of the prefix."""
    if zone not in state.remaining:
        raise ValidationError(f"zone {zone!r} is not available in this state")
    return RolloutState(
        prefix=state.prefix + (zone,),
        remaining=state.remaining - {zone},
    )


class _ProbCounter:
    """Wraps a model's prob with memoization and a call counter."""

    def __init__(self, model: PpmModel):
        self.model = model
        self.cache: dict = {}
        self.calls = 0

    def __call__(self, context: Sequence[str], candidate: str) -> float:
        self.calls += 1
        return self.model.prob(context, candidate, cache=self.cache)


def greedy_completion(
    model: PpmModel,
    state: RolloutState,
    sentinel: str = DEPOT_ZONE,
    _prob=None,
) -> List[str]:
    """Greedy baseline policy: repeatedly take the most probable next zone.

    Returns only the appended zones, not the prefix.
    """
    prob = _prob or _ProbCounter(model)
    seq = [sentinel] + list(state.prefix)
    remaining = set(state.remaining)
    out: List[str] = []
    K = model.max_order
    while remaining:
        ctx = seq[-K:]
        best = min(remaining, key=lambda z: (-prob(ctx, z), z))
        out.append(best)
        seq.append(best)
        remaining.remove(best)
    return out


def _suffix_reward(prob, prefix_ctx: List[str], suffix: Sequence[str], K: int) -> float:
    """Summed sliding-window probabilities of `suffix` continuing `prefix_ctx`."""
    seq = list(prefix_ctx)
    total = 0.0
    for z in suffix:
        total += prob(seq[-K:], z)
        seq.append(z)
    return total


def next_zone(
    model: PpmModel,
    state: RolloutState,
    sentinel: str = DEPOT_ZONE,
    _prob=None,
    diagnostics: Optional[Dict[str, float]] = None,
) -> str:
    """One-step lookahead: argmax of immediate reward + greedy reward-to-go."""
    if not state.remaining:
        raise ValidationError("no zones remaining")
    prob = _prob or _ProbCounter(model)
    K = model.max_order
    base_ctx = [sentinel] + list(state.prefix)
    best_zone, best_score = None, None
    for zone in sorted(state.remaining):
        completion = greedy_completion(
            model, apply_action(state, zone), sentinel=sentinel, _prob=prob
        )
        score = _suffix_reward(prob, base_ctx, [zone] + completion, K)
        if diagnostics is not None:
            diagnostics[zone] = score
        if best_score is None or score > best_score:
            best_zone, best_score = zone, score
    return best_zone


def rollout_sequence(
    model: PpmModel,
    route_id: str,
    zones: Sequence[str],
    sentinel: str = DEPOT_ZONE,
    stats: Optional[dict] = None,
) -> ZoneSequence:
    """Sequence a full zone set by repeated one-step lookahead.

    Pure function of (model, zones); the optional `stats` dict receives the
    number of probability evaluations under "prob_calls".
    """
    if not zones:
        raise ValidationError(f"route {route_id}: empty zone set")
    prob = _ProbCounter(model)
    state = RolloutState(prefix=(), remaining=frozenset(zones))
    while state.remaining:
        zone = next_zone(model, state, sentinel=sentinel, _prob=prob)
        state = apply_action(state, zone)
    if stats is not None:
        stats["prob_calls"] = prob.calls
    return ZoneSequence(route_id=route_id, zones=state.prefix)
