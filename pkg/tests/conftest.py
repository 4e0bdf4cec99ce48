import itertools
import random

import pytest

from zoneseq.core import Route, Stop, StopKind, StopSequence, TravelTimeMatrix


def make_route(route_id="r1", stops=None, depot=(0.0, 0.0), actual=None,
               travel_times=None, quality=None):
    """Build a Route from (id, lat, lng, zone) tuples; depot id is 'depot'."""
    stop_map = {"depot": Stop("depot", depot[0], depot[1], kind=StopKind.DEPOT)}
    for sid, lat, lng, zone in stops or []:
        stop_map[sid] = Stop(sid, lat, lng, zone_id=zone)
    seq = None
    if actual is not None:
        seq = StopSequence(route_id=route_id, ids=tuple(actual))
    matrix = None
    if travel_times is not None:
        ids = tuple(sorted(stop_map))
        matrix = TravelTimeMatrix(
            ids=ids,
            t=tuple(tuple(float(travel_times[a][b]) for b in ids) for a in ids),
        )
    return Route(route_id=route_id, stops=stop_map, travel_times=matrix,
                 actual=seq, quality=quality)


def random_corpus(rng: random.Random, n_seqs=6, max_len=8, vocab=None):
    """Random zone-id sequences (with possible repeats) for model fuzzing."""
    vocab = vocab or [
        f"{letter}-{i}.{i}{suffix}"
        for letter in "ABC" for i in range(3) for suffix in "XY"
    ]
    corpus = []
    for _ in range(n_seqs):
        length = rng.randint(1, max_len)
        corpus.append([rng.choice(vocab) for _ in range(length)])
    return corpus


def patterned_instance(rng: random.Random, n_zones: int, strength=None):
    """A (corpus, zone set) pair with a planted order followed with
    probability `strength` per adjacent pair (random strength if None)."""
    if strength is None:
        strength = rng.random()
    zones = [
        f"{letter}-{rng.randint(0, 9)}.{rng.randint(0, 9)}{rng.choice('XYZ')}"
        for letter in "ABCDEFGHIJKLMNO"[:n_zones]
    ]
    template = zones[:]
    rng.shuffle(template)
    corpus = []
    for _ in range(rng.randint(3, 10)):
        seq = template[:]
        for i in range(len(seq) - 1):
            if rng.random() > strength:
                seq[i], seq[i + 1] = seq[i + 1], seq[i]
        corpus.append(seq)
    return corpus, sorted(zones)


def exhaustive_best_reward(model, zones, sentinel="stz"):
    """Max seq_reward over all zone orders, via DFS with shared prob cache."""
    cache = {}
    K = model.max_order
    best = [float("-inf")]

    def dfs(prefix, remaining, acc):
        if not remaining:
            if acc > best[0]:
                best[0] = acc
            return
        ctx = ([sentinel] + prefix)[-K:]
        for z in remaining:
            dfs(prefix + [z], remaining - {z},
                acc + model.prob(ctx, z, cache=cache))

    dfs([], frozenset(zones), 0.0)
    return best[0]


def brute_force_atsp(cost, start=0):
    """Optimal closed-tour cost by enumerating all (n-1)! tours."""
    n = len(cost)
    others = [i for i in range(n) if i != start]
    best = float("inf")
    for perm in itertools.permutations(others):
        tour = (start,) + perm
        c = sum(cost[tour[i]][tour[(i + 1) % n]] for i in range(n))
        if c < best:
            best = c
    return best
