"""Multi-component PPM-D variable-order Markov model over zone ids.

A zone id like "C-17.3D" is split into four components: the full id plus
the first three alphanumeric tokens ("C", "17", "3D"). One context model
is trained per component and their predictions are blended with fixed
weights (default 0.25 each).

Per-context probabilities follow the PPM-D escape rule: a symbol seen c
times out of t in a context gets (2c - 1) / (2t); the escape event gets
d / (2t) where d is the number of distinct successors. On escape the
context is shortened by one symbol; below order 0 the distribution is
uniform over the vocabulary plus one unseen-symbol slot. No exclusion is
applied when backing off.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .core import DEPOT_ZONE, ValidationError, ZoneSequence

EMPTY_TOKEN = "∅"  # pads missing components
N_COMPONENTS = 4
DEFAULT_ORDER = 5
DEFAULT_WEIGHTS = (0.25, 0.25, 0.25, 0.25)

_TOKEN_RE = re.compile(r"[0-9A-Za-z]+")

Context = Tuple[str, ...]


@dataclass(frozen=True)
class ZoneComponents:
    c0: str
    c1: str
    c2: str
    c3: str

    def __iter__(self):
        return iter((self.c0, self.c1, self.c2, self.c3))


def tokenize_zone(zone_id: str) -> ZoneComponents:
    """Split a zone id into its four component tokens.

    Component 0 is the full id; components 1-3 are the first three maximal
    alphanumeric runs, padded with the empty sentinel when absent. Runs
    beyond the third are discarded.
    """
    if not zone_id:
        raise ValidationError("cannot tokenize an empty zone id")
    runs = _TOKEN_RE.findall(zone_id)[:3]
    runs += [EMPTY_TOKEN] * (3 - len(runs))
    return ZoneComponents(zone_id, runs[0], runs[1], runs[2])


@dataclass
class PpmModel:
    """Trained counts for the four component models plus blend weights.

    ``counts[k]`` maps a context tuple (length 0..max_order) to the
    successor-count dict for component k. Immutable by convention once
    training returns; safe for concurrent readers.
    """

    max_order: int
    weights: Tuple[float, float, float, float]
    counts: List[Dict[Context, Dict[str, int]]]
    vocab: List[set]

    def __post_init__(self):
        if abs(sum(self.weights) - 1.0) > 1e-12:
            raise ValidationError(f"component weights {self.weights} do not sum to 1")
        if any(w < 0 for w in self.weights):
            raise ValidationError("component weights must be non-negative")

    # -- probability queries -------------------------------------------------

    def component_prob(self, k: int, context: Sequence[str], token: str) -> float:
        """PPM-D probability of `token` for component k given token context.

        Only the last max_order context tokens are used. Contexts with no
        recorded successors are skipped without charging an escape.
        """
        ctx = tuple(context[-self.max_order:]) if self.max_order else ()
        tables = self.counts[k]
        acc = 1.0
        for start in range(len(ctx) + 1):
            table = tables.get(ctx[start:])
            if not table:
                continue
            t = sum(table.values())
            c = table.get(token, 0)
            if c > 0:
                return acc * (2 * c - 1) / (2 * t)
            acc *= len(table) / (2 * t)
        return acc / (len(self.vocab[k]) + 1)

    def prob(
        self,
        context: Sequence[str],
        candidate: str,
        cache: Optional[dict] = None,
    ) -> float:
        """Blended probability of observing `candidate` after `context`.

        `context` and `candidate` are zone ids (the depot sentinel included
        by the caller where applicable). Always strictly positive, so novel
        zone ids remain rankable. An optional dict memoizes repeated
        queries within one inference run.
        """
        key = None
        if cache is not None:
            key = (tuple(context[-self.max_order:]), candidate)
            hit = cache.get(key)
            if hit is not None:
                return hit
        ctx_comp = [tuple(tokenize_zone(z)) for z in context[-self.max_order:]]
        cand_comp = tuple(tokenize_zone(candidate))
        p = 0.0
        for k, w in enumerate(self.weights):
            if w == 0.0:
                continue
            p += w * self.component_prob(k, [c[k] for c in ctx_comp], cand_comp[k])
        if cache is not None:
            cache[key] = p
        return p

    def seq_reward(
        self,
        zones: Sequence[str],
        sentinel: Optional[str] = DEPOT_ZONE,
        cache: Optional[dict] = None,
    ) -> float:
        """Sum of sliding-window conditional probabilities over a sequence."""
        if not zones:
            raise ValidationError("cannot score an empty zone sequence")
        full = ([sentinel] if sentinel else []) + list(zones)
        start = 1 if sentinel else 0
        return sum(
            self.prob(full[max(0, i - self.max_order):i], full[i], cache=cache)
            for i in range(start, len(full))
        )

    # -- serialization -------------------------------------------------------

    MAGIC = b"ZPPM"
    VERSION = 1

    def save(self, path) -> None:
        """Write the model as a versioned, sorted, length-prefixed binary."""
        out = [self.MAGIC, struct.pack("<HH", self.VERSION, self.max_order)]
        out.append(struct.pack("<4d", *self.weights))
        for k in range(N_COMPONENTS):
            triples = []
            for ctx in sorted(self.counts[k]):
                for token in sorted(self.counts[k][ctx]):
                    triples.append((ctx, token, self.counts[k][ctx][token]))
            out.append(struct.pack("<I", len(triples)))
            for ctx, token, count in triples:
                out.append(struct.pack("<H", len(ctx)))
                for tok in ctx + (token,):
                    raw = tok.encode("utf-8")
                    out.append(struct.pack("<H", len(raw)) + raw)
                out.append(struct.pack("<Q", count))
        with open(path, "wb") as f:
            f.write(b"".join(out))

    @classmethod
    def load(cls, path) -> "PpmModel":
        with open(path, "rb") as f:
            buf = f.read()
        if buf[:4] != cls.MAGIC:
            raise ValidationError(f"{path}: not a ZPPM model file")
        off = 4
        version, max_order = struct.unpack_from("<HH", buf, off)
        off += 4
        if version != cls.VERSION:
            raise ValidationError(f"{path}: unsupported model version {version}")
        weights = struct.unpack_from("<4d", buf, off)
        off += 32
        counts: List[Dict[Context, Dict[str, int]]] = []
        vocab: List[set] = []
        for _ in range(N_COMPONENTS):
            (n_triples,) = struct.unpack_from("<I", buf, off)
            off += 4
            tables: Dict[Context, Dict[str, int]] = {}
            voc = set()
            for _ in range(n_triples):
                (ctx_len,) = struct.unpack_from("<H", buf, off)
                off += 2
                toks = []
                for _ in range(ctx_len + 1):
                    (tlen,) = struct.unpack_from("<H", buf, off)
                    off += 2
                    toks.append(buf[off:off + tlen].decode("utf-8"))
                    off += tlen
                (count,) = struct.unpack_from("<Q", buf, off)
                off += 8
                ctx, token = tuple(toks[:-1]), toks[-1]
                tables.setdefault(ctx, {})[token] = count
                voc.update(toks)
            counts.append(tables)
            vocab.append(voc)
        return cls(max_order=max_order, weights=weights, counts=counts, vocab=vocab)


def train(
    corpus: Sequence,
    max_order: int = DEFAULT_ORDER,
    weights: Tuple[float, float, float, float] = DEFAULT_WEIGHTS,
    sentinel: Optional[str] = DEPOT_ZONE,
) -> PpmModel:
    """Count-train the four component models over a ZSgt corpus.

    The depot sentinel is prepended to every sequence so the first-zone
    choice is conditioned on it. Deterministic: identical corpus, order and
    weights give an identical model.
    """
    if not corpus:
        raise ValidationError("cannot train on an empty corpus")
    if max_order < 1:
        raise ValidationError(f"max_order must be >= 1, got {max_order}")
    counts: List[Dict[Context, Dict[str, int]]] = [{} for _ in range(N_COMPONENTS)]
    vocab: List[set] = [set() for _ in range(N_COMPONENTS)]
    for zseq in corpus:
        # Accepts ZoneSequence objects or bare lists of zone ids (raw
        # training streams may legitimately repeat a zone).
        items = list(zseq.zones) if isinstance(zseq, ZoneSequence) else list(zseq)
        zones = ([sentinel] if sentinel else []) + items
        streams = [tuple(tokenize_zone(z)) for z in zones]
        start = 1 if sentinel else 0
        for k in range(N_COMPONENTS):
            stream = [comp[k] for comp in streams]
            vocab[k].update(stream)
            tables = counts[k]
            for i in range(start, len(stream)):
                target = stream[i]
                for order in range(0, min(max_order, i) + 1):
                    ctx = tuple(stream[i - order:i])
                    table = tables.setdefault(ctx, {})
                    table[target] = table.get(target, 0) + 1
    return PpmModel(max_order=max_order, weights=tuple(weights), counts=counts, vocab=vocab)
