"""Dataset loading, zone-id repair and ground-truth zone sequence extraction.

Directory layout (JSON, UTF-8), field-compatible with the public Challenge
datasets:

  routes.json            route_id -> {"depot": {"lat","lng"},
                                      "stops": {stop_id: {"lat","lng","zone_id"}}}
  actual_sequences.json  route_id -> {stop_id: 0-based position}, optional;
                         position 0 is the depot.
  travel_times.json      route_id -> {from_id: {to_id: seconds}}, optional.
  quality.json           route_id -> "High"|"Medium"|"Low", optional.

The depot is stored under the reserved stop id "depot".
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .core import (
    Quality,
    Route,
    Stop,
    StopKind,
    StopSequence,
    TravelTimeMatrix,
    ValidationError,
    ZoneSequence,
    distance,
)

DEPOT_STOP_ID = "depot"


class Split(Enum):
    TRAIN = "Train"
    EVAL = "Eval"


@dataclass(frozen=True)
class Dataset:
    routes: Dict[str, Route]
    split: Split


@dataclass(frozen=True)
class ZoneRun:
    """A maximal run of consecutive same-zone stops in an actual sequence."""

    zone_id: str
    stop_count: int
    first_position: int

    def __post_init__(self):
        if self.stop_count < 1:
            raise ValidationError(f"zone run {self.zone_id}: stop_count must be >= 1")


def impute_zone(route: Route, stop: Stop) -> str:
    """Zone id of the nearest zoned delivery stop; ties go to the smaller stop id."""
    candidates = [
        s for s in route.delivery_stops() if s.zone_id and s.id != stop.id
    ]
    if not candidates:
        raise ValidationError(
            f"route {route.route_id}: no zoned stop available to impute {stop.id}"
        )
    best = min(candidates, key=lambda s: (distance(route, stop.id, s.id), s.id))
    return best.zone_id


def _load_json(path: Path):
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed JSON in {path.name}: {exc}") from exc


def load_dataset(dir_path, split: Split = Split.TRAIN) -> Dataset:
    """Load and fully validate a dataset directory.

    Every delivery stop with a missing zone id is imputed from its nearest
    zoned neighbour before validation completes.
    """
    dir_path = Path(dir_path)
    routes_path = dir_path / "routes.json"
    if not routes_path.exists():
        raise FileNotFoundError(f"missing routes.json in {dir_path}")
    raw_routes = _load_json(routes_path)

    actuals = {}
    if (dir_path / "actual_sequences.json").exists():
        actuals = _load_json(dir_path / "actual_sequences.json")
    matrices = {}
    if (dir_path / "travel_times.json").exists():
        matrices = _load_json(dir_path / "travel_times.json")
    qualities = {}
    if (dir_path / "quality.json").exists():
        qualities = _load_json(dir_path / "quality.json")

    routes: Dict[str, Route] = {}
    for route_id, body in raw_routes.items():
        routes[route_id] = _build_route(
            route_id,
            body,
            actuals.get(route_id),
            matrices.get(route_id),
            qualities.get(route_id),
        )
    return Dataset(routes=routes, split=split)


def _build_route(route_id, body, actual_raw, matrix_raw, quality_raw) -> Route:
    depot_raw = body.get("depot")
    if depot_raw is None:
        raise ValidationError(f"route {route_id}: missing depot entry")
    stops: Dict[str, Stop] = {
        DEPOT_STOP_ID: Stop(
            id=DEPOT_STOP_ID,
            lat=float(depot_raw["lat"]),
            lng=float(depot_raw["lng"]),
            kind=StopKind.DEPOT,
        )
    }
    for sid, s in body.get("stops", {}).items():
        if sid == DEPOT_STOP_ID:
            raise ValidationError(f"route {route_id}: stop id {DEPOT_STOP_ID!r} is reserved")
        stops[sid] = Stop(
            id=sid,
            lat=float(s["lat"]),
            lng=float(s["lng"]),
            zone_id=s.get("zone_id") or None,
        )

    actual = None
    if actual_raw is not None:
        positions = sorted(actual_raw.items(), key=lambda kv: kv[1])
        ids = tuple(sid for sid, _ in positions)
        if sorted(p for _, p in positions) != list(range(len(positions))):
            raise ValidationError(
                f"route {route_id}: actual sequence positions are not 0..n-1"
            )
        actual = StopSequence(route_id=route_id, ids=ids)

    matrix = None
    if matrix_raw is not None:
        ids = tuple(sorted(matrix_raw))
        try:
            t = tuple(
                tuple(float(matrix_raw[a][b]) for b in ids) for a in ids
            )
        except KeyError as exc:
            raise ValidationError(
                f"route {route_id}: travel time matrix is not square, "
                f"missing entry for {exc.args[0]!r}"
            )
        matrix = TravelTimeMatrix(ids=ids, t=t)

    quality = Quality(quality_raw) if quality_raw is not None else None

    # Build once without imputation to get a valid Route for distance calls,
    # then repair any missing zone ids.
    try:
        route = Route(
            route_id=route_id,
            stops=stops,
            travel_times=matrix,
            actual=actual,
            quality=quality,
        )
    except ValidationError as exc:
        raise ValidationError(f"route {route_id}: {exc}") from exc

    missing = [s for s in route.delivery_stops() if not s.zone_id]
    if missing:
        repaired = dict(stops)
        for stop in missing:
            zone = impute_zone(route, stop)
            repaired[stop.id] = Stop(
                id=stop.id, lat=stop.lat, lng=stop.lng, zone_id=zone
            )
        route = Route(
            route_id=route_id,
            stops=repaired,
            travel_times=matrix,
            actual=actual,
            quality=quality,
        )
    return route


def write_dataset(dataset: Dataset, dir_path) -> None:
    """Serialize a dataset back to the directory layout (sorted keys)."""
    dir_path = Path(dir_path)
    dir_path.mkdir(parents=True, exist_ok=True)

    routes_out, actual_out, tt_out, quality_out = {}, {}, {}, {}
    for route_id in sorted(dataset.routes):
        route = dataset.routes[route_id]
        depot = route.depot
        routes_out[route_id] = {
            "depot": {"lat": depot.lat, "lng": depot.lng},
            "stops": {
                s.id: {"lat": s.lat, "lng": s.lng, "zone_id": s.zone_id}
                for s in sorted(route.delivery_stops(), key=lambda s: s.id)
            },
        }
        if route.actual is not None:
            actual_out[route_id] = {sid: i for i, sid in enumerate(route.actual.ids)}
        if route.travel_times is not None:
            m = route.travel_times
            tt_out[route_id] = {
                a: {b: m.lookup(a, b) for b in m.ids} for a in m.ids
            }
        if route.quality is not None:
            quality_out[route_id] = route.quality.value

    def dump(name, obj):
        with open(dir_path / name, "w", encoding="utf-8") as f:
            json.dump(obj, f, sort_keys=True, indent=1)

    dump("routes.json", routes_out)
    if actual_out:
        dump("actual_sequences.json", actual_out)
    if tt_out:
        dump("travel_times.json", tt_out)
    if quality_out:
        dump("quality.json", quality_out)


def zone_runs(route: Route, actual: StopSequence) -> List[ZoneRun]:
    """Maximal runs of equal zone id in actual order, depot excluded."""
    runs: List[ZoneRun] = []
    for pos, sid in enumerate(actual.ids):
        stop = route.stops[sid]
        if stop.kind is StopKind.DEPOT:
            continue
        zone = stop.zone_id
        if runs and runs[-1].zone_id == zone:
            last = runs[-1]
            runs[-1] = ZoneRun(zone, last.stop_count + 1, last.first_position)
        else:
            runs.append(ZoneRun(zone, 1, len(runs)))
    return runs


def collapse_to_zsgt(route_id: str, runs: List[ZoneRun]) -> ZoneSequence:
    """Lossy collapse: keep, per zone, the run with the most stops.

    Ties keep the earlier run (kept runs usually correspond to the first
    appearance). Output order follows the kept runs' positions.
    """
    if not runs:
        raise ValidationError(f"route {route_id}: no zone runs to collapse")
    best: Dict[str, ZoneRun] = {}
    for run in runs:
        cur = best.get(run.zone_id)
        if cur is None or run.stop_count > cur.stop_count:
            best[run.zone_id] = run
    kept = sorted(best.values(), key=lambda r: r.first_position)
    return ZoneSequence(route_id=route_id, zones=tuple(r.zone_id for r in kept))


def zsgt(route: Route) -> ZoneSequence:
    """Approximate ground-truth zone sequence for a route with an actual."""
    if route.actual is None:
        raise ValidationError(f"route {route.route_id}: no actual sequence")
    return collapse_to_zsgt(route.route_id, zone_runs(route, route.actual))


def training_corpus(dataset: Dataset, include_low: bool = False) -> List[ZoneSequence]:
    """ZSgt sequences of all routes with actuals, excluding Low quality by default."""
    corpus = []
    for route_id in sorted(dataset.routes):
        route = dataset.routes[route_id]
        if route.actual is None:
            continue
        if not include_low and route.quality is Quality.LOW:
            continue
        corpus.append(zsgt(route))
    return corpus
