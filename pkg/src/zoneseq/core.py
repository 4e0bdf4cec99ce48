"""Domain types and geometric primitives shared by every other module.

All types here are immutable after construction and safe to share
read-only across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

EARTH_RADIUS_M = 6_371_000.0

# Sentinel zone for the depot; never appears as a sequence element.
DEPOT_ZONE = "stz"


class ValidationError(ValueError):
    """Raised when a route, sequence or matrix fails a structural check."""


class StopKind(Enum):
    DEPOT = "Depot"
    DELIVERY = "Delivery"


class Quality(Enum):
    HIGH = "High"
    MEDIUM = "Medium"
    LOW = "Low"


@dataclass(frozen=True)
class Stop:
    """A delivery location (or the depot) with WGS84 coordinates."""

    id: str
    lat: float
    lng: float
    zone_id: Optional[str] = None
    kind: StopKind = StopKind.DELIVERY

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValidationError(f"stop {self.id}: lat {self.lat} out of [-90, 90]")
        if not -180.0 <= self.lng <= 180.0:
            raise ValidationError(f"stop {self.id}: lng {self.lng} out of [-180, 180]")


@dataclass(frozen=True)
class TravelTimeMatrix:
    """Dense asymmetric travel times in seconds over an ordered stop-id list."""

    ids: Tuple[str, ...]
    t: Tuple[Tuple[float, ...], ...]
    _index: Dict[str, int] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        n = len(self.ids)
        if len(self.t) != n or any(len(row) != n for row in self.t):
            raise ValidationError(f"travel time matrix is not square over {n} ids")
        for i, row in enumerate(self.t):
            for j, v in enumerate(row):
                if not math.isfinite(v) or v < 0:
                    raise ValidationError(
                        f"travel time {self.ids[i]}->{self.ids[j]} is {v}"
                    )
            if row[i] != 0:
                raise ValidationError(f"nonzero diagonal at {self.ids[i]}")
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(self.ids)})

    def lookup(self, from_id: str, to_id: str) -> float:
        try:
            return self.t[self._index[from_id]][self._index[to_id]]
        except KeyError as exc:
            raise KeyError(f"unknown stop id {exc.args[0]!r} in travel time matrix")


@dataclass(frozen=True)
class StopSequence:
    """Ordered stop ids for one route; the first element is the depot."""

    route_id: str
    ids: Tuple[str, ...]

    def __post_init__(self):
        if len(set(self.ids)) != len(self.ids):
            raise ValidationError(f"route {self.route_id}: duplicate ids in sequence")


@dataclass(frozen=True)
class ZoneSequence:
    """Ordered zone ids for one route; the depot sentinel is an implicit prefix."""

    route_id: str
    zones: Tuple[str, ...]

    def __post_init__(self):
        if not self.zones:
            raise ValidationError(f"route {self.route_id}: empty zone sequence")
        if len(set(self.zones)) != len(self.zones):
            raise ValidationError(f"route {self.route_id}: duplicate zone ids")
        if DEPOT_ZONE in self.zones:
            raise ValidationError(f"route {self.route_id}: sentinel zone in sequence")


@dataclass(frozen=True)
class Route:
    """A set of stops plus optional travel-time matrix and actual sequence."""

    route_id: str
    stops: Dict[str, Stop]
    travel_times: Optional[TravelTimeMatrix] = None
    actual: Optional[StopSequence] = None
    quality: Optional[Quality] = None

    def __post_init__(self):
        depots = [s for s in self.stops.values() if s.kind is StopKind.DEPOT]
        if len(depots) != 1:
            raise ValidationError(
                f"route {self.route_id}: expected exactly 1 depot, got {len(depots)}"
            )
        for sid, stop in self.stops.items():
            if sid != stop.id:
                raise ValidationError(f"route {self.route_id}: key {sid} != stop id {stop.id}")
        if self.actual is not None:
            if set(self.actual.ids) != set(self.stops):
                raise ValidationError(
                    f"route {self.route_id}: actual sequence is not a permutation of stops"
                )
            if self.actual.ids[0] != depots[0].id:
                raise ValidationError(
                    f"route {self.route_id}: actual sequence does not start at the depot"
                )
        if self.travel_times is not None:
            if set(self.travel_times.ids) != set(self.stops):
                raise ValidationError(
                    f"route {self.route_id}: travel time matrix ids do not match stops"
                )

    @property
    def depot(self) -> Stop:
        return next(s for s in self.stops.values() if s.kind is StopKind.DEPOT)

    def delivery_stops(self) -> List[Stop]:
        return [s for s in self.stops.values() if s.kind is StopKind.DELIVERY]

    def zones(self) -> List[str]:
        """Distinct zone ids of the delivery stops, sorted for determinism."""
        return sorted({s.zone_id for s in self.delivery_stops() if s.zone_id})


def haversine_m(a: Tuple[float, float], b: Tuple[float, float]) -> float:
    """Great-circle distance in meters between two (lat, lng) points."""
    lat1, lng1 = math.radians(a[0]), math.radians(a[1])
    lat2, lng2 = math.radians(b[0]), math.radians(b[1])
    dlat = lat2 - lat1
    dlng = lng2 - lng1
    h = math.sin(dlat / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlng / 2) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def distance(route: Route, from_id: str, to_id: str) -> float:
    """Travel cost between two stops of a route.

    Uses the route's travel-time matrix when present, haversine meters
    otherwise. Matrix presence is a route-level property, so a route never
    mixes the two units.
    """
    if from_id not in route.stops:
        raise KeyError(f"unknown stop id {from_id!r} in route {route.route_id}")
    if to_id not in route.stops:
        raise KeyError(f"unknown stop id {to_id!r} in route {route.route_id}")
    if route.travel_times is not None:
        return route.travel_times.lookup(from_id, to_id)
    a = route.stops[from_id]
    b = route.stops[to_id]
    return haversine_m((a.lat, a.lng), (b.lat, b.lng))
