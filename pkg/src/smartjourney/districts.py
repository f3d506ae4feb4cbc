"""District registry and great-circle geometry for nearest-district assignment."""

from __future__ import annotations

import math
from dataclasses import dataclass

EARTH_RADIUS_KM = 6371.0088  # mean Earth radius


@dataclass(frozen=True)
class District:
    name: str
    latitude: float
    longitude: float


# The six reference points traffic records are aggregated onto.
DEFAULT_DISTRICTS: tuple[District, ...] = (
    District("TUZLA", 40.8457, 29.3584),
    District("BAGCILAR", 41.0356, 28.8534),
    District("BUYUK_CEKMECE", 41.0223, 28.5749),
    District("ATASEHIR", 40.9937, 29.1388),
    District("KAGITHANE", 41.0822, 28.9862),
    District("FATIH", 41.0151, 28.9551),
)


def haversine_km(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Great-circle distance in km between two (lat, lon) pairs in degrees.

    Symmetric and non-negative; zero for identical points.
    """
    lat1, lon1 = math.radians(a[0]), math.radians(a[1])
    lat2, lon2 = math.radians(b[0]), math.radians(b[1])
    sin_dlat = math.sin((lat2 - lat1) / 2.0)
    sin_dlon = math.sin((lon2 - lon1) / 2.0)
    h = sin_dlat * sin_dlat + math.cos(lat1) * math.cos(lat2) * sin_dlon * sin_dlon
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def assign_district(lat: float, lon: float, registry: tuple[District, ...] = DEFAULT_DISTRICTS) -> str:
    """Name of the registry district closest to (lat, lon).

    Ties go to the earliest district in registry order.
    """
    if not registry:
        raise ValueError("district registry is empty")
    best_name = registry[0].name
    best_dist = haversine_km((lat, lon), (registry[0].latitude, registry[0].longitude))
    for d in registry[1:]:
        dist = haversine_km((lat, lon), (d.latitude, d.longitude))
        if dist < best_dist:
            best_name = d.name
            best_dist = dist
    return best_name
