"""Geohash encoding and decoding.

Bits alternate longitude/latitude starting with longitude; each character
carries five bits in the standard base-32 alphabet.
"""
from __future__ import annotations

BASE32 = "0123456789bcdefghjkmnpqrstuvwxyz"
_DECODE = {c: i for i, c in enumerate(BASE32)}
MAX_PRECISION = 12


class GeohashError(ValueError):
    pass


def encode(lat: float, lon: float, precision: int = 7) -> str:
    if not 1 <= precision <= MAX_PRECISION:
        raise GeohashError(f"precision must be within 1..{MAX_PRECISION}")
    if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
        raise GeohashError(f"coordinates out of range: ({lat}, {lon})")
    lat_lo, lat_hi = -90.0, 90.0
    lon_lo, lon_hi = -180.0, 180.0
    chars = []
    bits = 0
    value = 0
    even = True
    while len(chars) < precision:
        if even:
            mid = (lon_lo + lon_hi) / 2
            if lon >= mid:
                value = (value << 1) | 1
                lon_lo = mid
            else:
                value <<= 1
                lon_hi = mid
        else:
            mid = (lat_lo + lat_hi) / 2
            if lat >= mid:
                value = (value << 1) | 1
                lat_lo = mid
            else:
                value <<= 1
                lat_hi = mid
        even = not even
        bits += 1
        if bits == 5:
            chars.append(BASE32[value])
            bits = value = 0
    return "".join(chars)


def is_valid(code: str) -> bool:
    return isinstance(code, str) and 1 <= len(code) <= MAX_PRECISION and all(c in _DECODE for c in code)


def bounds(code: str) -> tuple[float, float, float, float]:
    """Return (lat_min, lat_max, lon_min, lon_max) of the cell."""
    if not is_valid(code):
        raise GeohashError(f"invalid geohash {code!r}")
    lat_lo, lat_hi = -90.0, 90.0
    lon_lo, lon_hi = -180.0, 180.0
    even = True
    for c in code:
        v = _DECODE[c]
        for shift in range(4, -1, -1):
            bit = (v >> shift) & 1
            if even:
                mid = (lon_lo + lon_hi) / 2
                if bit:
                    lon_lo = mid
                else:
                    lon_hi = mid
            else:
                mid = (lat_lo + lat_hi) / 2
                if bit:
                    lat_lo = mid
                else:
                    lat_hi = mid
            even = not even
    return lat_lo, lat_hi, lon_lo, lon_hi


def decode(code: str) -> tuple[float, float]:
    """Cell center as (lat, lon)."""
    lat_lo, lat_hi, lon_lo, lon_hi = bounds(code)
    return (lat_lo + lat_hi) / 2, (lon_lo + lon_hi) / 2


def contains(code: str, lat: float, lon: float) -> bool:
    """Half-open containment matching the encoder's ``>= mid`` rule.

    The north and east edges of the world belong to the last cells.
    """
    lat_lo, lat_hi, lon_lo, lon_hi = bounds(code)
    in_lat = lat_lo <= lat < lat_hi or (lat == lat_hi == 90.0)
    in_lon = lon_lo <= lon < lon_hi or (lon == lon_hi == 180.0)
    return in_lat and in_lon


def parent(code: str, precision: int) -> str:
    if not is_valid(code):
        raise GeohashError(f"invalid geohash {code!r}")
    if not 1 <= precision <= len(code):
        raise GeohashError("parent precision must be within 1..len(code)")
    return code[:precision]


def polygon(code: str) -> list[list[float]]:
    """Closed GeoJSON ring ([lon, lat] pairs, counter-clockwise)."""
    lat_lo, lat_hi, lon_lo, lon_hi = bounds(code)
    return [[lon_lo, lat_lo], [lon_hi, lat_lo], [lon_hi, lat_hi], [lon_lo, lat_hi], [lon_lo, lat_lo]]
