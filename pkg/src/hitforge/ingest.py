"""Spotify-style track/audio-feature client and Billboard-style chart client.

Both sources go through a :class:`Transport`, which either performs HTTPS
GETs against configurable base URLs (``live``) or answers the same requests
from a directory of JSON documents (``fixture``). Responses from either mode
are parsed by the same code.

Fixture layout (``fixture_root``)::

    tracks_<year>.json            first search page for a release year
    tracks_<year>_<offset>.json   later pages (offset = index of first item)
    audio_features.json           {"audio_features": [<feature object>, ...]}
    chart_<YYYY-MM-DD>.json       {"date": ..., "entries": [{"rank", "title", "artist"}]}
"""
from __future__ import annotations

import json
import logging
import os
import threading
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import date, timedelta
from pathlib import Path
from typing import Callable, Iterable, Optional

from . import HitforgeError

log = logging.getLogger(__name__)

YEAR_MIN = 1985
YEAR_MAX = 2018
CHART_FIRST = date(YEAR_MIN, 1, 1)
CHART_LAST = date(YEAR_MAX, 12, 31)
AUDIO_BATCH = 100
FIXTURES_ENV = "HITFORGE_FIXTURES"
ALBUM_TYPES = ("album", "single", "compilation")
UNIT_FEATURES = ("acousticness", "danceability", "energy", "instrumentalness",
                 "liveness", "speechiness", "valence")


class IngestError(HitforgeError):
    pass


class AuthError(IngestError):
    pass


class FixtureMissing(IngestError):
    pass


class MalformedResponse(IngestError):
    pass


class MalformedChart(MalformedResponse):
    pass


def parse_release_date(text: str) -> tuple[date, str]:
    """Parse ``YYYY``, ``YYYY-MM`` or ``YYYY-MM-DD``; returns (date, precision).

    Partial dates are pinned to the first day of the year/month.
    """
    parts = str(text).strip().split("-")
    try:
        if len(parts) == 1:
            return date(int(parts[0]), 1, 1), "year"
        if len(parts) == 2:
            return date(int(parts[0]), int(parts[1]), 1), "month"
        if len(parts) == 3:
            return date(int(parts[0]), int(parts[1]), int(parts[2])), "day"
    except ValueError as exc:
        raise MalformedResponse(f"bad release date {text!r}") from exc
    raise MalformedResponse(f"bad release date {text!r}")


@dataclass(frozen=True)
class RawSpotifyTrack:
    track_id: str
    track_title: str
    artist_title: str
    artist_id: str
    popularity: int
    explicit: int
    duration_ms: int
    preview_url: Optional[str]
    album_id: str
    album_type: str
    album_release_date: date
    release_date_precision: str = "day"

    def __post_init__(self):
        for name in ("track_id", "artist_id", "album_id"):
            if not str(getattr(self, name)).strip():
                raise MalformedResponse(f"empty {name}")
        if not 0 <= self.popularity <= 100:
            raise MalformedResponse(f"popularity {self.popularity} outside [0, 100]")
        if self.explicit not in (0, 1):
            raise MalformedResponse(f"explicit flag {self.explicit!r}")
        if self.duration_ms <= 0:
            raise MalformedResponse(f"non-positive duration_ms for {self.track_id}")
        if self.album_type not in ALBUM_TYPES:
            raise MalformedResponse(f"album_type {self.album_type!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["album_release_date"] = self.album_release_date.isoformat()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RawSpotifyTrack":
        d = dict(d)
        d["album_release_date"] = date.fromisoformat(d["album_release_date"])
        return cls(**d)

    @classmethod
    def from_api(cls, item: dict) -> "RawSpotifyTrack":
        """Build from a Spotify track object (``/search`` item shape)."""
        try:
            artist = item["artists"][0]
            album = item["album"]
            released, precision = parse_release_date(album["release_date"])
            return cls(
                track_id=item["id"],
                track_title=item["name"],
                artist_title=artist["name"],
                artist_id=artist["id"],
                popularity=int(item["popularity"]),
                explicit=int(bool(item["explicit"])),
                duration_ms=int(item["duration_ms"]),
                preview_url=item.get("preview_url"),
                album_id=album["id"],
                album_type=album["album_type"],
                album_release_date=released,
                release_date_precision=album.get("release_date_precision", precision),
            )
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise MalformedResponse(f"bad track object: {exc!r}") from exc


@dataclass(frozen=True)
class AudioFeatures:
    track_id: str
    acousticness: float
    danceability: float
    energy: float
    instrumentalness: float
    key: int
    liveness: float
    loudness: float
    mode: int
    speechiness: float
    tempo: float
    time_signature: int
    valence: float

    def __post_init__(self):
        for name in UNIT_FEATURES:
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise MalformedResponse(f"{name}={v} outside [0, 1] for {self.track_id}")
        if self.mode not in (0, 1):
            raise MalformedResponse(f"mode={self.mode!r} for {self.track_id}")
        if not self.tempo > 0:
            raise MalformedResponse(f"tempo={self.tempo} for {self.track_id}")
        if not -1 <= self.key <= 11:
            raise MalformedResponse(f"key={self.key} for {self.track_id}")

    missing = False

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_api(cls, obj: dict) -> "AudioFeatures":
        try:
            return cls(
                track_id=obj["id"],
                acousticness=float(obj["acousticness"]),
                danceability=float(obj["danceability"]),
                energy=float(obj["energy"]),
                instrumentalness=float(obj["instrumentalness"]),
                key=int(obj["key"]),
                liveness=float(obj["liveness"]),
                loudness=float(obj["loudness"]),
                mode=int(obj["mode"]),
                speechiness=float(obj["speechiness"]),
                tempo=float(obj["tempo"]),
                time_signature=int(obj["time_signature"]),
                valence=float(obj["valence"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedResponse(f"bad audio-features object: {exc!r}") from exc


@dataclass(frozen=True)
class MissingAudioFeatures:
    """Placeholder for an id the audio-features endpoint could not resolve."""

    track_id: str
    missing = True


@dataclass(frozen=True)
class ChartEntry:
    chart_date: date
    rank: int
    track_title: str
    artist_title: str

    def __post_init__(self):
        if not 1 <= self.rank <= 100:
            raise MalformedChart(f"rank {self.rank} outside 1..100 on {self.chart_date}")

    def to_dict(self) -> dict:
        return {"chart_date": self.chart_date.isoformat(), "rank": self.rank,
                "track_title": self.track_title, "artist_title": self.artist_title}

    @classmethod
    def from_dict(cls, d: dict) -> "ChartEntry":
        return cls(date.fromisoformat(d["chart_date"]), int(d["rank"]),
                   d["track_title"], d["artist_title"])


class RateLimiter:
    """Sliding-window limiter: at most ``rate`` dispatches in any 1 s window.

    ``clock`` and ``sleep`` are injectable so tests can drive a fake clock.
    """

    def __init__(self, rate: float, clock: Callable[[], float] = time.monotonic,
                 sleep: Callable[[float], None] = time.sleep):
        if rate <= 0:
            raise ValueError("rate_limit must be positive")
        self.rate = rate
        self.clock = clock
        self.sleep = sleep
        self._sent: deque[float] = deque()
        self._lock = threading.Lock()

    def acquire(self) -> float:
        with self._lock:
            while True:
                now = self.clock()
                while self._sent and now - self._sent[0] >= 1.0:
                    self._sent.popleft()
                if len(self._sent) < self.rate:
                    self._sent.append(now)
                    return now
                self.sleep(self._sent[0] + 1.0 - now)


@dataclass
class Transport:
    """Request dispatcher for both sources.

    ``get(endpoint, params)`` understands three endpoints: ``search``
    (``year``, ``offset``, ``limit``), ``audio-features`` (``ids``) and
    ``chart`` (``date``).
    """

    mode: str
    credentials: Optional[str] = None
    fixture_root: Optional[Path] = None
    rate_limit: float = 10.0
    spotify_base: str = "https://api.spotify.com/v1"
    billboard_base: str = "https://billboard.example/api"
    page_limit: int = 50
    timeout: float = 30.0
    clock: Callable[[], float] = field(default=time.monotonic, repr=False)
    sleep: Callable[[float], None] = field(default=time.sleep, repr=False)

    def __post_init__(self):
        if self.mode not in ("live", "fixture"):
            raise ValueError(f"unknown transport mode {self.mode!r}")
        if self.mode == "fixture":
            if self.fixture_root is None:
                raise ValueError("fixture mode requires fixture_root")
            self.fixture_root = Path(self.fixture_root)
        if self.mode == "live" and not self.credentials:
            raise ValueError("live mode requires credentials")
        self.limiter = RateLimiter(self.rate_limit, self.clock, self.sleep)
        self._audio_index: Optional[dict] = None
        self._session = None

    @classmethod
    def from_env(cls, **kwargs) -> "Transport":
        root = os.environ.get(FIXTURES_ENV)
        if not root:
            raise ValueError(f"{FIXTURES_ENV} is not set")
        return cls(mode="fixture", fixture_root=Path(root), **kwargs)

    def get(self, endpoint: str, params: dict) -> dict:
        self.limiter.acquire()
        if self.mode == "fixture":
            return self._get_fixture(endpoint, params)
        return self._get_live(endpoint, params)

    # fixture mode

    def _read(self, name: str) -> dict:
        path = self.fixture_root / name
        if not path.is_file():
            raise FixtureMissing(f"no fixture {path}")
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise MalformedResponse(f"{path}: {exc}") from exc

    def _get_fixture(self, endpoint: str, params: dict) -> dict:
        if endpoint == "search":
            offset = int(params.get("offset", 0))
            year = int(params["year"])
            name = f"tracks_{year}.json" if offset == 0 else f"tracks_{year}_{offset}.json"
            return self._read(name)
        if endpoint == "audio-features":
            if self._audio_index is None:
                doc = self._read("audio_features.json")
                try:
                    self._audio_index = {o["id"]: o for o in doc["audio_features"] if o}
                except (KeyError, TypeError) as exc:
                    raise MalformedResponse(f"audio_features.json: {exc!r}") from exc
            ids = params["ids"]
            return {"audio_features": [self._audio_index.get(i) for i in ids]}
        if endpoint == "chart":
            return self._read(f"chart_{params['date']}.json")
        raise ValueError(f"unknown endpoint {endpoint!r}")

    # live mode

    def _url(self, endpoint: str, params: dict) -> tuple[str, dict]:
        if endpoint == "search":
            return f"{self.spotify_base}/search", {
                "q": f"year:{params['year']}", "type": "track",
                "limit": params.get("limit", self.page_limit),
                "offset": params.get("offset", 0)}
        if endpoint == "audio-features":
            return f"{self.spotify_base}/audio-features", {"ids": ",".join(params["ids"])}
        if endpoint == "chart":
            return f"{self.billboard_base}/charts/hot-100", {"date": params["date"]}
        raise ValueError(f"unknown endpoint {endpoint!r}")

    def _get_live(self, endpoint: str, params: dict, retries: int = 3) -> dict:
        import requests

        if self._session is None:
            self._session = requests.Session()
            self._session.headers["Authorization"] = f"Bearer {self.credentials}"
        url, query = self._url(endpoint, params)
        for _ in range(retries + 1):
            resp = self._session.get(url, params=query, timeout=self.timeout)
            if resp.status_code == 429:
                self.sleep(float(resp.headers.get("Retry-After", 1)))
                continue
            if resp.status_code in (401, 403):
                raise AuthError(f"{url}: HTTP {resp.status_code}")
            if resp.status_code != 200:
                raise IngestError(f"{url}: HTTP {resp.status_code}")
            try:
                return resp.json()
            except ValueError as exc:
                raise MalformedResponse(f"{url}: response is not JSON") from exc
        raise IngestError(f"{url}: still rate limited after {retries} retries")


def _check_year(year: int) -> None:
    if not YEAR_MIN <= year <= YEAR_MAX:
        raise ValueError(f"year {year} outside {YEAR_MIN}..{YEAR_MAX}")


def fetch_tracks_by_year(transport: Transport, year: int) -> list[RawSpotifyTrack]:
    """All tracks whose album was released in ``year``, following pagination."""
    _check_year(year)
    out = []
    offset = 0
    while True:
        payload = transport.get("search", {"year": year, "offset": offset,
                                           "limit": transport.page_limit})
        try:
            page = payload["tracks"]
            items = page["items"]
            total = int(page.get("total", 0))
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedResponse(f"bad search page for {year} @ {offset}: {exc!r}") from exc
        for item in items:
            track = RawSpotifyTrack.from_api(item)
            if track.album_release_date.year == year:
                out.append(track)
            else:
                log.debug("dropping %s: released %s, not %d",
                          track.track_id, track.album_release_date, year)
        offset += len(items)
        if not items or offset >= total:
            return out


def fetch_audio_features(transport: Transport, track_ids: list[str],
                         batch_size: int = AUDIO_BATCH) -> list:
    """Audio features for ``track_ids``, in input order.

    Unresolvable ids yield :class:`MissingAudioFeatures` in their slot.
    """
    if not track_ids:
        raise ValueError("track_ids must be non-empty")
    if any(not str(t).strip() for t in track_ids):
        raise ValueError("blank track id")
    out = []
    for start in range(0, len(track_ids), batch_size):
        chunk = list(track_ids[start:start + batch_size])
        payload = transport.get("audio-features", {"ids": chunk})
        feats = payload.get("audio_features") if isinstance(payload, dict) else None
        if not isinstance(feats, list) or len(feats) != len(chunk):
            raise MalformedResponse("audio-features response does not match request")
        for tid, obj in zip(chunk, feats):
            if obj is None:
                out.append(MissingAudioFeatures(tid))
                continue
            af = AudioFeatures.from_api(obj)
            if af.track_id != tid:
                raise MalformedResponse(f"audio-features for {af.track_id}, asked {tid}")
            out.append(af)
    return out


def fetch_chart_week(transport: Transport, chart_date: date) -> list[ChartEntry]:
    """The 100 entries of one weekly chart."""
    if not CHART_FIRST <= chart_date <= CHART_LAST:
        raise ValueError(f"chart date {chart_date} outside {CHART_FIRST}..{CHART_LAST}")
    payload = transport.get("chart", {"date": chart_date.isoformat()})
    try:
        rows = payload["entries"]
        entries = [ChartEntry(chart_date, int(r["rank"]), r["title"], r["artist"])
                   for r in rows]
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedChart(f"bad chart row on {chart_date}: {exc!r}") from exc
    if "date" in payload and payload["date"] != chart_date.isoformat():
        raise MalformedChart(f"chart dated {payload['date']}, asked {chart_date}")
    if sorted(e.rank for e in entries) != list(range(1, 101)):
        raise MalformedChart(f"chart {chart_date} has {len(entries)} rows, "
                             "ranks are not exactly 1..100")
    entries.sort(key=lambda e: e.rank)
    return entries


def chart_weeks(start: date, end: date) -> list[date]:
    """Weekly chart dates from ``start`` to ``end`` inclusive, 7 days apart."""
    out = []
    d = start
    while d <= end:
        out.append(d)
        d += timedelta(days=7)
    return out


def fetch_years(transport: Transport, years: Iterable[int], workers: int = 1):
    """``{year: tracks}`` for several years; requests may run in parallel."""
    years = list(years)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(lambda y: fetch_tracks_by_year(transport, y), years))
    return dict(zip(years, results))


def fetch_chart_range(transport: Transport, dates: Iterable[date], workers: int = 1):
    dates = list(dates)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        weeks = list(pool.map(lambda d: fetch_chart_week(transport, d), dates))
    return [e for week in weeks for e in week]


def write_jsonl(path, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True))
            fh.write("\n")


def read_jsonl(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def spotify_records(tracks: list[RawSpotifyTrack], features: list) -> list[dict]:
    """Join raw tracks with their audio features (``None`` when missing)."""
    by_id = {f.track_id: f for f in features}
    out = []
    for t in tracks:
        rec = t.to_dict()
        f = by_id.get(t.track_id)
        rec["audio_features"] = None if f is None or f.missing else f.to_dict()
        out.append(rec)
    return out
