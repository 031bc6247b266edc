"""Merged, labeled and balanced track corpus.

Spotify tracks are joined to chart history on a normalized (title, artist)
key. Every track then carries chart-derived fields (weeks on chart, peak
rank, a weighted ``score``), the artist's count of earlier hits, and the
``billboard_hit`` label.
"""
from __future__ import annotations

import csv
import logging
import math
import re
import unicodedata
from bisect import bisect_left
from collections import defaultdict
from dataclasses import asdict, dataclass, field, fields, replace
from datetime import date
from typing import Iterable, Mapping, NamedTuple, Optional

import numpy as np

from . import HitforgeError
from .ingest import YEAR_MAX, YEAR_MIN, ChartEntry, write_jsonl

log = logging.getLogger(__name__)


class CorpusError(HitforgeError):
    pass


@dataclass(frozen=True)
class Track:
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
    weeks: int = 0
    rank: int = 0
    score: float = 0.0
    billboard_hit: int = 0
    artist_past_hits: int = 0

    @property
    def match_key(self) -> "MatchKey":
        return normalize_match_key(self.track_title, self.artist_title)

    @classmethod
    def from_record(cls, rec: Mapping) -> "Track":
        """From an ingest record (raw track fields + ``audio_features``)."""
        af = rec["audio_features"]
        released = rec["album_release_date"]
        if isinstance(released, str):
            released = date.fromisoformat(released)
        return cls(
            track_id=rec["track_id"], track_title=rec["track_title"],
            artist_title=rec["artist_title"], artist_id=rec["artist_id"],
            popularity=int(rec["popularity"]), explicit=int(rec["explicit"]),
            duration_ms=int(rec["duration_ms"]), preview_url=rec.get("preview_url"),
            album_id=rec["album_id"], album_type=rec["album_type"],
            album_release_date=released,
            **{k: af[k] for k in AUDIO_COLUMNS},
        )


CSV_COLUMNS = tuple(f.name for f in fields(Track))
AUDIO_COLUMNS = ("acousticness", "danceability", "energy", "instrumentalness", "key",
                 "liveness", "loudness", "mode", "speechiness", "tempo",
                 "time_signature", "valence")
_FLOAT_COLUMNS = {"acousticness", "danceability", "energy", "instrumentalness",
                  "liveness", "loudness", "speechiness", "tempo", "valence", "score"}
_INT_COLUMNS = {"popularity", "explicit", "duration_ms", "key", "mode", "time_signature",
                "weeks", "rank", "billboard_hit", "artist_past_hits"}


class MatchKey(NamedTuple):
    normalized_title: str
    normalized_artist: str


_BRACKETED = re.compile(r"[(\[{][^)\]}]*[)\]}]")
_FEATURING = re.compile(r"\b(?:featuring|feat|ft)\b.*$", re.IGNORECASE | re.DOTALL)
_PUNCT = re.compile(r"[^\w\s]|_")


def _normalize_part(text: str) -> str:
    prev = None
    s = text
    # a pass can expose new matches (e.g. NFKC/casefold expansions); iterate to a fixed point
    for _ in range(8):
        if s == prev:
            break
        prev = s
        s = unicodedata.normalize("NFKC", s).casefold()
        s = _BRACKETED.sub(" ", s)
        s = _FEATURING.sub("", s)
        s = _PUNCT.sub("", s)
        s = " ".join(s.split())
    return s


def normalize_match_key(title: str, artist: str) -> MatchKey:
    """Case-, punctuation- and featured-artist-insensitive join key.

    >>> normalize_match_key("Umbrella (feat. JAY-Z)", "Rihanna")
    MatchKey(normalized_title='umbrella', normalized_artist='rihanna')
    """
    return MatchKey(_normalize_part(title), _normalize_part(artist))


def raw_score(ranks: Iterable[int]) -> float:
    """Sum over weekly placements of ``(101 - rank) / 100``."""
    total = 0
    for r in ranks:
        if not 1 <= r <= 100:
            raise CorpusError(f"chart rank {r} outside 1..100")
        total += 101 - r
    return total / 100.0


def compute_score(appearances, corpus_max_raw: float) -> float:
    """Corpus-normalized chart score in [0, 1]; 0 for never-charted tracks.

    ``appearances`` is a sequence of ``(chart_date, rank)`` pairs.
    """
    appearances = list(appearances)
    raw = raw_score(r for _, r in appearances)
    if not appearances:
        return 0.0
    if not corpus_max_raw > 0:
        raise CorpusError("corpus_max_raw must be positive")
    return min(1.0, max(0.0, raw / corpus_max_raw))


@dataclass
class MergeReport:
    spotify_tracks: int = 0
    duplicates_dropped: int = 0
    chart_entries: int = 0
    chart_keys: int = 0
    chart_keys_matched: int = 0
    chart_keys_unmatched: int = 0
    hits: int = 0
    missing_audio_dropped: int = 0
    out_of_years_dropped: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def _chart_appearances(chart: Iterable[ChartEntry]) -> dict[MatchKey, dict[date, int]]:
    apps: dict[MatchKey, dict[date, int]] = defaultdict(dict)
    for e in chart:
        weeks = apps[normalize_match_key(e.track_title, e.artist_title)]
        # two chart rows normalizing to the same key in one week: keep the better rank
        weeks[e.chart_date] = min(e.rank, weeks.get(e.chart_date, 101))
    return apps


def dedupe_tracks(tracks: Iterable[Track]) -> tuple[list[Track], int]:
    """One track per MatchKey: highest popularity wins, then lowest track_id."""
    tracks = list(tracks)
    best: dict[MatchKey, Track] = {}
    for t in sorted(tracks, key=lambda t: (-t.popularity, t.track_id)):
        best.setdefault(t.match_key, t)
    kept = sorted(best.values(), key=lambda t: t.track_id)
    return kept, len(tracks) - len(kept)


def merge(spotify: Iterable[Track], chart: Iterable[ChartEntry],
          years: tuple[int, int] = (YEAR_MIN, YEAR_MAX)) -> tuple[list[Track], MergeReport]:
    """Label Spotify tracks with chart-derived fields.

    Returns the merged tracks (sorted by track_id) and a report counting
    duplicates and chart keys with no Spotify match.
    """
    chart = list(chart)
    for e in chart:
        if not years[0] <= e.chart_date.year <= years[1]:
            raise CorpusError(f"chart entry dated {e.chart_date} outside {years}")
    tracks, dropped = dedupe_tracks(spotify)
    apps = _chart_appearances(chart)
    report = MergeReport(spotify_tracks=len(tracks) + dropped, duplicates_dropped=dropped,
                         chart_entries=len(chart), chart_keys=len(apps))

    keys = {t.match_key for t in tracks}
    raws = {k: raw_score(w.values()) for k, w in apps.items() if k in keys}
    max_raw = max(raws.values(), default=0.0)
    out = []
    for t in tracks:
        weeks = apps.get(t.match_key)
        if weeks:
            ordered = sorted(weeks.items())
            t = replace(t, weeks=len(ordered), rank=min(weeks.values()),
                        score=compute_score(ordered, max_raw), billboard_hit=1)
        else:
            t = replace(t, weeks=0, rank=0, score=0.0, billboard_hit=0)
        out.append(t)
    report.chart_keys_matched = len(raws)
    report.chart_keys_unmatched = len(apps) - len(raws)
    report.hits = sum(t.billboard_hit for t in out)
    return out, report


class ArtistHistory:
    """First chart appearance of every charted key, grouped by artist."""

    def __init__(self, chart: Iterable[ChartEntry]):
        first: dict[MatchKey, date] = {}
        for e in chart:
            k = normalize_match_key(e.track_title, e.artist_title)
            if k not in first or e.chart_date < first[k]:
                first[k] = e.chart_date
        self.first_charted = first
        by_artist: dict[str, list[date]] = defaultdict(list)
        for k, d in first.items():
            by_artist[k.normalized_artist].append(d)
        self._dates = {a: sorted(ds) for a, ds in by_artist.items()}

    def past_hits(self, key: MatchKey, released: date) -> int:
        n = bisect_left(self._dates.get(key.normalized_artist, []), released)
        own = self.first_charted.get(key)
        if own is not None and own < released:
            n -= 1
        return n


def mine_artist_past_hits(track: Track, chart_history, release_dates=None,
                          history: Optional[ArtistHistory] = None) -> int:
    """Distinct songs by the track's artist that first charted strictly
    before the track's release date. The track's own key never counts."""
    key = track.match_key
    released = (release_dates or {}).get(key, track.album_release_date)
    if released is None:
        raise CorpusError(f"no release date for {track.track_id}")
    if history is None:
        history = ArtistHistory(chart_history)
    return history.past_hits(key, released)


def balance_sample(merged: Iterable[Track], n_per_class: int, seed: int) -> list[Track]:
    """``n_per_class`` hits and non-hits drawn without replacement.

    Depends only on the set of input tracks, not on their order.
    """
    ordered = sorted(merged, key=lambda t: t.track_id)
    rng = np.random.default_rng(seed)
    out = []
    for label in (1, 0):
        pool = [t for t in ordered if t.billboard_hit == label]
        if len(pool) < n_per_class:
            raise CorpusError(f"class {label} has {len(pool)} tracks, need {n_per_class}")
        if len(pool) == n_per_class:
            out.extend(pool)
        else:
            idx = np.sort(rng.choice(len(pool), size=n_per_class, replace=False))
            out.extend(pool[i] for i in idx)
    return sorted(out, key=lambda t: t.track_id)


@dataclass
class CorpusSplit:
    train: list[Track]
    validation: list[Track]
    test: list[Track]
    seed: int = 0

    def parts(self):
        return {"train": self.train, "val": self.validation, "test": self.test}


def _allocate(n: int, fractions) -> list[int]:
    # largest-remainder apportionment; ties go to the earlier split
    quotas = [n * f for f in fractions]
    base = [math.floor(q + 1e-9) for q in quotas]
    left = n - sum(base)
    order = sorted(range(len(fractions)), key=lambda i: (-(quotas[i] - base[i]), i))
    for i in order[:max(left, 0)]:
        base[i] += 1
    return base


def make_splits(balanced: Iterable[Track], fractions=(20 / 24, 2 / 24, 2 / 24),
                seed: int = 0) -> CorpusSplit:
    """Stratified, track-id-disjoint train/validation/test partition."""
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(f <= 0 for f in fractions) or abs(sum(fractions) - 1) > 1e-9:
        raise CorpusError(f"fractions must be three positive numbers summing to 1: {fractions}")
    ordered = sorted(balanced, key=lambda t: t.track_id)
    ids = [t.track_id for t in ordered]
    if len(set(ids)) != len(ids):
        raise CorpusError("duplicate track_id in corpus")
    rng = np.random.default_rng(seed)
    parts: list[list[Track]] = [[], [], []]
    for label in (0, 1):
        pool = [t for t in ordered if t.billboard_hit == label]
        sizes = _allocate(len(pool), fractions)
        if min(sizes) < 1:
            raise CorpusError(f"too few tracks of class {label} to fill every split")
        perm = rng.permutation(len(pool))
        start = 0
        for p, size in zip(parts, sizes):
            p.extend(pool[i] for i in perm[start:start + size])
            start += size
    parts = [sorted(p, key=lambda t: t.track_id) for p in parts]
    return CorpusSplit(parts[0], parts[1], parts[2], seed)


def filter_years(tracks: Iterable[Track], min_year: int, max_year: int,
                 min_count_per_year: int = 0) -> list[Track]:
    """Keep tracks released in [min_year, max_year] whose year has enough tracks."""
    if min_year > max_year:
        raise CorpusError("min_year > max_year")
    in_range = [t for t in tracks if min_year <= t.album_release_date.year <= max_year]
    counts: dict[int, int] = defaultdict(int)
    for t in in_range:
        counts[t.album_release_date.year] += 1
    return [t for t in in_range if counts[t.album_release_date.year] >= min_count_per_year]


@dataclass
class BuildResult:
    corpus: list[Track]
    merged: list[Track]
    report: MergeReport = field(default_factory=MergeReport)


def build_corpus(records: Iterable[Mapping], chart: Iterable[ChartEntry], seed: int,
                 n_per_class: Optional[int] = None, min_year: int = YEAR_MIN,
                 max_year: int = YEAR_MAX, min_count_per_year: int = 0) -> BuildResult:
    """Ingest records + chart history -> balanced, labeled corpus.

    Tracks with missing audio features are dropped and counted. By default
    the corpus keeps every hit and samples as many non-hits.
    """
    chart = list(chart)
    tracks = []
    missing = 0
    for rec in records:
        if rec.get("audio_features") is None:
            missing += 1
            continue
        tracks.append(Track.from_record(rec))
    kept = filter_years(tracks, min_year, max_year, min_count_per_year)
    # the release-year filter applies to tracks; chart history keeps its full window
    merged, report = merge(kept, chart)
    report.missing_audio_dropped = missing
    report.out_of_years_dropped = len(tracks) - len(kept)

    history = ArtistHistory(chart)
    mined = [replace(t, artist_past_hits=mine_artist_past_hits(t, chart, history=history))
             for t in merged]
    if n_per_class is None:
        n_per_class = report.hits
    corpus = balance_sample(mined, n_per_class, seed)
    log.info("corpus: %d tracks (%d per class) from %d merged", len(corpus), n_per_class,
             len(mined))
    return BuildResult(corpus, mined, report)


def _fmt(name: str, value) -> str:
    if value is None:
        return ""
    if name in _FLOAT_COLUMNS:
        return f"{value:.6f}"
    if isinstance(value, date):
        return value.isoformat()
    return str(value)


def write_tracks_csv(path, tracks: Iterable[Track]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for t in tracks:
            w.writerow([_fmt(c, getattr(t, c)) for c in CSV_COLUMNS])


def _parse(name: str, text: str):
    if name in _FLOAT_COLUMNS:
        return float(text)
    if name in _INT_COLUMNS:
        return int(text)
    if name == "album_release_date":
        return date.fromisoformat(text)
    if name == "preview_url":
        return text or None
    return text


def read_tracks_csv(path) -> list[Track]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_COLUMNS:
            raise CorpusError(f"{path}: unexpected header")
        return [Track(**{c: _parse(c, v) for c, v in zip(header, row)}) for row in reader]


def write_tracks_jsonl(path, tracks: Iterable[Track]) -> None:
    def rec(t):
        d = asdict(t)
        d["album_release_date"] = t.album_release_date.isoformat()
        return d
    write_jsonl(path, (rec(t) for t in tracks))
