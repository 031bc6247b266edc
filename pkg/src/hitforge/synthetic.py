"""Seeded synthetic fixture corpus in the ingest fixture layout.

Hits and non-hits draw their audio features from different (overlapping)
distributions, hit artists come mostly from a pool of recurring chart
artists, and every weekly chart is padded to exactly 100 rows with songs
that have no Spotify counterpart. A few records exercise the edge paths:
missing audio features, duplicate Spotify releases, year-only release
dates, ``feat.`` suffixes, and tracks filed under the wrong year.
"""
from __future__ import annotations

import json
from datetime import date, timedelta
from pathlib import Path

import numpy as np

SYNTH_YEARS = (2014, 2017)
CHART_START = date(2012, 1, 7)
CHART_END = date(2018, 12, 29)
PAGE_LIMIT = 50

_ALPHABET = np.array(list("0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz"))
_WORDS = ("midnight", "echo", "golden", "river", "neon", "heart", "summer", "ghost",
          "velvet", "fire", "satin", "silver", "wild", "static", "ocean", "crown",
          "shadow", "electric", "honey", "thunder", "glass", "paradise", "rebel", "moon")


def _spotify_id(rng, used: set) -> str:
    while True:
        s = "".join(rng.choice(_ALPHABET, 22))
        if s not in used:
            used.add(s)
            return s


def _next_saturday(d: date) -> date:
    # strictly after d
    return d + timedelta(days=(5 - d.weekday()) % 7 or 7)


def _audio(rng, hit: bool) -> dict:
    if hit:
        f = dict(danceability=rng.beta(7, 3), energy=rng.beta(7, 3),
                 acousticness=rng.beta(1.5, 8), instrumentalness=rng.beta(0.5, 20),
                 speechiness=rng.beta(2, 12), valence=rng.beta(6, 4),
                 loudness=rng.normal(-5.5, 2.0), duration_ms=rng.normal(215_000, 30_000),
                 mode=rng.random() < 0.65, explicit=rng.random() < 0.30)
    else:
        f = dict(danceability=rng.beta(5, 5), energy=rng.beta(4, 4),
                 acousticness=rng.beta(3, 3), instrumentalness=rng.beta(0.8, 3),
                 speechiness=rng.beta(2, 15), valence=rng.beta(4, 5),
                 loudness=rng.normal(-10.0, 4.0), duration_ms=rng.normal(245_000, 70_000),
                 mode=rng.random() < 0.55, explicit=rng.random() < 0.15)
    f["liveness"] = rng.beta(2, 10)
    f["tempo"] = max(40.0, rng.normal(120, 25))
    f["key"] = int(rng.integers(0, 12))
    f["time_signature"] = int(rng.choice([3, 4, 4, 4, 4, 4, 4, 4, 4, 5]))
    f["loudness"] = float(min(0.0, max(-60.0, f["loudness"])))
    f["duration_ms"] = int(max(60_000, f["duration_ms"]))
    f["mode"] = int(f["mode"])
    f["explicit"] = int(f["explicit"])
    for k in ("danceability", "energy", "acousticness", "instrumentalness", "speechiness",
              "valence", "liveness", "tempo"):
        f[k] = round(float(f[k]), 6)
    f["loudness"] = round(f["loudness"], 3)
    return f


def generate(root, seed: int = 0, n_hits: int = 1200, n_nonhits: int = 2400,
             n_missing: int = 12, n_duplicates: int = 12) -> dict:
    """Write the fixture corpus under ``root``; returns a summary dict."""
    rng = np.random.default_rng(seed)
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    used: set = set()
    stars = [(f"Star Artist {i:03d}", _spotify_id(rng, used)) for i in range(120)]
    regulars = [(f"Indie Artist {i:03d}", _spotify_id(rng, used)) for i in range(500)]
    years = list(range(SYNTH_YEARS[0], SYNTH_YEARS[1] + 1))

    tracks = []  # dicts with private "_hit" marker
    for i in range(n_hits + n_nonhits):
        hit = i < n_hits
        pool = stars if (rng.random() < (0.9 if hit else 0.2)) else regulars
        artist, artist_id = pool[int(rng.integers(len(pool)))]
        year = years[int(rng.integers(len(years)))]
        released = date(year, 1, 1) + timedelta(days=int(rng.integers(0, 365)))
        precision = "year" if rng.random() < 0.05 else "day"
        if precision == "year":
            released = date(year, 1, 1)
        words = rng.choice(len(_WORDS), 2, replace=False)
        title = f"{_WORDS[words[0]].title()} {_WORDS[words[1]].title()} {i:04d}"
        feat = None
        if hit and rng.random() < 0.1:
            feat = stars[int(rng.integers(len(stars)))][0]
        f = _audio(rng, hit)
        tracks.append(dict(
            _hit=hit, _feat=feat, id=_spotify_id(rng, used), title=title, artist=artist,
            artist_id=artist_id, released=released, precision=precision,
            popularity=int(rng.integers(40, 91) if hit else rng.integers(0, 61)),
            album_id=_spotify_id(rng, used),
            album_type=str(rng.choice(["album", "single", "compilation"], p=[0.5, 0.4, 0.1])),
            features=f))

    nonhits = [t for t in tracks if not t["_hit"]]
    dupes = []
    for t in nonhits[:n_duplicates]:
        d = dict(t, id=_spotify_id(rng, used), album_id=_spotify_id(rng, used),
                 popularity=max(0, t["popularity"] - 5))
        dupes.append(d)
    missing = {t["id"] for t in nonhits[n_duplicates:n_duplicates + n_missing]}
    tracks.extend(dupes)
    # filed under the following year's search results; the client must drop them
    strays = [dict(t, id=_spotify_id(rng, used), released=date(years[0] - 1, 6, 1),
                   precision="day", _stray=True, _hit=False)
              for t in nonhits[-3:]]

    # weekly charts
    weeks = []
    d = CHART_START
    while d <= CHART_END:
        weeks.append(d)
        d += timedelta(days=7)
    week_index = {w: i for i, w in enumerate(weeks)}
    slots: list[list[tuple[str, str]]] = [[] for _ in weeks]

    def chart_run(title, artist, start):
        w0 = week_index.get(start)
        if w0 is None:
            return
        length = 1 + min(29, int(rng.geometric(0.12)) - 1)
        for k in range(w0, min(w0 + length, len(weeks))):
            if len(slots[k]) >= 90:
                break
            slots[k].append((title, artist))

    for i in range(250):  # earlier hits by recurring artists, absent from Spotify
        artist = stars[int(rng.integers(len(stars)))][0]
        start = weeks[int(rng.integers(0, week_index[date(2013, 12, 28)]))]
        chart_run(f"Classic {_WORDS[i % len(_WORDS)].title()} {i:03d}", artist, start)
    for t in tracks[:n_hits]:
        artist = t["artist"] if t["_feat"] is None else f"{t['artist']} Featuring {t['_feat']}"
        chart_run(t["title"], artist, _next_saturday(t["released"]))
    filler = 0
    for k, week in enumerate(weeks):
        while len(slots[k]) < 100:
            slots[k].append((f"Radio Filler {filler:05d}", f"Session Band {filler % 300:03d}"))
            filler += 1
        ranks = rng.permutation(100) + 1
        doc = {"chart": "hot-100", "date": week.isoformat(),
               "entries": sorted(({"rank": int(r), "title": ti, "artist": ar}
                                  for r, (ti, ar) in zip(ranks, slots[k])),
                                 key=lambda e: e["rank"])}
        _dump(root / f"chart_{week.isoformat()}.json", doc)

    # search pages per year
    def api_track(t):
        title = t["title"] if t["_feat"] is None else f"{t['title']} (feat. {t['_feat']})"
        rel = (str(t["released"].year) if t["precision"] == "year"
               else t["released"].isoformat())
        f = t["features"]
        return {"id": t["id"], "name": title, "popularity": t["popularity"],
                "explicit": bool(f["explicit"]), "duration_ms": f["duration_ms"],
                "preview_url": f"https://p.scdn.example/mp3-preview/{t['id']}",
                "artists": [{"id": t["artist_id"], "name": t["artist"]}],
                "album": {"id": t["album_id"], "album_type": t["album_type"],
                          "release_date": rel, "release_date_precision": t["precision"]}}

    for year in years:
        items = [t for t in tracks if t["released"].year == year]
        if year == years[1]:
            items += strays
        items = [items[i] for i in rng.permutation(len(items))]
        total = len(items)
        for off in range(0, max(total, 1), PAGE_LIMIT):
            page = [api_track(t) for t in items[off:off + PAGE_LIMIT]]
            doc = {"tracks": {"items": page, "limit": PAGE_LIMIT, "offset": off,
                              "total": total}}
            name = f"tracks_{year}.json" if off == 0 else f"tracks_{year}_{off}.json"
            _dump(root / name, doc)

    feats = []
    for t in sorted(tracks + strays, key=lambda t: t["id"]):
        if t["id"] in missing:
            continue
        f = t["features"]
        feats.append({"id": t["id"], "type": "audio_features",
                      **{k: f[k] for k in ("acousticness", "danceability", "energy",
                                           "instrumentalness", "key", "liveness", "loudness",
                                           "mode", "speechiness", "tempo", "time_signature",
                                           "valence")}})
    _dump(root / "audio_features.json", {"audio_features": feats})
    return {"hits": n_hits, "nonhits": n_nonhits, "duplicates": len(dupes),
            "missing_audio": len(missing), "strays": len(strays), "weeks": len(weeks),
            "years": years, "chart_start": CHART_START.isoformat(),
            "chart_end": CHART_END.isoformat()}


def _dump(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n",
                    encoding="utf-8")
