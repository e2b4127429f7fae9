"""Append-only CSV store of sweep records keyed by (domain hash, sigma hash, L).

Schema (one header row, then one row per record):

    format, version, domain_hash, sigma_hash, L, n, edges, ext_boundary,
    logdet, runtime_ms, seed, sigma, class_counts, group_counts

``logdet`` is written with ``repr`` so it round-trips exactly; ``sigma`` and
the two count maps are JSON.  Later rows for the same key win.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .asymptotics import SweepRecord, sweep
from .geometry import LatticeRegion

log = logging.getLogger(__name__)

FORMAT = 1
COLUMNS = ["format", "version", "domain_hash", "sigma_hash", "L", "n", "edges", "ext_boundary",
           "logdet", "runtime_ms", "seed", "sigma", "class_counts", "group_counts"]


class StoreVersionError(RuntimeError):
    pass


def sigma_hash(sigma_doubled) -> str:
    canon = json.dumps(sorted([list(map(int, p)) for p in sigma_doubled or ()]),
                       separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


@dataclass
class StoredRecord:
    domain_hash: str
    sigma_hash: str
    version: str
    record: SweepRecord

    @property
    def key(self):
        return self.domain_hash, self.sigma_hash, self.record.L


def _to_row(domain_hash, s_hash, rec: SweepRecord) -> dict:
    return {"format": FORMAT, "version": __version__, "domain_hash": domain_hash,
            "sigma_hash": s_hash, "L": rec.L, "n": rec.n_sites, "edges": rec.n_edges,
            "ext_boundary": rec.ext_count, "logdet": repr(float(rec.logdet)),
            "runtime_ms": f"{rec.runtime_ms:.1f}", "seed": 0,
            "sigma": json.dumps([list(p) for p in rec.sigma]),
            "class_counts": json.dumps(rec.class_counts, sort_keys=True),
            "group_counts": json.dumps(rec.group_counts, sort_keys=True)}


def _from_row(row: dict) -> StoredRecord:
    if int(row["format"]) != FORMAT:
        raise ValueError(f"unknown format {row['format']!r}")
    rec = SweepRecord(L=int(row["L"]), n_sites=int(row["n"]), n_edges=int(row["edges"]),
                      logdet=float(row["logdet"]),
                      sigma=tuple(tuple(p) for p in json.loads(row["sigma"])),
                      class_counts=json.loads(row["class_counts"]),
                      group_counts=json.loads(row["group_counts"]),
                      runtime_ms=float(row["runtime_ms"]))
    if rec.ext_count != int(row["ext_boundary"]):
        raise ValueError("ext_boundary does not match group counts")
    if not row["domain_hash"] or not row["sigma_hash"] or not row["version"]:
        raise ValueError("missing key field")
    return StoredRecord(row["domain_hash"], row["sigma_hash"], row["version"], rec)


class ResultStore:
    """Single-writer CSV store; malformed lines are moved to ``<path>.quarantine``."""

    def __init__(self, path):
        self.path = Path(path)
        self.quarantine_path = self.path.with_name(self.path.name + ".quarantine")

    def load(self) -> list[StoredRecord]:
        if not self.path.exists():
            return []
        with self.path.open(newline="") as fh:
            lines = fh.read().splitlines()
        if not lines:
            return []
        header = next(csv.reader([lines[0]]))
        if header != COLUMNS:
            raise ValueError(f"{self.path}: unexpected header {header!r}")
        good, bad, out = [lines[0]], [], []
        for lineno, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            try:
                fields = next(csv.reader([line]))
                if len(fields) != len(COLUMNS):
                    raise ValueError(f"expected {len(COLUMNS)} fields, got {len(fields)}")
                out.append(_from_row(dict(zip(COLUMNS, fields))))
                good.append(line)
            except (ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
                log.warning("%s:%d: corrupted record quarantined (%s)", self.path, lineno, exc)
                bad.append(line)
        if bad:
            with self.quarantine_path.open("a", newline="") as fh:
                fh.write("\n".join(bad) + "\n")
            self.path.write_text("\n".join(good) + "\n")
        return out

    def append(self, domain_hash: str, s_hash: str, records) -> None:
        new = not self.path.exists() or self.path.stat().st_size == 0
        with self.path.open("a", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=COLUMNS, lineterminator="\n")
            if new:
                w.writeheader()
            for rec in records:
                w.writerow(_to_row(domain_hash, s_hash, rec))

    def select(self, domain_hash: str | None = None, s_hash: str | None = None) -> list[StoredRecord]:
        latest = {}
        for sr in self.load():
            if domain_hash and sr.domain_hash != domain_hash:
                continue
            if s_hash and sr.sigma_hash != s_hash:
                continue
            latest[sr.key] = sr
        return sorted(latest.values(), key=lambda s: (s.domain_hash, s.sigma_hash, s.record.L))


def resume_sweep(store: ResultStore, region: LatticeRegion, sigma_doubled, Ls, *,
                 force: bool = False, workers: int | None = None, cut_dir: str = "+x",
                 compute=sweep) -> list[SweepRecord]:
    """Compute only the L values missing from ``store``; return all requested records by L.

    Records written by another tool version refuse to merge unless ``force``,
    which also recomputes keys that are already present.
    """
    d_hash, s_hash = region.digest, sigma_hash(sigma_doubled)
    have = {sr.record.L: sr for sr in store.select(d_hash, s_hash)}
    stale = sorted(L for L, sr in have.items() if sr.version != __version__)
    if stale and not force:
        raise StoreVersionError(
            f"store has records from another version for L={stale}; rerun with --force")
    Ls = sorted(set(int(L) for L in Ls))
    todo = Ls if force else [L for L in Ls if L not in have]
    if todo:
        fresh = compute(region, sigma_doubled, todo, workers=workers, cut_dir=cut_dir)
        # results are gathered before writing: the orchestrator is the only writer
        store.append(d_hash, s_hash, fresh)
        for rec in fresh:
            have[rec.L] = StoredRecord(d_hash, s_hash, __version__, rec)
    return [have[L].record for L in Ls]
