"""HTTP service for human triage of sampled false positives.

Backed by a single annotation CSV (no database): reads load it into memory,
writes go through one lock and are flushed atomically (temp file + rename)
before the response is acknowledged, so a restart never loses an accepted
annotation. Endpoints:

    GET  /samples?filter=&page=&page_size=   paged listing
    POST /samples/{key}/annotation           {category, severity[, base_version]}
    GET  /export                             the CSV, byte-exact
    GET  /tally                              category/severity tally JSON

Intended as a localhost tool; bind address defaults to loopback and there is
no authentication.
"""

from __future__ import annotations

import json
import os
import tempfile
import threading
from dataclasses import dataclass, replace
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional
from urllib.parse import parse_qs, unquote, urlparse

from .analysis import (
    FpCategory,
    FpSample,
    Severity,
    annotation_csv_bytes,
    read_annotation_csv,
    tally_annotations,
)
from .errors import InputError

__all__ = ["AnnotationStore", "AnnotationServer", "ValidationError", "NotFoundError"]


class ValidationError(InputError):
    pass


class NotFoundError(InputError):
    pass


class RangeError(InputError):
    pass


@dataclass(frozen=True)
class StoredSample:
    key: str  # "<file_name>#<per-file ordinal>"
    file_name: str
    ordinal: int
    sample: FpSample
    version: int = 0

    def to_json(self) -> dict:
        s = self.sample
        return {
            "key": self.key,
            "file_name": s.file_name,
            "ordinal": self.ordinal,
            "edit_distance": s.edit_distance,
            "original_token": s.original_token,
            "deid_token": s.deid_token,
            "context": s.context,
            "category": s.category.value,
            "severity": s.severity.value,
            "version": self.version,
        }


class AnnotationStore:
    """In-memory view over the annotation CSV with serialized writes."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._rows: list[StoredSample] = []
        self._index: dict[str, int] = {}
        self._load()

    def _load(self) -> None:
        per_file: dict[str, int] = {}
        rows = []
        index = {}
        for row_pos, sample in enumerate(read_annotation_csv(self.path)):
            ordinal = per_file.get(sample.file_name, 0)
            per_file[sample.file_name] = ordinal + 1
            key = f"{sample.file_name}#{ordinal}"
            rows.append(StoredSample(key=key, file_name=sample.file_name, ordinal=ordinal, sample=sample))
            index[key] = row_pos
        self._rows = rows
        self._index = index

    def _persist_locked(self) -> None:
        data = annotation_csv_bytes([r.sample for r in self._rows])
        fd, tmp = tempfile.mkstemp(dir=str(self.path.parent), suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, self.path)
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)

    # -- queries ------------------------------------------------------------

    def list_samples(
        self,
        filter_: str = "all",
        page: int = 1,
        page_size: int = 50,
    ) -> dict:
        """Stable (file_name, ordinal) ordering; filter is a category name,
        "unannotated" (category still Unknown) or "all"."""
        if page < 1:
            raise RangeError(f"page must be >= 1, got {page}")
        if page_size < 1:
            raise RangeError(f"page_size must be >= 1, got {page_size}")
        with self._lock:
            rows = sorted(self._rows, key=lambda r: (r.file_name, r.ordinal))
            annotated = sum(r.sample.category is not FpCategory.UNKNOWN for r in self._rows)
            total_all = len(self._rows)
        if filter_ == "all":
            pass
        elif filter_ == "unannotated":
            rows = [r for r in rows if r.sample.category is FpCategory.UNKNOWN]
        else:
            category = FpCategory.from_string(filter_)
            rows = [r for r in rows if r.sample.category is category]
        start = (page - 1) * page_size
        if start > 0 and start >= len(rows):
            raise RangeError(f"page {page} is past the end ({len(rows)} rows)")
        return {
            "total": len(rows),
            "total_all": total_all,
            "annotated": annotated,
            "page": page,
            "page_size": page_size,
            "samples": [r.to_json() for r in rows[start : start + page_size]],
        }

    def get(self, key: str) -> StoredSample:
        with self._lock:
            pos = self._index.get(key)
            if pos is None:
                raise NotFoundError(f"no sample with key {key!r}")
            return self._rows[pos]

    # -- mutation -----------------------------------------------------------

    def annotate(
        self,
        key: str,
        category: FpCategory,
        severity: Severity = Severity.NOT_APPLICABLE,
        base_version: Optional[int] = None,
    ) -> StoredSample:
        """Set category (and severity for relevant changes); persists before
        returning. A stale base_version is rejected so the caller can warn."""
        relevant = category is FpCategory.CLINICALLY_RELEVANT
        if relevant and severity is Severity.NOT_APPLICABLE:
            raise ValidationError("ClinicallyRelevant requires severity High or Low")
        if not relevant and severity is not Severity.NOT_APPLICABLE:
            raise ValidationError(
                f"severity only applies to ClinicallyRelevant, not {category.value}"
            )
        with self._lock:
            pos = self._index.get(key)
            if pos is None:
                raise NotFoundError(f"no sample with key {key!r}")
            row = self._rows[pos]
            if base_version is not None and base_version != row.version:
                raise StaleVersionError(row)
            updated = replace(
                row,
                sample=replace(row.sample, category=category, severity=severity),
                version=row.version + 1,
            )
            self._rows[pos] = updated
            self._persist_locked()
            return updated

    def export_csv(self) -> bytes:
        with self._lock:
            return annotation_csv_bytes([r.sample for r in self._rows])

    def tally(self) -> dict:
        with self._lock:
            return tally_annotations([r.sample for r in self._rows]).to_json()


class StaleVersionError(Exception):
    def __init__(self, row: StoredSample):
        super().__init__(f"sample {row.key} is at version {row.version}")
        self.row = row


def _make_handler(store: AnnotationStore, ui_dir: Optional[Path]):
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):
            pass

        def _send(self, status: int, body: bytes, content_type: str):
            self.send_response(status)
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _json(self, status: int, payload: dict):
            self._send(status, json.dumps(payload).encode("utf-8"), "application/json")

        def do_GET(self):
            url = urlparse(self.path)
            try:
                if url.path == "/samples":
                    qs = parse_qs(url.query)
                    page = int(qs.get("page", ["1"])[0])
                    page_size = int(qs.get("page_size", ["50"])[0])
                    filter_ = qs.get("filter", ["all"])[0]
                    self._json(200, store.list_samples(filter_, page, page_size))
                elif url.path == "/export":
                    self._send(200, store.export_csv(), "text/csv; charset=utf-8")
                elif url.path == "/tally":
                    self._json(200, store.tally())
                elif ui_dir is not None:
                    self._serve_static(url.path)
                else:
                    self._json(404, {"error": f"no such path: {url.path}"})
            except (InputError, ValueError) as exc:
                self._json(400, {"error": str(exc)})

        def _serve_static(self, path: str):
            name = path.lstrip("/") or "index.html"
            target = (ui_dir / name).resolve()
            if not str(target).startswith(str(ui_dir.resolve())) or not target.is_file():
                self._json(404, {"error": f"no such path: {path}"})
                return
            types = {
                ".html": "text/html; charset=utf-8",
                ".js": "text/javascript; charset=utf-8",
                ".css": "text/css; charset=utf-8",
                ".map": "application/json",
            }
            self._send(200, target.read_bytes(), types.get(target.suffix, "application/octet-stream"))

        def do_POST(self):
            url = urlparse(self.path)
            parts = url.path.split("/")
            # /samples/{key}/annotation
            if len(parts) != 4 or parts[1] != "samples" or parts[3] != "annotation":
                self._json(404, {"error": f"no such path: {url.path}"})
                return
            key = unquote(parts[2])
            length = int(self.headers.get("Content-Length", 0))
            try:
                payload = json.loads(self.rfile.read(length).decode("utf-8"))
                category = FpCategory.from_string(payload["category"])
                severity = Severity.from_string(payload.get("severity", "NotApplicable"))
                base_version = payload.get("base_version")
                if base_version is not None:
                    base_version = int(base_version)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                self._json(400, {"error": "body must be JSON {category, severity?, base_version?}"})
                return
            except InputError as exc:
                self._json(400, {"error": str(exc)})
                return
            try:
                updated = store.annotate(key, category, severity, base_version)
                self._json(200, updated.to_json())
            except StaleVersionError as exc:
                self._json(409, {"error": str(exc), "current": exc.row.to_json()})
            except ValidationError as exc:
                self._json(400, {"error": str(exc)})
            except NotFoundError as exc:
                self._json(404, {"error": str(exc)})

    return Handler


class AnnotationServer:
    """Thin lifecycle wrapper so the CLI and tests share one code path."""

    def __init__(
        self,
        store: AnnotationStore,
        port: int = 8377,
        bind: str = "127.0.0.1",
        ui_dir: Optional[str | Path] = None,
    ):
        self.store = store
        ui = Path(ui_dir) if ui_dir else None
        self._httpd = ThreadingHTTPServer((bind, port), _make_handler(store, ui))
        self._thread: Optional[threading.Thread] = None

    @property
    def address(self) -> tuple[str, int]:
        host, port = self._httpd.server_address[:2]
        return str(host), int(port)

    def start(self) -> None:
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()

    def serve_forever(self) -> None:
        self._httpd.serve_forever()

    def shutdown(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
