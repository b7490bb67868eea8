"""Threaded HTTP front end for the study store.

Routes:
  GET  /api/session/{participant}  list of sets with per-participant display order
  POST /api/annotations            validate + append one annotation
  GET  /api/report                 aggregated metrics as JSON
  GET  /api/curation, POST /api/curation   curation review records
  GET  /media/...                  static videos / reference images
  GET  /...                        optional UI bundle directory
"""

from __future__ import annotations

import json
import mimetypes
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import unquote, urlparse

from .errors import FfgoError
from .study import AnnotationRecord, StudyStore, aggregate


class CurationLog:
    """Append-only log of curation review decisions."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._records: list[dict] = []
        if self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    self._records.append(json.loads(line))

    def add(self, record: dict) -> int:
        video = record.get("video")
        labels = [l for l in record.get("element_labels", []) if str(l).strip()]
        approved = bool(record.get("approved"))
        if not video:
            raise FfgoError("curation record needs a video reference")
        if approved and not labels:
            raise FfgoError("approval requires at least one element label")
        entry = {"video": video, "element_labels": labels, "approved": approved}
        with self._lock:
            entry["id"] = len(self._records) + 1
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry, ensure_ascii=False) + "\n")
            self._records.append(entry)
            return entry["id"]

    @property
    def records(self) -> list[dict]:
        with self._lock:
            return list(self._records)


def make_handler(store: StudyStore, media_dir: Path, curation: CurationLog, ui_dir: Path | None):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # keep test output quiet
            pass

        def _send(self, status: int, body: bytes, content_type: str) -> None:
            self.send_response(status)
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.end_headers()
            self.wfile.write(body)

        def _send_json(self, status: int, payload) -> None:
            self._send(status, json.dumps(payload).encode("utf-8"), "application/json")

        def _send_file(self, path: Path) -> None:
            if not path.is_file():
                self._send_json(404, {"errors": [{"code": "not_found", "detail": str(path.name)}]})
                return
            ctype = mimetypes.guess_type(path.name)[0] or "application/octet-stream"
            self._send(200, path.read_bytes(), ctype)

        def do_OPTIONS(self):
            self._send(204, b"", "text/plain")

        def do_GET(self):
            route = unquote(urlparse(self.path).path)
            if route.startswith("/api/session/"):
                participant = route[len("/api/session/") :]
                if not participant:
                    self._send_json(400, {"errors": [{"code": "bad_participant", "detail": "empty id"}]})
                    return
                self._send_json(
                    200,
                    {"participant_id": participant, "sets": store.session(participant)},
                )
            elif route == "/api/report":
                annotations = store.annotations
                if not annotations:
                    self._send_json(200, {"n_annotations": 0, "n_participants": 0, "models": {}})
                    return
                self._send(
                    200,
                    aggregate(list(annotations)).to_json().encode("utf-8"),
                    "application/json",
                )
            elif route == "/api/curation":
                self._send_json(200, {"records": curation.records})
            elif route.startswith("/media/"):
                rel = Path(route[len("/media/") :])
                target = (media_dir / rel).resolve()
                if media_dir.resolve() not in target.parents and target != media_dir.resolve():
                    self._send_json(403, {"errors": [{"code": "forbidden", "detail": "path escape"}]})
                    return
                self._send_file(target)
            elif ui_dir is not None:
                rel = route.lstrip("/") or "index.html"
                target = (ui_dir / rel).resolve()
                if ui_dir.resolve() not in target.parents and target != ui_dir.resolve():
                    self._send_json(403, {"errors": [{"code": "forbidden", "detail": "path escape"}]})
                    return
                self._send_file(target)
            else:
                self._send_json(404, {"errors": [{"code": "not_found", "detail": route}]})

        def do_POST(self):
            route = unquote(urlparse(self.path).path)
            length = int(self.headers.get("Content-Length", "0"))
            try:
                payload = json.loads(self.rfile.read(length) or b"{}")
            except json.JSONDecodeError:
                self._send_json(400, {"errors": [{"code": "bad_json", "detail": "unparseable body"}]})
                return

            if route == "/api/annotations":
                try:
                    record = AnnotationRecord.from_record(payload)
                    stored_id = store.submit_annotation(record)
                except (KeyError, TypeError, ValueError) as exc:
                    self._send_json(400, {"errors": [{"code": "bad_record", "detail": str(exc)}]})
                except FfgoError as exc:
                    self._send_json(
                        400,
                        {"errors": [{"code": type(exc).__name__, "detail": str(exc)}]},
                    )
                else:
                    self._send_json(200, {"id": stored_id})
            elif route == "/api/curation":
                try:
                    stored_id = curation.add(payload)
                except FfgoError as exc:
                    self._send_json(
                        400,
                        {"errors": [{"code": type(exc).__name__, "detail": str(exc)}]},
                    )
                else:
                    self._send_json(200, {"id": stored_id})
            else:
                self._send_json(404, {"errors": [{"code": "not_found", "detail": route}]})

    return Handler


class StudyServer:
    """Lifecycle wrapper around ThreadingHTTPServer for tests and the CLI."""

    def __init__(
        self,
        data_dir: str | Path,
        port: int = 0,
        host: str = "127.0.0.1",
        seed: int = 0,
        ui_dir: str | Path | None = None,
    ):
        data_dir = Path(data_dir)
        self.store = StudyStore.from_dir(data_dir, seed=seed)
        self.curation = CurationLog(data_dir / "curation.jsonl")
        handler = make_handler(
            self.store, data_dir, self.curation, Path(ui_dir) if ui_dir else None
        )
        self.httpd = ThreadingHTTPServer((host, port), handler)
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self.httpd.server_address[1]

    def start(self) -> "StudyServer":
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread:
            self._thread.join(timeout=5)

    def serve_forever(self) -> None:
        self.httpd.serve_forever()
