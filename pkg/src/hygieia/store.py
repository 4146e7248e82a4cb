"""Append-only JSON Lines persistence for cases and their outcome history.

Two journals live under the store directory: cases.jsonl and
outcomes.jsonl. Every append is flushed and fsynced before the caller gets
an acknowledgement, and the in-memory index is rebuilt by replaying the
journals on startup, so a hard kill between requests loses nothing.
"""

from __future__ import annotations

import json
import os
import threading
import time
from pathlib import Path

from .errors import DuplicateId


class JournalStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._cases_path = self.root / "cases.jsonl"
        self._outcomes_path = self.root / "outcomes.jsonl"
        self._lock = threading.Lock()
        self._cases: dict[str, dict] = {}
        self._outcomes: dict[str, list[dict]] = {}
        self._replay()

    def _replay(self) -> None:
        if self._cases_path.exists():
            for line in self._cases_path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    entry = json.loads(line)
                    self._cases[entry["id"]] = entry
        if self._outcomes_path.exists():
            for line in self._outcomes_path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    entry = json.loads(line)
                    self._outcomes.setdefault(entry["case_id"], []).append(entry)

    @staticmethod
    def _append(path: Path, entry: dict) -> None:
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def create_case(self, case_id: str, case: dict) -> None:
        with self._lock:
            if case_id in self._cases:
                raise DuplicateId(case_id)
            entry = {"id": case_id, "case": case, "created_at": time.time()}
            self._append(self._cases_path, entry)
            self._cases[case_id] = entry

    def get_case(self, case_id: str) -> dict | None:
        with self._lock:
            return self._cases.get(case_id)

    def case_ids(self) -> list[str]:
        with self._lock:
            return list(self._cases)

    def append_outcome(self, case_id: str, task: str, payload: dict) -> int:
        """Persist one outcome; returns its index in the case's history."""
        with self._lock:
            if case_id not in self._cases:
                raise KeyError(case_id)
            history = self._outcomes.setdefault(case_id, [])
            entry = {
                "case_id": case_id,
                "index": len(history),
                "task": task,
                "payload": payload,
                "completed_at": time.time(),
            }
            self._append(self._outcomes_path, entry)
            history.append(entry)
            return entry["index"]

    def outcomes(self, case_id: str) -> list[dict]:
        with self._lock:
            return list(self._outcomes.get(case_id, []))

    def get_outcome(self, case_id: str, index: int) -> dict | None:
        with self._lock:
            history = self._outcomes.get(case_id, [])
            if 0 <= index < len(history):
                return history[index]
            return None
