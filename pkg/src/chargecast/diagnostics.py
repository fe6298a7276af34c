"""Run diagnostics: warning records and counters collected across stages."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

log = logging.getLogger("chargecast")


@dataclass(frozen=True)
class WarningRecord:
    code: str
    context: str
    message: str


@dataclass
class Diagnostics:
    """Accumulates warnings and counters for the run manifest.

    Warnings are deduplicated on (code, context) so each event appears
    exactly once in the manifest.
    """

    warnings: list[WarningRecord] = field(default_factory=list)
    counters: dict[str, int] = field(default_factory=dict)

    def warn(self, code: str, context: str, message: str) -> None:
        rec = WarningRecord(code, context, message)
        if rec not in self.warnings:
            self.warnings.append(rec)
        log.warning("%s [%s]: %s", code, context, message)

    def count(self, key: str, n: int = 1) -> None:
        self.counters[key] = self.counters.get(key, 0) + n

    def as_dict(self) -> dict:
        return {
            "warnings": [
                {"code": w.code, "context": w.context, "message": w.message}
                for w in self.warnings
            ],
            "counters": dict(self.counters),
        }
