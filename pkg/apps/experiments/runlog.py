"""
Append-only JSON-lines log of command runs.
"""
from __future__ import annotations

import json
import logging
import uuid
from dataclasses import asdict, dataclass, field
from pathlib import Path

from django.conf import settings
from django.utils import timezone

from apps.core.exceptions import InvalidConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunRecord:
    """Everything needed to reproduce a command's outputs: resolved config, input digest, results."""
    command: str
    config: dict
    results: dict
    input: dict | None = None
    version: str = field(default_factory=lambda: settings.INTERIM_ANALYSIS_VERSION)
    timestamp: str = field(default_factory=lambda: timezone.now().isoformat())
    run_id: str = field(default_factory=lambda: uuid.uuid4().hex)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> RunRecord:
        try:
            return cls(**{key: data[key] for key in ('command', 'config', 'results', 'input',
                                                     'version', 'timestamp', 'run_id')})
        except KeyError as exc:
            raise InvalidConfig(f"run record is missing {exc.args[0]!r}") from None


def append_record(path, record: RunRecord) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('a', encoding='utf-8') as handle:
        handle.write(json.dumps(record.to_dict(), sort_keys=True, allow_nan=False) + '\n')
    logger.info("[RUNLOG] %s run %s appended to %s", record.command, record.run_id, path)


def read_records(path) -> list[RunRecord]:
    path = Path(path)
    try:
        lines = path.read_text(encoding='utf-8').splitlines()
    except OSError as exc:
        raise InvalidConfig(f"cannot read run log {path}: {exc.strerror or exc}") from exc
    records = []
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            records.append(RunRecord.from_dict(json.loads(line)))
        except (json.JSONDecodeError, TypeError) as exc:
            raise InvalidConfig(f"{path}:{number}: not a run record ({exc})") from exc
    return records


def latest_record(path, command: str) -> RunRecord:
    for record in reversed(read_records(path)):
        if record.command == command:
            return record
    raise InvalidConfig(f"no {command} run in {path}")
