"""
Reading effect-estimate stream files.

A stream file is CSV with the header experiment_id,day,estimate,sigma (or JSON
records with the same keys). Every row is validated, and the whole file is
rejected on the first violation with a 1-based data-row number. Blank lines
count as (empty, hence invalid) data rows so the number matches the file.
"""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import pandas as pd

from apps.core.domain import EffectStream
from apps.core.exceptions import StreamFileError

from .serializers import StreamRowSerializer

logger = logging.getLogger(__name__)

COLUMNS = ('experiment_id', 'day', 'estimate', 'sigma')


@dataclass(frozen=True)
class StreamFile:
    source: str
    sha256: str
    streams: dict[str, EffectStream]

    @property
    def experiment_ids(self) -> list[str]:
        return list(self.streams)


def _first_error(errors: Mapping) -> str:
    return '; '.join(f"{field}: {' '.join(str(m) for m in messages)}" for field, messages in errors.items())


def parse_rows(rows: Iterable[Mapping]) -> dict[str, EffectStream]:
    """
    Validate rows and group them into one stream per experiment, keyed by
    experiment id in sorted order. Days must run 1..n without gaps or
    duplicates, and sigma must be constant within an experiment.
    """
    grouped: dict[str, dict[int, tuple[float, int]]] = {}
    sigmas: dict[str, tuple[float, int]] = {}
    for row_number, row in enumerate(rows, start=1):
        if all(pd.isna(value) or value == '' for value in row.values()):
            raise StreamFileError("empty row", row=row_number)
        serializer = StreamRowSerializer(data=dict(row))
        if not serializer.is_valid():
            raise StreamFileError(_first_error(serializer.errors), row=row_number)
        data = serializer.validated_data
        experiment_id, day = data['experiment_id'], data['day']

        days = grouped.setdefault(experiment_id, {})
        if day in days:
            raise StreamFileError(
                f"duplicate day {day} for experiment {experiment_id!r} (first seen on row {days[day][1]})",
                row=row_number,
            )
        days[day] = (data['estimate'], row_number)

        sigma, first_row = sigmas.setdefault(experiment_id, (data['sigma'], row_number))
        if data['sigma'] != sigma:
            raise StreamFileError(
                f"sigma {data['sigma']} differs from {sigma} on row {first_row} for experiment {experiment_id!r}",
                row=row_number,
            )

    if not grouped:
        raise StreamFileError("stream file has no data rows")

    streams = {}
    for experiment_id in sorted(grouped):
        days = grouped[experiment_id]
        for expected, day in enumerate(sorted(days), start=1):
            if day != expected:
                raise StreamFileError(
                    f"experiment {experiment_id!r} is missing day {expected}",
                    row=days[day][1],
                )
        estimates = tuple(days[day][0] for day in sorted(days))
        streams[experiment_id] = EffectStream(estimates, sigmas[experiment_id][0])
    return streams


def _read_frame(path: Path) -> pd.DataFrame:
    if path.suffix.lower() == '.json':
        frame = pd.read_json(path, orient='records', dtype=False)
    else:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True, skip_blank_lines=False)
    missing = [column for column in COLUMNS if column not in frame.columns]
    if missing:
        raise StreamFileError(f"missing column(s): {', '.join(missing)}; expected header {','.join(COLUMNS)}")
    return frame[list(COLUMNS)]


def read_stream_file(path) -> StreamFile:
    path = Path(path)
    try:
        payload = path.read_bytes()
        frame = _read_frame(path)
    except StreamFileError:
        raise
    except OSError as exc:
        raise StreamFileError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except (ValueError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise StreamFileError(f"cannot parse {path}: {exc}") from exc

    streams = parse_rows(frame.to_dict('records'))
    logger.info("[STREAM] %s: %s experiments, %s rows", path.name, len(streams), len(frame))
    return StreamFile(str(path), hashlib.sha256(payload).hexdigest(), streams)
