"""Persistent record of CLI and HTTP runs backed by SQLAlchemy."""

from __future__ import annotations

import json
from datetime import datetime, timezone
from typing import Any, Iterable, List, Optional

import structlog
from pydantic import BaseModel
from sqlalchemy import DateTime, Integer, String, Text, delete, select
from sqlalchemy.orm import Mapped, Session, mapped_column

from .database import Base, init_db, session_scope

logger = structlog.get_logger(__name__)


class RunRecord(Base):
    """ORM model representing a single toolkit run."""

    __tablename__ = "runs"

    id: Mapped[int] = mapped_column(Integer, primary_key=True, autoincrement=True)
    timestamp: Mapped[datetime] = mapped_column(
        DateTime(timezone=True), default=lambda: datetime.now(timezone.utc), nullable=False
    )
    command: Mapped[str] = mapped_column(String(64), nullable=False)
    status: Mapped[str] = mapped_column(String(32), nullable=False)
    exit_code: Mapped[int] = mapped_column(Integer, nullable=False, default=0)
    summary: Mapped[str] = mapped_column(Text, nullable=False, default="{}")


class RunEntry(BaseModel):
    id: int
    timestamp: datetime
    command: str
    status: str
    exit_code: int
    summary: dict[str, Any]


class RunLedger:
    """Thread-safe run ledger backed by SQLAlchemy sessions."""

    def __init__(self) -> None:
        init_db()

    def save(self, command: str, status: str, exit_code: int, summary: Optional[dict[str, Any]] = None) -> int:
        text = json.dumps(summary or {}, sort_keys=True, default=str)
        with session_scope() as session:
            record = RunRecord(command=command, status=status, exit_code=exit_code, summary=text)
            session.add(record)
            session.flush()
            run_id = record.id
        logger.info("run_recorded", command=command, status=status, run_id=run_id)
        return run_id

    def load(self, limit: int = 20) -> List[RunEntry]:
        with session_scope() as session:
            return [
                RunEntry(
                    id=record.id,
                    timestamp=record.timestamp,
                    command=record.command,
                    status=record.status,
                    exit_code=record.exit_code,
                    summary=json.loads(record.summary),
                )
                for record in self._latest_runs(session, limit)
            ]

    def reset(self) -> None:
        with session_scope() as session:
            session.execute(delete(RunRecord))

    @staticmethod
    def _latest_runs(session: Session, limit: int) -> Iterable[RunRecord]:
        stmt = select(RunRecord).order_by(RunRecord.id.desc()).limit(limit)
        return session.scalars(stmt)
