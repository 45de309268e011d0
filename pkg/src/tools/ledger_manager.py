from datetime import datetime, timezone
from typing import Dict, Optional

from loguru import logger
from sqlalchemy import (
    Column,
    DateTime,
    Float,
    Integer,
    MetaData,
    String,
    Table,
    create_engine,
    insert,
    select,
    update,
)
from sqlalchemy.exc import SQLAlchemyError

metadata = MetaData()

experiment_runs = Table(
    "experiment_runs",
    metadata,
    Column("run_id", Integer, primary_key=True, autoincrement=True),
    Column("experiment", String(32), nullable=False),
    Column("config_hash", String(32), nullable=False),
    Column("report_dir", String(512)),
    Column("status", String(32), nullable=False, default="running"),
    Column("exit_code", Integer),
    Column("started_at", DateTime(timezone=True), nullable=False),
    Column("finished_at", DateTime(timezone=True)),
)

experiment_metrics = Table(
    "experiment_metrics",
    metadata,
    Column("metric_id", Integer, primary_key=True, autoincrement=True),
    Column("run_id", Integer, nullable=False, index=True),
    Column("name", String(128), nullable=False),
    Column("value", Float),
)


class LedgerManager:
    """Synchronous access to the experiment ledger through a SQLAlchemy engine."""

    def __init__(self, url: str):
        if not url:
            logger.error("No ledger URL was provided.")
            raise ValueError("No ledger URL was provided.")
        self.url = url
        self.engine = create_engine(url)
        safe_url = self.engine.url.render_as_string(hide_password=True)
        logger.info(f"LedgerManager initialized for '{safe_url}'.")

    def ensure_tables(self) -> bool:
        try:
            metadata.create_all(self.engine)
            return True
        except SQLAlchemyError as e:
            logger.error(f"Error creating ledger tables: {e}")
            return False

    def start_run(self, experiment: str, config_hash: str, report_dir: str) -> Optional[int]:
        try:
            with self.engine.begin() as conn:
                result = conn.execute(
                    insert(experiment_runs).values(
                        experiment=experiment,
                        config_hash=config_hash,
                        report_dir=report_dir,
                        status="running",
                        started_at=datetime.now(timezone.utc),
                    )
                )
                return int(result.inserted_primary_key[0])
        except SQLAlchemyError as e:
            logger.error(f"Error registering run of '{experiment}': {e}")
            return None

    def finish_run(self, run_id: int, status: str, exit_code: int) -> bool:
        try:
            with self.engine.begin() as conn:
                conn.execute(
                    update(experiment_runs)
                    .where(experiment_runs.c.run_id == run_id)
                    .values(status=status, exit_code=exit_code, finished_at=datetime.now(timezone.utc))
                )
            return True
        except SQLAlchemyError as e:
            logger.error(f"Error closing run {run_id}: {e}")
            return False

    def insert_metrics(self, run_id: int, metrics: Dict[str, float]) -> int:
        rows = [
            {"run_id": run_id, "name": name, "value": float(value)}
            for name, value in metrics.items()
            if isinstance(value, (int, float)) and not isinstance(value, bool)
        ]
        if not rows:
            return 0
        try:
            with self.engine.begin() as conn:
                conn.execute(insert(experiment_metrics), rows)
            return len(rows)
        except SQLAlchemyError as e:
            logger.error(f"Error inserting {len(rows)} metrics for run {run_id}: {e}")
            return 0

    def run_history(self, experiment: str, config_hash: str):
        query = (
            select(experiment_runs)
            .where(experiment_runs.c.experiment == experiment)
            .where(experiment_runs.c.config_hash == config_hash)
            .order_by(experiment_runs.c.run_id)
        )
        try:
            with self.engine.connect() as conn:
                return [dict(row._mapping) for row in conn.execute(query)]
        except SQLAlchemyError as e:
            logger.error(f"Error reading ledger history: {e}")
            return []
