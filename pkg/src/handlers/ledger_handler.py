import asyncio
from typing import Dict, Optional

from loguru import logger

from tools.ledger_manager import LedgerManager


class LedgerHandler:
    """Async facade over the ledger; failures are logged and never abort an experiment."""

    def __init__(self, url: str):
        self.manager: Optional[LedgerManager] = None
        if not url:
            logger.info("Experiment ledger disabled.")
            return
        try:
            self.manager = LedgerManager(url)
        except Exception as e:
            logger.warning(f"Could not open the experiment ledger ({e}). Continuing without it.")

    @property
    def enabled(self) -> bool:
        return self.manager is not None

    async def _run_sync_db_operation(self, func, *args):
        try:
            return await asyncio.to_thread(func, *args)
        except Exception as e:
            logger.error(f"Error during ledger operation ({func.__name__}): {e}")
            return None

    async def ensure_tables_exist(self) -> bool:
        if not self.enabled:
            return False
        ok = await self._run_sync_db_operation(self.manager.ensure_tables)
        if ok:
            logger.debug("Ledger tables verified/created.")
        else:
            logger.warning("Ledger tables could not be ensured; ledger disabled for this run.")
            self.manager = None
        return bool(ok)

    async def open_run(self, experiment: str, config_hash: str, report_dir: str) -> Optional[int]:
        if not self.enabled:
            return None
        return await self._run_sync_db_operation(self.manager.start_run, experiment, config_hash, report_dir)

    async def close_run(self, run_id: Optional[int], status: str, exit_code: int, metrics: Dict[str, float]):
        if not self.enabled or run_id is None:
            return
        inserted = await self._run_sync_db_operation(self.manager.insert_metrics, run_id, metrics)
        await self._run_sync_db_operation(self.manager.finish_run, run_id, status, exit_code)
        logger.info(f"Ledger run {run_id} closed with status '{status}' ({inserted or 0} metrics).")
