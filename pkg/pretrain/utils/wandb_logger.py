"""
Safe methods for WandB logging
"""

from __future__ import annotations

import os
import threading
from queue import Queue
from typing import Any

import bittensor as bt
import wandb

from utils.system import system_specs

PROJECT_NAME = "mambamim-pretrain"
WANDB_ENABLED = False
_log_queue: Queue = Queue()
_log_thread = None


def _log_worker():
    while True:
        try:
            data = _log_queue.get()
            if data is None:
                break
            wandb.log(data)
        except Exception as e:
            bt.logging.debug(f"Failed to log to WandB in worker thread: {e}")
        finally:
            _log_queue.task_done()


def _ensure_log_thread():
    global _log_thread
    if _log_thread is None or not _log_thread.is_alive():
        _log_thread = threading.Thread(target=_log_worker, daemon=True)
        _log_thread.start()


def safe_login(api_key: str):
    """
    Attempts to log into WandB using a provided API key
    """
    try:
        bt.logging.debug("Attempting to log into WandB using provided API Key")
        wandb.login(key=api_key)
    except Exception as e:
        bt.logging.error(e)
        bt.logging.error("Failed to login to WandB. Your run will not be logged.")


def safe_init(name: str | None = None, run_config: dict[str, str] | None = None, disabled: bool = True):
    """
    Attempts to initialize WandB, and logs if unsuccessful
    """
    global WANDB_ENABLED
    if disabled:
        bt.logging.debug("WandB logging disabled.")
        WANDB_ENABLED = False
        return
    try:
        bt.logging.debug("Attempting to initialize WandB")
        config_dict = dict(run_config or {})
        config_dict.update(system_specs())
        os.environ["WANDB_CONSOLE"] = "off"
        wandb.init(project=PROJECT_NAME, name=name, config=config_dict, reinit=True)
        WANDB_ENABLED = True
        _ensure_log_thread()
    except Exception as e:
        bt.logging.error(e)
        bt.logging.error("Failed to initialize WandB. Your run will not be logged.")
        WANDB_ENABLED = False


def safe_log(data: dict[str, Any]):
    """
    Queue data for WandB; a no-op unless WandB was initialized.
    """
    if not WANDB_ENABLED:
        return
    try:
        _log_queue.put(data)
    except Exception as e:
        bt.logging.debug("Failed to queue WandB log.")
        bt.logging.debug(e)


def safe_finish():
    """
    Drain the log queue and close the run.
    """
    global WANDB_ENABLED
    if not WANDB_ENABLED:
        return
    try:
        _log_queue.join()
        wandb.finish()
    except Exception as e:
        bt.logging.debug(f"Failed to finish WandB run: {e}")
    finally:
        WANDB_ENABLED = False
