"""Utility modules"""

from .concurrency import retry, run_sharded, run_sharded_async

__all__ = ['retry', 'run_sharded', 'run_sharded_async']
