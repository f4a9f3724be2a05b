from motionrv.config import MotionRvConfig
from motionrv.logger import get_logger
from motionrv.tracer import init, shutdown, trace

__version__ = '0.1.0'

__all__ = [
    'MotionRvConfig',
    'init',
    'trace',
    'get_logger',
    'shutdown',
]
