import logging
from enum import StrEnum


class LogLevel(StrEnum):
    ERROR = 'error'
    INFO = 'info'
    DEBUG = 'debug'

    @property
    def level(self) -> int:
        return logging.getLevelNamesMapping()[self.value.upper()]
