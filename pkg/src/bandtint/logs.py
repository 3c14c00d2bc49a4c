import logging
import sys
from typing import Any

from pydantic import BaseModel, Field

from bandtint import constants

# attributes every LogRecord carries; anything else was passed through `extra`
_RECORD_FIELDS = frozenset(
    logging.LogRecord('', 0, '', 0, '', None, None).__dict__,
) | {'message', 'asctime'}
_PLAIN = (str, int, float, bool, list, dict, type(None))


class LogEvent(BaseModel):
    level: str
    logger: str
    message: str
    context: dict[str, Any] = Field(
        default_factory=dict,
    )


class JsonFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        context = {
            key: value if isinstance(value, _PLAIN) else str(value)
            for key, value in record.__dict__.items()
            if key not in _RECORD_FIELDS
        }
        event = LogEvent(
            level=record.levelname.lower(),
            logger=record.name,
            message=record.getMessage(),
            context=context,
        )
        if record.exc_info:
            event.context['exception'] = self.formatException(record.exc_info)
        return event.model_dump_json(
            exclude_defaults=True,
        )


def configure_logging(level: constants.LogLevel) -> None:
    """
    Route every `bandtint.*` record to standard error as one JSON object per line.
    """
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(JsonFormatter())

    root = logging.getLogger('bandtint')
    root.handlers.clear()
    root.addHandler(handler)
    root.setLevel(level.level)
    root.propagate = False
