import datetime
import logging
import time


class RuntimeFormatter(logging.Formatter):
    """
    Report the time since this formatter is instantiated
    """
    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.start_time = time.time()

    def formatTime(self, record, datefmt=None):
        return str(datetime.timedelta(seconds=record.created - self.start_time))


def configure_logging(level: str = 'INFO', log_path: str = None) -> None:
    """
    Configure the root logger of the command line: the console, and ``log_path`` if not None.
    Records are stamped with the elapsed time since the start.
    """
    numeric_level = getattr(logging, level.upper(), None)
    assert isinstance(numeric_level, int), f'unknown log level={level}'

    formatter = RuntimeFormatter('%(asctime)s %(levelname)s %(name)s %(message)s')
    handlers = [logging.StreamHandler()]
    if log_path is not None:
        handlers.append(logging.FileHandler(log_path, mode='w'))
    for handler in handlers:
        handler.setFormatter(formatter)
    logging.basicConfig(level=numeric_level, handlers=handlers, force=True)
