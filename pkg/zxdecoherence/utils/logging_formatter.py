import os
import logging

from fluent import handler as fluent_handler

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'
FLUENT_TAG = 'zxdecoherence'

# attributes every LogRecord carries; anything else arrived through extra=
_RECORD_ATTRS = frozenset(vars(logging.LogRecord('', 0, '', 0, '', (), None))) | {'message', 'asctime'}


class ExtraFieldsFluentFormatter(fluent_handler.FluentRecordFormatter):
    """
    Fluentd formatter that also ships the structured fields (event, Lx, r, ...) passed via extra=
    """
    def format(self, record):
        payload = super().format(record)
        extras = {name: value for name, value in vars(record).items()
                  if name not in _RECORD_ATTRS and name not in payload}
        payload.update(extras)
        return payload


def configure_fluent_logging(logger_name: str, service_name: str, fluent_host: str, fluent_port: int):
    """
    Attach a FluentHandler to ``logger_name`` and return that logger
    """
    record_layout = {
        'service': service_name,
        'component': '%(name)s',
        'where': '%(module)s.%(funcName)s',
        'level': '%(levelname)s',
        'message': '%(message)s',
    }
    fluent = fluent_handler.FluentHandler(FLUENT_TAG, host=fluent_host, port=fluent_port)
    fluent.setFormatter(ExtraFieldsFluentFormatter(record_layout))

    target = logging.getLogger(logger_name)
    target.addHandler(fluent)
    return target


def configure_logging(level=logging.INFO, service_name: str = 'zxdecoherence'):
    """basicConfig on the root logger, plus Fluentd shipping when FLUENT_HOST is set."""
    logging.basicConfig(level=level, format=LOG_FORMAT)
    fluent_host = os.getenv('FLUENT_HOST')
    if fluent_host:
        fluent_port = int(os.getenv('FLUENT_PORT', '24224'))
        configure_fluent_logging('', service_name, fluent_host, fluent_port)
        logging.getLogger('cli').info(f'Shipping logs to fluentd at {fluent_host}:{fluent_port}')
    return logging.getLogger()
