"""Logging setup for command-line runs."""

import logging.config

DEFAULT_FORMAT = "%(levelname)s %(name)s: %(message)s"
_configured = False


def configure_logging(level: str = "INFO", fmt: str = DEFAULT_FORMAT) -> None:
    """Route package logs to stderr; later calls only adjust the level."""
    global _configured
    if _configured:
        logging.getLogger("load_disaggregation").setLevel(level.upper())
        return
    logging.config.dictConfig(
        {
            "version": 1,
            "disable_existing_loggers": False,
            "formatters": {"default": {"format": fmt}},
            "handlers": {
                "stderr": {
                    "class": "logging.StreamHandler",
                    "formatter": "default",
                    "stream": "ext://sys.stderr",
                }
            },
            "loggers": {
                "load_disaggregation": {
                    "handlers": ["stderr"],
                    "level": level.upper(),
                    "propagate": False,
                }
            },
        }
    )
    _configured = True
