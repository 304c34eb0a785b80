import logging
import os
import sys


def get_logger(name):
    logger = logging.getLogger(name)
    if not logger.handlers:
        level = os.environ.get("QSME_LOG_LEVEL", "INFO").upper()
        logger.setLevel(getattr(logging, level, logging.INFO))
        formatter = logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s')

        # stdout is reserved for JSON emitted by the CLI
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(formatter)
        logger.addHandler(handler)
        logger.propagate = False
    return logger
