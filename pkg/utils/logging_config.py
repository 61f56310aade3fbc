import logging
import os
from datetime import datetime


def setup_logging(level: str = "INFO", log_dir: str = "logs"):
    """Configure logging for the command-line tool."""

    # Configure logging format
    log_format = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

    handlers = [logging.StreamHandler()]  # stderr
    if log_dir:
        if not os.path.exists(log_dir):
            os.makedirs(log_dir)
        handlers.append(
            logging.FileHandler(
                os.path.join(log_dir, f'topo_meta_{datetime.now().strftime("%Y%m%d")}.log')
            )
        )

    # Configure root logger
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format=log_format,
        handlers=handlers,
        force=True
    )

    # Set specific log levels for third-party modules
    logging.getLogger('matplotlib').setLevel(logging.WARNING)
    logging.getLogger('PIL').setLevel(logging.WARNING)

    logger = logging.getLogger('topo_meta')
    logger.debug("Logging configured successfully")
