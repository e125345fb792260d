"""
Logging Utility
Handles application logging with rotation
"""

import logging
from pathlib import Path
from logging.handlers import RotatingFileHandler
from typing import Optional

# Maximum log file size: 5MB
MAX_LOG_SIZE = 5 * 1024 * 1024  # 5MB in bytes
BACKUP_COUNT = 3  # Keep 3 backup files

LOGGER_NAME = "netinterf"
APP_ROOT = Path(__file__).parent.parent.parent
DEFAULT_LOG_FILE = "logs/netinterf.log"


def _resolve_log_path(log_file) -> Path:
    """Relative log paths are taken from the app directory."""
    path = Path(log_file)
    if not path.is_absolute():
        path = APP_ROOT / path
    return path


def _file_handler(log_file: Path) -> Optional[RotatingFileHandler]:
    try:
        log_file.parent.mkdir(parents=True, exist_ok=True)
        file_handler = RotatingFileHandler(
            log_file,
            maxBytes=MAX_LOG_SIZE,
            backupCount=BACKUP_COUNT,
            encoding='utf-8'
        )
    except OSError:
        # Read-only checkout: console logging only
        return None
    file_handler.setLevel(logging.DEBUG)
    file_formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(funcName)s:%(lineno)d - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )
    file_handler.setFormatter(file_formatter)
    return file_handler


def setup_logger(name: str = LOGGER_NAME, log_file: str = None, console_level: int = logging.INFO) -> logging.Logger:
    """
    Set up application logger with rotation
    
    Args:
        name: Logger name
        log_file: Path to log file (default: logs/netinterf.log)
        console_level: Level for the stderr handler
        
    Returns:
        Configured logger instance
    """
    log_file = _resolve_log_path(log_file or DEFAULT_LOG_FILE)

    logger = logging.getLogger(name)
    logger.setLevel(logging.DEBUG)
    
    # Avoid duplicate handlers
    if logger.handlers:
        return logger

    file_handler = _file_handler(log_file)
    if file_handler is not None:
        logger.addHandler(file_handler)
    
    # Console handler goes to stderr so stdout stays pipeable
    console_handler = logging.StreamHandler()
    console_handler.setLevel(console_level)
    console_formatter = logging.Formatter('%(levelname)s: %(message)s')
    console_handler.setFormatter(console_formatter)
    logger.addHandler(console_handler)
    
    return logger


def set_log_file(log_file) -> Optional[Path]:
    """
    Move the rotating file handler to another file.

    Returns the resolved path, or None when the file cannot be opened
    (the logger then keeps only its console handler).
    """
    path = _resolve_log_path(log_file)
    log = logging.getLogger(LOGGER_NAME)
    for handler in list(log.handlers):
        if isinstance(handler, RotatingFileHandler):
            if Path(handler.baseFilename).resolve() == path.resolve():
                return path
            log.removeHandler(handler)
            handler.close()
    file_handler = _file_handler(path)
    if file_handler is None:
        return None
    log.addHandler(file_handler)
    return path


def current_log_file() -> Optional[Path]:
    for handler in logging.getLogger(LOGGER_NAME).handlers:
        if isinstance(handler, RotatingFileHandler):
            return Path(handler.baseFilename).resolve()
    return None


def set_console_level(level: int):
    """Change the level of the console handler(s) only."""
    for handler in logging.getLogger(LOGGER_NAME).handlers:
        if not isinstance(handler, RotatingFileHandler):
            handler.setLevel(level)


# Global logger instance
logger = setup_logger()
