import logging
import os
from datetime import datetime

from src.ftn.config.settings import settings

LOG_FORMAT = "[ %(asctime)s ] %(lineno)d %(name)s - %(levelname)s - %(message)s"

LOG_FILE = f"{datetime.now().strftime('%m_%d_%Y_%H_%M_%S')}.log"
logs_path = str(settings.LOG_DIR)
os.makedirs(logs_path, exist_ok=True)

LOG_FILE_PATH = os.path.join(logs_path, LOG_FILE)

logging.basicConfig(
    filename=LOG_FILE_PATH,
    format=LOG_FORMAT,
    level=logging.DEBUG if settings.LOG_LEVEL.upper() == "DEBUG" else logging.INFO,
)

console_handler = logging.StreamHandler()
console_handler.setFormatter(logging.Formatter(LOG_FORMAT))
console_handler.setLevel(getattr(logging, settings.CONSOLE_LOG_LEVEL.upper(), logging.INFO))
logging.getLogger().addHandler(console_handler)


def set_quiet(quiet: bool = True) -> None:
    console_handler.setLevel(logging.WARNING if quiet else getattr(logging, settings.CONSOLE_LOG_LEVEL.upper(), logging.INFO))
