import logging
import os

from dotenv import load_dotenv

load_dotenv()

# Configure logging with a consistent format
logging.basicConfig(
    level=os.getenv("ZENO_LOG_LEVEL", "INFO").upper(),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=[
        logging.StreamHandler()
    ]
)

logger = logging.getLogger("app")


def use_rich_handler(level: str = None) -> None:
    """Route the app logger through rich for console runs."""
    from rich.logging import RichHandler

    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    root.addHandler(RichHandler(rich_tracebacks=True, show_path=False))
    if level:
        root.setLevel(level.upper())
