import json
from functools import lru_cache

from utils.config import conf_dir


@lru_cache(maxsize=None)
def load_help(path: str | None = None) -> dict:
    path = path or conf_dir() / "help_text.json"
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def H(key: str) -> str:
    """Tooltip text for a dashboard widget, or "" when help_text.json has no entry for `key`."""
    entry = load_help().get(key)
    if isinstance(entry, dict) and "help" in entry:
        return entry["help"]
    return ""
