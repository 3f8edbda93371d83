"""Single source for the tool's name and version (keep in sync with pyproject.toml)."""
from __future__ import annotations

TOOL_NAME = "templeak"
__version__ = "0.1.0"
