"""Allow ``python -m templeak``."""
from .cli import console_main

console_main()
