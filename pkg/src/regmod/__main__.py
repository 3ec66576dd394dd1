"""Entry point for ``python -m regmod``."""

from .cli import main

if __name__ == "__main__":
    main()
