# -*- coding: utf-8 -*-
"""Entry point for `python -m assist_timing`."""

from assist_timing.app import main

if __name__ == "__main__":
    main()
