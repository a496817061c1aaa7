#-*- coding: utf-8 -*-
"""Assist Timing: working-memory modelling and proactive assistance timing."""

__version__ = "0.1.1"
