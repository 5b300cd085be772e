"""
Command-line surface of the detection engine.
"""

from .main import cli, main

__all__ = ['cli', 'main']
