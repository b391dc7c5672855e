"""
This version number is picked up by the package metadata.
"""

__version__ = "0.3.0"
