"""Robust stability certification for biological interaction networks."""

__version__ = "1.0.0"
__author__ = "Kim Asplund"
__email__ = "kim.asplund@gmail.com"
