"""
Additive risks model estimation for interval-censored data
"""

__version__ = '1.0.0'
