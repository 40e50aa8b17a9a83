"""
cplnet - stability analysis and simulation of buck-converter networks feeding
constant power loads
"""

__version__ = "1.0.0"
