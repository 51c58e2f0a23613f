"""Stick-breaking samplers and statistical checks for D-trees, P-trees and ICRT."""
__version__ = "0.1.0"
