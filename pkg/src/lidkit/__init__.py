"""Spoken language identification with MFCC, PLP, BFCC and RPLP features."""

__version__ = "0.1.0"
