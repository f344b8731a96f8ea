"""Rational metric temporal logic: formulas, evaluation, reductions and one-clock automata."""

__version__ = "0.1.0"
