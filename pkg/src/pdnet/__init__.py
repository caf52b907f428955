"""Slicing-based LTL-X model checking of concurrent programs via PDNets."""
from .checker import VerificationResult, check, check_sliced
from .ltl import parse as parse_formula
from .program import parse as parse_program
from .slicer import slice_net
from .translate import translate

__all__ = ["VerificationResult", "check", "check_sliced", "parse_formula", "parse_program",
           "slice_net", "translate"]
