"""Finite certification of distance lemmas in horoballs and cusped spaces."""
from .cusped import CuspedGraph, build_cusped
from .groups import MarkedGroup, parse_group_spec
from .horoball import HoroballGraph, LevelGraph, build_horoball
from .report import LemmaReport

__version__ = "0.1.0"

__all__ = ["CuspedGraph", "HoroballGraph", "LemmaReport", "LevelGraph", "MarkedGroup",
           "build_cusped", "build_horoball", "parse_group_spec"]
