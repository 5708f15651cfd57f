"""Value-context interprocedural data flow analysis."""
from .engine import (
    AnalysisClient, AnalysisError, AnalysisResult, Context, DataFlowSolution,
    MonotonicityError, do_analysis, do_analysis_backward, solution_dump,
)
from .fixtures import fixture_text, load_fixture
from .parser import format_program, parse_program
from .pta import PointsToAnalysis
from .scalar_clients import LivenessAnalysis, SignAnalysis

__all__ = [
    "AnalysisClient", "AnalysisError", "AnalysisResult", "Context", "DataFlowSolution",
    "LivenessAnalysis", "MonotonicityError", "PointsToAnalysis", "SignAnalysis",
    "do_analysis", "do_analysis_backward", "fixture_text", "format_program",
    "load_fixture", "parse_program", "solution_dump",
]
