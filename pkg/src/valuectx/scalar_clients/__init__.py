"""Scalar clients: forward sign analysis and backward strong liveness."""
from .liveness import LivenessAnalysis, live_transfer
from .sign import Sign, SignAnalysis, format_env, sign_meet, sign_transfer

__all__ = ["LivenessAnalysis", "live_transfer", "Sign", "SignAnalysis",
           "format_env", "sign_meet", "sign_transfer"]
