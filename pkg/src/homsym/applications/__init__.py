"""Worked examples: rigid-body identification, moment-based recognition and
explicit homogeneous norm refinement."""
