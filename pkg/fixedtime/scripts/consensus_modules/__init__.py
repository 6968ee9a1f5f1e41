"""
CLI plumbing for the fixed-time consensus simulator: argument parsing,
command routing, operation summaries and console views.
"""
