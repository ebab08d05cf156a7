"""Explainable intrusion detection for medical-IoT telemetry."""

__version__ = "0.1.0"
