"""Optimized Schwarz waveform relaxation with Ventcel transmission conditions."""
