"""Discrete-time simulation of LiDAR and GPS spoofing against a guided quadcopter."""

__version__ = "0.1.0"
