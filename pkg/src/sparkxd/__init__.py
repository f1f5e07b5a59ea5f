"""Approximate-DRAM / spiking-network co-simulation framework."""

__version__ = "0.1.0"
