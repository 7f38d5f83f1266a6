"""Dual approximate dynamic programming for multi-unit stochastic control problems."""
