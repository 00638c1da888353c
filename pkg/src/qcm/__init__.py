"""Quantum-computer-media storage: density matrices, gates and the ensemble store."""
