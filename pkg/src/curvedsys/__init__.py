"""Conservative systems on the unit circle: weighted characteristic functions, free functional
models, recovery from transfer data, domain transports and Naboko-type perturbations."""

__version__ = "0.1.0"
