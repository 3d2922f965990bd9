# Cavity-mediated ensemble entanglement simulator
__version__ = '1.0.0'
