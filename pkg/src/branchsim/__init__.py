"""Born probabilities and occupation statistics for ensembles under branching environments."""

__version__ = "0.1.0"
