"""Translation-invariant splitting Gibbs measures of SOS models on Cayley trees."""

__version__ = "0.1.0"
