"""hindcaus: hidden-factor and causal transition-graph learning for factored POMDPs."""

__version__ = "0.1.0"
