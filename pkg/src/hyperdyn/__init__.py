"""hyperdyn: a desk-scale laboratory for dynamics models whose weights are
generated on the fly from observed system properties."""

__version__ = "0.1.0"
