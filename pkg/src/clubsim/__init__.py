"""Climate-club negotiation protocols over a multi-region climate-economy model."""

__version__ = "0.1.0"
