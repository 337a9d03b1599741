"""Set estimation and subsampling confidence sets for sample minimax problems."""

__version__ = "0.1.0"
