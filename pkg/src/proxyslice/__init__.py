"""proxyslice: proxy-dataset sampling and desk-scale cell search."""

from . import analysis, datasets, evaluation, nncore, sampling, scorers, search

__version__ = "0.1.0"

__all__ = ["analysis", "datasets", "evaluation", "nncore", "sampling",
           "scorers", "search", "__version__"]
