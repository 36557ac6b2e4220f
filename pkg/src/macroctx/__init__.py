"""Macro-contextual retrieval for daily direction forecasting.

Text embeddings are fused with standardized macroeconomic state, used to
retrieve causally earlier precedents, and the mean of the retrieved text
vectors is fed to a logistic head alongside numeric market features.
"""

from .errors import ChecksumError, FetchError, MacroCtxError, MissingInputError, ProtocolViolation, ValidationError

__version__ = "0.1.0"

__all__ = ["ChecksumError", "FetchError", "MacroCtxError", "MissingInputError", "ProtocolViolation",
           "ValidationError", "__version__"]
