"""Cancelable biometric templates from randomized median filtering of log-Gabor features."""

from .errors import CbtError
from .features import FilterBankConfig, LogGaborFilterBank, build_filter_bank, extract_features, preprocess
from .keyspace import KeySet, RandomVector, generate_key_set, generate_random_vector
from .matching import cosine_dissimilarity, identify, verify
from .template import ProtectedTemplate, generate_template, transform

__version__ = "0.1.0"

__all__ = [
    "CbtError",
    "FilterBankConfig",
    "KeySet",
    "LogGaborFilterBank",
    "ProtectedTemplate",
    "RandomVector",
    "build_filter_bank",
    "cosine_dissimilarity",
    "extract_features",
    "generate_key_set",
    "generate_random_vector",
    "generate_template",
    "identify",
    "preprocess",
    "transform",
    "verify",
]
