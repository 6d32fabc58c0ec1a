"""Ant colony architecture search."""

from ._core import (
    PROTOCOL_VERSION,
    ConfigError,
    PheromoneGraph,
    ProtocolError,
    RandomSource,
    aco_select,
    brute_force_best,
    canonical_string,
    cli,
    count_walks,
    decode_message,
    default_space,
    encode_message,
    generate_landscape,
    landscape_score,
    parse_descriptor,
    random_search,
    resume,
    search,
    serialize_descriptor,
    synthetic_evaluate,
    validate_descriptor,
)

__version__ = "0.1.0"
