"""Compact factor-loading descriptors for image retrieval."""

from ._core import (
    DegenerateLoadings,
    DescriptorMatrix,
    Error,
    FormatError,
    Index,
    InvalidArgument,
    NetworkError,
    Server,
    build_index_file,
    correlation_score,
    decode_loadings,
    default_k_max,
    encode_loadings,
    estimate_order,
    evaluate,
    fuse,
    generate_corpus,
    load_corpus,
    nmf_loadings,
    packed_size,
    pca_loadings,
    quantize_roundtrip,
    query_remote,
    read_descriptor_file,
    subspace_angle,
    write_descriptor_file,
)

__version__ = "0.1.0"
