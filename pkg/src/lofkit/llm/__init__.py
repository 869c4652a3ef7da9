"""Multimodal LLM assessment pipeline: prompts, retrieval, client, parsing."""

from .batch import run_batch, scored_from_results
from .client import EndpointConfig, submit
from .encode import encode_bytes, encode_image
from .parse import ParsedAssessment, format_assessment, parse_response
from .prompts import TEMPLATES, LlmRequest, PromptTemplate, build_prompt
from .retrieval import DEFAULT_CHUNKS, GuidelineChunk, load_chunk_store, retrieve_chunks, write_chunk_store

__all__ = [
    "DEFAULT_CHUNKS",
    "EndpointConfig",
    "GuidelineChunk",
    "LlmRequest",
    "ParsedAssessment",
    "PromptTemplate",
    "TEMPLATES",
    "build_prompt",
    "encode_bytes",
    "encode_image",
    "format_assessment",
    "load_chunk_store",
    "parse_response",
    "retrieve_chunks",
    "run_batch",
    "scored_from_results",
    "submit",
    "write_chunk_store",
]
