"""Entity taggers: the built-in lexicon tagger and the external-process adapter."""
from .external import (ExternalTaggerError, NonZeroExit, OffsetUnmappable, OutputUnparseable,
                       ProcessTimeout, TaggerBackendConfig, map_offsets, normalize_entity_id,
                       package_paragraph, run_external)
from .lexicon import resolve_overlaps, tag_document, tag_paragraph
from .types import (ENTITY_TYPES, Entity, EntityMention, EntityType, Location,
                    UnknownEntityType)
from .vocabulary import (EmptyTerm, MalformedRow, Vocabulary, VocabularyError, fold,
                         load_vocabulary, read_vocabulary)

__all__ = [
    "ENTITY_TYPES", "EmptyTerm", "Entity", "EntityMention", "EntityType", "ExternalTaggerError",
    "Location", "MalformedRow", "NonZeroExit", "OffsetUnmappable", "OutputUnparseable",
    "ProcessTimeout", "TaggerBackendConfig", "UnknownEntityType", "Vocabulary",
    "VocabularyError", "fold", "load_vocabulary", "map_offsets", "normalize_entity_id",
    "package_paragraph", "read_vocabulary", "resolve_overlaps", "run_external",
    "tag_document", "tag_paragraph",
]
