from __future__ import annotations

import enum
from dataclasses import dataclass

ID_PREFIXES = ("MESH:", "OMIM:", "GENE:", "TAXON:")


class EntityType(str, enum.Enum):
    CHEMICAL = "Chemical"
    DISEASE = "Disease"
    GENE = "Gene"
    SPECIES = "Species"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, label: str) -> "EntityType":
        try:
            return cls(label)
        except ValueError:
            raise UnknownEntityType(label) from None


ENTITY_TYPES = tuple(EntityType)
TYPE_INDEX = {t: i for i, t in enumerate(ENTITY_TYPES)}


class UnknownEntityType(ValueError):
    def __init__(self, label):
        super().__init__(f"unknown entity type {label!r}; expected one of "
                         + ", ".join(t.value for t in ENTITY_TYPES))
        self.label = label


@dataclass(frozen=True, order=True)
class Entity:
    entity_type: EntityType
    entity_id: str

    def __post_init__(self):
        if not isinstance(self.entity_type, EntityType):
            object.__setattr__(self, "entity_type", EntityType.parse(self.entity_type))
        if not self.entity_id:
            raise ValueError("entity_id must be non-empty")
        if not self.entity_id.startswith(ID_PREFIXES):
            raise ValueError(f"entity_id {self.entity_id!r} lacks a source prefix "
                             f"({'/'.join(ID_PREFIXES)})")


@dataclass(frozen=True, order=True)
class Location:
    """Paragraph-local span; ``end`` is the index of the last character."""
    paragraph: int
    start: int
    end: int

    def __post_init__(self):
        if self.paragraph < 0 or self.start < 0 or self.end < self.start:
            raise ValueError(f"invalid location {self}")

    @property
    def length(self) -> int:
        return self.end - self.start + 1


@dataclass(frozen=True)
class EntityMention:
    paper_id: str
    location: Location
    entity_str: str
    entity: Entity

    def __post_init__(self):
        if not self.entity_str:
            raise ValueError("entity_str must be non-empty")
        if "\n" in self.entity_str or "\r" in self.entity_str:
            raise ValueError("entity_str must not contain a newline")
        if len(self.entity_str) != self.location.length:
            raise ValueError(f"entity_str {self.entity_str!r} does not fit {self.location}")

    @property
    def entity_type(self) -> EntityType:
        return self.entity.entity_type

    @property
    def entity_id(self) -> str:
        return self.entity.entity_id

    def sort_key(self):
        loc = self.location
        return (self.paper_id, loc.paragraph, loc.start, loc.end,
                self.entity.entity_type.value, self.entity.entity_id)

    def matches(self, paragraph_text: str) -> bool:
        loc = self.location
        return paragraph_text[loc.start:loc.end + 1] == self.entity_str
