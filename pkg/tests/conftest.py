import json

import pytest

from kfuse.embedding import EmbeddingProvider
from kfuse.kg import load_kg

KG_RECORDS = [
    {
        "id": "Q16",
        "label": "Manchester United",
        "aliases": ["Man Utd", "Man United"],
        "description": "English professional football club",
        "instance_of": ["Q476028"],
        "subclass_of": [],
    },
    {
        "id": "Q476028",
        "label": "football club",
        "aliases": [],
        "description": "sports club dedicated to association football",
        "instance_of": [],
        "subclass_of": ["Q847017"],
    },
    {
        "id": "Q312",
        "label": "Apple Inc.",
        "aliases": ["Apple"],
        "description": "American technology company",
        "instance_of": ["Q4830453"],
        "subclass_of": [],
    },
    {
        "id": "Q89",
        "label": "apple",
        "aliases": [],
        "description": "fruit of the apple tree",
        "instance_of": ["Q3314483"],
        "subclass_of": [],
    },
    {
        "id": "Q3314483",
        "label": "fruit",
        "aliases": [],
        "description": "edible part of a plant",
        "instance_of": [],
        "subclass_of": [],
    },
    {
        "id": "Q4830453",
        "label": "business",
        "aliases": ["company"],
        "description": "organization undertaking commercial activity",
        "instance_of": [],
        "subclass_of": [],
    },
    {
        "id": "Q60",
        "label": "New York City",
        "aliases": ["NYC", "New York"],
        "description": "most populous city in the United States",
        "instance_of": ["Q515"],
        "subclass_of": [],
    },
    {
        "id": "Q515",
        "label": "city",
        "aliases": [],
        "description": "large permanent human settlement",
        "instance_of": [],
        "subclass_of": [],
    },
    {
        "id": "Q174193",
        "label": "United",
        "aliases": [],
        "description": "major American airline",
        "instance_of": ["Q4830453"],
        "subclass_of": [],
    },
]


@pytest.fixture(scope="session")
def kg_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("kg") / "kg.jsonl"
    with open(path, "w", encoding="utf-8") as handle:
        for record in KG_RECORDS:
            handle.write(json.dumps(record) + "\n")
    return str(path)


@pytest.fixture(scope="session")
def store(kg_path):
    return load_kg(kg_path)


@pytest.fixture(scope="session")
def hash_provider():
    return EmbeddingProvider(kind="hash", dim=64)
