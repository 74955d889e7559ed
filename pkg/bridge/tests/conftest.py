import json
import random

import pytest

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
        "subclass_of": [],
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
]


def build_fixture_corpus(count: int = 100) -> list[str]:
    """Mixed corpus: echo-heavy rows that clear the default threshold,
    mention-only rows that do not, plain rows, and long rows for gating."""
    rng = random.Random(424242)
    echoes = [
        "apple is a fruit of the apple tree",
        "Apple Inc. is an American technology company",
        "the English professional football club Manchester United",
        "New York City is the most populous city in the United States",
        "a football club is a sports club dedicated to association football",
    ]
    mentions = [
        "Manchester United won the match",
        "Apple shipped new phones",
        "fans filled New York City",
        "the fruit market opened early",
    ]
    plain = [
        "no entities in this line",
        "completely ordinary words",
        "weather stays mild this week",
    ]
    filler = "alpha beta gamma delta epsilon zeta".split()
    corpus = []
    for index in range(count):
        bucket = index % 4
        if bucket == 0:
            corpus.append(rng.choice(echoes))
        elif bucket == 1:
            corpus.append(rng.choice(mentions))
        elif bucket == 2:
            corpus.append(rng.choice(plain))
        else:
            padding = " ".join(rng.choices(filler, k=rng.randrange(80, 140)))
            corpus.append(f"{rng.choice(echoes)} {padding}")
    return corpus


@pytest.fixture(scope="session")
def kg_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("bridge_kg") / "kg.jsonl"
    with open(path, "w", encoding="utf-8") as handle:
        for record in KG_RECORDS:
            handle.write(json.dumps(record) + "\n")
    return str(path)


@pytest.fixture(scope="session")
def fixture_corpus():
    return build_fixture_corpus(100)
