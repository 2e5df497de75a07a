"""Shared fixtures: bundled verb taxonomy, toy embeddings, corpus paths."""

import pathlib

import pytest

from metaphor_forge.embedding_store import load_text_embeddings
from metaphor_forge.mask_corpus import read_corpus
from metaphor_forge.wordnet_store import load_wordnet

ROOT = pathlib.Path(__file__).resolve().parent.parent
DATA = ROOT / "data"


@pytest.fixture(scope="session")
def data_dir() -> pathlib.Path:
    return DATA


@pytest.fixture(scope="session")
def wordnet_graph():
    with open(DATA / "wordnet" / "index.verb", "rb") as index_source:
        with open(DATA / "wordnet" / "data.verb", "rb") as data_source:
            return load_wordnet(index_source, data_source)


@pytest.fixture(scope="session")
def toy_table():
    with open(DATA / "embeddings" / "toy_vectors.txt", "rb") as source:
        return load_text_embeddings(source)


@pytest.fixture(scope="session")
def corpus_path() -> pathlib.Path:
    return DATA / "corpus" / "synthetic_corpus.tsv"


@pytest.fixture(scope="session")
def task_path() -> pathlib.Path:
    return DATA / "corpus" / "synthetic_task.tsv"


@pytest.fixture(scope="session")
def corpus_instances(corpus_path):
    with open(corpus_path, "rb") as source:
        return read_corpus(source)


@pytest.fixture(scope="session")
def task_instances(task_path):
    with open(task_path, "rb") as source:
        return read_corpus(source)
