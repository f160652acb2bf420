from __future__ import annotations

import pytest

# Criterion PASS/FAIL lines collected by the acceptance module; echoed in
# the terminal summary so they survive output capture.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

from qualkit.cleaning import (
    accept_all_valid,
    extract_unique_manufacturers,
    propose_rules,
    run_pn_pipeline,
)
from qualkit.corpus import Corpus, CorpusConfig, generate, table1_corpus
from qualkit.llm import MockBackend
from qualkit.model import RuleTable
from qualkit.retrieval import RetrievalEngine


@pytest.fixture
def table1() -> Corpus:
    return table1_corpus()


def mock_clean(corpus: Corpus):
    """Run the real cleaning pipeline with the mock gateway; returns
    (augmented cards, rule table, review items)."""
    gateway = MockBackend()
    names = extract_unique_manufacturers(corpus.components, corpus.cards)
    if names:
        proposed = propose_rules(names, gateway)
        table, _, _ = accept_all_valid(proposed, names)
    else:
        table = RuleTable({})
    augmented, review = run_pn_pipeline(
        corpus.cards, corpus.components, table, gateway, checkpoint_path=None
    )
    return augmented, table, review


def cleaned_engine(corpus: Corpus) -> RetrievalEngine:
    augmented, table, _ = mock_clean(corpus)
    return RetrievalEngine(corpus.components, augmented, table)


@pytest.fixture(scope="session")
def small_corpus() -> Corpus:
    return generate(CorpusConfig(n_components=300, seed=11))


@pytest.fixture(scope="session")
def small_cleaned(small_corpus):
    augmented, table, review = mock_clean(small_corpus)
    return small_corpus, augmented, table, review
