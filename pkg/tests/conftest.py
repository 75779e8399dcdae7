import random

import pytest

VOCAB = ['a', 'b', 'c', 'd', 'e']


@pytest.fixture
def rng():
    return random.Random(1234)


def random_words(rng, lo=0, hi=6, vocab=VOCAB):
    return [rng.choice(vocab) for _ in range(rng.randint(lo, hi))]


def corrupt(rng, words, p=0.3, vocab=VOCAB):
    """Random substitutions, deletions and insertions."""
    out = []
    for w in words:
        r = rng.random()
        if r < p / 3:
            continue
        if r < 2 * p / 3:
            out.append(rng.choice(vocab))
        else:
            out.append(w)
        if rng.random() < p / 3:
            out.append(rng.choice(vocab))
    return out


def pytest_terminal_summary(terminalreporter):
    from acceptance_report import ACCEPTANCE_LINES
    if ACCEPTANCE_LINES:
        terminalreporter.section('acceptance criteria')
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
