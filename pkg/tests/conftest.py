from __future__ import annotations

from pathlib import Path

import pytest
from hypothesis import strategies as st

from precsched.instance import Instance, parse_instance

CORPUS = Path(__file__).parent / "corpus"


def corpus() -> dict[str, Instance]:
    out = {}
    for path in sorted(CORPUS.iterdir()):
        if path.suffix in (".sched", ".json"):
            out[path.stem] = parse_instance(path.read_text())
    return out


@pytest.fixture(scope="session")
def named():
    return corpus()


@st.composite
def instances(draw, n_max: int = 7, m_max: int = 3, n_min: int = 1):
    n = draw(st.integers(n_min, n_max))
    m = draw(st.integers(1, m_max))
    pairs = [(u, v) for u in range(1, n + 1) for v in range(u + 1, n + 1)]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs))) if pairs else []
    # relabel so ids need not follow the order
    perm = draw(st.permutations(range(1, n + 1)))
    return Instance(n, m, frozenset((perm[u - 1], perm[v - 1]) for u, v in chosen))
