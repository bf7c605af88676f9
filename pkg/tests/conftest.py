import random

import pytest
from hypothesis import strategies as st

from dagexch.dag import Dag, chain, edgeless, random_dag
from dagexch.irm import block_matrix_dag


@pytest.fixture
def matrix_seq():
    return Dag(["s", "r", "c"], [("s", "r"), ("s", "c")])


@pytest.fixture
def blocks():
    return block_matrix_dag()


@pytest.fixture
def chain2():
    return chain(2)


@pytest.fixture
def rc():
    return edgeless(["r", "c"])


@st.composite
def dags(draw, max_vertices=6):
    n = draw(st.integers(1, max_vertices))
    seed = draw(st.integers(0, 2**32 - 1))
    p = draw(st.sampled_from([0.0, 0.25, 0.5, 0.8]))
    return random_dag(n, p, random.Random(seed))


def random_homomorphism(rng: random.Random, max_vertices=5, max_k=4, max_points=10):
    """A random finite G-homomorphism: a generated automorphism restricted to a
    random subset of a window.  Returns ``(dag, pairs, k)``."""
    from dagexch.automorphisms import apply, generate_random
    from dagexch.indices import Window, enumerate_window
    from dagexch.randomness import SeededSource

    d = random_dag(rng.randint(1, max_vertices), rng.random(), rng)
    k = rng.randint(1, max_k)
    t = generate_random(d, SeededSource(rng.getrandbits(64), "automorphism"), k)
    pts = enumerate_window(d, d.full, Window.uniform(d, k))
    chosen = rng.sample(pts, rng.randint(0, min(max_points, len(pts))))
    return d, [(a, apply(t, a)) for a in chosen], k


# one line per acceptance criterion, echoed in the terminal summary so the
# verdicts show up even when output capture is on
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
