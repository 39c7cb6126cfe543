import math

import numpy as np
import pytest

from proxyot import FixtureSpec, generate_fixture, write_fixture
from proxyot.retrieval import ClassRecord, KnowledgeBase


def reference_plan(m, tau, q, sweeps):
    """Plain-Python log-space alternating scaling, independent of the package.

    Serves as the slow, trusted fixed-point oracle for the transport solvers.
    """
    n = len(m)
    k = len(m[0])
    logp = [[m[i][j] / tau for j in range(k)] for i in range(n)]

    def lse(vals):
        mx = max(vals)
        if mx == float("-inf"):
            return mx
        return mx + math.log(sum(math.exp(v - mx) for v in vals))

    ln_row = math.log(1.0 / n)
    for _ in range(sweeps):
        for i in range(n):
            shift = ln_row - lse(logp[i])
            logp[i] = [v + shift for v in logp[i]]
        for j in range(k):
            shift = math.log(q[j]) - lse([logp[i][j] for i in range(n)])
            for i in range(n):
                logp[i][j] += shift
    return np.array([[math.exp(v) for v in row] for row in logp])


def unit_rows(rng, shape):
    m = rng.standard_normal(shape)
    return m / np.linalg.norm(m, axis=1, keepdims=True)


def make_kb(rng, n_classes=3, n_descriptions=4, dim=8, with_names=False):
    """Small random knowledge base with unit description embeddings."""
    records = []
    for j in range(n_classes):
        emb = unit_rows(rng, (n_descriptions, dim))
        name_emb = unit_rows(rng, (1, dim))[0] if with_names else None
        records.append(
            ClassRecord(
                name=f"class_{j:02d}",
                descriptions=tuple(
                    f"cue {l} of class {j}" for l in range(n_descriptions)
                ),
                embeddings=emb,
                name_embedding=name_emb,
            )
        )
    return KnowledgeBase(classes=tuple(records), dim=dim)


@pytest.fixture(scope="session")
def fixture_dir(tmp_path_factory):
    """The standard seed-42 synthetic fixture, generated once per session."""
    out = tmp_path_factory.mktemp("fixture")
    write_fixture(generate_fixture(42, FixtureSpec()), out)
    return out
