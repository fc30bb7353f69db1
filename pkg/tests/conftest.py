import numpy as np
import pytest

from tkgcl.data import build_task_stream
from tkgcl.toy import generate_toy_quads


def make_stream(num_entities=20, num_relations=4, num_tasks=3, facts_per_task=40,
                seed=1, split_seed=0, recurrence=0.3):
    quads = generate_toy_quads(num_entities=num_entities, num_relations=num_relations,
                               num_tasks=num_tasks, facts_per_task=facts_per_task,
                               recurrence=recurrence, seed=seed)
    return build_task_stream(quads, (0.8, 0.1, 0.1), np.random.default_rng(split_seed))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def toy_stream():
    return make_stream()
