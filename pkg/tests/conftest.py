import numpy as np
import pytest

from collection_forge.datagen import SynthConfig, generate_synthetic_dataset
from collection_forge.dictionary import (assemble_block_diagonal,
                                         learn_unit_dictionary)


SMALL_CONFIG = SynthConfig(topics=4, users=8, clicked_per_user=6, boards_pos=4,
                           boards_neg=8, images_per_board=6, boards_per_topic=6,
                           seed=11)


@pytest.fixture(scope="session")
def small_dataset():
    return generate_synthetic_dataset(SMALL_CONFIG)


@pytest.fixture(scope="session")
def small_dictionary(small_dataset):
    data = small_dataset
    schema = data.schema
    F_all = np.concatenate([c.matrix() for c in data.collections], axis=1)
    subs = []
    for (name, _), (start, stop) in zip(schema.units, schema.spans()):
        sub, _ = learn_unit_dictionary(F_all[start:stop], 6, lam=0.15, epochs=4,
                                       seed=0, unit_name=name)
        subs.append(sub)
    return assemble_block_diagonal(subs, schema)
