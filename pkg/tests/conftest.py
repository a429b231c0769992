import numpy as np
import pytest

from domlex.store import normalize
from synth import gaussian_space, random_orthogonal, rotated_copy


@pytest.fixture
def normalized_rotation_pair():
    """A 120-word 16-dim space and its rotated copy, both normalized."""
    src = gaussian_space(120, 16, seed=7, prefix="s")
    q = random_orthogonal(16, np.random.default_rng(11))
    tgt = rotated_copy(src, q, prefix="t")
    return normalize(src), normalize(tgt), q
