import numpy as np
import pytest

from vqpool.formats import DatasetHeader, UtteranceRecord


def make_record(rng: np.random.Generator, header: DatasetHeader, rec_id: str,
                T: int | None = None) -> UtteranceRecord:
    T = T if T is not None else int(rng.integers(1, 20))
    return UtteranceRecord(
        id=rec_id,
        label=int(rng.integers(0, header.L)),
        C=rng.normal(size=(T, header.F)).astype(np.float32),
        Q=rng.integers(0, header.V, size=(T, header.G)).astype(np.uint16),
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
