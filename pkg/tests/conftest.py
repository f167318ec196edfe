import pytest

from oodsynth.benchmark import generate_image_world
from oodsynth.dataset import CandidatePolicy, load_annotations, select_edit_candidates


@pytest.fixture(scope="session")
def image_world(tmp_path_factory):
    """A small shared procedural dataset: (annotations path, vocab, records)."""
    root = tmp_path_factory.mktemp("world")
    path = generate_image_world(12, seed=424242, out_dir=root)
    vocab, records = load_annotations(path)
    return path, vocab, records


@pytest.fixture(scope="session")
def candidates(image_world):
    _, _, records = image_world
    return select_edit_candidates(records, CandidatePolicy())
