import pytest

from oodsynth.backends import MockBackend, MockWorld
from oodsynth.concepts import (
    ConceptConfig,
    build_prompt,
    imagine_concepts,
    normalize_concept,
    parse_concepts,
    sanitize_concepts,
)
from oodsynth.dataset import Vocabulary
from oodsynth.errors import (
    ArgumentError,
    EmptyResponseError,
    PartialConceptsError,
    TransportError,
)

EXAMPLE_RESPONSE = "`mannequin', `sculpture', `scarecrows', `doll', `puppet'"


def test_prompt_contains_example_and_label_list():
    vocab = Vocabulary(("person", "car"))
    prompt = build_prompt(vocab, "person")
    assert EXAMPLE_RESPONSE in prompt
    assert "`person', `car'" in prompt
    assert prompt.endswith("The word is: person")


def test_prompt_rejects_unknown_and_empty_query():
    vocab = Vocabulary(("person",))
    with pytest.raises(ArgumentError):
        build_prompt(vocab, "unicycle")
    with pytest.raises(ArgumentError):
        build_prompt(vocab, "")


def test_prompt_is_deterministic():
    vocab = Vocabulary(("person", "car", "dog"))
    assert build_prompt(vocab, "car") == build_prompt(vocab, "car")


def test_parse_example_response():
    assert parse_concepts(EXAMPLE_RESPONSE) == [
        "mannequin", "sculpture", "scarecrows", "doll", "puppet",
    ]


def test_parse_drops_empty_tokens():
    assert parse_concepts(" doll ,, puppet ") == ["doll", "puppet"]


def test_parse_empty_response_raises_with_raw_text():
    with pytest.raises(EmptyResponseError) as err:
        parse_concepts("")
    assert err.value.raw_text == ""


def test_parse_render_roundtrip():
    concepts = ["mannequin", "sculpture", "doll"]
    rendered = ", ".join(f"`{c}'" for c in concepts)
    assert parse_concepts(rendered) == concepts


def test_sanitize_removes_vocab_and_forbidden():
    vocab = Vocabulary(("person",))
    config = ConceptConfig(5, frozenset(["umbrella"]))
    assert sanitize_concepts(["mannequin", "person", "umbrella"], vocab, config) == ["mannequin"]


def test_sanitize_dedupes_under_normalization():
    vocab = Vocabulary(("person",))
    config = ConceptConfig(5)
    assert sanitize_concepts(["Dolls", "doll"], vocab, config) == ["Dolls"]
    assert normalize_concept("Dolls") == normalize_concept("doll") == "doll"


def test_sanitize_truncates_to_quota():
    vocab = Vocabulary(("person",))
    config = ConceptConfig(5)
    eight = [f"thing{i}" for i in range(8)]
    assert sanitize_concepts(eight, vocab, config) == eight[:5]


def test_imagine_with_example_table():
    vocab = Vocabulary(("person", "car"))
    world = MockWorld(concept_tables={
        "person": ("mannequin", "sculpture", "scarecrows", "doll", "puppet"),
        "car": ("mannequin", "sculpture", "scarecrows", "doll", "puppet"),
    })
    cmap = imagine_concepts(MockBackend(world), vocab, ConceptConfig(5))
    assert cmap.per_label[0] == ["mannequin", "sculpture", "scarecrows", "doll", "puppet"]
    assert cmap.per_label[1] == cmap.per_label[0]


def test_imagine_all_sanitized_away_raises_partial():
    vocab = Vocabulary(("person", "car"))
    world = MockWorld(concept_tables={"person": ("person",), "car": ("person", "car")})
    with pytest.raises(PartialConceptsError) as err:
        imagine_concepts(MockBackend(world), vocab, ConceptConfig(3))
    assert set(err.value.short_labels) == {"person", "car"}


def test_imagine_early_stop_single_request():
    calls = []

    class CountingBackend:
        def concepts(self, request):
            calls.append(request)
            return {"concepts": ["gizmo"]}

    vocab = Vocabulary(("person",))
    cmap = imagine_concepts(CountingBackend(), vocab, ConceptConfig(1))
    assert cmap.per_label[0] == ["gizmo"]
    assert len(calls) == 1


def test_imagine_transport_failure_carries_label():
    vocab = Vocabulary(("person",))
    world = MockWorld(concept_failure_rate=1.0)
    with pytest.raises(TransportError, match="person"):
        imagine_concepts(MockBackend(world), vocab, ConceptConfig(2))


def test_imagine_no_leakage_invariant():
    vocab = Vocabulary(("block", "disc", "bar"))
    config = ConceptConfig(5, frozenset(["miniature block"]))
    cmap = imagine_concepts(MockBackend(MockWorld()), vocab, config)
    normalized = {normalize_concept(c) for cs in cmap.per_label.values() for c in cs}
    blocked = {normalize_concept(s) for s in vocab.labels} | set(config.forbidden_terms)
    assert normalized & blocked == set()
    cmap.validate(vocab, config)


def test_imagine_concurrent_matches_serial():
    vocab = Vocabulary(("block", "disc", "bar", "person"))
    config = ConceptConfig(4)
    backend = MockBackend(MockWorld())
    serial = imagine_concepts(backend, vocab, config, concurrency=1)
    threaded = imagine_concepts(backend, vocab, config, concurrency=4)
    assert serial.per_label == threaded.per_label


def test_imagine_reproducible_byte_for_byte():
    import json

    vocab = Vocabulary(("block", "disc"))
    config = ConceptConfig(5)
    a = imagine_concepts(MockBackend(MockWorld(seed=9)), vocab, config)
    b = imagine_concepts(MockBackend(MockWorld(seed=9)), vocab, config)
    assert json.dumps(a.per_label, sort_keys=True) == json.dumps(b.per_label, sort_keys=True)
