"""Novel-concept discovery: prompt construction, response parsing, leakage
sanitization, and the per-label accumulation loop."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .dataset import Vocabulary
from .errors import ArgumentError, EmptyResponseError, PartialConceptsError, TransportError

logger = logging.getLogger(__name__)

# In-context instruction sent to the language backend. The example response
# doubles as the grammar the parser expects.
PROMPT_TEMPLATE = (
    "Here is a list containing several objects {id_list}. "
    "Now, if I provide you an object name, you should return to me objects that are "
    "similar to the usage scenario and volume of the provided object but are not in "
    "the previous object list. For example, if I give you the word: person, you "
    "should respond and only respond: `mannequin', `sculpture', `scarecrows', "
    "`doll', `puppet'."
)

_STRIP_CHARS = " \t\r\n`'\"‘’"


def normalize_concept(text: str) -> str:
    """Case-fold, trim, and drop a single plural trailing 's'."""
    out = text.strip().casefold()
    if len(out) > 2 and out.endswith("s"):
        out = out[:-1]
    return out


@dataclass(frozen=True)
class ConceptConfig:
    concepts_per_label: int = 5
    forbidden_terms: frozenset = frozenset()
    retry_budget: int = 3

    def __post_init__(self):
        if self.concepts_per_label < 1:
            raise ArgumentError("concepts_per_label must be >= 1")
        if self.retry_budget < 1:
            raise ArgumentError("retry_budget must be >= 1")
        object.__setattr__(
            self, "forbidden_terms", frozenset(normalize_concept(t) for t in self.forbidden_terms)
        )


@dataclass(frozen=True)
class ConceptMap:
    """Per-label ordered novel concepts; label_id indexes the vocabulary."""

    per_label: dict

    def concepts_for(self, label_id: int):
        return self.per_label[label_id]

    def validate(self, vocab: Vocabulary, config: ConceptConfig) -> None:
        blocked = {normalize_concept(s) for s in vocab.labels} | set(config.forbidden_terms)
        for label_id, concepts in self.per_label.items():
            normalized = [normalize_concept(c) for c in concepts]
            if len(set(normalized)) != len(normalized):
                raise ArgumentError(f"label {label_id}: duplicate concepts after normalization")
            leak = set(normalized) & blocked
            if leak:
                raise ArgumentError(f"label {label_id}: concepts leak blocked terms {sorted(leak)}")


def load_forbidden_terms(path) -> frozenset:
    """One term per line; '#' starts a comment."""
    terms = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            terms.add(normalize_concept(line))
    return frozenset(terms)


def build_prompt(vocab: Vocabulary, query_label: str) -> str:
    """Render the instruction with the full label list, then the query."""
    if query_label not in vocab:
        raise ArgumentError(f"query label {query_label!r} is not in the vocabulary")
    rendered = ", ".join(f"`{label}'" for label in vocab.labels)
    return PROMPT_TEMPLATE.format(id_list=rendered) + f"\nThe word is: {query_label}"


def parse_concepts(response: str):
    """Split a comma-separated response, stripping quotes and whitespace."""
    tokens = [tok.strip(_STRIP_CHARS) for tok in response.split(",")]
    concepts = [tok for tok in tokens if tok]
    if not concepts:
        raise EmptyResponseError("response contained no concepts", raw_text=response)
    return concepts


def sanitize_concepts(concepts, vocab: Vocabulary, config: ConceptConfig):
    """Drop vocabulary/forbidden collisions and duplicates, truncate to quota."""
    blocked = {normalize_concept(s) for s in vocab.labels} | set(config.forbidden_terms)
    out = []
    seen = set()
    for concept in concepts:
        key = normalize_concept(concept)
        if not key or key in blocked or key in seen:
            continue
        seen.add(key)
        out.append(concept.strip(_STRIP_CHARS))
        if len(out) == config.concepts_per_label:
            break
    return out


def _collect_for_label(backend, vocab, config, label_id):
    label = vocab.label_of(label_id)
    prompt = build_prompt(vocab, label)
    logger.debug("concept prompt for %s: %s", label, prompt)
    quota = config.concepts_per_label
    accumulated = []
    seen = set()
    for attempt in range(1, config.retry_budget + 1):
        # Fresh request each attempt; the escalating count lets deterministic
        # backends reveal deeper table entries instead of echoing themselves.
        request = {
            "id_labels": list(vocab.labels),
            "query_label": label,
            "num": quota * attempt,
        }
        try:
            response = backend.concepts(request)
        except TransportError as exc:
            raise TransportError(f"concept request for label {label!r} failed: {exc}") from exc
        try:
            parsed = parse_concepts(", ".join(response["concepts"]))
        except EmptyResponseError:
            parsed = []
        for concept in sanitize_concepts(parsed, vocab, config):
            key = normalize_concept(concept)
            if key in seen:
                continue
            seen.add(key)
            accumulated.append(concept)
        if len(accumulated) >= quota:
            return accumulated[:quota]
    return accumulated


def imagine_concepts(backend, vocab: Vocabulary, config: ConceptConfig, concurrency: int = 1) -> ConceptMap:
    """Fill every label's concept quota, raising if any label stays short.

    Per-label requests may run concurrently; results merge in label order so
    output is deterministic regardless of completion order.
    """
    label_ids = list(range(vocab.size))
    if concurrency > 1:
        with ThreadPoolExecutor(max_workers=concurrency) as pool:
            results = list(
                pool.map(lambda lid: _collect_for_label(backend, vocab, config, lid), label_ids)
            )
    else:
        results = [_collect_for_label(backend, vocab, config, lid) for lid in label_ids]

    per_label = dict(zip(label_ids, results))
    short = [vocab.label_of(lid) for lid in label_ids if len(per_label[lid]) < config.concepts_per_label]
    if short:
        raise PartialConceptsError(
            f"retry budget exhausted with short labels: {', '.join(short)}",
            short_labels=short,
            concept_map=ConceptMap(per_label),
        )
    concept_map = ConceptMap(per_label)
    concept_map.validate(vocab, config)
    return concept_map
