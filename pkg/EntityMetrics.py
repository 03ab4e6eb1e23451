import math
import re
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Mapping, Optional, Sequence

import httpx
import numpy as np
from scipy.optimize import linear_sum_assignment

from printer import Printer

printer = Printer.getInstance()

DEFAULT_WINDOW = 10
Matching = Literal["greedy", "optimal"]
MATCHINGS = ("greedy", "optimal")


class BackendUnavailable(Exception):
    pass


class BackendAuthError(BackendUnavailable):
    pass


class BackendRateLimited(BackendUnavailable):
    pass


class MalformedResponse(ValueError):
    pass


@dataclass(frozen=True)
class EntityMention:
    surface: str
    etype: str
    start: int

    def __post_init__(self):
        if len(self.surface) == 0:
            raise MalformedResponse("Entity mention with empty surface string")
        if self.start < 0:
            raise MalformedResponse(f"Entity mention '{self.surface}' has negative start offset {self.start}")

    @property
    def end(self) -> int:
        return self.start + len(self.surface)


def validate_mentions(text: str, mentions: Sequence[EntityMention]) -> None:
    """
    Checks that every mention lies inside the text and that its surface is the text at its offset.
    Offsets outside the text are rejected, never clamped.
    """
    for mention in mentions:
        if mention.end > len(text):
            raise MalformedResponse(f"Mention '{mention.surface}' at {mention.start} ends at {mention.end}, beyond the text length {len(text)}")
        if text[mention.start:mention.end] != mention.surface:
            raise MalformedResponse(f"Mention '{mention.surface}' does not match the text at offset {mention.start} ('{text[mention.start:mention.end]}')")


def entity_key(mention: EntityMention, ignore_type: bool = False) -> tuple[str, str]:
    surface = " ".join(mention.surface.casefold().split())
    return surface, "" if ignore_type else mention.etype


class NerBackend(ABC):
    kind: str = "abstract"

    @abstractmethod
    def extract(self, text: str) -> list[EntityMention]:
        pass


class GazetteerBackend(NerBackend):
    """
    Deterministic lexicon tagger: finds every lexicon surface on word boundaries, longest match first, without overlaps.
    """
    kind = "gazetteer"

    def __init__(self, lexicon: Mapping[str, str], case_sensitive: bool = True):
        if len(lexicon) == 0:
            raise ValueError("Gazetteer lexicon is empty. Please provide at least one 'surface<TAB>type' entry.")
        self.case_sensitive = case_sensitive
        self.lexicon = {(surface if case_sensitive else surface.casefold()): etype for surface, etype in lexicon.items()}
        alternatives = "|".join(re.escape(surface) for surface in sorted(lexicon, key=lambda s: (-len(s), s)))
        flags = 0 if case_sensitive else re.IGNORECASE
        self._pattern = re.compile(rf"(?<!\w)(?:{alternatives})(?!\w)", flags)

    @staticmethod
    def from_file(path: str | Path, case_sensitive: bool = True) -> "GazetteerBackend":
        lexicon = {}
        with open(path, encoding="utf-8") as f:
            for line_number, line in enumerate(f, start=1):
                line = line.rstrip("\r\n")
                if line.strip() == "":
                    continue
                parts = line.split("\t")
                if len(parts) != 2 or parts[0] == "" or parts[1] == "":
                    raise ValueError(f"Line {line_number} of gazetteer '{path}' is not of the form 'surface<TAB>type'. Please check the file.")
                lexicon[parts[0]] = parts[1]
        return GazetteerBackend(lexicon, case_sensitive)

    def extract(self, text: str) -> list[EntityMention]:
        mentions = []
        for match in self._pattern.finditer(text):
            surface = match.group(0)
            etype = self.lexicon[surface if self.case_sensitive else surface.casefold()]
            mentions.append(EntityMention(surface, etype, match.start()))
        return mentions


class HttpNerBackend(NerBackend):
    """
    Client for a tagger service. POSTs {"text": ...} and expects {"mentions": [{"surface", "type", "start"}, ...]}
    with 0-based offsets into the posted text.
    """
    kind = "http-service"

    def __init__(self, endpoint: str, timeout: float = 30.0, client: Optional[httpx.Client] = None):
        self.endpoint = endpoint
        self.timeout = timeout
        self.client = client if client is not None else httpx.Client(timeout=timeout)

    def extract(self, text: str) -> list[EntityMention]:
        try:
            response = self.client.post(self.endpoint, json={"text": text}, timeout=self.timeout)
        except httpx.TimeoutException as e:
            raise BackendUnavailable(f"NER service at '{self.endpoint}' timed out after {self.timeout}s") from e
        except httpx.TransportError as e:
            raise BackendUnavailable(f"NER service at '{self.endpoint}' is not reachable: {e}") from e
        if response.status_code in (401, 403):
            raise BackendAuthError(f"NER service at '{self.endpoint}' refused the credentials (status {response.status_code})")
        if response.status_code == 429:
            raise BackendRateLimited(f"NER service at '{self.endpoint}' is rate limiting requests (status 429)")
        if response.status_code >= 500:
            raise BackendUnavailable(f"NER service at '{self.endpoint}' answered with status {response.status_code}")
        if response.status_code != 200:
            raise MalformedResponse(f"NER service at '{self.endpoint}' rejected the request with status {response.status_code}: {response.text[:200]}")

        try:
            raw_mentions = response.json()["mentions"]
            mentions = [EntityMention(str(m["surface"]), str(m["type"]), int(m["start"])) for m in raw_mentions]
        except (ValueError, KeyError, TypeError) as e:
            raise MalformedResponse(f"NER service at '{self.endpoint}' returned an invalid body: {response.text[:200]}") from e
        validate_mentions(text, mentions)
        return mentions


def extract_entities(text: str, backend: NerBackend) -> list[EntityMention]:
    """
    Extracts named entities, sorted by start offset (offsets refer to the text exactly as passed).

    :param text: Non-empty text
    :param backend: Tagger to use
    :return: Sorted mentions
    """
    if len(text) == 0:
        raise ValueError("Cannot extract entities from an empty text")
    mentions = backend.extract(text)
    validate_mentions(text, mentions)
    return sorted(mentions, key=lambda m: (m.start, -len(m.surface), m.etype))


def extract_corpus_entities(texts: Mapping[str, str], backend: NerBackend, max_workers: int = 4) -> dict[str, list[EntityMention]]:
    """
    Extracts entities for many documents with at most max_workers concurrent backend requests.
    Empty texts yield no mentions.

    :param texts: Document id -> text
    :param backend: Tagger to use
    :param max_workers: Maximum number of concurrent requests
    :return: Document id -> sorted mentions
    """
    results = {doc_id: [] for doc_id, text in texts.items() if len(text) == 0}
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        future_to_id = {executor.submit(extract_entities, text, backend): doc_id for doc_id, text in texts.items() if len(text) > 0}
        for future in as_completed(future_to_id):
            results[future_to_id[future]] = future.result()
    return {doc_id: results[doc_id] for doc_id in texts}


@dataclass(frozen=True)
class EntityVectors:
    union_set: tuple[tuple[str, str], ...]
    v_p: np.ndarray
    v_r: np.ndarray


def build_vectors(pred: Sequence[EntityMention], ref: Sequence[EntityMention], ignore_type: bool = False) -> EntityVectors:
    pred_counts: dict[tuple[str, str], int] = {}
    ref_counts: dict[tuple[str, str], int] = {}
    for mention in pred:
        key = entity_key(mention, ignore_type)
        pred_counts[key] = pred_counts.get(key, 0) + 1
    for mention in ref:
        key = entity_key(mention, ignore_type)
        ref_counts[key] = ref_counts.get(key, 0) + 1

    union_set = tuple(sorted(pred_counts.keys() | ref_counts.keys()))
    v_p = np.array([pred_counts.get(key, 0) for key in union_set], dtype=np.int64)
    v_r = np.array([ref_counts.get(key, 0) for key in union_set], dtype=np.int64)
    return EntityVectors(union_set, v_p, v_r)


def cones(vectors: EntityVectors) -> float:
    """
    Cosine similarity of the entity count vectors (position agnostic).
    Both texts entity-free gives 1.0, exactly one of them entity-free gives 0.0.
    """
    dot = int(np.dot(vectors.v_p, vectors.v_r))
    pp = int(np.dot(vectors.v_p, vectors.v_p))
    rr = int(np.dot(vectors.v_r, vectors.v_r))
    if pp == 0 and rr == 0:
        return 1.0
    if pp == 0 or rr == 0:
        return 0.0
    # Integer check keeps parallel vectors at exactly 1.0
    if dot * dot == pp * rr:
        return 1.0
    return dot / math.sqrt(pp * rr)


@dataclass(frozen=True)
class EntityF1:
    precision: float
    recall: float
    f1: float


def _candidate_pairs(pred: Sequence[EntityMention], ref: Sequence[EntityMention], window: int, ignore_type: bool) -> list[tuple[int, int, int]]:
    pairs = []
    ref_keys = [entity_key(r, ignore_type) for r in ref]
    for p_index, p in enumerate(pred):
        p_key = entity_key(p, ignore_type)
        for r_index, r in enumerate(ref):
            gap = abs(p.start - r.start)
            if ref_keys[r_index] == p_key and gap <= window:
                pairs.append((gap, r_index, p_index))
    return pairs


def greedy_matches(pred: Sequence[EntityMention], ref: Sequence[EntityMention], window: int, ignore_type: bool = False) -> list[tuple[int, int]]:
    """
    Accepts candidate pairs by smallest offset gap, then earliest reference offset, each mention used at most once.

    :return: List of (pred index, ref index)
    """
    pairs = _candidate_pairs(pred, ref, window, ignore_type)
    pairs.sort(key=lambda t: (t[0], ref[t[1]].start, t[1], pred[t[2]].start, t[2]))
    used_pred, used_ref, matches = set(), set(), []
    for _, r_index, p_index in pairs:
        if p_index in used_pred or r_index in used_ref:
            continue
        used_pred.add(p_index)
        used_ref.add(r_index)
        matches.append((p_index, r_index))
    return matches


def optimal_matches(pred: Sequence[EntityMention], ref: Sequence[EntityMention], window: int, ignore_type: bool = False) -> list[tuple[int, int]]:
    """
    Maximum number of matched pairs, and among those the smallest total offset gap.

    :return: List of (pred index, ref index)
    """
    pairs = _candidate_pairs(pred, ref, window, ignore_type)
    if len(pairs) == 0:
        return []
    # Every allowed pair is cheaper than any unmatched slot, so cardinality is maximized first
    bonus = float(window * (len(pred) + len(ref)) + 1)
    cost = np.zeros((len(pred), len(ref)), dtype=float)
    allowed = np.zeros((len(pred), len(ref)), dtype=bool)
    for gap, r_index, p_index in pairs:
        cost[p_index, r_index] = gap - bonus
        allowed[p_index, r_index] = True
    rows, cols = linear_sum_assignment(cost)
    return [(int(p), int(r)) for p, r in zip(rows, cols) if allowed[p, r]]


def windowed_f1(pred: Sequence[EntityMention], ref: Sequence[EntityMention], window: int = DEFAULT_WINDOW, ignore_type: bool = False,
                matching: Matching = "greedy") -> EntityF1:
    """
    Entity F1 where a predicted mention only counts if it matches a reference mention with the same key
    whose start offset lies within the window.

    :param pred: Mentions of the corrected text
    :param ref: Mentions of the ground truth
    :param window: Allowed start offset difference in characters (>= 0)
    :param ignore_type: Match on surface only
    :param matching: "greedy" (smallest gap first) or "optimal" (maximum cardinality)
    :return: EntityF1
    """
    if window < 0:
        raise ValueError(f"Window must be non-negative, got {window}")
    if len(pred) == 0 and len(ref) == 0:
        return EntityF1(1.0, 1.0, 1.0)

    match matching:
        case "greedy":
            matches = greedy_matches(pred, ref, window, ignore_type)
        case "optimal":
            matches = optimal_matches(pred, ref, window, ignore_type)
        case _:
            raise ValueError(f"Unknown matching '{matching}' - please use 'greedy' or 'optimal'")

    precision = len(matches) / len(pred) if len(pred) > 0 else 0.0
    recall = len(matches) / len(ref) if len(ref) > 0 else 0.0
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return EntityF1(precision, recall, f1)
