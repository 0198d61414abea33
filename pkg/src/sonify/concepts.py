"""Sounding-concept and image-caption ingestion, filtering, and fetching.

Concepts are short "object: sound description" texts produced per image by
an external vision-language service. This module validates their JSONL
serialization, removes inherently silent images by caption keywords, and
provides the HTTP client contract for requesting new concepts.
"""

from __future__ import annotations

import json
import logging
import re
import time
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .errors import ConceptError, ConceptServiceError
from .seeding import derive_rng

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    caption: str
    source_tag: str = ""


@dataclass(frozen=True)
class SoundingConcept:
    """A visible object plus the sound it makes, for one image."""

    concept_id: str
    image_id: str
    object: str
    description: str
    extractor: str = ""

    def __post_init__(self) -> None:
        if not self.object.strip():
            raise ConceptError(f"concept {self.concept_id!r}: empty object")
        if not self.description.strip():
            raise ConceptError(f"concept {self.concept_id!r}: empty description")


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    text: str


#: Caption prompt used to describe images before keyword filtering.
DESCRIPTIVE_PROMPT = PromptTemplate(
    name="descriptive",
    text="Provide a short and concise description of the following image.",
)

#: Prompt that asks for one to three sounds tied to visible objects.
SOUNDING_CONCEPTS_PROMPT = PromptTemplate(
    name="sounding_concepts",
    text=(
        "As a numbered list, provide one to up to three sound(s) associated "
        "with prominent objects visible and present in the image. Provide the "
        "objects followed by their associated sound"
    ),
)

PROMPT_TEMPLATES = {t.name: t for t in (DESCRIPTIVE_PROMPT, SOUNDING_CONCEPTS_PROMPT)}

#: Captions containing any of these words (whole-word, case-folded) mark an
#: image as inherently silent.
DEFAULT_SILENT_KEYWORDS = ("logo", "icon", "emblem", "symbol", "trademark", "sign")


def _read_jsonl(path: str | Path) -> Iterable[tuple[int, dict]]:
    with open(path, "r", encoding="utf-8") as handle:
        for row_num, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ConceptError(f"{path}: malformed JSON at row {row_num}: {exc}") from exc
            if not isinstance(record, dict):
                raise ConceptError(f"{path}: row {row_num} is not an object")
            yield row_num, record


def load_concepts(path: str | Path) -> list[SoundingConcept]:
    """Load concepts.jsonl; rejects missing fields and duplicate IDs by row."""
    concepts = []
    seen: set[str] = set()
    for row_num, record in _read_jsonl(path):
        missing = [f for f in ("concept_id", "image_id", "object", "description") if not record.get(f)]
        if missing:
            raise ConceptError(f"{path}: row {row_num} missing field(s): {', '.join(missing)}")
        if record["concept_id"] in seen:
            raise ConceptError(f"{path}: row {row_num} duplicate concept_id {record['concept_id']!r}")
        seen.add(record["concept_id"])
        concepts.append(
            SoundingConcept(
                concept_id=record["concept_id"],
                image_id=record["image_id"],
                object=record["object"],
                description=record["description"],
                extractor=record.get("extractor", ""),
            )
        )
    return concepts


def write_concepts(path: str | Path, concepts: Sequence[SoundingConcept]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for c in concepts:
            handle.write(
                json.dumps(
                    {
                        "concept_id": c.concept_id,
                        "image_id": c.image_id,
                        "object": c.object,
                        "description": c.description,
                        "extractor": c.extractor,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def load_images(path: str | Path) -> list[ImageRecord]:
    """Load images.jsonl; image_id must be unique."""
    records = []
    seen: set[str] = set()
    for row_num, record in _read_jsonl(path):
        if not record.get("image_id"):
            raise ConceptError(f"{path}: row {row_num} missing field(s): image_id")
        if "caption" not in record:
            raise ConceptError(f"{path}: row {row_num} missing field(s): caption")
        if record["image_id"] in seen:
            raise ConceptError(f"{path}: row {row_num} duplicate image_id {record['image_id']!r}")
        seen.add(record["image_id"])
        records.append(
            ImageRecord(
                image_id=record["image_id"],
                caption=record["caption"],
                source_tag=record.get("source_tag", ""),
            )
        )
    return records


def write_images(path: str | Path, records: Sequence[ImageRecord]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for r in records:
            handle.write(
                json.dumps(
                    {"image_id": r.image_id, "caption": r.caption, "source_tag": r.source_tag},
                    ensure_ascii=False,
                )
                + "\n"
            )


@dataclass(frozen=True)
class DiscardedImage:
    record: ImageRecord
    keyword: str


def filter_silent_images(
    records: Sequence[ImageRecord],
    keywords: Sequence[str] = DEFAULT_SILENT_KEYWORDS,
) -> tuple[list[ImageRecord], list[DiscardedImage]]:
    """Partition records by whether the caption names an inherently silent object.

    A record is discarded iff its case-folded caption contains any case-folded
    keyword as a whole word, so "sign" fires but "signal" and "iconic" do not.
    """
    if not keywords:
        raise ConceptError("keyword list must be non-empty")
    if any(not kw.strip() for kw in keywords):
        raise ConceptError("keywords must be non-blank")
    patterns = [
        (kw, re.compile(rf"\b{re.escape(kw.casefold())}\b")) for kw in keywords
    ]
    kept, discarded = [], []
    for record in records:
        caption = record.caption.casefold()
        hit = next((kw for kw, pat in patterns if pat.search(caption)), None)
        if hit is None:
            kept.append(record)
        else:
            discarded.append(DiscardedImage(record=record, keyword=hit))
    return kept, discarded


def select_concepts_for_image(
    image_id: str,
    concepts: Sequence[SoundingConcept],
    max_sources: int,
    master_seed: int,
) -> list[SoundingConcept]:
    """Pick one extractor's concepts for this image, capped at max_sources.

    When two extractors produced concepts for the same image, one set is
    chosen seeded-randomly per image so a rendered pair never mixes sources
    from different extraction runs.
    """
    if not concepts:
        return []
    by_extractor: dict[str, list[SoundingConcept]] = {}
    for c in concepts:
        by_extractor.setdefault(c.extractor, []).append(c)
    extractors = sorted(by_extractor)
    rng = derive_rng(master_seed, "extractor-choice", image_id)
    chosen = extractors[int(rng.integers(len(extractors)))]
    return by_extractor[chosen][:max_sources]


# --- external concept service -------------------------------------------

Transport = Callable[[str, dict, float], dict]


@dataclass(frozen=True)
class ConceptClientConfig:
    endpoint: str
    extractor: str
    prompt: PromptTemplate = SOUNDING_CONCEPTS_PROMPT
    auth_token: str | None = None
    timeout: float = 30.0
    max_attempts: int = 3
    backoff_base: float = 0.5
    backoff_cap: float = 8.0
    max_in_flight: int = 8


_NUMBERED_LINE = re.compile(r"^\s*\d+[.)]\s*([^:]+?)\s*:\s*(\S.*?)\s*$")


def parse_numbered_concepts(text: str) -> list[tuple[str, str]]:
    """Extract (object, sound description) pairs from a numbered-list reply."""
    pairs = []
    for line in text.splitlines():
        match = _NUMBERED_LINE.match(line)
        if match:
            pairs.append((match.group(1), match.group(2)))
    return pairs


def _http_transport(endpoint: str, payload: dict, timeout: float) -> dict:
    request = urllib.request.Request(
        endpoint,
        data=json.dumps(payload).encode("utf-8"),
        headers={"Content-Type": "application/json"},
        method="POST",
    )
    with urllib.request.urlopen(request, timeout=timeout) as response:
        return json.loads(response.read().decode("utf-8"))


def fetch_concepts(
    config: ConceptClientConfig,
    images: Sequence[tuple[str, str]],
    transport: Transport | None = None,
    sleeper: Callable[[float], None] = time.sleep,
) -> list[SoundingConcept]:
    """Request concepts for (image_id, image_uri) pairs from the service.

    One request per image with the configured prompt; transport failures are
    retried with capped exponential backoff, unparseable responses are logged
    and skipped. Results keep input image order.
    """
    send = transport if transport is not None else _http_transport

    def one(item: tuple[str, str]) -> list[SoundingConcept]:
        image_id, image_uri = item
        payload = {"image_uri": image_uri, "prompt": config.prompt.text}
        if config.auth_token:
            payload["auth_token"] = config.auth_token
        last_error: Exception | None = None
        for attempt in range(config.max_attempts):
            try:
                response = send(config.endpoint, payload, config.timeout)
                break
            except Exception as exc:  # transport-level failure
                last_error = exc
                if attempt + 1 < config.max_attempts:
                    sleeper(min(config.backoff_base * 2**attempt, config.backoff_cap))
        else:
            raise ConceptServiceError(
                f"transport failed for image {image_id!r} after "
                f"{config.max_attempts} attempts: {last_error}"
            )
        pairs = parse_numbered_concepts(str(response.get("text", "")))
        if not pairs:
            log.warning("no parseable concepts for image %s; skipped", image_id)
            return []
        return [
            SoundingConcept(
                concept_id=f"{image_id}:{config.extractor}:{n}",
                image_id=image_id,
                object=obj,
                description=desc,
                extractor=config.extractor,
            )
            for n, (obj, desc) in enumerate(pairs)
        ]

    if config.max_in_flight > 1 and len(images) > 1:
        with ThreadPoolExecutor(max_workers=config.max_in_flight) as executor:
            per_image = list(executor.map(one, images))
    else:
        per_image = [one(item) for item in images]
    return [concept for group in per_image for concept in group]
