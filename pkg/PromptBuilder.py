import json
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Optional, Sequence

Placement = Literal["system_message", "text_suffix"]
PLACEMENTS = ("system_message", "text_suffix")

SUB_PROMPTS = {
    "a": "Please recover the text from the corrupted OCR.",
    "b": "You are an expert in post-OCR correction of documents.",
    "c": "Using the context available from the text please recover the most likely original text from the corrupted OCR.",
    "d": "The text is from an English newspaper in the 1800's.",
    "e": "The text may be an advert or article and may be missing the beginning or end.",
    "f": "Do not add any text, commentary, or lead in sentences beyond the recovered text. Do not add a title, or any introductions.",
}

# Labels are the command-line identifiers of the combined prompts
COMBINED_PROMPTS = {
    "basic-prompt": ("a",),
    "expert-basic": ("b", "a"),
    "expert-recover": ("b", "c"),
    "expert-recover-publication": ("b", "c", "d"),
    "expert-recover-text-prompt": ("b", "c", "e"),
    "expert-recover-publication-text": ("b", "c", "d", "e"),
    "expert-recover-instructions": ("b", "c", "f"),
    "full-context": ("b", "c", "d", "e", "f"),
}

LABEL_ALIASES = {
    "basic": "basic-prompt",
    "expert-recover-pub-instructions": "expert-recover-publication-text",
}

PROMPT_JOINER = " "
SUFFIX_SEPARATOR = "\n\n"

JOKE_PROMPT_BASE = "Please correct the below sentences containing OCR errors"
EXPERIMENT_PROMPTS = {
    "joke_basic": JOKE_PROMPT_BASE,
    "joke_socio": JOKE_PROMPT_BASE + ", the sentences are part of popular jokes",
    "joke_mislead": JOKE_PROMPT_BASE + ", the sentences are part of an article on cookery",
}
CHUNK_CONTEXT = {
    "basic": None,
    "socio": "The text is from The Sydney Morning Herald 1842 -1950.",
    "mislead": "The text is from The Hong Kong Restaurant Review 1989-1993.",
}


@dataclass(frozen=True)
class JokePhrase:
    corrupted: str
    answer: str


JOKE_PHRASES = {
    "setup": JokePhrase("*** did the *** *** *** ***", "Why did the chicken cross the road?"),
    "punchline": JokePhrase("*** *** *** *** other side", "To get to the other side"),
    "full": JokePhrase("*** did the *** *** *** *** *** *** *** *** other side", "Why did the chicken cross the road? To get to the other side"),
}


class UnknownSubPrompt(ValueError):
    pass


class EmptyParts(UnknownSubPrompt):
    pass


def compose(parts: Sequence[str]) -> str:
    """
    Joins the sub-prompt texts in the given order with a single space.

    :param parts: Sub-prompt ids, e.g. ["b", "c", "f"]
    :return: Prompt text
    """
    if len(parts) == 0:
        raise EmptyParts("A prompt needs at least one sub-prompt")
    unknown = [part for part in parts if part not in SUB_PROMPTS]
    if len(unknown) > 0:
        raise UnknownSubPrompt(f"Unknown sub-prompt id(s) {unknown} - valid ids are {list(SUB_PROMPTS)}")
    return PROMPT_JOINER.join(SUB_PROMPTS[part] for part in parts)


def parse_label(label: str) -> str:
    """
    Resolves a combined prompt label in any spelling ("full context", "full_context", "Full-Context") or alias
    to its canonical kebab-case label.
    """
    normalized = "-".join(label.strip().lower().replace("_", " ").replace("-", " ").split())
    normalized = LABEL_ALIASES.get(normalized, normalized)
    if normalized not in COMBINED_PROMPTS:
        raise UnknownSubPrompt(f"Unknown prompt label '{label}' - valid labels are {list(COMBINED_PROMPTS)}")
    return normalized


@dataclass(frozen=True)
class PromptSpec:
    label: str
    parts: tuple[str, ...]
    placement: Placement = "text_suffix"

    def __post_init__(self):
        if len(self.parts) == 0:
            raise EmptyParts(f"Prompt '{self.label}' has no sub-prompts")
        if len(set(self.parts)) != len(self.parts):
            raise ValueError(f"Prompt '{self.label}' repeats a sub-prompt: {self.parts}")
        if self.placement not in PLACEMENTS:
            raise ValueError(f"Unknown placement '{self.placement}' - please use one of {PLACEMENTS}")
        compose(self.parts)

    @staticmethod
    def from_label(label: str, placement: Placement = "text_suffix") -> "PromptSpec":
        canonical = parse_label(label)
        return PromptSpec(canonical, COMBINED_PROMPTS[canonical], placement)

    @property
    def text(self) -> str:
        return compose(self.parts)


@dataclass(frozen=True)
class RenderedRequest:
    system: Optional[str]
    user: str


def render_text(ocr_text: str, prompt: str, placement: Placement) -> RenderedRequest:
    if len(ocr_text) == 0:
        raise ValueError("OCR text is empty, there is nothing to correct")
    match placement:
        case "text_suffix":
            return RenderedRequest(system=None, user=ocr_text + SUFFIX_SEPARATOR + prompt)
        case "system_message":
            return RenderedRequest(system=prompt, user=ocr_text)
        case _:
            raise ValueError(f"Unknown placement '{placement}' - please use one of {PLACEMENTS}")


def render(ocr_text: str, spec: PromptSpec) -> RenderedRequest:
    """
    Places the prompt either as system message (user = OCR text) or after the OCR text,
    separated by a double line break.

    :param ocr_text: Non-empty OCR text
    :param spec: Prompt and placement
    :return: RenderedRequest
    """
    return render_text(ocr_text, spec.text, spec.placement)


def chunk_prompt(kind: str) -> str:
    if kind not in CHUNK_CONTEXT:
        raise ValueError(f"Unknown chunk prompt '{kind}' - please use one of {list(CHUNK_CONTEXT)}")
    prompt = compose(COMBINED_PROMPTS["expert-recover-instructions"])
    if CHUNK_CONTEXT[kind] is not None:
        prompt = prompt + PROMPT_JOINER + CHUNK_CONTEXT[kind]
    return prompt


def experiment_prompts(kind: str) -> str:
    """
    :param kind: joke_basic, joke_socio, joke_mislead, chunk_basic, chunk_socio or chunk_mislead
    :return: Exact prompt text of the experiment
    """
    if kind in EXPERIMENT_PROMPTS:
        return EXPERIMENT_PROMPTS[kind]
    if kind.startswith("chunk_"):
        return chunk_prompt(kind.removeprefix("chunk_"))
    raise ValueError(f"Unknown experiment prompt '{kind}'")


def catalogue() -> dict:
    return {
        "sub_prompts": dict(SUB_PROMPTS),
        "combined_prompts": {label: {"parts": list(parts), "text": compose(parts)} for label, parts in COMBINED_PROMPTS.items()},
        "aliases": dict(LABEL_ALIASES),
        "experiment_prompts": {kind: experiment_prompts(kind) for kind in list(EXPERIMENT_PROMPTS) + [f"chunk_{k}" for k in CHUNK_CONTEXT]},
        "joke_phrases": {name: {"corrupted": phrase.corrupted, "answer": phrase.answer} for name, phrase in JOKE_PHRASES.items()},
        "placement_separator": SUFFIX_SEPARATOR,
    }


def export_catalogue(path: Optional[str | Path] = None) -> str:
    """
    Serializes the full prompt catalogue to JSON (written to path if given).

    :return: The JSON text
    """
    text = json.dumps(catalogue(), indent=2, ensure_ascii=False) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text
