import unicodedata
from dataclasses import dataclass
from decimal import Decimal, ROUND_HALF_UP
from typing import Literal, Sequence

import numpy as np
from numba import njit

# Character error rates are dimensionless (may exceed 1), error reduction is in percent (at most 100)
CerValue = float
ErpValue = float

AggregationMode = Literal["median", "mean"]
AGGREGATION_MODES = ("median", "mean")


class EmptyReference(ValueError):
    pass


class ZeroOriginalError(ValueError):
    pass


class EmptyInput(ValueError):
    pass


@dataclass(frozen=True)
class EditOps:
    """
    Minimum edit decomposition of a hypothesis against its reference.
    substitutions + deletions + correct always equals the reference length.
    """
    substitutions: int
    deletions: int
    insertions: int
    correct: int

    @property
    def distance(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def reference_length(self) -> int:
        return self.substitutions + self.deletions + self.correct


@dataclass(frozen=True)
class NormalizationPolicy:
    """
    Text normalization applied to both sides before scoring.

    :param unicode_form: "NFC" (canonical composition) or "none"
    :param collapse_whitespace: Replace runs of whitespace (including newlines) by a single space and strip the ends
    :param case_fold: Compare case-insensitively
    """
    unicode_form: Literal["NFC", "none"] = "NFC"
    collapse_whitespace: bool = True
    case_fold: bool = False

    def __post_init__(self):
        if self.unicode_form not in ("NFC", "none"):
            raise ValueError(f"Unknown unicode form '{self.unicode_form}' - please use 'NFC' or 'none'")

    def apply(self, text: str) -> str:
        if self.case_fold:
            text = text.casefold()
        if self.unicode_form == "NFC":
            text = unicodedata.normalize("NFC", text)
        if self.collapse_whitespace:
            text = " ".join(text.split())
        return text


DEFAULT_POLICY = NormalizationPolicy()
RAW_POLICY = NormalizationPolicy(unicode_form="none", collapse_whitespace=False, case_fold=False)


def _code_points(text: str) -> np.ndarray:
    return np.frombuffer(text.encode("utf-32-le", "surrogatepass"), dtype=np.uint32)


@njit(cache=False)
def _edit_operation_counts(ref: np.ndarray, hyp: np.ndarray) -> tuple[int, int, int, int]:
    n = ref.shape[0]
    m = hyp.shape[0]
    dist = np.empty((n + 1, m + 1), dtype=np.int64)
    for i in range(n + 1):
        dist[i, 0] = i
    for j in range(m + 1):
        dist[0, j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            cost = 0 if ref[i - 1] == hyp[j - 1] else 1
            best = dist[i - 1, j - 1] + cost
            if dist[i - 1, j] + 1 < best:
                best = dist[i - 1, j] + 1
            if dist[i, j - 1] + 1 < best:
                best = dist[i, j - 1] + 1
            dist[i, j] = best

    # Backtrace, diagonal first so that a substitution wins over a deletion/insertion pair
    substitutions = 0
    deletions = 0
    insertions = 0
    correct = 0
    i = n
    j = m
    while i > 0 or j > 0:
        if i > 0 and j > 0:
            cost = 0 if ref[i - 1] == hyp[j - 1] else 1
            if dist[i, j] == dist[i - 1, j - 1] + cost:
                if cost == 0:
                    correct += 1
                else:
                    substitutions += 1
                i -= 1
                j -= 1
                continue
        if i > 0 and dist[i, j] == dist[i - 1, j] + 1:
            deletions += 1
            i -= 1
        else:
            insertions += 1
            j -= 1
    return substitutions, deletions, insertions, correct


def align_ops(reference: str, hypothesis: str) -> EditOps:
    """
    Levenshtein alignment (unit costs) of hypothesis against reference, counted per Unicode code point.

    :param reference: Ground truth text (non-empty)
    :param hypothesis: Text to be scored
    :return: EditOps of a minimum edit decomposition
    """
    if len(reference) == 0:
        raise EmptyReference("Reference text is empty, the error rate is undefined. Please check the ground truth of the document.")
    s, d, i, c = _edit_operation_counts(_code_points(reference), _code_points(hypothesis))
    return EditOps(substitutions=int(s), deletions=int(d), insertions=int(i), correct=int(c))


def edit_distance(reference: str, hypothesis: str) -> int:
    if len(reference) == 0:
        return len(hypothesis)
    return align_ops(reference, hypothesis).distance


def cer(reference: str, hypothesis: str, policy: NormalizationPolicy = DEFAULT_POLICY) -> CerValue:
    """
    Character error rate (S + D + I) / (S + D + C) of the hypothesis after normalizing both texts.

    :param reference: Ground truth text
    :param hypothesis: OCR or corrected text
    :param policy: Normalization applied to both sides
    :return: CER (0 for a perfect match, may exceed 1)
    """
    reference = policy.apply(reference)
    if len(reference) == 0:
        raise EmptyReference("Reference text is empty after normalization, the error rate is undefined. Please check the ground truth of the document.")
    ops = align_ops(reference, policy.apply(hypothesis))
    return ops.distance / ops.reference_length


def erp(cer_orig: CerValue, cer_corrected: CerValue) -> ErpValue:
    """
    Error reduction in percent between the original and the corrected error rate.

    :param cer_orig: CER of the raw OCR (must be > 0)
    :param cer_corrected: CER of the corrected text
    :return: ERP, 100 for a perfect correction, negative if the correction made the text worse
    """
    if cer_orig == 0:
        raise ZeroOriginalError("Original CER is 0, the document is already perfect and has no error reduction.")
    if cer_orig < 0 or cer_corrected < 0:
        raise ValueError(f"Error rates must be non-negative, got {cer_orig} and {cer_corrected}")
    return (cer_orig - cer_corrected) / cer_orig * 100


def aggregate(values: Sequence[float], mode: AggregationMode = "median") -> float:
    if len(values) == 0:
        raise EmptyInput("Cannot aggregate an empty list of values")
    match mode:
        case "median":
            return float(np.median(np.asarray(values, dtype=float)))
        case "mean":
            return float(np.mean(np.asarray(values, dtype=float)))
        case _:
            raise ValueError(f"Unknown aggregation mode '{mode}' - please use one of {AGGREGATION_MODES}")


def round_half_up(value: float, decimals: int = 2) -> float:
    """
    Rounds for display (0.125 -> 0.13), unlike Python's round() which rounds half to even.
    NaN is passed through.
    """
    if value != value:
        return value
    quantum = Decimal(1).scaleb(-decimals)
    return float(Decimal(str(value)).quantize(quantum, rounding=ROUND_HALF_UP))
