import random

import pytest

import TextMetrics
from TextMetrics import EditOps, NormalizationPolicy, RAW_POLICY
from printer import Printer

printer = Printer.getInstance()


def reference_distance(a: str, b: str) -> int:
    previous = list(range(len(b) + 1))
    for i in range(1, len(a) + 1):
        current = [i] + [0] * len(b)
        for j in range(1, len(b) + 1):
            current[j] = min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + (a[i - 1] != b[j - 1]))
        previous = current
    return previous[len(b)]


@pytest.mark.parametrize("reference, hypothesis, expected", [
    ("abc", "abc", EditOps(substitutions=0, deletions=0, insertions=0, correct=3)),
    ("ab", "", EditOps(substitutions=0, deletions=2, insertions=0, correct=0)),
    ("a", "ab", EditOps(substitutions=0, deletions=0, insertions=1, correct=1)),
    ("abc", "axc", EditOps(substitutions=1, deletions=0, insertions=0, correct=2)),
])
def test_align_ops_counts(reference, hypothesis, expected):
    ops = TextMetrics.align_ops(reference, hypothesis)
    assert ops == expected, f"Alignment of '{hypothesis}' against '{reference}' gave {ops}, expected {expected}"


def test_align_ops_kitten_sitting():
    ops = TextMetrics.align_ops("kitten", "sitting")
    assert ops.distance == 3, f"kitten -> sitting needs 3 edits, got {ops}"
    assert ops.reference_length == 6


def test_align_ops_rejects_empty_reference():
    with pytest.raises(TextMetrics.EmptyReference):
        TextMetrics.align_ops("", "abc")


def test_align_ops_matches_full_matrix_distance():
    rng = random.Random(20240611)
    alphabet = "abcd"
    for trial in range(10_000):
        reference = "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 64)))
        hypothesis = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 64)))
        ops = TextMetrics.align_ops(reference, hypothesis)
        expected = reference_distance(reference, hypothesis)
        assert ops.distance == expected, f"Trial {trial}: distance {ops.distance} != {expected} for '{reference}' / '{hypothesis}'"
        assert ops.reference_length == len(reference), f"Trial {trial}: S + D + C must equal the reference length"
        assert ops.substitutions + ops.insertions + ops.correct == len(hypothesis), f"Trial {trial}: S + I + C must equal the hypothesis length"


def test_align_ops_counts_code_points():
    ops = TextMetrics.align_ops("naïve \U0001f642", "naive \U0001f642")
    assert ops == EditOps(substitutions=1, deletions=0, insertions=0, correct=6), f"Non-ASCII characters must count once each, got {ops}"


@pytest.mark.parametrize("reference, hypothesis, expected", [
    ("Jane Austen", "Jane Austin", 0.09),
    ("Ada Lovelace", "Ada Loveslace", 0.08),
])
def test_cer_of_corrected_names(reference, hypothesis, expected):
    value = TextMetrics.cer(reference, hypothesis)
    assert abs(value - expected) <= 0.005, f"CER of '{hypothesis}' is {value}, expected {expected}"


def test_cer_of_corrupted_names():
    # Plain character edit distance does not reproduce the rounded values printed for these examples
    value = TextMetrics.cer("Jane Austen", "Jar.e Aost n")
    assert value == pytest.approx(4 / 11), f"Expected 4 edits over 11 characters (printed as 0.5), got {value}"
    value = TextMetrics.cer("Duke of Wellington", "..Du k3 0f W3ll1nglgss")
    assert value == pytest.approx(11 / 18), f"Expected 11 edits over 18 characters (printed as 0.5), got {value}"
    value = TextMetrics.cer("Ada Lovelace", "AcIa L.oVe>lace")
    assert value == pytest.approx(5 / 12), f"Expected 5 edits over 12 characters (printed as 0.33), got {value}"
    value = TextMetrics.cer("Ada Lovelace", "AcIa L.oVe>lace", NormalizationPolicy(case_fold=True))
    assert value == pytest.approx(4 / 12), f"Case folding removes the V/v edit, expected 4/12, got {value}"


def test_cer_of_corrected_duke():
    value = TextMetrics.cer("Duke of Wellington", "Duke of Wellylegs")
    assert value == pytest.approx(6 / 18)
    assert abs(value - 0.35) <= 0.02, f"CER of the corrected title is {value}, expected about 0.35"


@pytest.mark.parametrize("text", ["abc", "The train, dog, and Jim left London.", "ünïcödé"])
def test_cer_identity(text):
    assert TextMetrics.cer(text, text) == 0.0


def test_cer_may_exceed_one():
    assert TextMetrics.cer("ab", "xyzxyz") == pytest.approx(3.0)


def test_cer_rejects_blank_reference():
    with pytest.raises(TextMetrics.EmptyReference):
        TextMetrics.cer("  \n ", "anything")
    with pytest.raises(TextMetrics.EmptyReference):
        TextMetrics.cer("", "anything", RAW_POLICY)


def test_cer_normalization_policy():
    composed = "caf\u00e9 society"
    decomposed = "cafe\u0301 society"
    assert TextMetrics.cer(composed, decomposed) == 0.0, "NFC normalization should make both spellings equal"
    assert TextMetrics.cer(composed, decomposed, RAW_POLICY) > 0.0, "Without normalization the spellings differ"

    assert TextMetrics.cer("Jim left London", "Jim  left\nLondon ") == 0.0, "Whitespace runs collapse by default"
    assert TextMetrics.cer("Jim left London", "Jim  left London", NormalizationPolicy(collapse_whitespace=False)) > 0.0
    assert TextMetrics.cer("JIM", "jim", NormalizationPolicy(case_fold=True)) == 0.0
    assert TextMetrics.cer("JIM", "jim") == 1.0


def test_normalization_policy_rejects_unknown_form():
    with pytest.raises(ValueError):
        NormalizationPolicy(unicode_form="NFKD")


@pytest.mark.parametrize("cer_orig, cer_corrected, expected", [
    (0.10, 0.05, 50.0),
    (0.10, 0.10, 0.0),
    (0.10, 0.15, -50.0),
    (0.20, 0.0, 100.0),
])
def test_erp(cer_orig, cer_corrected, expected):
    assert TextMetrics.erp(cer_orig, cer_corrected) == pytest.approx(expected)


def test_erp_of_perfect_original():
    with pytest.raises(TextMetrics.ZeroOriginalError):
        TextMetrics.erp(0.0, 0.1)


def test_erp_rejects_negative_rates():
    with pytest.raises(ValueError):
        TextMetrics.erp(0.1, -0.1)


@pytest.mark.parametrize("values, mode, expected", [
    ([1, 2, 100], "median", 2.0),
    ([1, 2, 3, 100], "median", 2.5),
    ([1, 2, 100], "mean", 103 / 3),
    ([7.5], "mean", 7.5),
])
def test_aggregate(values, mode, expected):
    assert TextMetrics.aggregate(values, mode) == pytest.approx(expected)


def test_aggregate_rejects_empty_and_unknown_mode():
    with pytest.raises(TextMetrics.EmptyInput):
        TextMetrics.aggregate([], "median")
    with pytest.raises(ValueError):
        TextMetrics.aggregate([1.0], "mode")


@pytest.mark.parametrize("value, expected", [(0.125, 0.13), (2.675, 2.68), (-0.125, -0.13), (0.124, 0.12), (100.0, 100.0)])
def test_round_half_up(value, expected):
    assert TextMetrics.round_half_up(value) == expected


def test_round_half_up_keeps_nan():
    value = TextMetrics.round_half_up(float("nan"))
    assert value != value


def test_edit_distance_of_empty_reference():
    assert TextMetrics.edit_distance("", "abc") == 3
    assert TextMetrics.edit_distance("abc", "") == 3


def random_text(rng: random.Random, max_length: int = 40) -> str:
    alphabet = ["a", "B", " ", "\n", "\t", "e", "\u0301", "\u00e9", "\u00df", "K"]
    return "".join(rng.choice(alphabet) for _ in range(rng.randint(0, max_length)))


@pytest.mark.parametrize("policy", [TextMetrics.DEFAULT_POLICY, RAW_POLICY, NormalizationPolicy(case_fold=True),
                                    NormalizationPolicy(unicode_form="none", case_fold=True)])
def test_normalization_policy_is_idempotent(policy):
    rng = random.Random(5)
    for trial in range(1000):
        text = random_text(rng)
        once = policy.apply(text)
        assert policy.apply(once) == once, f"Trial {trial}: normalizing {text!r} twice changed the result"


def test_cer_is_stable_under_renormalization():
    rng = random.Random(6)
    policy = NormalizationPolicy(case_fold=True)
    for trial in range(500):
        reference, hypothesis = "x" + random_text(rng), random_text(rng)
        assert TextMetrics.cer(policy.apply(reference), policy.apply(hypothesis), policy) == TextMetrics.cer(reference, hypothesis, policy), \
            f"Trial {trial}: pre-normalized texts scored differently"


def test_erp_is_linear_in_corrected_cer():
    rng = random.Random(8)
    for trial in range(1000):
        cer_orig = 0.01 + rng.random()
        low, high = rng.random() * 2, rng.random() * 2
        middle = (low + high) / 2
        expected = (TextMetrics.erp(cer_orig, low) + TextMetrics.erp(cer_orig, high)) / 2
        assert TextMetrics.erp(cer_orig, middle) == pytest.approx(expected), f"Trial {trial}: ERP of the midpoint is off the line"


def test_median_is_permutation_invariant_and_robust():
    rng = random.Random(9)
    for trial in range(1000):
        values = [rng.uniform(-100, 100) for _ in range(rng.randint(1, 15))]
        median = TextMetrics.aggregate(values, "median")
        shuffled = values[:]
        rng.shuffle(shuffled)
        assert TextMetrics.aggregate(shuffled, "median") == median, f"Trial {trial}: order changed the median"

        upper_middle = sorted(values)[len(values) // 2]
        above = [i for i, value in enumerate(values) if value > upper_middle]
        if len(above) > 0:
            raised = values[:]
            raised[rng.choice(above)] += 1000 * rng.random()
            assert TextMetrics.aggregate(raised, "median") == median, f"Trial {trial}: raising a value above the median moved it"
