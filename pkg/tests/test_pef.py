"""Element matching, mismatch detection, and the feedback grammar."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from comui.core import BlockKind, BoundingBox, ElementClass, UIBlock, UIElement
from comui.errors import FeedbackApplyError, ParseError, ValidationError
from comui.pef import (
    ADD_COLOR,
    ARROW,
    DEL_COLOR,
    FIX_COLOR,
    TIMES,
    BlockPriority,
    ElementMatch,
    FeedbackInstruction,
    InstructionOp,
    IssueChannel,
    MatchChannel,
    MatchWeights,
    MismatchIssue,
    MismatchThresholds,
    Severity,
    annotate_screenshots,
    apply_feedback,
    build_instructions,
    composite_similarity,
    detect_mismatches,
    levenshtein,
    match_elements,
    parse_instructions,
    rank_blocks,
    render_instructions,
    synthesize_instructions,
    text_similarity,
)
from comui.visual import FallbackProvider


def E(eid, x, y, w, h, cls=ElementClass.OTHER, text=None):
    if text is not None and cls is ElementClass.OTHER:
        cls = ElementClass.TEXT
    return UIElement(id=eid, bbox=BoundingBox(x, y, w, h), elem_class=cls, text=text)


def Blk(bid, x, y, w, h):
    return UIBlock(id=bid, page_id="p", bbox=BoundingBox(x, y, w, h), kind=BlockKind.REFINED)


def match_of(gt, gen, sim=1.0, channel=MatchChannel.COMPOSITE):
    return ElementMatch(gt=gt, gen=gen, similarity=sim, channel=channel)


def issue(channel, severity=Severity.MEDIUM, sim=0.5):
    return MismatchIssue(channel=channel, severity=severity, similarity=sim)


class TestConfigs:
    def test_default_weights_valid(self):
        w = MatchWeights()
        assert (w.alpha, w.beta, w.gamma, w.theta) == (0.3, 0.2, 0.5, 0.5)

    def test_weights_must_sum_to_one(self):
        with pytest.raises(ValidationError, match="sum to 1"):
            MatchWeights(alpha=0.5, beta=0.5, gamma=0.5)

    def test_negative_weight_rejected(self):
        with pytest.raises(ValidationError, match="non-negative"):
            MatchWeights(alpha=-0.2, beta=0.7, gamma=0.5)

    def test_theta_out_of_range(self):
        with pytest.raises(ValidationError, match="theta"):
            MatchWeights(theta=1.5)

    def test_default_thresholds_valid(self):
        t = MismatchThresholds()
        assert (t.t_high, t.t_medium, t.t_area) == (0.3, 0.15, 0.02)

    def test_medium_must_stay_below_high(self):
        with pytest.raises(ValidationError, match="t_medium < t_high"):
            MismatchThresholds(t_high=0.1, t_medium=0.2)


class TestRankBlocks:
    def test_low_similarity_small_block_outranks(self):
        # both blocks cover a fifth of the page; scores -0.4 and -0.72
        pairs = [(Blk("a", 0, 0, 20, 10), Blk("a'", 0, 0, 20, 10)),
                 (Blk("b", 0, 20, 20, 10), Blk("b'", 0, 20, 20, 10))]
        out = rank_blocks(pairs, [0.9, 0.5], page_area=1000.0)
        assert [p.block_id for p in out] == ["b", "a"]
        assert out[0].score == pytest.approx(-0.4)
        assert out[1].score == pytest.approx(-0.72)
        assert [p.rank for p in out] == [1, 2]

    def test_equal_scores_tie_break_on_id(self):
        pairs = [(Blk("z", 0, 0, 10, 10), Blk("z'", 0, 0, 10, 10)),
                 (Blk("a", 20, 0, 10, 10), Blk("a'", 20, 0, 10, 10))]
        out = rank_blocks(pairs, [0.5, 0.5], page_area=1000.0)
        assert [p.block_id for p in out] == ["a", "z"]

    def test_top_k_truncation(self):
        pairs = [(Blk(f"b{i}", 0, i * 10, 10, 10), Blk(f"c{i}", 0, i * 10, 10, 10))
                 for i in range(8)]
        sims = [i / 10 for i in range(8)]
        out = rank_blocks(pairs, sims, page_area=10000.0, k=5)
        assert len(out) == 5
        assert [p.rank for p in out] == [1, 2, 3, 4, 5]

    def test_full_page_block_scores_zero(self):
        pairs = [(Blk("a", 0, 0, 100, 100), Blk("a'", 0, 0, 100, 100))]
        out = rank_blocks(pairs, [0.3], page_area=10000.0)
        assert out[0].score == pytest.approx(0.0)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValidationError, match="similarities"):
            rank_blocks([(Blk("a", 0, 0, 10, 10), Blk("b", 0, 0, 10, 10))], [], 100.0)

    def test_similarity_out_of_range_rejected(self):
        pairs = [(Blk("a", 0, 0, 10, 10), Blk("b", 0, 0, 10, 10))]
        with pytest.raises(ValidationError, match="out of"):
            rank_blocks(pairs, [1.5], 100.0)

    def test_nonpositive_page_area_rejected(self):
        with pytest.raises(ValidationError, match="positive"):
            rank_blocks([], [], 0.0)

    @given(st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=1, max_size=8),
           st.randoms(use_true_random=False))
    @settings(max_examples=50, deadline=None)
    def test_ranking_is_argsort_of_scores(self, sims, rng):
        pairs = []
        for i in range(len(sims)):
            w = rng.randint(5, 60)
            h = rng.randint(5, 60)
            pairs.append((Blk(f"b{i}", 0, 0, w, h), Blk(f"c{i}", 0, 0, w, h)))
        out = rank_blocks(pairs, sims, page_area=10000.0, k=len(sims))
        # descending score is ascending sim * (1 - p); id breaks ties
        expected = sorted(
            ((s * (1 - min(1.0, p[0].bbox.area / 10000.0)), p[0].id)
             for p, s in zip(pairs, sims)),
            key=lambda e: (e[0], e[1]),
        )
        assert [p.block_id for p in out] == [e[1] for e in expected]


class TestTextSimilarity:
    def test_identical(self):
        assert text_similarity("Submit", "Submit") == 1.0

    def test_both_empty(self):
        assert text_similarity("", "") == 1.0

    def test_submit_vs_sign_in(self):
        assert levenshtein("Submit", "Sign In") == 6
        assert text_similarity("Submit", "Sign In") == pytest.approx(1 - 6 / 7)
        assert text_similarity("Submit", "Sign In") == pytest.approx(0.1429, abs=1e-4)

    def test_empty_vs_nonempty(self):
        assert text_similarity("", "abc") == 0.0

    def test_single_substitution(self):
        assert text_similarity("abcd", "abxd") == pytest.approx(0.75)

    @given(st.text(max_size=12), st.text(max_size=12))
    @settings(max_examples=100, deadline=None)
    def test_symmetric_and_bounded(self, a, b):
        s = text_similarity(a, b)
        assert 0.0 <= s <= 1.0
        assert s == text_similarity(b, a)
        if a == b:
            assert s == 1.0


class ConstantProvider:
    def __init__(self, d):
        self.d = d
        self.calls = 0

    def distance(self, a, b, a_id=None, b_id=None):
        self.calls += 1
        return self.d


class TestCompositeSimilarity:
    def test_half_diagonal_shift_same_size_identical_crops(self):
        # position term 0.5, size term 1, visual term 1: 0.15 + 0.2 + 0.5
        gt = E("a", 0, 0, 10, 10)
        gen = E("b", 50, 50, 10, 10)
        sim = composite_similarity(gt, gen, (100, 100), provider=ConstantProvider(0.0),
                                   gt_crop=object(), gen_crop=object())
        assert sim == pytest.approx(0.85)

    def test_identical_geometry_max_visual_distance(self):
        gt = E("a", 10, 10, 20, 20)
        gen = E("b", 10, 10, 20, 20)
        sim = composite_similarity(gt, gen, (100, 100), provider=ConstantProvider(1.0),
                                   gt_crop=object(), gen_crop=object())
        assert sim == pytest.approx(0.5)

    def test_identical_without_provider_is_one(self):
        gt = E("a", 10, 10, 20, 20)
        assert composite_similarity(gt, gt, (100, 100)) == pytest.approx(1.0)

    def test_terms_clamped_at_zero(self):
        gt = E("a", 0, 0, 2, 2)
        gen = E("b", 96, 96, 2, 2)
        sim = composite_similarity(gt, gen, (100, 100), provider=ConstantProvider(5.0),
                                   gt_crop=object(), gen_crop=object())
        assert sim >= 0.0

    def test_custom_weights(self):
        gt = E("a", 0, 0, 10, 10)
        gen = E("b", 50, 50, 10, 10)
        w = MatchWeights(alpha=1.0, beta=0.0, gamma=0.0)
        assert composite_similarity(gt, gen, (100, 100), w) == pytest.approx(0.5)


class TestMatchElements:
    def test_identical_sets_fully_matched(self):
        els = [E("a", 0, 0, 10, 10), E("b", 30, 0, 10, 10), E("c", 0, 30, 10, 10)]
        matches, un_gt, un_gen = match_elements(els, els, (100, 100))
        assert len(matches) == 3 and not un_gt and not un_gen
        assert all(m.similarity == pytest.approx(1.0) for m in matches)
        assert all(m.gt.id == m.gen.id for m in matches)

    def test_text_channel_when_both_sides_have_text(self):
        gt = [E("a", 0, 0, 10, 10, text="Hello")]
        gen = [E("x", 50, 50, 40, 8, text="Hello")]
        matches, _, _ = match_elements(gt, gen, (100, 100))
        assert matches[0].channel is MatchChannel.TEXT
        assert matches[0].similarity == 1.0

    def test_composite_channel_when_text_missing_on_one_side(self):
        gt = [E("a", 0, 0, 10, 10, text="Hello")]
        gen = [E("x", 0, 0, 10, 10)]
        matches, _, _ = match_elements(gt, gen, (100, 100))
        assert matches[0].channel is MatchChannel.COMPOSITE

    def test_similarity_at_theta_rejected(self):
        # "ab" vs "ax": 1 - 1/2 = 0.5, not strictly above theta = 0.5
        gt = [E("a", 0, 0, 10, 10, text="ab")]
        gen = [E("x", 0, 0, 10, 10, text="ax")]
        matches, un_gt, un_gen = match_elements(gt, gen, (100, 100))
        assert not matches
        assert [e.id for e in un_gt] == ["a"] and [e.id for e in un_gen] == ["x"]

    def test_similarity_above_theta_accepted(self):
        gt = [E("a", 0, 0, 10, 10, text="abc")]
        gen = [E("x", 0, 0, 10, 10, text="abx")]
        matches, _, _ = match_elements(gt, gen, (100, 100))
        assert len(matches) == 1
        assert matches[0].similarity == pytest.approx(2 / 3)

    def test_greedy_earlier_reference_takes_shared_candidate(self):
        # both references prefer the same candidate; reading order wins
        gt = [E("top", 0, 0, 10, 10), E("low", 0, 30, 10, 10)]
        gen = [E("x", 0, 0, 10, 10)]
        matches, un_gt, un_gen = match_elements(gt, gen, (100, 100))
        assert len(matches) == 1
        assert matches[0].gt.id == "top" and matches[0].gen.id == "x"
        assert [e.id for e in un_gt] == ["low"]

    def test_tied_candidates_resolved_by_reading_order(self):
        gt = [E("a", 0, 0, 10, 10, text="Hi")]
        gen = [E("p", 40, 40, 10, 10, text="Hi"), E("q", 20, 20, 10, 10, text="Hi")]
        matches, _, un_gen = match_elements(gt, gen, (100, 100))
        assert matches[0].gen.id == "q"
        assert [e.id for e in un_gen] == ["p"]

    def test_crops_feed_the_provider(self):
        img = np.zeros((60, 60, 3), dtype=np.uint8)
        img[0:10, 0:10] = (250, 10, 10)
        gt = [E("a", 0, 0, 10, 10)]
        gen = [E("x", 0, 0, 10, 10)]
        matches, _, _ = match_elements(
            gt, gen, (60, 60), provider=FallbackProvider(),
            gt_image=img, gen_image=img,
        )
        assert matches[0].similarity == pytest.approx(1.0, abs=1e-6)

    def test_empty_inputs(self):
        matches, un_gt, un_gen = match_elements([], [], (100, 100))
        assert matches == [] and un_gt == [] and un_gen == []

    @given(st.randoms(use_true_random=False))
    @settings(max_examples=40, deadline=None)
    def test_one_to_one_and_conservation(self, rng):
        def rand_elements(prefix, n):
            out = []
            for i in range(n):
                x, y = rng.randrange(0, 180), rng.randrange(0, 180)
                text = rng.choice([None, "Go", "Stop", "Submit"])
                out.append(E(f"{prefix}{i}", x, y, rng.randrange(5, 20), rng.randrange(5, 20),
                             text=text))
            return out

        gts = rand_elements("g", rng.randrange(0, 7))
        gens = rand_elements("h", rng.randrange(0, 7))
        matches, un_gt, un_gen = match_elements(gts, gens, (200, 200))
        gen_ids = [m.gen.id for m in matches]
        assert len(gen_ids) == len(set(gen_ids))
        gt_ids = [m.gt.id for m in matches]
        assert len(gt_ids) == len(set(gt_ids))
        assert len(matches) + len(un_gt) == len(gts)
        assert len(matches) + len(un_gen) == len(gens)
        assert all(m.similarity > 0.5 for m in matches)


class TestDetectMismatches:
    def test_perfect_pair_no_issues(self):
        el = E("a", 10, 10, 30, 20, text="Hi")
        assert detect_mismatches(match_of(el, el), (100, 100)) == []

    def test_large_center_shift_small_element_stays_medium(self):
        # normalized shift 0.4 exceeds t_high, but the element covers
        # only 0.04 of the page, below a 0.1 area gate
        gt = E("a", 0, 0, 20, 20)
        gen = E("b", 40, 0, 20, 20)
        t = MismatchThresholds(t_area=0.1)
        issues = detect_mismatches(match_of(gt, gen), (100, 100), t)
        assert len(issues) == 1
        assert issues[0].channel is IssueChannel.POSITION
        assert issues[0].similarity == pytest.approx(0.6)
        assert issues[0].severity is Severity.MEDIUM

    def test_same_shift_escalates_with_default_area_gate(self):
        gt = E("a", 0, 0, 20, 20)
        gen = E("b", 40, 0, 20, 20)
        issues = detect_mismatches(match_of(gt, gen), (100, 100))
        assert issues[0].severity is Severity.HIGH

    def test_mild_height_change_is_not_an_issue(self):
        # heights 40 vs 51: dissimilarity (11/51)/2 is about 0.108
        gt = E("a", 0, 0, 40, 51)
        gen = E("b", 0, 0, 40, 40)
        issues = detect_mismatches(match_of(gt, gen), (400, 400))
        assert issues == []

    def test_halved_height_is_medium(self):
        gt = E("a", 0, 0, 40, 40)
        gen = E("b", 0, 0, 40, 80)
        issues = detect_mismatches(match_of(gt, gen), (400, 400))
        assert [i.channel for i in issues] == [IssueChannel.SIZE]
        assert issues[0].similarity == pytest.approx(0.75)
        assert issues[0].severity is Severity.MEDIUM

    def test_dissimilarity_at_threshold_excluded(self):
        # width 100 vs 70 with equal heights: dissimilarity exactly 0.15
        gt = E("a", 0, 0, 100, 40)
        gen = E("b", 0, 0, 70, 40)
        issues = detect_mismatches(match_of(gt, gen), (1000, 1000))
        assert issues == []

    def test_area_exactly_at_gate_stays_medium(self):
        # area ratio exactly t_area does not escalate
        gt = E("a", 0, 0, 20, 10)
        gen = E("b", 40, 0, 20, 10)
        issues = detect_mismatches(match_of(gt, gen), (100, 100))
        assert gt.bbox.area / 10000 == pytest.approx(0.02)
        assert issues[0].severity is Severity.MEDIUM

    def test_text_issue_reported(self):
        gt = E("a", 0, 0, 60, 20, text="Submit")
        gen = E("b", 0, 0, 60, 20, text="Sign In")
        issues = detect_mismatches(match_of(gt, gen), (100, 100))
        assert [i.channel for i in issues] == [IssueChannel.TEXT]
        assert issues[0].similarity == pytest.approx(1 - 6 / 7)
        assert issues[0].severity is Severity.HIGH

    def test_missing_text_on_one_side_counts(self):
        gt = E("a", 0, 0, 60, 20, text="Submit")
        gen = E("b", 0, 0, 60, 20)
        issues = detect_mismatches(match_of(gt, gen), (100, 100))
        assert [i.channel for i in issues] == [IssueChannel.TEXT]
        assert issues[0].similarity == 0.0

    def test_channel_order_position_size_text_visual(self):
        gt = E("a", 0, 0, 40, 40, text="Yes")
        gen = E("b", 50, 50, 80, 80, text="No")
        issues = detect_mismatches(
            match_of(gt, gen), (100, 100),
            provider=ConstantProvider(0.9), gt_crop=object(), gen_crop=object(),
        )
        assert [i.channel for i in issues] == [
            IssueChannel.POSITION, IssueChannel.SIZE, IssueChannel.TEXT, IssueChannel.VISUAL,
        ]

    def test_visual_channel_needs_provider_and_crops(self):
        gt = E("a", 0, 0, 40, 40)
        gen = E("b", 0, 0, 40, 40)
        assert detect_mismatches(match_of(gt, gen), (100, 100)) == []
        issues = detect_mismatches(
            match_of(gt, gen), (100, 100),
            provider=ConstantProvider(0.5), gt_crop=object(), gen_crop=object(),
        )
        assert [i.channel for i in issues] == [IssueChannel.VISUAL]
        assert issues[0].similarity == pytest.approx(0.5)


class TestInstructionRendering:
    def test_move_down_and_taller_golden(self):
        gt = E("a", 50, 80, 40, 51)
        gen = E("b", 50, 40, 40, 40)
        pairs = [(match_of(gt, gen),
                  [issue(IssueChannel.POSITION), issue(IssueChannel.SIZE)])]
        text = synthesize_instructions(pairs)
        assert text == (
            f"[fix#1 {ARROW} ref#1]: move it down, "
            f"and make it taller (height: 40px {ARROW} 51px)"
        )

    def test_width_only_narrower(self):
        gt = E("a", 0, 0, 80, 40)
        gen = E("b", 0, 0, 120, 40)
        pairs = [(match_of(gt, gen), [issue(IssueChannel.SIZE)])]
        assert synthesize_instructions(pairs) == (
            f"[fix#1 {ARROW} ref#1]: make it narrower (width: 120px {ARROW} 80px)"
        )

    def test_both_dims_resize_by_area(self):
        gt = E("a", 0, 0, 30, 30)
        gen = E("b", 0, 0, 60, 60)
        pairs = [(match_of(gt, gen), [issue(IssueChannel.SIZE)])]
        assert synthesize_instructions(pairs) == (
            f"[fix#1 {ARROW} ref#1]: make it smaller (resize to 30{TIMES}30px)"
        )
        pairs = [(match_of(gen, gt), [issue(IssueChannel.SIZE)])]
        assert synthesize_instructions(pairs) == (
            f"[fix#1 {ARROW} ref#1]: make it larger (resize to 60{TIMES}60px)"
        )

    def test_tiny_deltas_fall_back_to_resize_template(self):
        gt = E("a", 0, 0, 3, 3)
        gen = E("b", 0, 0, 2, 3)
        pairs = [(match_of(gt, gen), [issue(IssueChannel.SIZE)])]
        assert synthesize_instructions(pairs) == (
            f"[fix#1 {ARROW} ref#1]: make it larger (resize to 3{TIMES}3px)"
        )

    def test_diagonal_movement_vertical_first(self):
        gt = E("a", 30, 50, 10, 10)
        gen = E("b", 10, 10, 10, 10)
        pairs = [(match_of(gt, gen), [issue(IssueChannel.POSITION)])]
        assert synthesize_instructions(pairs) == (
            f"[fix#1 {ARROW} ref#1]: move it down and to the right"
        )

    def test_single_axis_moves(self):
        gt = E("a", 10, 10, 10, 10)
        cases = [
            (E("b", 40, 10, 10, 10), "move it left"),
            (E("b", 10, 40, 10, 10), "move it up"),
        ]
        for gen, expected in cases:
            pairs = [(match_of(gt, gen), [issue(IssueChannel.POSITION)])]
            assert synthesize_instructions(pairs).endswith(expected)

    def test_deadband_suppresses_movement_and_renumbers(self):
        quiet_gt = E("a", 10, 10, 10, 10)
        quiet_gen = E("b", 11, 11, 10, 10)
        loud_gt = E("c", 10, 40, 30, 10, text="Save")
        loud_gen = E("d", 10, 40, 30, 10, text="Sve")
        pairs = [
            (match_of(quiet_gt, quiet_gen), [issue(IssueChannel.POSITION)]),
            (match_of(loud_gt, loud_gen), [issue(IssueChannel.TEXT)]),
        ]
        text = synthesize_instructions(pairs)
        assert text == (
            f'[fix#1 {ARROW} ref#1]: change text to "Save" (currently showing "Sve")'
        )

    def test_text_clause_golden(self):
        gt = E("a", 0, 0, 60, 20, text="Submit")
        gen = E("b", 0, 0, 60, 20, text="Sign In")
        pairs = [(match_of(gt, gen), [issue(IssueChannel.TEXT)])]
        assert synthesize_instructions(pairs) == (
            f'[fix#1 {ARROW} ref#1]: change text to "Submit" (currently showing "Sign In")'
        )

    def test_visual_clause(self):
        gt = E("a", 0, 0, 60, 20)
        pairs = [(match_of(gt, gt), [issue(IssueChannel.VISUAL)])]
        assert synthesize_instructions(pairs) == (
            f"[fix#1 {ARROW} ref#1]: adjust visual appearance to match reference"
        )

    def test_add_with_text_golden(self):
        el = E("a", 10, 20, 80, 30, cls=ElementClass.BUTTON, text="Sign Up")
        assert synthesize_instructions([], unmatched_gt=[el]) == (
            f'[add#1]: add button showing "Sign Up" at position (10, 20) '
            f"with size 80{TIMES}30px"
        )

    def test_add_without_text(self):
        el = E("a", 5, 6, 10, 12, cls=ElementClass.IMAGE)
        assert synthesize_instructions([], unmatched_gt=[el]) == (
            f"[add#1]: add image at position (5, 6) with size 10{TIMES}12px"
        )

    def test_add_other_class_says_element(self):
        el = E("a", 5, 6, 10, 12)
        assert synthesize_instructions([], unmatched_gt=[el]).startswith("[add#1]: add element")

    def test_del_with_and_without_text(self):
        with_text = E("a", 0, 0, 30, 10, text="Old")
        without = E("b", 7, 8, 30, 10)
        text = synthesize_instructions([], unmatched_gen=[with_text, without])
        lines = text.split("\n")
        assert lines[0] == '[del#1]: remove the redundant item showing "Old"'
        assert lines[1] == "[del#2]: remove the redundant item at (7, 8)"

    def test_sections_separated_by_blank_line(self):
        gt = E("a", 0, 0, 60, 20, text="Go")
        gen = E("b", 0, 0, 60, 20, text="Stop")
        pairs = [(match_of(gt, gen), [issue(IssueChannel.TEXT)])]
        add = E("c", 0, 40, 10, 10)
        dele = E("d", 0, 60, 10, 10)
        text = synthesize_instructions(pairs, [add], [dele])
        blocks = text.split("\n\n")
        assert len(blocks) == 3
        assert blocks[0].startswith("[fix#1")
        assert blocks[1].startswith("[add#1")
        assert blocks[2].startswith("[del#1")

    def test_nothing_to_say_is_empty(self):
        assert synthesize_instructions([]) == ""
        gt = E("a", 0, 0, 10, 10)
        pairs = [(match_of(gt, gt), [])]
        assert synthesize_instructions(pairs) == ""

    def test_unicode_arrow_and_times_are_literal(self):
        gt = E("a", 0, 0, 80, 40)
        gen = E("b", 0, 0, 120, 40)
        pairs = [(match_of(gt, gen), [issue(IssueChannel.SIZE)])]
        text = synthesize_instructions(pairs)
        assert "→" in text and "->" not in text
        el = E("c", 0, 0, 10, 12)
        assert "×" in synthesize_instructions([], unmatched_gt=[el])


class TestParseInstructions:
    def test_round_trip_full_program(self):
        gt = E("a", 50, 80, 40, 51, text="Send")
        gen = E("b", 50, 40, 40, 40, text="Snd")
        pairs = [(match_of(gt, gen),
                  [issue(IssueChannel.POSITION), issue(IssueChannel.SIZE),
                   issue(IssueChannel.TEXT)])]
        add = E("c", 10, 20, 80, 30, cls=ElementClass.BUTTON, text="Sign Up")
        dele = E("d", 7, 8, 30, 10)
        instructions = build_instructions(pairs, [add], [dele])
        text = render_instructions(instructions)
        assert parse_instructions(text) == instructions

    def test_separator_inside_quotes_survives(self):
        ins = FeedbackInstruction(
            op=InstructionOp.FIX, index=1, ref_index=1,
            clauses=('change text to "Yes, and no" (currently showing "No")',
                     "move it down"),
        )
        text = render_instructions([ins])
        assert parse_instructions(text) == [ins]

    def test_unknown_line_rejected(self):
        with pytest.raises(ParseError, match="unrecognized"):
            parse_instructions("please fix the header")

    def test_blank_lines_skipped(self):
        assert parse_instructions("\n\n") == []

    @given(st.data())
    @settings(max_examples=60, deadline=None)
    def test_round_trip_property(self, data):
        clause = st.text(
            alphabet="abcdefghij XYZ()#:0123456789", min_size=1, max_size=25
        ).filter(lambda s: ", and " not in s and s.strip())
        ops = st.sampled_from(list(InstructionOp))
        instructions = []
        n = data.draw(st.integers(min_value=0, max_value=6))
        for _ in range(n):
            op = data.draw(ops)
            idx = data.draw(st.integers(min_value=1, max_value=40))
            clauses = tuple(data.draw(st.lists(clause, min_size=1, max_size=3)))
            ref = idx if op is InstructionOp.FIX else None
            instructions.append(
                FeedbackInstruction(op=op, index=idx, clauses=clauses, ref_index=ref)
            )
        text = render_instructions(instructions)
        parsed = parse_instructions(text)
        def key(seq):
            return sorted(seq, key=lambda i: (i.op.value, i.index, i.clauses))
        assert key(parsed) == key(instructions)


class TestAnnotateScreenshots:
    def white(self):
        return np.full((80, 120, 3), 255, dtype=np.uint8)

    def test_shapes_and_originals_preserved(self):
        gt_img, gen_img = self.white(), self.white()
        m = match_of(E("a", 10, 10, 30, 20), E("b", 12, 12, 30, 20))
        out_gt, out_gen = annotate_screenshots(gt_img, gen_img, [m])
        assert out_gt.shape == gt_img.shape and out_gen.shape == gen_img.shape
        assert out_gt.dtype == np.uint8
        assert np.all(gt_img == 255) and np.all(gen_img == 255)

    def test_match_outlines_both_images(self):
        m = match_of(E("a", 10, 20, 30, 20), E("b", 50, 30, 30, 20))
        out_gt, out_gen = annotate_screenshots(self.white(), self.white(), [m])
        assert tuple(out_gt[20, 25]) == FIX_COLOR
        assert tuple(out_gen[30, 65]) == FIX_COLOR

    def test_add_only_on_reference_del_only_on_generated(self):
        add = E("c", 60, 50, 20, 20)
        dele = E("d", 20, 50, 20, 20)
        out_gt, out_gen = annotate_screenshots(
            self.white(), self.white(), [], unmatched_gt=[add], unmatched_gen=[dele]
        )
        assert tuple(out_gt[50, 70]) == ADD_COLOR
        assert tuple(out_gen[50, 70]) == (255, 255, 255)
        assert tuple(out_gen[50, 30]) == DEL_COLOR
        assert tuple(out_gt[50, 30]) == (255, 255, 255)

    def test_deterministic(self):
        m = match_of(E("a", 10, 10, 30, 20), E("b", 12, 12, 30, 20))
        first = annotate_screenshots(self.white(), self.white(), [m])
        second = annotate_screenshots(self.white(), self.white(), [m])
        assert np.array_equal(first[0], second[0])
        assert np.array_equal(first[1], second[1])


class StubClient:
    def __init__(self, replies):
        self.replies = list(replies)
        self.prompts = []
        self.image_counts = []

    def call(self, prompt, images=()):
        self.prompts.append(prompt)
        self.image_counts.append(len(list(images)))
        return self.replies.pop(0)


class TestApplyFeedback:
    def imgs(self):
        a = np.full((20, 20, 3), 255, dtype=np.uint8)
        return a, a.copy()

    def test_returns_revised_code(self):
        client = StubClient(["<div>revised</div>"])
        gt, gen = self.imgs()
        code = apply_feedback("<div>old</div>", "[fix#1]: x", gt, gen, client, "prompt")
        assert code == "<div>revised</div>"
        assert client.image_counts == [2]

    def test_prompt_slots_filled(self):
        from comui.prompts import load_asset

        client = StubClient(["<div>revised</div>"])
        gt, gen = self.imgs()
        apply_feedback("<div>old</div>", "MARKER-INSTR", gt, gen, client,
                       load_asset("feedback_apply"))
        assert "<div>old</div>" in client.prompts[0]
        assert "MARKER-INSTR" in client.prompts[0]

    def test_fenced_reply_unwrapped(self):
        client = StubClient(["```html\n<div>revised</div>\n```"])
        gt, gen = self.imgs()
        code = apply_feedback("x", "y", gt, gen, client, "prompt")
        assert code == "<div>revised</div>"

    def test_empty_reply_reasks_then_succeeds(self):
        client = StubClient(["", "<div>ok</div>"])
        gt, gen = self.imgs()
        code = apply_feedback("x", "y", gt, gen, client, "prompt")
        assert code == "<div>ok</div>"
        assert len(client.prompts) == 2
        assert "could not be parsed" in client.prompts[1]

    def test_empty_twice_raises(self):
        client = StubClient(["", "   "])
        gt, gen = self.imgs()
        with pytest.raises(FeedbackApplyError, match="no code"):
            apply_feedback("x", "y", gt, gen, client, "prompt")
