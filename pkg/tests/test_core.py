import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from posterlayout.core import (
    AnnotationError,
    AnnotationRecord,
    BBox,
    Category,
    Element,
    Layout,
    LayoutError,
    encode_onehot,
    normalize_box,
    pad,
    parse_annotations,
    rasterize,
    rect_intersection_area,
    same_elements,
    serialize_annotations,
    unpad,
)


def make_layout(elements, w=240, h=350):
    return Layout(tuple(elements), w, h)


def real_el(cat, cx, cy, w, h):
    return Element(cat, BBox(cx, cy, w, h))


@st.composite
def boxes(draw):
    cx = draw(st.floats(0.05, 0.95))
    cy = draw(st.floats(0.05, 0.95))
    w = draw(st.floats(0.01, 0.9))
    h = draw(st.floats(0.01, 0.9))
    return BBox(cx, cy, w, h)


@st.composite
def layouts(draw, max_n=8):
    n = draw(st.integers(0, max_n))
    cats = draw(st.lists(st.sampled_from([1, 2, 3, 4]), min_size=n, max_size=n))
    els = [Element(Category(c), draw(boxes())) for c in cats]
    return make_layout(els)


class TestNormalizeBox:
    def test_full_canvas(self):
        assert normalize_box((120, 175, 240, 350), 240, 350).as_tuple() == (0.5, 0.5, 1.0, 1.0)

    def test_zero_box(self):
        assert normalize_box((0, 0, 0, 0), 240, 350).as_tuple() == (0.0, 0.0, 0.0, 0.0)

    def test_direct_division(self):
        assert normalize_box((60, 70, 120, 140), 240, 350).as_tuple() == (0.25, 0.2, 0.5, 0.4)

    def test_overflow_clamped(self):
        b = normalize_box((250, 10, 30, 20), 240, 350)
        assert b.cx == 1.0

    def test_bad_canvas(self):
        with pytest.raises(LayoutError):
            normalize_box((1, 1, 1, 1), 0, 10)

    @given(boxes(), st.integers(8, 512), st.integers(8, 512))
    def test_denormalize_round_trip(self, box, w, h):
        px = box.to_pixels(w, h)
        back = normalize_box(px, w, h)
        for a, b in zip(back.to_pixels(w, h), px):
            assert abs(a - b) < 0.5


class TestPadUnpad:
    def test_pad_appends_padding(self):
        lay = make_layout([real_el(Category.TEXT, 0.5, 0.5, 0.2, 0.1)] * 2)
        padded = pad(lay, 4)
        assert padded.n == 4
        assert [e.category for e in padded.elements[2:]] == [Category.NON_OBJECT] * 2
        assert all(e.box.as_tuple() == (0, 0, 0, 0) for e in padded.elements[2:])

    def test_pad_empty(self):
        padded = pad(make_layout([]), 3)
        assert padded.n == 3
        assert all(e.category == Category.NON_OBJECT for e in padded.elements)

    def test_pad_noop_at_capacity(self):
        lay = make_layout([real_el(Category.LOGO, 0.5, 0.5, 0.2, 0.1)] * 4)
        assert pad(lay, 4) == lay

    def test_pad_overflow(self):
        lay = make_layout([real_el(Category.LOGO, 0.5, 0.5, 0.2, 0.1)] * 5)
        with pytest.raises(LayoutError):
            pad(lay, 4)

    def test_unpad_all_padding(self):
        assert unpad(pad(make_layout([]), 3)).n == 0

    def test_unpad_interleaved(self):
        non = Element(Category.NON_OBJECT, BBox(0, 0, 0, 0))
        a = real_el(Category.TEXT, 0.3, 0.3, 0.2, 0.1)
        b = real_el(Category.LOGO, 0.7, 0.7, 0.2, 0.1)
        lay = make_layout([non, a, non, b, non])
        assert unpad(lay).elements == (a, b)

    @given(layouts(), st.integers(0, 8))
    def test_round_trip(self, lay, extra):
        n_max = lay.n + extra
        assert unpad(pad(lay, n_max)).elements == lay.elements


class TestOnehot:
    def test_text(self):
        assert encode_onehot(Category.TEXT, 5).tolist() == [0, 0, 1, 0, 0]

    def test_non_object(self):
        assert encode_onehot(Category.NON_OBJECT, 5).tolist() == [1, 0, 0, 0, 0]

    def test_embellishment(self):
        assert encode_onehot(Category.EMBELLISHMENT, 5).tolist() == [0, 0, 0, 0, 1]

    def test_out_of_range(self):
        with pytest.raises(LayoutError):
            encode_onehot(Category.EMBELLISHMENT, 3)


def interval_overlap(a0, a1, b0, b1):
    return max(0.0, min(a1, b1) - max(a0, b0))


class TestIntersectionArea:
    def test_identical(self):
        b = BBox(0.5, 0.5, 0.4, 0.4)
        assert rect_intersection_area(b, b) == pytest.approx(0.16)

    def test_disjoint(self):
        assert rect_intersection_area(BBox(0.2, 0.2, 0.1, 0.1), BBox(0.8, 0.8, 0.1, 0.1)) == 0.0

    def test_touching_edges(self):
        a = BBox(0.3, 0.5, 0.2, 0.2)
        b = BBox(0.5, 0.5, 0.2, 0.2)
        assert rect_intersection_area(a, b) == 0.0

    @given(boxes(), boxes())
    def test_matches_interval_oracle(self, a, b):
        expect = interval_overlap(a.x0, a.x1, b.x0, b.x1) * interval_overlap(a.y0, a.y1, b.y0, b.y1)
        assert rect_intersection_area(a, b) == pytest.approx(expect, abs=1e-12)

    @given(boxes(), boxes())
    def test_symmetric_and_bounded(self, a, b):
        ab = rect_intersection_area(a, b)
        assert ab == rect_intersection_area(b, a)
        assert 0.0 <= ab <= min(a.area, b.area) + 1e-12


class TestRasterize:
    def test_empty(self):
        assert rasterize(make_layout([]), 64, 64).sum() == 0

    def test_full_canvas(self):
        lay = make_layout([real_el(Category.TEXT, 0.5, 0.5, 1.0, 1.0)])
        assert rasterize(lay, 64, 48).all()

    def test_half_box_pixel_count(self):
        lay = make_layout([real_el(Category.TEXT, 0.5, 0.5, 0.5, 0.5)], 100, 100)
        assert rasterize(lay, 100, 100).sum() == 2500

    def test_category_filter(self):
        lay = make_layout(
            [real_el(Category.TEXT, 0.25, 0.5, 0.5, 1.0), real_el(Category.LOGO, 0.75, 0.5, 0.5, 1.0)]
        )
        text_only = rasterize(lay, 100, 100, categories=[Category.TEXT])
        assert text_only[:, :50].all() and not text_only[:, 50:].any()

    @given(boxes(), st.sampled_from([64, 100, 177]))
    def test_single_element_count_matches_rounded_extents(self, box, size):
        lay = make_layout([Element(Category.TEXT, box)], size, size)
        mask = rasterize(lay, size, size)
        x0 = int(np.floor(box.x0 * size + 0.5))
        x1 = int(np.floor(box.x1 * size + 0.5))
        y0 = int(np.floor(box.y0 * size + 0.5))
        y1 = int(np.floor(box.y1 * size + 0.5))
        expect = max(0, min(size, x1) - max(0, x0)) * max(0, min(size, y1) - max(0, y0))
        assert mask.sum() == expect


class TestAnnotations:
    def test_single_record(self, tmp_path):
        path = tmp_path / "ann.jsonl"
        rec = AnnotationRecord("img.png", 240, 350, (real_el(Category.TEXT, 0.5, 0.5, 0.4, 0.1),))
        serialize_annotations([rec], path)
        parsed = parse_annotations(path)
        assert len(parsed) == 1 and parsed[0].to_layout().n == 1

    @settings(max_examples=25)
    @given(lays=st.lists(layouts(), min_size=1, max_size=5))
    def test_round_trip_exact(self, tmp_path_factory, lays):
        path = tmp_path_factory.mktemp("ann") / "r.jsonl"
        recs = [AnnotationRecord.from_layout(f"im{i}.png", lay) for i, lay in enumerate(lays)]
        serialize_annotations(recs, path)
        back = parse_annotations(path)
        assert len(back) == len(recs)
        for a, b in zip(recs, back):
            assert a.image_path == b.image_path
            assert same_elements(a.to_layout(), b.to_layout(), tol=1e-9)

    def test_unknown_category(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text(
            json.dumps(
                {"image_path": "x.png", "width": 10, "height": 10,
                 "elements": [{"category": 7, "box": [0.5, 0.5, 0.1, 0.1]}]}
            )
            + "\n"
        )
        with pytest.raises(AnnotationError):
            parse_annotations(path)

    def test_zero_category_rejected_in_files(self, tmp_path):
        path = tmp_path / "bad0.jsonl"
        path.write_text(
            json.dumps(
                {"image_path": "x.png", "width": 10, "height": 10,
                 "elements": [{"category": 0, "box": [0.0, 0.0, 0.0, 0.0]}]}
            )
            + "\n"
        )
        with pytest.raises(AnnotationError):
            parse_annotations(path)

    def test_malformed_line_reports_lineno(self, tmp_path):
        path = tmp_path / "bad2.jsonl"
        good = json.dumps({"image_path": "x.png", "width": 10, "height": 10, "elements": []})
        path.write_text(good + "\n{not json\n")
        with pytest.raises(AnnotationError, match=":2:"):
            parse_annotations(path)


class TestInvariants:
    def test_non_object_requires_zero_box(self):
        with pytest.raises(LayoutError):
            Element(Category.NON_OBJECT, BBox(0.1, 0.1, 0.1, 0.1))

    def test_real_element_requires_area(self):
        with pytest.raises(LayoutError):
            Element(Category.TEXT, BBox(0.5, 0.5, 0.0, 0.1))

    def test_box_range_checked(self):
        with pytest.raises(LayoutError):
            BBox(1.5, 0.5, 0.1, 0.1)
