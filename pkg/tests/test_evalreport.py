from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from postscreen.errors import DataError
from postscreen.evalreport import (
    EvalReport,
    ablation_table,
    confusion,
    multilabel_weighted_f1,
    per_class_report,
    pooled_confusion,
    render_ablation_text,
    render_report_text,
    weighted_f1,
)

from .oracles import naive_weighted_f1


class TestWeightedF1:
    def test_perfect_is_one(self):
        assert weighted_f1(["a", "b", "a"], ["a", "b", "a"]) == 1.0

    def test_frozen_two_class_example(self):
        assert weighted_f1(["A", "A", "B"], ["A", "B", "B"]) == pytest.approx(
            2.0 / 3.0, abs=1e-12
        )

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            weighted_f1(["a"], ["a", "b"])

    def test_all_wrong_is_zero(self):
        assert weighted_f1(["a", "a"], ["b", "b"]) == 0.0

    def test_1000_random_vectors_match_oracle(self):
        rng = np.random.default_rng(7)
        classes = ["a", "b", "c", "d"]
        for _ in range(1000):
            n = int(rng.integers(1, 21))
            k = int(rng.integers(1, 5))
            y_true = [classes[i] for i in rng.integers(0, k, size=n)]
            y_pred = [classes[i] for i in rng.integers(0, k, size=n)]
            assert weighted_f1(y_true, y_pred) == pytest.approx(
                naive_weighted_f1(y_true, y_pred), abs=1e-9
            )

    @given(
        st.lists(st.sampled_from("abc"), min_size=1, max_size=20),
        st.data(),
    )
    def test_one_iff_equal(self, y_true, data):
        y_pred = data.draw(
            st.lists(st.sampled_from("abc"), min_size=len(y_true), max_size=len(y_true))
        )
        score = weighted_f1(y_true, y_pred)
        if y_true == y_pred:
            assert score == 1.0
        else:
            assert score < 1.0

    @given(st.lists(st.sampled_from("abcd"), min_size=1, max_size=15), st.data())
    def test_invariant_under_consistent_relabeling(self, y_true, data):
        y_pred = data.draw(
            st.lists(st.sampled_from("abcd"), min_size=len(y_true), max_size=len(y_true))
        )
        mapping = {"a": "w", "b": "x", "c": "y", "d": "z"}
        renamed_true = [mapping[v] for v in y_true]
        renamed_pred = [mapping[v] for v in y_pred]
        assert weighted_f1(y_true, y_pred) == pytest.approx(
            weighted_f1(renamed_true, renamed_pred), abs=1e-12
        )


class TestConfusion:
    def test_perfect_diagonal(self):
        matrix = confusion(["a", "b", "b"], ["a", "b", "b"], ["a", "b"])
        assert matrix.tolist() == [[1, 0], [0, 2]]

    def test_one_flip_one_offdiagonal(self):
        matrix = confusion(["a", "b"], ["a", "a"], ["a", "b"])
        assert matrix.tolist() == [[1, 0], [1, 0]]

    def test_unknown_label_errors(self):
        with pytest.raises(DataError, match="unknown"):
            confusion(["a"], ["z"], ["a", "b"])

    def test_total_and_row_sums(self):
        y_true = ["a", "a", "b", "b", "b"]
        y_pred = ["a", "b", "b", "a", "b"]
        matrix = confusion(y_true, y_pred, ["a", "b"])
        assert matrix.sum() == len(y_true)
        assert matrix.sum(axis=1).tolist() == [2, 3]

    @given(
        st.lists(st.sampled_from("ab"), min_size=2, max_size=15),
        st.data(),
    )
    def test_removing_one_sample_decrements_one_cell(self, y_true, data):
        y_pred = data.draw(
            st.lists(st.sampled_from("ab"), min_size=len(y_true), max_size=len(y_true))
        )
        full = confusion(y_true, y_pred, ["a", "b"])
        reduced = confusion(y_true[1:], y_pred[1:], ["a", "b"])
        diff = full - reduced
        assert diff.sum() == 1
        assert (diff >= 0).all()


class TestPerClassReport:
    def test_single_class_perfect_row(self):
        rows = per_class_report(["a", "a"], ["a", "a"], ["a"])
        assert rows[0].precision == rows[0].recall == rows[0].f1 == 1.0
        assert rows[0].support == 2

    def test_all_empty_predictions_zero_by_convention(self):
        rows = per_class_report(
            [{"fake"}, {"hate"}], [set(), set()], ["fake", "hate"]
        )
        for row in rows[:-1]:
            assert row.precision == 0.0 and row.recall == 0.0 and row.f1 == 0.0

    def test_multilabel_supports(self):
        y_true = [{"fake", "hate"}, {"fake"}, set()]
        y_pred = [{"fake"}, {"fake"}, set()]
        rows = {r.name: r for r in per_class_report(y_true, y_pred, ["fake", "hate"])}
        assert rows["fake"].support == 2
        assert rows["hate"].support == 1
        assert rows["fake"].f1 == 1.0

    def test_weighted_average_row(self):
        y_true = [{"fake"}, {"fake"}, {"hate"}]
        y_pred = [{"fake"}, {"hate"}, {"hate"}]
        rows = per_class_report(y_true, y_pred, ["fake", "hate"])
        avg = rows[-1]
        assert avg.name == "weighted_avg"
        # fake: p=1, r=1/2, f1=2/3 (support 2); hate: p=1/2, r=1, f1=2/3 (support 1)
        assert avg.f1 == pytest.approx(2.0 / 3.0, abs=1e-12)
        assert avg.support == 3

    def test_multilabel_weighted_f1_matches_report(self):
        y_true = [{"fake"}, {"hate", "offensive"}]
        y_pred = [{"fake"}, {"hate"}]
        classes = ["fake", "hate", "offensive"]
        rows = per_class_report(y_true, y_pred, classes)
        assert multilabel_weighted_f1(y_true, y_pred, classes) == rows[-1].f1

    def test_pooled_confusion_counts(self):
        y_true = [{"fake"}, set()]
        y_pred = [{"fake"}, {"hate"}]
        matrix = pooled_confusion(y_true, y_pred, ["fake", "hate"])
        # fake: tp=1 tn=1; hate: fp=1 tn=1
        assert matrix.tolist() == [[1, 0], [1, 2]]


def _report(score, tag="x"):
    return EvalReport(
        task="hostility:fine",
        split="validation",
        weighted_f1=score,
        per_class=[],
        confusion=[[0]],
        classes=["a"],
        run_meta={"config_hash": "h", "seed": 0},
    )


class TestAblationTable:
    def test_deltas_vs_baseline(self):
        table = ablation_table([("none", _report(0.5)), ("m1", _report(0.6))])
        rows = {r["tag"]: r for r in table["rows"]}
        assert rows["none"]["delta"] == 0.0
        assert rows["m1"]["delta"] == pytest.approx(0.1)

    def test_rows_sorted_by_tag(self):
        table = ablation_table(
            [("none", _report(0.5)), ("m3", _report(0.6)), ("m1", _report(0.7))]
        )
        assert [r["tag"] for r in table["rows"]] == ["m1", "m3", "none"]

    def test_identical_runs_zero_deltas(self):
        table = ablation_table([("none", _report(0.4)), ("m1", _report(0.4))])
        assert all(r["delta"] == 0.0 for r in table["rows"])

    def test_needs_baseline(self):
        with pytest.raises(DataError, match="baseline"):
            ablation_table([("m1", _report(0.5)), ("m2", _report(0.6))])

    def test_needs_two_runs(self):
        with pytest.raises(DataError):
            ablation_table([("none", _report(0.5))])

    def test_render_text(self):
        tables = {"fine": ablation_table([("none", _report(0.5)), ("m1", _report(0.6))])}
        text = render_ablation_text(tables)
        assert "m1" in text and "+0.1000" in text


class TestReportSerialization:
    def _full_report(self):
        rows = per_class_report(["a", "b"], ["a", "b"], ["a", "b"])
        return EvalReport(
            task="fake_news:coarse",
            split="test",
            weighted_f1=1.0,
            per_class=rows,
            confusion=confusion(["a", "b"], ["a", "b"], ["a", "b"]).tolist(),
            classes=["a", "b"],
            run_meta={"config_hash": "deadbeef", "seed": 3},
            created_at="2021-02-14T00:00:00",
        )

    def test_json_schema_fields(self):
        body = self._full_report().to_json_dict()
        assert set(body) == {
            "task", "split", "weighted_f1", "classes", "confusion", "config_hash",
        }
        assert body["classes"][0].keys() == {"name", "p", "r", "f1", "support"}

    def test_timestamp_not_serialized(self):
        assert "2021" not in self._full_report().to_json()

    def test_text_rendering(self):
        text = render_report_text(self._full_report())
        assert "weighted F1: 1.0000" in text
        assert "config_hash: deadbeef" in text
