"""Group indicator rows, correlation matrices, PCA and their CSV exports."""

from __future__ import annotations

import math
from datetime import date

import numpy as np
import pytest

from discoursekit.analytics import (
    VARIABLES,
    GroupFeatureRow,
    MissingMetadataError,
    TooFewRowsError,
    UnlabeledMessageError,
    export_biplot,
    feature_matrix,
    group_features,
    pca,
    pearson_from_matrix,
    pearson_matrix,
    write_correlation_csv,
    write_eigen_csv,
    write_feature_table,
)
from discoursekit.corpus import Label, Role

P, E, R = Label.PHATIC, Label.EMOTIVE, Label.REFERENTIAL


def make_row(values, group_id="g001", dd_id="dd1", degenerate=False):
    kwargs = dict(zip(VARIABLES, values))
    kwargs["students"] = int(kwargs["students"])
    return GroupFeatureRow(
        group_id=group_id, dd_id=dd_id, degenerate_gaps=degenerate, **kwargs
    )


def random_rows(n, seed, constant_cols=()):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, len(VARIABLES))) * 3.0 + 1.0
    x[:, VARIABLES.index("students")] = rng.integers(10, 40, size=n)
    for col in constant_cols:
        x[:, VARIABLES.index(col)] = 5.0
    return [make_row(vec, group_id=f"g{i:03d}") for i, vec in enumerate(x)]


class TestGroupFeatures:
    def test_discourse_proportions_split_by_role(self, make_message, make_metadata):
        student_labels = [R] * 4 + [P] * 3 + [E] * 3
        teacher_labels = [R, P]
        messages = [
            make_message(id=f"s{i}", gold_label=lab)
            for i, lab in enumerate(student_labels)
        ] + [
            make_message(id=f"t{i}", role=Role.TEACHER, gold_label=lab)
            for i, lab in enumerate(teacher_labels)
        ]
        rows = group_features(messages, [make_metadata()])
        assert len(rows) == 1
        row = rows[0]
        assert (row.referential_s, row.phatic_s, row.emotive_s) == (0.4, 0.3, 0.3)
        assert (row.referential_t, row.phatic_t, row.emotive_t) == (0.5, 0.5, 0.0)
        assert row.teacher_participation == pytest.approx(2 / 12)
        assert row.progress == pytest.approx(0.3)
        assert row.students == 30

    def test_activity_gap_statistics(self, make_message, make_metadata):
        meta = make_metadata(
            completed=(date(2013, 3, 4), date(2013, 3, 11), date(2013, 3, 18))
        )
        row = group_features([make_message(gold_label=P)], [meta])[0]
        assert row.mean_gap == 7.0
        assert row.var_gap == 0.0
        assert not row.degenerate_gaps

    def test_uneven_gaps_use_population_variance(self, make_message, make_metadata):
        meta = make_metadata(
            completed=(date(2013, 3, 4), date(2013, 3, 8), date(2013, 3, 18))
        )
        row = group_features([make_message(gold_label=P)], [meta])[0]
        assert row.mean_gap == pytest.approx(7.0)
        assert row.var_gap == pytest.approx(9.0)

    def test_single_activity_flags_degenerate_gaps(self, make_message, make_metadata):
        meta = make_metadata(completed=(date(2013, 3, 4),))
        row = group_features([make_message(gold_label=P)], [meta])[0]
        assert (row.mean_gap, row.var_gap) == (0.0, 0.0)
        assert row.degenerate_gaps

    def test_rows_sorted_by_group_regardless_of_message_order(
        self, make_message, make_metadata
    ):
        messages = [
            make_message(id="m1", group_id="g002", gold_label=P),
            make_message(id="m2", group_id="g001", gold_label=E),
            make_message(id="m3", group_id="g002", gold_label=R),
        ]
        metadata = [make_metadata(group_id="g001"), make_metadata(group_id="g002")]
        rows = group_features(messages, metadata)
        assert [r.group_id for r in rows] == ["g001", "g002"]
        reordered = group_features(list(reversed(messages)), metadata)
        assert rows == reordered

    def test_missing_metadata_names_the_group(self, make_message, make_metadata):
        messages = [make_message(group_id="g009", gold_label=P)]
        with pytest.raises(MissingMetadataError) as exc_info:
            group_features(messages, [make_metadata(group_id="g001")])
        assert exc_info.value.group_id == "g009"

    def test_unlabeled_message_names_the_message(self, make_message, make_metadata):
        with pytest.raises(UnlabeledMessageError) as exc_info:
            group_features([make_message(id="m77")], [make_metadata()])
        assert exc_info.value.message_id == "m77"

    def test_predictions_override_gold_labels(self, make_message, make_metadata):
        messages = [make_message(id="m1", gold_label=P)]
        row = group_features(messages, [make_metadata()], labels={"m1": R})[0]
        assert row.referential_s == 1.0
        assert row.phatic_s == 0.0

    def test_predictions_fill_in_for_missing_gold(self, make_message, make_metadata):
        messages = [make_message(id="m1"), make_message(id="m2", gold_label=E)]
        row = group_features(messages, [make_metadata()], labels={"m1": P})[0]
        assert row.phatic_s == 0.5
        assert row.emotive_s == 0.5

    def test_feature_matrix_shape_and_order(self, make_message, make_metadata):
        rows = group_features([make_message(gold_label=P)], [make_metadata()])
        x = feature_matrix(rows)
        assert x.shape == (1, len(VARIABLES))
        assert x[0, VARIABLES.index("phatic_s")] == 1.0
        assert x[0, VARIABLES.index("students")] == 30.0


def reference_pearson(x):
    """Direct textbook formula, one coefficient at a time."""
    n, k = x.shape
    out = np.empty((k, k))
    for i in range(k):
        for j in range(k):
            a, b = x[:, i], x[:, j]
            cov = ((a - a.mean()) * (b - b.mean())).sum() / n
            out[i, j] = cov / (a.std() * b.std())
    return out


class TestPearson:
    def test_perfect_and_inverse_pairs(self):
        rows = random_rows(8, seed=0)
        x = feature_matrix(rows)
        x[:, 1] = 2.0 * x[:, 0] + 3.0
        x[:, 2] = -x[:, 0]
        cm = pearson_from_matrix(x, VARIABLES)
        assert cm.values[0, 1] == pytest.approx(1.0, abs=1e-12)
        assert cm.values[0, 2] == pytest.approx(-1.0, abs=1e-12)
        assert cm.get(VARIABLES[0], VARIABLES[2]) == pytest.approx(-1.0, abs=1e-12)

    def test_matches_direct_formula(self):
        x = feature_matrix(random_rows(10, seed=4))
        cm = pearson_from_matrix(x, VARIABLES)
        np.testing.assert_allclose(cm.values, reference_pearson(x), atol=1e-12)

    def test_affine_rescaling_invariance(self):
        x = feature_matrix(random_rows(12, seed=6))
        rng = np.random.default_rng(1)
        scales = rng.uniform(0.5, 20.0, size=x.shape[1])
        shifts = rng.normal(0.0, 50.0, size=x.shape[1])
        cm = pearson_from_matrix(x, VARIABLES)
        cm_scaled = pearson_from_matrix(x * scales + shifts, VARIABLES)
        np.testing.assert_allclose(cm_scaled.values, cm.values, atol=1e-12)

    def test_constant_variable_flagged_not_propagated(self):
        rows = random_rows(9, seed=2, constant_cols=("progress",))
        cm = pearson_matrix(rows)
        i = VARIABLES.index("progress")
        assert cm.values[i, i] == 1.0
        assert cm.undefined[i, :].all()
        off_diag = [cm.values[i, j] for j in range(len(VARIABLES)) if j != i]
        assert off_diag == [0.0] * (len(VARIABLES) - 1)
        j = VARIABLES.index("students")
        assert not cm.undefined[j, VARIABLES.index("mean_gap")]

    def test_symmetric_and_bounded(self):
        x = feature_matrix(random_rows(15, seed=8))
        cm = pearson_from_matrix(x, VARIABLES)
        np.testing.assert_allclose(cm.values, cm.values.T, atol=1e-14)
        assert cm.values.max() <= 1.0
        assert cm.values.min() >= -1.0

    def test_too_few_rows(self):
        x = feature_matrix(random_rows(2, seed=0))
        with pytest.raises(TooFewRowsError):
            pearson_from_matrix(x, VARIABLES)

    def test_name_count_must_match(self):
        x = feature_matrix(random_rows(5, seed=0))
        with pytest.raises(ValueError, match="variable names"):
            pearson_from_matrix(x, VARIABLES[:-1])


class TestPca:
    def test_eigenvalue_sum_preserves_variable_count(self):
        result = pca(random_rows(20, seed=3))
        assert result.dropped == ()
        assert result.eigenvalues.sum() == pytest.approx(len(VARIABLES), abs=1e-6)
        assert sum(result.explained) == pytest.approx(1.0, abs=1e-9)

    def test_eigendecomposition_reconstructs_the_correlation_matrix(self):
        rows = random_rows(20, seed=3)
        result = pca(rows)
        x = feature_matrix(rows)
        z = (x - x.mean(axis=0)) / x.std(axis=0)
        corr = (z.T @ z) / x.shape[0]
        rebuilt = result.loadings @ np.diag(result.eigenvalues) @ result.loadings.T
        assert np.abs(rebuilt - corr).max() <= 1e-8

    def test_loadings_are_orthonormal(self):
        result = pca(random_rows(16, seed=5))
        gram = result.loadings.T @ result.loadings
        assert np.abs(gram - np.eye(len(VARIABLES))).max() <= 1e-8

    def test_eigenvalues_descend_and_scores_center(self):
        result = pca(random_rows(18, seed=7))
        assert (np.diff(result.eigenvalues) <= 1e-12).all()
        assert np.abs(result.scores.mean(axis=0)).max() <= 1e-9

    def test_score_variances_equal_eigenvalues(self):
        result = pca(random_rows(25, seed=9))
        variances = (result.scores**2).mean(axis=0)
        np.testing.assert_allclose(variances, result.eigenvalues, atol=1e-8)

    def test_sign_convention_fixes_orientation(self):
        result = pca(random_rows(14, seed=11))
        for j in range(result.loadings.shape[1]):
            pivot = np.argmax(np.abs(result.loadings[:, j]))
            assert result.loadings[pivot, j] > 0

    def test_deterministic(self):
        rows = random_rows(12, seed=13)
        first, second = pca(rows), pca(rows)
        np.testing.assert_array_equal(first.eigenvalues, second.eigenvalues)
        np.testing.assert_array_equal(first.loadings, second.loadings)

    def test_perfectly_correlated_pair_collapses_to_one_axis(self):
        """Nine constant variables drop out; the two remaining ones are
        identical up to scale, so the first component carries everything."""
        rng = np.random.default_rng(17)
        base = rng.normal(size=10)
        rows = []
        for i, v in enumerate(base):
            values = [5.0] * len(VARIABLES)
            values[VARIABLES.index("progress")] = v
            values[VARIABLES.index("mean_gap")] = 2.0 * v
            values[VARIABLES.index("students")] = 20
            rows.append(make_row(values, group_id=f"g{i:03d}"))
        with pytest.warns(UserWarning, match="zero-variance"):
            result = pca(rows)
        assert result.variables == ("progress", "mean_gap")
        assert set(result.dropped) == set(VARIABLES) - {"progress", "mean_gap"}
        np.testing.assert_allclose(result.eigenvalues, [2.0, 0.0], atol=1e-12)
        assert result.explained[0] == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(np.abs(result.scores[:, 1]), 0.0, atol=1e-9)

    def test_too_few_rows(self):
        with pytest.raises(TooFewRowsError):
            pca(random_rows(2, seed=0))


class TestExports:
    def test_feature_table_layout(self, tmp_path):
        rows = random_rows(3, seed=1)
        path = tmp_path / "features.csv"
        write_feature_table(rows, path)
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0].startswith("# dispersion variables use population")
        assert lines[1] == "group_id,dd_id," + ",".join(VARIABLES) + ",degenerate_gaps"
        assert len(lines) == 5
        first = lines[2].split(",")
        assert first[0] == "g000"
        assert float(first[2]) == pytest.approx(rows[0].referential_s)
        assert first[-1] == "0"

    def test_correlation_csv_lower_triangle(self, tmp_path):
        rows = random_rows(8, seed=2, constant_cols=("var_gap",))
        cm = pearson_matrix(rows)
        path = tmp_path / "corr.csv"
        write_correlation_csv(cm, path)
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "variable," + ",".join(VARIABLES) + ",undefined_with"
        cells = lines[1].split(",")
        assert cells[0] == VARIABLES[0]
        assert cells[1] == "1.0"
        assert cells[2] == ""  # above the diagonal stays blank
        gap_line = lines[1 + VARIABLES.index("var_gap")].split(",")
        flagged = gap_line[-1].split(";")
        assert set(flagged) == set(VARIABLES) - {"var_gap"}
        clean_line = lines[1 + VARIABLES.index("students")].split(",")
        assert clean_line[-1] == "var_gap"

    def test_eigen_csv_accumulates_to_one(self, tmp_path):
        result = pca(random_rows(9, seed=3))
        path = tmp_path / "eigen.csv"
        write_eigen_csv(result, path)
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "component,eigenvalue,explained_fraction,cumulative"
        assert len(lines) == len(VARIABLES) + 1
        last = lines[-1].split(",")
        assert float(last[3]) == pytest.approx(1.0, abs=1e-9)

    def test_biplot_files(self, tmp_path):
        rows = random_rows(7, seed=4)
        result = pca(rows)
        loadings_path = tmp_path / "arrows.csv"
        scores_path = tmp_path / "points.csv"
        export_biplot(result, rows, loadings_path, scores_path)

        arrow_lines = loadings_path.read_text(encoding="utf-8").splitlines()
        assert arrow_lines[0].startswith("# PC1 explains ")
        assert "plane" in arrow_lines[0]
        assert arrow_lines[1] == "variable,pc1,pc2"
        assert len(arrow_lines) == len(VARIABLES) + 2
        name, pc1, pc2 = arrow_lines[2].split(",")
        assert name == VARIABLES[0]
        assert float(pc1) == pytest.approx(result.loadings[0, 0])

        point_lines = scores_path.read_text(encoding="utf-8").splitlines()
        assert point_lines[0] == arrow_lines[0]
        assert point_lines[1] == "group_id,dd_id,pc1,pc2"
        assert len(point_lines) == len(rows) + 2
        assert point_lines[2].split(",")[0] == "g000"

    def test_biplot_needs_two_components(self, tmp_path):
        rng = np.random.default_rng(5)
        rows = []
        for i in range(5):
            values = [1.0] * len(VARIABLES)
            values[VARIABLES.index("students")] = 20
            values[VARIABLES.index("progress")] = rng.normal()
            rows.append(make_row(values, group_id=f"g{i:03d}"))
        with pytest.warns(UserWarning, match="zero-variance"):
            result = pca(rows)
        with pytest.raises(ValueError, match="two components"):
            export_biplot(result, rows, tmp_path / "a.csv", tmp_path / "p.csv")


def test_variable_tuple_matches_row_fields():
    row = make_row(range(len(VARIABLES)))
    assert list(row.as_vector()) == [float(v) for v in range(len(VARIABLES))]
    assert math.isclose(row.as_vector()[VARIABLES.index("students")], 7.0)
