import numpy as np
import pytest

from madlibkit import (
    CcaModel,
    EmbeddingTable,
    InvalidInputError,
    MadlibInstance,
    NoDecisionError,
    ShapeError,
    ZeroNormError,
    aggregate_outcomes,
    choose_completion,
    cosine_similarity,
    evaluate,
    merge_reports,
    render_report_table,
    report_from_records,
    report_records,
)


def make_instance(**overrides):
    fields = dict(
        image_id="img0",
        category="scenes",
        prompt=("the", "image", "shows", "<BLANK>"),
        candidates=("a", "b", "c", "d"),
        truth_index=0,
        task="easy",
    )
    fields.update(overrides)
    return MadlibInstance(**fields)


def identity_model(dim):
    """A pass-through joint space: projections are the identity map."""
    eye = np.eye(dim)
    return CcaModel(
        mean_x=np.zeros(dim),
        mean_y=np.zeros(dim),
        w1=eye.copy(),
        w2=eye.copy(),
        w1_base=eye.copy(),
        w2_base=eye.copy(),
        correlations=np.ones(dim),
        power_p=0.0,
        ridge_x=0.0,
        ridge_y=0.0,
    )


class TestCosineSimilarity:
    def test_identical_vectors(self):
        v = np.array([1.0, 2.0, 3.0])
        assert cosine_similarity(v, v) == 1.0

    def test_orthogonal(self):
        assert cosine_similarity(np.array([1.0, 0.0]), np.array([0.0, 2.0])) == 0.0

    def test_known_value(self):
        out = cosine_similarity(np.array([1.0, 0.0]), np.array([1.0, 1.0]))
        assert out == pytest.approx(1 / np.sqrt(2), abs=1e-12)

    def test_clamped_to_range(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            a, b = rng.normal(size=6), rng.normal(size=6)
            assert -1.0 <= cosine_similarity(a, b) <= 1.0

    def test_zero_norm_raises(self):
        with pytest.raises(ZeroNormError):
            cosine_similarity(np.zeros(3), np.ones(3))

    def test_dim_mismatch(self):
        with pytest.raises(ShapeError):
            cosine_similarity(np.ones(2), np.ones(3))


class TestChooseCompletion:
    def test_matching_candidate_wins(self):
        image = np.array([1.0, 0.0, 0.0])
        cands = [np.array([0.0, 1.0, 0.0]), image.copy(), np.array([0.0, 0.0, 1.0]), np.array([0.0, 1.0, 1.0])]
        assert choose_completion(image, cands) == 1

    def test_positive_scaling_never_changes_choice(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            image = rng.normal(size=5)
            cands = [rng.normal(size=5) for _ in range(4)]
            base = choose_completion(image, cands)
            scaled = [c * rng.uniform(0.01, 100.0) for c in cands]
            assert choose_completion(image, scaled) == base

    def test_tie_breaks_to_lowest_index(self):
        image = np.array([1.0, 0.0])
        same = np.array([1.0, 1.0])
        cands = [np.array([0.0, 1.0]), same, np.array([-1.0, 0.0]), same.copy()]
        assert choose_completion(image, cands) == 1

    def test_unencodable_ranks_below_scored(self):
        image = np.array([1.0, 0.0])
        # the only scored candidate is anti-aligned, but still beats None/zero
        cands = [None, np.zeros(2), np.array([-1.0, 0.0]), None]
        assert choose_completion(image, cands) == 2

    def test_all_unencodable_raises(self):
        with pytest.raises(NoDecisionError):
            choose_completion(np.ones(2), [None, None, np.zeros(2), None])

    def test_zero_norm_image_raises(self):
        with pytest.raises(ZeroNormError):
            choose_completion(np.zeros(2), [np.ones(2)] * 4)


class TestMadlibInstance:
    def test_valid_instance(self):
        inst = make_instance()
        assert inst.truth_index == 0

    def test_unknown_category(self):
        with pytest.raises(InvalidInputError):
            make_instance(category="weather")

    def test_bad_task(self):
        with pytest.raises(InvalidInputError):
            make_instance(task="medium")

    def test_wrong_candidate_count(self):
        with pytest.raises(InvalidInputError):
            make_instance(candidates=("a", "b", "c"))

    def test_truth_index_range(self):
        with pytest.raises(InvalidInputError):
            make_instance(truth_index=4)

    def test_blank_required_exactly_once(self):
        with pytest.raises(InvalidInputError):
            make_instance(prompt=("no", "blank", "here"))
        with pytest.raises(InvalidInputError):
            make_instance(prompt=("<BLANK>", "<BLANK>"))


class TestEvaluate:
    def test_single_instance_correct(self):
        table = EmbeddingTable.from_vectors(
            {
                "a": np.array([1.0, 0.0, 0.0]),
                "b": np.array([0.0, 1.0, 0.0]),
                "c": np.array([0.0, 0.0, 1.0]),
                "d": np.array([0.0, 1.0, 1.0]),
            }
        )
        inst = make_instance(truth_index=0)
        features = {"img0": np.array([1.0, 0.0, 0.0])}
        report = evaluate([inst], identity_model(3), features, table)
        assert report.results[0].correct == 1 and report.results[0].total == 1
        assert report.accuracy("scenes", "easy") == 1.0

    def test_missing_feature_is_data_error(self):
        table = EmbeddingTable.from_vectors({"a": np.ones(2)})
        inst = make_instance()
        report = evaluate([inst], identity_model(2), {}, table)
        assert report.results == []
        assert report.data_errors == [("img0", "missing image feature")]

    def test_all_candidates_unencodable_counts_incorrect(self):
        table = EmbeddingTable.from_vectors({"zzz": np.ones(2)})
        inst = make_instance()
        report = evaluate([inst], identity_model(2), {"img0": np.array([1.0, 0.0])}, table)
        assert report.results[0].correct == 0 and report.results[0].total == 1

    def test_random_candidates_hit_chance_rate(self):
        # 25% baseline: i.i.d. random candidate vectors, 10000 instances
        rng = np.random.default_rng(2)
        dim = 4
        tokens = {f"t{i}": rng.normal(size=dim) for i in range(40)}
        table = EmbeddingTable.from_vectors(tokens)
        names = list(tokens)
        instances = []
        features = {}
        for k in range(10000):
            image_id = f"im{k}"
            features[image_id] = rng.normal(size=dim)
            cands = tuple(names[i] for i in rng.integers(0, 40, size=4))
            instances.append(make_instance(image_id=image_id, candidates=cands, truth_index=int(rng.integers(0, 4))))
        report = evaluate(instances, identity_model(dim), features, table)
        assert 0.23 <= report.accuracy("scenes", "easy") <= 0.27

    def test_category_order_does_not_matter(self):
        rng = np.random.default_rng(3)
        table = EmbeddingTable.from_vectors({f"t{i}": rng.normal(size=3) for i in range(10)})
        names = list(table.tokens())
        instances = []
        features = {}
        for k in range(40):
            image_id = f"im{k}"
            features[image_id] = rng.normal(size=3)
            instances.append(
                make_instance(
                    image_id=image_id,
                    category=("scenes", "emotion", "past")[k % 3],
                    task=("easy", "hard")[k % 2],
                    candidates=tuple(names[i] for i in rng.integers(0, 10, size=4)),
                    truth_index=int(rng.integers(0, 4)),
                )
            )
        model = identity_model(3)
        fwd = evaluate(instances, model, features, table)
        rev = evaluate(list(reversed(instances)), model, features, table)
        assert fwd.results == rev.results


class TestReports:
    def test_aggregation_and_averages(self):
        outcomes = [
            ("scenes", "easy", True),
            ("scenes", "easy", False),
            ("emotion", "easy", True),
            ("scenes", "hard", False),
        ]
        report = aggregate_outcomes(outcomes)
        assert report.accuracy("scenes", "easy") == 0.5
        assert report.averages() == {"easy": 0.75, "hard": 0.0}

    def test_rows_follow_canonical_category_order(self):
        report = aggregate_outcomes([("past", "easy", True), ("scenes", "easy", True), ("emotion", "hard", False)])
        assert [r.category for r in report.results] == ["scenes", "emotion", "past"]

    def test_merge_reports(self):
        a = aggregate_outcomes([("past", "easy", True)])
        b = aggregate_outcomes([("scenes", "easy", False)], data_errors=[("im1", "missing image feature")])
        merged = merge_reports([a, b])
        assert [r.category for r in merged.results] == ["scenes", "past"]
        assert merged.data_errors == [("im1", "missing image feature")]

    def test_records_round_trip(self):
        report = aggregate_outcomes(
            [("scenes", "easy", True), ("scenes", "hard", False), ("emotion", "easy", True)],
            data_errors=[("im9", "missing image feature")],
        )
        rebuilt = report_from_records(report_records(report))
        assert rebuilt.results == report.results
        assert rebuilt.data_errors == report.data_errors

    def test_render_contains_rows_and_average(self):
        report = aggregate_outcomes([("scenes", "easy", True), ("scenes", "hard", False)])
        text = render_report_table(report)
        lines = text.splitlines()
        assert lines[0].split() == ["Category", "Easy", "Hard"]
        assert "scenes" in lines[1] and "100.0" in lines[1] and "0.0" in lines[1]
        assert lines[-1].startswith("Average")
