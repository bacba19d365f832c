import numpy as np
import pytest

from conftest import nearest_prototype_accuracy
from madlibkit import InvalidInputError, SynthConfig, generate_synthetic


class TestGeneration:
    def test_structure(self):
        cfg = SynthConfig(concepts=4, images=20, vocab_size=12, seed=1, feature_dim=8, word_dim=16)
        result = generate_synthetic(cfg)
        assert len(result.store) == 20
        assert len(result.records) == 40  # one easy and one hard instance per image
        assert len(result.table) == 12 and result.table.dim == 16
        assert result.prototypes.shape == (4, 8)
        for rec in result.records:
            inst = rec.to_instance()  # validates candidates, truth index, blank marker
            assert inst.task in ("easy", "hard")
        tasks = {rec.task for rec in result.records}
        assert tasks == {"easy", "hard"}

    def test_same_seed_is_identical(self):
        cfg = SynthConfig(concepts=4, images=16, vocab_size=8, seed=5, feature_dim=6, word_dim=10)
        a = generate_synthetic(cfg)
        b = generate_synthetic(cfg)
        assert a.records == b.records
        for image_id in a.store.images:
            assert np.array_equal(a.store[image_id].global_vec, b.store[image_id].global_vec)
            for (b1, v1), (b2, v2) in zip(a.store[image_id].proposals, b.store[image_id].proposals):
                assert b1 == b2 and np.array_equal(v1, v2)
        for tok in a.table.tokens():
            assert np.array_equal(a.table[tok], b.table[tok])

    def test_different_seeds_differ(self):
        cfg = SynthConfig(concepts=2, images=8, vocab_size=6, seed=0, feature_dim=4, word_dim=8)
        a = generate_synthetic(cfg)
        b = generate_synthetic(SynthConfig(**{**cfg.__dict__, "seed": 1}))
        assert not np.array_equal(a.store["img00000"].global_vec, b.store["img00000"].global_vec)

    def test_noiseless_data_is_perfectly_separable(self):
        cfg = SynthConfig(concepts=4, images=16, vocab_size=8, sigma=0.0, seed=2, feature_dim=8, word_dim=12)
        assert nearest_prototype_accuracy(generate_synthetic(cfg)) == 1.0

    def test_default_config_is_solvable(self):
        # precondition of the end-to-end acceptance run
        assert nearest_prototype_accuracy(generate_synthetic(SynthConfig())) >= 0.95

    def test_odd_concept_count(self):
        cfg = SynthConfig(concepts=3, images=12, vocab_size=6, seed=3, feature_dim=6, word_dim=8)
        result = generate_synthetic(cfg)
        assert len(result.records) == 24

    def test_hard_distractors_come_from_partner_concept(self):
        cfg = SynthConfig(concepts=4, images=16, vocab_size=16, seed=4, feature_dim=6, word_dim=8)
        result = generate_synthetic(cfg)
        # word index mod concepts identifies the concept of a token
        token_concept = {t: i % 4 for i, t in enumerate(sorted(result.table.tokens()))}
        for rec in result.records:
            if rec.task != "hard":
                continue
            truth_concept = result.image_concepts[rec.image_id]
            for j, cand in enumerate(rec.candidates):
                concepts = {token_concept[t] for t in cand.split()}
                assert len(concepts) == 1
                expected = truth_concept if j == rec.truth_index else truth_concept ^ 1
                assert concepts == {expected}

    def test_config_validation(self):
        with pytest.raises(InvalidInputError):
            generate_synthetic(SynthConfig(concepts=1))
        with pytest.raises(InvalidInputError):
            generate_synthetic(SynthConfig(concepts=8, images=10))
        with pytest.raises(InvalidInputError):
            generate_synthetic(SynthConfig(vocab_size=3))
        with pytest.raises(InvalidInputError):
            generate_synthetic(SynthConfig(sigma=-0.5))
