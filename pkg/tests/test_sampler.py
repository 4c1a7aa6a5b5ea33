import json

import pytest

from mht.core import AttributeLabel, ValidationError
from mht.sampler import (
    TargetDistribution,
    assign_ids_to_prompts,
    compute_quotas,
    largest_remainder,
    stratified_sample,
)


def label(gender="male", age="young_adult", ethnicity="white"):
    return AttributeLabel(
        age_bucket=age, gender=gender, ethnicity=ethnicity,
        status="anonymous", data_origin="real",
    )


def gender_pool(males=10, females=10):
    pool = [(f"m{i}", label("male")) for i in range(males)]
    pool += [(f"f{i}", label("female")) for i in range(females)]
    return pool


GENDER_5050 = TargetDistribution({"gender": {"male": 0.5, "female": 0.5}})


class TestTargets:
    def test_weights_must_sum_to_one(self):
        with pytest.raises(ValidationError, match="sum"):
            TargetDistribution({"gender": {"male": 0.6, "female": 0.6}})

    def test_unknown_bucket_rejected(self):
        with pytest.raises(ValidationError, match="unknown"):
            TargetDistribution({"gender": {"male": 0.5, "other": 0.5}})

    def test_age_alias(self):
        t = TargetDistribution(
            {"age": {"young_adult": 0.425, "middle_aged": 0.425, "aged": 0.15}}
        )
        assert t.attributes == ("age_bucket",)

    def test_negative_weight_rejected(self):
        with pytest.raises(ValidationError):
            TargetDistribution({"gender": {"male": 1.5, "female": -0.5}})


class TestLargestRemainder:
    def test_sums_exactly(self):
        quotas = largest_remainder({"a": 0.425, "b": 0.425, "c": 0.15}, 600)
        assert sum(quotas.values()) == 600

    def test_even_split(self):
        assert largest_remainder({"m": 0.5, "f": 0.5}, 6) == {"m": 3, "f": 3}

    def test_remainder_priority(self):
        # 7 * [0.5, 0.3, 0.2] = [3.5, 2.1, 1.4]; leftover goes to 'a'
        quotas = largest_remainder({"a": 0.5, "b": 0.3, "c": 0.2}, 7)
        assert quotas == {"a": 4, "b": 2, "c": 1}

    def test_tie_broken_by_key(self):
        quotas = largest_remainder({"x": 0.5, "a": 0.5}, 3)
        assert quotas == {"a": 2, "x": 1}


class TestStratifiedSample:
    def test_even_gender_split(self):
        for seed in (0, 7, 12345):
            out = stratified_sample(gender_pool(), GENDER_5050, 6, seed)
            assert len(out) == 6
            assert sum(1 for i in out if i.startswith("m")) == 3
            assert sum(1 for i in out if i.startswith("f")) == 3

    def test_n_zero(self):
        assert stratified_sample(gender_pool(), GENDER_5050, 0, 1) == []

    def test_infeasible_quota(self):
        pool = [("m0", label("male")), ("m1", label("male")),
                ("f0", label("female"))]
        targets = TargetDistribution({"gender": {"male": 1.0, "female": 0.0}})
        with pytest.raises(ValidationError, match="infeasible"):
            stratified_sample(pool, targets, 3, 0)

    def test_best_effort_redistributes(self):
        pool = [("m0", label("male")), ("m1", label("male")),
                ("f0", label("female")), ("f1", label("female"))]
        targets = TargetDistribution({"gender": {"male": 0.9, "female": 0.1}})
        out = stratified_sample(pool, targets, 3, 0, best_effort=True)
        assert len(out) == 3
        assert sum(1 for i in out if i.startswith("m")) == 2

    def test_deterministic_and_duplicate_free(self):
        pool = gender_pool(40, 40)
        a = stratified_sample(pool, GENDER_5050, 30, seed=99)
        b = stratified_sample(pool, GENDER_5050, 30, seed=99)
        assert json.dumps(a) == json.dumps(b)
        assert len(set(a)) == len(a)
        c = stratified_sample(pool, GENDER_5050, 30, seed=100)
        assert a != c  # different seed reshuffles (overwhelmingly likely)

    def test_joint_quotas_use_product_weights(self):
        pool = []
        i = 0
        for g in ("male", "female"):
            for a in ("young_adult", "middle_aged", "aged"):
                for _ in range(20):
                    pool.append((f"id{i}", label(g, a)))
                    i += 1
        targets = TargetDistribution(
            {
                "gender": {"male": 0.5, "female": 0.5},
                "age": {"young_adult": 0.5, "middle_aged": 0.25, "aged": 0.25},
            }
        )
        quotas = compute_quotas(pool, targets, 40)
        assert sum(quotas.values()) == 40
        assert quotas[("young_adult", "male")] == 10
        assert quotas[("aged", "female")] == 5

    def test_pool_smaller_than_n(self):
        with pytest.raises(ValidationError, match="exceeds pool"):
            stratified_sample(gender_pool(2, 2), GENDER_5050, 10, 0)


class TestAssignIds:
    def test_each_id_used_once(self):
        ids = ["a", "b", "c", "d"]
        out = assign_ids_to_prompts(
            ids, ["p1", "p2"], 1, {"p1": 2, "p2": 2}, seed=3
        )
        used = [i for _, _, chosen in out for i in chosen]
        assert sorted(used) == sorted(ids)

    def test_within_tuple_uniqueness_infeasible(self):
        with pytest.raises(ValidationError, match="distinct"):
            assign_ids_to_prompts(["a", "b", "c"], ["p"], 1, {"p": 5}, seed=0)

    def test_deterministic(self):
        ids = [f"id{i}" for i in range(7)]
        kwargs = dict(
            ids=ids, prompts=["p1", "p2", "p3"], iterations_per_prompt=2,
            persons_per_prompt={"p1": 3, "p2": 1, "p3": 4}, seed=11,
        )
        assert assign_ids_to_prompts(**kwargs) == assign_ids_to_prompts(**kwargs)

    def test_round_robin_fairness(self):
        ids = [f"id{i}" for i in range(5)]
        out = assign_ids_to_prompts(
            ids, ["p1", "p2", "p3"], 3, {"p1": 2, "p2": 3, "p3": 4}, seed=5
        )
        counts = {i: 0 for i in ids}
        for _, _, chosen in out:
            assert len(set(chosen)) == len(chosen)
            for i in chosen:
                counts[i] += 1
        assert max(counts.values()) - min(counts.values()) <= 1

    def test_every_id_used_before_reuse(self):
        ids = [f"id{i}" for i in range(6)]
        out = assign_ids_to_prompts(ids, ["p"], 4, {"p": 2}, seed=9)
        flat = [i for _, _, chosen in out for i in chosen]
        first_cycle = flat[: len(ids)]
        assert sorted(first_cycle) == sorted(ids)
