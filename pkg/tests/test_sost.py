import math
import random

import numpy as np
import pytest

from socmob.errors import ConfigError, ModelEmpty
from socmob.homophily import WeightScheme
from socmob.sost import (
    ALL_CLASSES,
    InfluenceRecord,
    SocialTree,
    SostConfig,
    SostModel,
    classify_situation,
    drift_factor,
    influence_jaccard,
    tie_strength,
    tie_strength_map,
)
from socmob.vomm import ContextTree, TreeConfig

from conftest import make_checkin

HOUR = 3600
T0 = 1_000_000


def temporal_at(ts, cfg=None):
    cfg = cfg or TreeConfig()
    return cfg.temporal(ts)


class TestDrift:
    def test_no_decay_at_zero(self):
        assert drift_factor(0, 0.05, 3.0, "geometric") == 1.0
        assert drift_factor(0, 0.05, 3.0, "exponential") == 1.0

    def test_exponential_closed_form(self):
        stay = 3.0
        elapsed = 20 * stay * HOUR
        psi = drift_factor(elapsed, 0.05, stay, "exponential")
        assert psi == pytest.approx(math.exp(-1.0), abs=1e-12)

    def test_geometric_closed_form(self):
        stay = 2.0
        elapsed = 5 * stay * HOUR
        assert drift_factor(elapsed, 0.1, stay, "geometric") == pytest.approx(0.9**5, abs=1e-12)

    def test_monotone_decreasing_random_samples(self):
        rng = np.random.default_rng(42)
        betas = rng.uniform(0.001, 0.999, size=10_000)
        elapsed = rng.uniform(0, 100 * HOUR, size=10_000)
        for kind in ("geometric", "exponential"):
            psi1 = np.array(
                [drift_factor(e, b, 3.0, kind) for e, b in zip(elapsed, betas)]
            )
            psi2 = np.array(
                [drift_factor(e + 1800.0, b, 3.0, kind) for e, b in zip(elapsed, betas)]
            )
            assert np.all(psi2 <= psi1)
            assert np.all((psi1 > 0) & (psi1 <= 1.0))

    def test_decay_horizon_weeks(self):
        # influence falls below 0.1 within three to six weeks for the
        # reported beta range at a three-hour stay unit
        stay = 3.0
        for beta in (0.02, 0.05):
            for kind in ("geometric", "exponential"):
                three_weeks = 21 * 24 * HOUR
                six_weeks = 42 * 24 * HOUR
                assert drift_factor(six_weeks, beta, stay, kind) < 0.1
                if beta == 0.05:
                    assert drift_factor(three_weeks, beta, stay, kind) < 0.1

    def test_bad_beta(self):
        with pytest.raises(ConfigError):
            drift_factor(10, 1.5, 3.0, "exponential")
        with pytest.raises(ConfigError):
            SostConfig(beta=0.0)

    def test_negative_elapsed(self):
        with pytest.raises(ValueError):
            drift_factor(-5, 0.05, 3.0, "exponential")


class TestRecord:
    def test_reinforce_zero_elapsed_doubles(self):
        cfg = SostConfig()
        rec = InfluenceRecord(users=frozenset({"a"}), last_seen=100, counter=1.0)
        rec.reinforce(100, cfg)
        assert rec.counter == pytest.approx(2.0)

    def test_reinforce_decayed(self):
        cfg = SostConfig(beta=0.05, stay_hours=3.0, drift="exponential")
        rec = InfluenceRecord(users=frozenset({"a"}), last_seen=0, counter=1.0)
        elapsed = 60 * HOUR
        psi = drift_factor(elapsed, 0.05, 3.0, "exponential")
        rec.reinforce(elapsed, cfg)
        assert rec.counter == pytest.approx(1.0 * (psi + 1.0))
        assert rec.last_seen == elapsed

    def test_lazy_read_decay(self):
        cfg = SostConfig()
        rec = InfluenceRecord(users=frozenset({"a"}), last_seen=0, counter=4.0)
        v1 = rec.value_at(10 * HOUR, cfg)
        v2 = rec.value_at(20 * HOUR, cfg)
        assert v2 < v1 < 4.0

    def test_counting_without_drift(self):
        cfg = SostConfig(drift="none")
        rec = InfluenceRecord(users=frozenset({"a"}), last_seen=0, counter=1.0)
        rec.reinforce(500, cfg)
        rec.reinforce(900, cfg)
        assert rec.counter == 3.0
        assert rec.value_at(10**9, cfg) == 3.0


class TestInfluenceJaccard:
    def test_identical(self):
        tie = {"b": 0.6, "c": 0.4}
        assert influence_jaccard({"a", "b"}, {"a", "b"}, tie) == 1.0

    def test_disjoint(self):
        tie = {"b": 0.5, "c": 0.5}
        assert influence_jaccard({"b"}, {"c"}, tie) == 0.0

    def test_weighted_overlap(self):
        tie = {"b": 0.5, "c": 0.3, "d": 0.2}
        # intersection {b}, union {b, c, d}
        got = influence_jaccard({"a", "b", "c"}, {"b", "d"}, tie)
        assert got == pytest.approx(0.5 / 1.0)

    def test_zero_union(self):
        assert influence_jaccard({"x"}, {"y"}, {}) == 0.0

    def test_scale_invariance(self):
        tie = {"b": 0.5, "c": 0.3, "d": 0.2}
        scaled = {k: 7.3 * v for k, v in tie.items()}
        a, b = {"a", "b", "c"}, {"b", "d"}
        assert influence_jaccard(a, b, tie) == pytest.approx(
            influence_jaccard(a, b, scaled)
        )


class TestTieStrength:
    def _histories(self):
        hist = {
            "me": [make_checkin(user="me", venue="x", ts=T0 + k * 100) for k in range(4)],
            "f1": [make_checkin(user="f1", venue="x", ts=T0 + k * 100 + 50) for k in range(4)],
            "f2": [make_checkin(user="f2", venue="y", ts=T0)],
        }
        return hist

    def test_single_friend_with_overlap(self):
        hist = self._histories()
        ties, ok = tie_strength_map("me", ["f1"], hist)
        assert ok and ties == {"f1": 1.0}

    def test_normalization(self):
        hist = self._histories()
        hist["f2"] = [make_checkin(user="f2", venue="x", ts=T0 + k * 100 + 25) for k in range(4)]
        ties, ok = tie_strength_map("me", ["f1", "f2"], hist)
        assert ok
        assert sum(ties.values()) == pytest.approx(1.0)
        assert ties["f1"] == pytest.approx(0.5)

    def test_no_overlap_flag(self):
        hist = self._histories()
        ties, ok = tie_strength_map("me", ["f2"], hist)
        assert not ok and ties == {"f2": 0.0}

    def test_four_friend_fixture_with_entropy_weighting(self):
        from socmob.core import Venue

        venues = {
            "x": Venue("x", 37.7, -122.4, entropy=1.0),
            "y": Venue("y", 37.71, -122.41, entropy=3.0),
        }
        hist = {
            "me": [
                make_checkin(user="me", venue="x", ts=T0),
                make_checkin(user="me", venue="y", ts=T0 + 100),
            ],
            "f1": [make_checkin(user="f1", venue="x", ts=T0 + 10)],  # 1 pair at x
            "f2": [make_checkin(user="f2", venue="y", ts=T0 + 110)],  # 1 pair at y
            "f3": [
                make_checkin(user="f3", venue="x", ts=T0 + 20),
                make_checkin(user="f3", venue="y", ts=T0 + 120),
            ],
            "f4": [make_checkin(user="f4", venue="zz", ts=T0)],
        }
        wx = 1.0 / (1.0 + 1.0)
        wy = 1.0 / (1.0 + 3.0)
        masses = {"f1": wx, "f2": wy, "f3": wx + wy, "f4": 0.0}
        total = sum(masses.values())
        scheme = WeightScheme("entropy")
        for friend, mass in masses.items():
            got = tie_strength(
                "me", friend, ["f1", "f2", "f3", "f4"], hist, scheme=scheme, venues=venues
            )
            assert got == pytest.approx(mass / total, abs=1e-12)

    def test_not_a_neighbor(self):
        with pytest.raises(ValueError):
            tie_strength("me", "zz", ["f1"], self._histories())


class TestClassify:
    def test_partition(self):
        assert classify_situation(frozenset({"me", "f"}), "me") == "I"
        assert classify_situation(frozenset({"f", "g"}), "me") == "II"
        assert classify_situation(frozenset({"f"}), "me") == "III"
        assert classify_situation(frozenset({"me"}), "me") is None
        assert classify_situation(frozenset(), "me") is None

    def test_exactly_one_class(self, rng):
        users = ["me"] + [f"f{i}" for i in range(5)]
        for _ in range(200):
            k = rng.randrange(1, 5)
            s = frozenset(rng.sample(users, k))
            classes = [
                c
                for c in ("I", "II", "III")
                if classify_situation(s, "me") == c
            ]
            assert len(classes) <= 1


class TestSocialTree:
    def test_first_occurrence_initializes(self):
        model = SostModel("me", ["f"])
        cls = model.record_social_context(frozenset({"me", "f"}), "V", T0)
        assert cls == "I"
        node = model.social.query_node("V", temporal_at(T0))
        assert node is not None
        rec = node[0].records[frozenset({"me", "f"})]
        assert rec.counter == 1.0 and rec.last_seen == T0

    def test_repeat_zero_elapsed(self):
        model = SostModel("me", ["f"])
        u = frozenset({"me", "f"})
        model.record_social_context(u, "V", T0)
        model.record_social_context(u, "V", T0)
        node = model.social.query_node("V", temporal_at(T0))
        assert node[0].records[u].counter == pytest.approx(2.0)

    def test_class_ii_creates_path_for_unvisited_venue(self):
        model = SostModel("me", ["f", "g"])
        cls = model.record_social_context(frozenset({"f", "g"}), "NEVER", T0)
        assert cls == "II"
        assert model.social.query_node("NEVER", temporal_at(T0)) is not None

    def test_class_gating(self):
        model = SostModel("me", ["f"], config=SostConfig(classes=frozenset({"II"})))
        assert model.record_social_context(frozenset({"me", "f"}), "V", T0) is None
        assert model.social.query_node("V", temporal_at(T0)) is None

    def test_strangers_filtered(self):
        model = SostModel("me", ["f"])
        cls = model.record_social_context(frozenset({"f", "stranger"}), "V", T0)
        assert cls == "III"  # the stranger is outside the circle

    def test_serialization_round_trip(self):
        cfg = SostConfig()
        model = SostModel("me", ["f", "g"], config=cfg)
        model.record_social_context(frozenset({"me", "f"}), "V", T0)
        model.record_social_context(frozenset({"f", "g"}), "W", T0 + 7200)
        model.record_social_context(frozenset({"me", "f"}), "V", T0 + 9999)
        tree = model.social
        clone = SocialTree.loads(tree.dumps())
        assert clone.dumps() == tree.dumps()
        n1 = tree.query_node("V", temporal_at(T0))[0]
        n2 = clone.query_node("V", temporal_at(T0))[0]
        u = frozenset({"me", "f"})
        assert n1.records[u].counter == n2.records[u].counter  # bit exact


class TestEffectiveCounter:
    def test_single_matching_record(self):
        model = SostModel("me", ["f"])
        model.tie_mass = {"f": 1.0}
        model.record_social_context(frozenset({"me", "f"}), "V", T0)
        got = model.effective_counter({"me", "f"}, "V", temporal_at(T0), now=T0)
        assert got == pytest.approx(1.0)

    def test_disjoint_records(self):
        model = SostModel("me", ["f", "g"])
        model.tie_mass = {"f": 0.6, "g": 0.4}
        model.record_social_context(frozenset({"f"}), "V", T0)
        got = model.effective_counter({"me", "g"}, "V", temporal_at(T0), now=T0)
        assert got == 0.0

    def test_three_record_fixture(self):
        cfg = SostConfig(drift="none")
        model = SostModel("me", ["f", "g", "h"], config=cfg)
        model.tie_mass = {"f": 0.5, "g": 0.3, "h": 0.2}
        sets = [frozenset({"me", "f"}), frozenset({"f", "g"}), frozenset({"h"})]
        for s in sets:
            model.record_social_context(s, "V", T0)
        now = frozenset({"me", "f", "g"})
        expect = sum(
            1.0 * influence_jaccard(now, s, model.tie_mass) for s in sets
        )
        got = model.effective_counter(now, "V", temporal_at(T0), now=T0)
        assert got == pytest.approx(expect, abs=1e-12)

    def test_missing_node(self):
        model = SostModel("me", ["f"])
        assert model.effective_counter({"me", "f"}, "V", temporal_at(T0)) == 0.0


class TestEstimators:
    def _model(self, drift="none"):
        cfg = SostConfig(drift=drift)
        model = SostModel("me", ["f", "g"], config=cfg)
        model.tie_mass = {"f": 0.7, "g": 0.3}
        return model

    def test_estimator_b_single_record_is_one(self):
        model = self._model()
        model.record_social_context(frozenset({"me", "f"}), "V", T0)
        got = model.social_prob("V", {"me", "f"}, temporal_at(T0), now=T0, estimator="B")
        assert got == pytest.approx(1.0)

    def test_no_records_anywhere(self):
        model = self._model()
        assert model.social_prob("V", {"me", "f"}, temporal_at(T0)) == 0.0

    def test_b_at_least_a_on_fixture(self):
        # two venues with evidence; estimator A spreads mass over the node,
        # its ancestors and their siblings, so B gives the evidenced venue
        # more weight
        model = self._model()
        model.record_social_context(frozenset({"me", "f"}), "V", T0)
        model.record_social_context(frozenset({"me", "g"}), "W", T0 + 60)
        now = {"me", "f"}
        b = model.social_prob("V", now, temporal_at(T0), now=T0, estimator="B")
        a = model.social_prob("V", now, temporal_at(T0), now=T0, estimator="A")
        assert b >= a
        assert a > 0

    def test_direct_evaluation_of_estimators(self):
        model = self._model()
        t1 = T0
        u1 = frozenset({"me", "f"})
        u2 = frozenset({"me", "g"})
        model.record_social_context(u1, "V", t1)
        model.record_social_context(u1, "V", t1)  # counter 2
        model.record_social_context(u2, "V", t1)
        now = {"me", "f"}
        tie = model.tie_mass
        j1 = influence_jaccard(now, u1, tie)
        j2 = influence_jaccard(now, u2, tie)
        eff = 2.0 * j1 + 1.0 * j2
        raw = 3.0
        got_b = model.social_prob("V", now, temporal_at(t1), now=t1, estimator="B")
        assert got_b == pytest.approx(eff / raw, abs=1e-12)
        # estimator A: nodes on the path all carry the same records, and
        # there are no sibling venues; denominator = 4 nodes + 4 * eff
        got_a = model.social_prob("V", now, temporal_at(t1), now=t1, estimator="A")
        assert got_a == pytest.approx(eff / (4 + 4 * eff), abs=1e-12)


class TestCombinedAndPredict:
    def _st_tree(self):
        tree = ContextTree(TreeConfig())
        prev = []
        ts = T0
        for venue in "ABABABAB":
            tree.train_event(venue, ts, prev)
            prev.append(venue)
            prev = prev[-3:]
            ts += HOUR
        return tree, prev, ts

    def test_no_situation_routes_to_individual(self):
        tree, prev, ts = self._st_tree()
        model = SostModel("me", ["f"])
        key = tree.key(prev, ts)
        dist, _ = tree.distribution(key)
        for q in dist:
            assert model.combined_prob(tree, q, None, prev, ts) == dist[q]

    def test_product(self):
        tree, prev, ts = self._st_tree()
        cfg = SostConfig(drift="none")
        model = SostModel("me", ["f"], config=cfg)
        model.tie_mass = {"f": 1.0}
        now = frozenset({"me", "f"})
        temporal = tree.key(prev, ts).temporal
        # plant a record for symbol "A" at the current temporal context
        model.record_social_context(now, "A", ts)
        factor = model.social_prob("A", now, temporal, now=ts)
        individual = tree.prob("A", tree.key(prev, ts))
        assert model.combined_prob(tree, "A", now, prev, ts) == pytest.approx(
            factor * individual
        )

    def test_predict_reduces_to_individual_without_social_data(self):
        tree, prev, ts = self._st_tree()
        model = SostModel(
            "me", ["f"], config=SostConfig(classes=frozenset(), enable_trend=False)
        )
        outcome = model.predict_next(tree, prev, ts)
        assert outcome.branch == "main"
        assert outcome.venue == tree.predict(tree.key(prev, ts))[0][0]

    def test_planted_influence_prediction(self):
        # the target has never been to venue N; friends have, at a matching
        # temporal context, and the current situation includes them
        tree, prev, ts = self._st_tree()
        cfg = SostConfig(drift="none")
        friends_trees = [ContextTree(TreeConfig()) for _ in range(2)]
        # friends visit N repeatedly at the same hour-of-week as `ts`
        for k, ftree in enumerate(friends_trees):
            fprev = []
            for w in range(4):
                t = ts + w * 7 * 86_400
                ftree.train_event("N", t, fprev)
                fprev.append("N")
        from socmob.vomm import MergedContextView

        model = SostModel(
            "me", ["f1", "f2"], config=cfg, trend=MergedContextView(friends_trees)
        )
        model.tie_mass = {"f1": 0.5, "f2": 0.5}
        now = frozenset({"me", "f1", "f2"})
        model.record_social_context(now, "N", ts - 7 * 86_400)
        outcome = model.predict_next(tree, prev, ts, now)
        assert outcome.venue == "N"

    def test_cold_user_falls_back_to_trend(self):
        friend_tree = ContextTree(TreeConfig())
        fprev = []
        for k in range(5):
            friend_tree.train_event("T", T0 + k * HOUR, fprev)
            fprev.append("T")
        from socmob.vomm import MergedContextView

        model = SostModel("me", ["f"], trend=MergedContextView([friend_tree]))
        empty = ContextTree(TreeConfig())
        outcome = model.predict_next(empty, [], T0 + 6 * HOUR)
        assert outcome.branch == "trend"
        assert outcome.venue == "T"

    def test_everything_empty(self):
        model = SostModel("me", ["f"])
        with pytest.raises(ModelEmpty):
            model.predict_next(ContextTree(TreeConfig()), [], T0)


class TestConfig:
    def test_defaults(self):
        cfg = SostConfig()
        assert cfg.beta == 0.05
        assert cfg.estimator == "B"
        assert cfg.classes == ALL_CLASSES
        assert cfg.tree.kappa == 3
        assert cfg.tree.slot_hours == 1

    def test_validation(self):
        with pytest.raises(ConfigError):
            SostConfig(drift="sideways")
        with pytest.raises(ConfigError):
            SostConfig(estimator="Z")
        with pytest.raises(ConfigError):
            SostConfig(classes=frozenset({"IV"}))
        with pytest.raises(ConfigError):
            SostConfig(stay_hours=0.0)
