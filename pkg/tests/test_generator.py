import math
import os
from datetime import date

import numpy as np
import pytest

from conftest import RARE_HISTORY, SMALL_CORPUS, make_trip
from forecasting.evaluation import cross_entropy, train_test_split
from forecasting.features import CategoricalFeature, RidershipCategory, ridership_category_for
from forecasting.pipeline import LogisticDisruptionClassifier, read_labeled_trips, read_trip_context, trip_features
from scenarios.generator import (
    ConfigInvalid, GeneratorConfig, GroundTruth, daily_weather, generate_labeled_history, generate_network,
    generate_ridership_params, generate_trip_context, peak_expected_load, write_corpus,
)
from simulator.chains import read_chain_dir
from transit_data.loader import load_schedule
from transit_data.schedule import Direction


def _log_odds(p):
    return math.log(p / (1.0 - p))


class TestConfig:
    def test_defaults_are_valid(self):
        assert GeneratorConfig().n_routes == 3

    @pytest.mark.parametrize('values', [
        {'n_routes': 0},
        {'rain_probability': 1.5},
        {'feature_effects': {'colour=red': 1.0}},
        {'demand_spread': -0.1},
        {'start_date': 'yesterday'},
        {'trips_per_route_per_day': 30},
        {'unknown_key': 1},
    ])
    def test_invalid(self, values):
        with pytest.raises(ConfigInvalid):
            GeneratorConfig.from_dict(values)


class TestNetwork:
    def test_spoke_hub_layout(self):
        cfg = GeneratorConfig.from_dict(SMALL_CORPUS)
        schedule = generate_network(cfg)
        assert schedule.candidate_stationing_stops == ('HUB', 'R0S2', 'R1S2')
        assert schedule.agency_plan == ('HUB', 'R0S2')
        assert len(schedule.service_dates()) == cfg.days + 1
        # two routes, both directions, every day
        assert len(schedule.trips) == 2 * 4 * 2 * 7
        first = schedule.trips['20240101-R0-out-00']
        assert [st.stop_id for st in first.stop_times] == ['HUB', 'R0S1', 'R0S2', 'R0S3', 'R0S4']
        assert first.start_s == cfg.first_departure_s

    def test_vehicles_cover_their_blocks(self):
        schedule = generate_network(GeneratorConfig.from_dict(SMALL_CORPUS))
        day = schedule.for_service_date(date(2024, 1, 1))
        for trip in day.trips.values():
            chain = day.trips_for_vehicle(trip.vehicle_id)
            ends = [(a.end_s, b.start_s) for a, b in zip(chain, chain[1:])]
            assert all(end < start for end, start in ends)

    def test_ridership_flows_balance(self):
        cfg = GeneratorConfig.from_dict({**SMALL_CORPUS, 'hotspot_probability': 0.5})
        schedule = generate_network(cfg)
        params = generate_ridership_params(cfg, schedule)
        for trip_id in list(schedule.trips)[:10]:
            on = sum(v for (t, _), v in params.boarding.items() if t == trip_id)
            off = sum(v for (t, _), v in params.alighting.items() if t == trip_id)
            assert on == pytest.approx(off)

    def test_hotspots_exceed_capacity(self):
        cfg = GeneratorConfig.from_dict({**SMALL_CORPUS, 'hotspot_probability': 1.0})
        params = generate_ridership_params(cfg, generate_network(cfg))
        assert max(params.boarding.values()) > cfg.bus_capacity


class TestTripContext:
    def test_category_follows_peak_load(self):
        cfg = GeneratorConfig.from_dict({**SMALL_CORPUS, 'hotspot_probability': 0.5, 'demand_spread': 1.0})
        schedule = generate_network(cfg)
        params = generate_ridership_params(cfg, schedule)
        context = generate_trip_context(cfg, schedule, params)
        assert set(context) == set(schedule.trips)
        for trip_id, trip in schedule.trips.items():
            load, peak = 0.0, 0.0
            for st in trip.stop_times:
                load -= params.alighting.get((trip_id, st.stop_id), 0.0)
                load += params.boarding.get((trip_id, st.stop_id), 0.0)
                peak = max(peak, load)
            assert context[trip_id].ridership_category is ridership_category_for(peak, cfg.bus_capacity)

    def test_hotspot_trips_are_over_capacity(self):
        cfg = GeneratorConfig.from_dict({**SMALL_CORPUS, 'hotspot_probability': 0.5})
        schedule = generate_network(cfg)
        params = generate_ridership_params(cfg, schedule)
        context = generate_trip_context(cfg, schedule, params)
        hot = {t for (t, _), mean in params.boarding.items() if mean == cfg.hotspot_boarding_mean}
        assert hot
        assert all(context[t].ridership_category is RidershipCategory.OVER_CAPACITY for t in hot)

    def test_quiet_trips_are_low(self):
        cfg = GeneratorConfig.from_dict({**SMALL_CORPUS, 'base_boarding_mean': 0.1, 'demand_spread': 0.0})
        context = generate_trip_context(cfg, generate_network(cfg))
        assert {c.ridership_category for c in context.values()} == {RidershipCategory.LOW}

    def test_corpus_context_matches_ridership(self, small_corpus):
        out_dir, corpus = small_corpus
        context = read_trip_context(os.path.join(out_dir, 'trip_context.csv'))
        for trip_id, trip in corpus.schedule.trips.items():
            expected = ridership_category_for(peak_expected_load(trip, corpus.ridership), 40)
            assert context[trip_id].ridership_category is expected


class TestGroundTruth:
    def test_effects_shift_the_logit(self):
        cfg = GeneratorConfig.from_dict(SMALL_CORPUS)
        schedule = generate_network(cfg)
        context = generate_trip_context(cfg, schedule)
        truth = GroundTruth(cfg.base_disruption_logit, dict(cfg.feature_effects))
        boosted = schedule.trips['20240101-R1-out-00']
        plain = schedule.trips['20240101-R0-out-00']
        assert truth.logit(trip_features(boosted, context[boosted.trip_id])) == pytest.approx(-0.5)
        assert truth.logit(trip_features(plain, context[plain.trip_id])) == pytest.approx(-1.5)
        assert truth.probability(trip_features(plain, context[plain.trip_id])) == pytest.approx(
            1 / (1 + math.exp(1.5)))

    def test_weather_is_per_day(self):
        cfg = GeneratorConfig.from_dict(SMALL_CORPUS)
        precipitation, _ = daily_weather(cfg, date(2024, 1, 2))
        assert daily_weather(cfg, date(2024, 1, 2)) == daily_weather(cfg, date(2024, 1, 2))
        assert precipitation >= 0.0


class TestCorpus:
    def test_files(self, small_corpus):
        out_dir, corpus = small_corpus
        for path in corpus.files:
            assert os.path.exists(path)
        assert os.path.exists(os.path.join(out_dir, 'ground_truth.json'))
        assert len(read_chain_dir(os.path.join(out_dir, 'truth_chains'))) == SMALL_CORPUS['truth_chains']

    def test_history_excludes_target_day(self, small_corpus):
        out_dir, corpus = small_corpus
        rows = read_labeled_trips(os.path.join(out_dir, 'labeled_trips.csv'))
        assert len(rows) == 2 * 4 * 2 * SMALL_CORPUS['days']
        assert corpus.target_day == date(2024, 1, 7)
        assert not any(r.trip_id.startswith('20240107') for r in rows)
        assert {r.label for r in rows} == {0, 1}

    def test_truth_chains_fit_the_target_day(self, small_corpus):
        out_dir, corpus = small_corpus
        day = load_schedule(out_dir).for_service_date(corpus.target_day)
        for chain in read_chain_dir(os.path.join(out_dir, 'truth_chains')):
            chain.validate(day)

    def test_byte_identical(self, small_corpus, tmp_path):
        out_dir, corpus = small_corpus
        again = write_corpus(GeneratorConfig.from_dict(SMALL_CORPUS), str(tmp_path))
        for first, second in zip(corpus.files, again.files):
            assert os.path.relpath(first, out_dir) == os.path.relpath(second, str(tmp_path))
            with open(first, 'rb') as a, open(second, 'rb') as b:
                assert a.read() == b.read(), first


class TestLabels:
    def test_switched_off(self):
        cfg = GeneratorConfig.from_dict({**SMALL_CORPUS, 'base_disruption_logit': -50.0, 'feature_effects': {}})
        history = generate_labeled_history(cfg, generate_network(cfg))
        assert history.trips
        assert all(row.label == 0 for row in history.trips)

    def test_coin_flip(self):
        cfg = GeneratorConfig.from_dict({'n_routes': 2, 'stops_per_route': 2, 'trips_per_route_per_day': 8,
                                         'days': 313, 'base_disruption_logit': 0.0, 'seed': 3})
        history = generate_labeled_history(cfg, generate_network(cfg))
        assert len(history.trips) >= 10000
        assert np.mean([row.label for row in history.trips]) == pytest.approx(0.5, abs=0.02)

    def test_rare_rate(self, rare_history):
        assert len(rare_history.trips) >= 50000
        rate = np.mean([row.label for row in rare_history.trips])
        assert 0.002 <= rate <= 0.003


class TestRecoverability:
    def test_fitted_model_matches_the_oracle(self, rare_history):
        train, test = train_test_split(rare_history.trips, 0.25, seed=5)
        model = LogisticDisruptionClassifier([CategoricalFeature.ROUTE_DIRECTION], []).fit(train)
        labels = [row.label for row in test]
        fitted = cross_entropy(model.predict_proba_many([row.features for row in test]), labels)
        oracle = cross_entropy([rare_history.ground_truth.probability(row.features) for row in test], labels)
        assert abs(fitted - oracle) <= 0.05 * oracle

    def test_effect_signs_are_recovered(self, rare_history):
        model = LogisticDisruptionClassifier([CategoricalFeature.ROUTE_DIRECTION], []).fit(rare_history.trips)
        effects = rare_history.ground_truth.effects
        levels = {}
        for r in range(RARE_HISTORY['n_routes']):
            for direction in Direction:
                features = make_trip(route=f"R{r}", direction=direction).features
                levels[f"route_direction={features.route_direction.label}"] = _log_odds(model.predict_proba(features))
        neutral = np.mean([v for k, v in levels.items() if k not in effects])
        for key, effect in effects.items():
            assert abs(effect) >= 0.5
            assert np.sign(levels[key] - neutral) == np.sign(effect), key
