from datetime import date

import pytest

from forecasting.features import DayOfWeek, LabeledTrip, RidershipCategory, ServiceWindow, TripFeatures
from scenarios.generator import GeneratorConfig, generate_labeled_history, generate_network, write_corpus
from simulator.chains import Chain, RidershipParams
from transit_data.loader import save_schedule
from transit_data.schedule import Direction, RouteDirection, Schedule, Stop, StopTime, Trip

SERVICE_DATE = date(2024, 1, 3)


def make_trip(label=0, route='R1', direction=Direction.OUTBOUND, window=ServiceWindow.MORNING, month=1,
              precipitation=0.0, temperature=60.0, category=RidershipCategory.LOW, trip_id=''):
    features = TripFeatures(
        route_direction=RouteDirection(route, direction),
        ridership_category=category,
        service_window=window,
        year=2024,
        month=month,
        day_of_week=DayOfWeek.WED,
        precipitation_intensity=precipitation,
        temperature=temperature,
    )
    return LabeledTrip(features, label, trip_id)


def _trip(trip_id, direction, stops, times, vehicle='V1', block='B1', service_date=SERVICE_DATE):
    return Trip(trip_id, RouteDirection('R1', direction),
                tuple(StopTime(s, t, t) for s, t in zip(stops, times)), service_date, vehicle, block)


def build_line_schedule(service_date=SERVICE_DATE, agency_plan=None) -> Schedule:
    """One route DEPOT - HUB - A - B - C run out and back by a single vehicle"""
    stops = {
        'DEPOT': Stop('DEPOT', 'Garage', 36.10, -86.80),
        'HUB': Stop('HUB', 'Hub', 36.12, -86.80),
        'A': Stop('A', 'Stop A', 36.13, -86.80),
        'B': Stop('B', 'Stop B', 36.14, -86.80),
        'C': Stop('C', 'Stop C', 36.15, -86.80),
    }
    trips = {
        'T1': _trip('T1', Direction.OUTBOUND, ['A', 'B', 'C'], [28800, 29400, 30000], service_date=service_date),
        'T2': _trip('T2', Direction.INBOUND, ['C', 'B', 'A'], [31200, 31800, 32400], service_date=service_date),
    }
    return Schedule(
        stops=stops,
        route_directions=(RouteDirection('R1', Direction.INBOUND), RouteDirection('R1', Direction.OUTBOUND)),
        trips=trips,
        depot='DEPOT',
        hub='HUB',
        candidate_stationing_stops=('HUB', 'A', 'B', 'C'),
        agency_plan=agency_plan,
    ).validate()


@pytest.fixture
def line_schedule():
    return build_line_schedule()


@pytest.fixture
def schedule_dir(tmp_path, line_schedule):
    return save_schedule(line_schedule, str(tmp_path / 'schedule'))


@pytest.fixture
def riders_chain():
    """Five riders from A to C on T1"""
    return Chain(0, boarding={('T1', 'A'): 5}, alighting={('T1', 'C'): 5})


CORRIDOR_STOPS = tuple(f"S{i}" for i in range(1, 7))


def build_corridor_schedule(service_date=SERVICE_DATE, agency_plan=('S1', 'S6'), second_block_start=36000) -> Schedule:
    """Six stops 0.69 miles apart, a garage and hub well south of them, two vehicles running out and back"""
    stops = {
        'DEPOT': Stop('DEPOT', 'Garage', 36.00, -86.80),
        'HUB': Stop('HUB', 'Hub', 36.02, -86.80),
    }
    for i, stop_id in enumerate(CORRIDOR_STOPS):
        stops[stop_id] = Stop(stop_id, f"Corridor {i + 1}", round(36.10 + 0.01 * i, 2), -86.80)
    outbound, inbound = list(CORRIDOR_STOPS), list(reversed(CORRIDOR_STOPS))

    def times(start):
        return [start + 300 * i for i in range(len(CORRIDOR_STOPS))]

    trips = {
        'T1': _trip('T1', Direction.OUTBOUND, outbound, times(28800), 'V1', 'B1', service_date),
        'T2': _trip('T2', Direction.INBOUND, inbound, times(31200), 'V1', 'B1', service_date),
        'T3': _trip('T3', Direction.OUTBOUND, outbound, times(second_block_start), 'V2', 'B2', service_date),
        'T4': _trip('T4', Direction.INBOUND, inbound, times(second_block_start + 2400), 'V2', 'B2', service_date),
    }
    return Schedule(
        stops=stops,
        route_directions=(RouteDirection('R1', Direction.INBOUND), RouteDirection('R1', Direction.OUTBOUND)),
        trips=trips,
        depot='DEPOT',
        hub='HUB',
        candidate_stationing_stops=('HUB',) + CORRIDOR_STOPS,
        agency_plan=agency_plan,
    ).validate()


def corridor_ridership(trip_ids=('T1', 'T2', 'T3', 'T4')) -> RidershipParams:
    """Three boardings per stop before the last, two alightings at each stop in between"""
    boarding, alighting = {}, {}
    for trip_id in trip_ids:
        order = CORRIDOR_STOPS if trip_id in ('T1', 'T3') else tuple(reversed(CORRIDOR_STOPS))
        for i, stop_id in enumerate(order[:-1]):
            boarding[(trip_id, stop_id)] = 3.0
            if i > 0:
                alighting[(trip_id, stop_id)] = 2.0
    return RidershipParams(boarding, alighting)


@pytest.fixture(scope='session')
def corridor_schedule():
    return build_corridor_schedule()


SMALL_CORPUS = {
    'n_routes': 2,
    'stops_per_route': 4,
    'trips_per_route_per_day': 4,
    'days': 6,
    'base_disruption_logit': -1.5,
    'feature_effects': {'route_direction=R1:outbound': 1.0},
    'truth_chains': 4,
    'agency_substitutes': 2,
    'seed': 7,
}


@pytest.fixture(scope='session')
def small_corpus(tmp_path_factory):
    out_dir = str(tmp_path_factory.mktemp('corpus'))
    corpus = write_corpus(GeneratorConfig.from_dict(SMALL_CORPUS), out_dir)
    return out_dir, corpus


# about 96k history trips at a 0.25% disruption rate
RARE_HISTORY = {
    'n_routes': 4,
    'stops_per_route': 2,
    'trips_per_route_per_day': 8,
    'days': 1500,
    'base_disruption_logit': -6.1,
    'feature_effects': {'route_direction=R1:outbound': 1.0, 'route_direction=R0:inbound': -1.0},
    'seed': 11,
}


@pytest.fixture(scope='session')
def rare_history():
    cfg = GeneratorConfig.from_dict(RARE_HISTORY)
    return generate_labeled_history(cfg, generate_network(cfg))
