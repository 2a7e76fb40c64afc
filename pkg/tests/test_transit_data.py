import json
import os

import pytest

from transit_data.loader import (
    MalformedRow, MissingFile, haversine_miles, load_schedule, save_schedule, travel_time_and_distance,
)
from transit_data.schedule import DanglingReference, NonMonotoneStopTimes, UnknownStop
from utils.errors import DataError


def _rewrite(dir_path, name, transform):
    path = os.path.join(dir_path, name)
    with open(path, encoding='utf-8') as f:
        text = f.read()
    with open(path, 'w', encoding='utf-8') as f:
        f.write(transform(text))


class TestLoadSchedule:
    def test_round_trip(self, schedule_dir, line_schedule):
        loaded = load_schedule(schedule_dir)
        assert loaded == line_schedule
        assert [t.trip_id for t in loaded.trips_for_vehicle('V1')] == ['T1', 'T2']

    def test_save_of_loaded_is_byte_identical(self, schedule_dir, tmp_path):
        again = save_schedule(load_schedule(schedule_dir), str(tmp_path / 'again'))
        for name in ('stops.csv', 'route_directions.csv', 'trips.csv', 'stop_times.csv', 'network.json'):
            with open(os.path.join(schedule_dir, name), 'rb') as a, open(os.path.join(again, name), 'rb') as b:
                assert a.read() == b.read(), name

    def test_missing_file(self, schedule_dir):
        os.remove(os.path.join(schedule_dir, 'trips.csv'))
        with pytest.raises(MissingFile):
            load_schedule(schedule_dir)

    def test_dangling_stop_reference(self, schedule_dir):
        _rewrite(schedule_dir, 'stop_times.csv', lambda text: text.replace('T1,2,C,', 'T1,2,S99,'))
        with pytest.raises(DanglingReference) as info:
            load_schedule(schedule_dir)
        assert info.value.ref_id == 'S99'

    def test_non_monotone_stop_times(self, schedule_dir):
        _rewrite(schedule_dir, 'stop_times.csv', lambda text: text.replace('T1,1,B,29400,29400', 'T1,1,B,28000,28000'))
        with pytest.raises(NonMonotoneStopTimes):
            load_schedule(schedule_dir)

    def test_bad_number_is_malformed(self, schedule_dir):
        _rewrite(schedule_dir, 'stops.csv', lambda text: text.replace('36.13', 'north'))
        with pytest.raises(MalformedRow) as info:
            load_schedule(schedule_dir)
        assert info.value.file == 'stops.csv'

    def test_network_references_checked(self, schedule_dir):
        path = os.path.join(schedule_dir, 'network.json')
        with open(path, encoding='utf-8') as f:
            network = json.load(f)
        network['candidate_stops'].append('NOWHERE')
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(network, f)
        with pytest.raises(DanglingReference):
            load_schedule(schedule_dir)

    def test_single_day_view(self, line_schedule):
        day = line_schedule.for_service_date(line_schedule.service_dates()[0])
        assert set(day.trips) == {'T1', 'T2'}
        assert day.candidate_stationing_stops == line_schedule.candidate_stationing_stops


class TestTravel:
    def test_same_stop_is_free(self, line_schedule):
        assert travel_time_and_distance(line_schedule, 'B', 'B') == (0.0, 0.0)

    def test_symmetric_bit_for_bit(self, line_schedule):
        assert travel_time_and_distance(line_schedule, 'A', 'DEPOT') == travel_time_and_distance(line_schedule, 'DEPOT', 'A')

    def test_detour_and_speed(self, line_schedule):
        minutes, miles = travel_time_and_distance(line_schedule, 'HUB', 'C')
        crow = haversine_miles(line_schedule.stops['HUB'], line_schedule.stops['C'])
        assert miles == pytest.approx(crow * 1.3)
        assert minutes == pytest.approx(miles / 20.0 * 60.0)
        # 0.03 degrees of latitude is a little over two miles
        assert crow == pytest.approx(2.07, abs=0.01)

    def test_unknown_stop(self, line_schedule):
        with pytest.raises(UnknownStop):
            travel_time_and_distance(line_schedule, 'A', 'Z')

    def test_errors_are_data_errors(self):
        assert issubclass(UnknownStop, DataError)
        assert issubclass(MalformedRow, DataError)
