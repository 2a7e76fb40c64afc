import pytest

from simulator.chains import (
    Chain, InconsistentChain, InvalidProbability, RidershipParams, read_chain, read_chain_dir,
    read_ridership_params, sample_chains, write_chain, write_ridership_params,
)
from utils.errors import DataError

PARAMS = RidershipParams(
    boarding={('T1', 'A'): 3.0, ('T1', 'B'): 2.0, ('T2', 'C'): 4.0},
    alighting={('T1', 'B'): 1.0, ('T2', 'B'): 2.0},
)


class TestValidate:
    def test_valid(self, line_schedule, riders_chain):
        assert riders_chain.validate(line_schedule) is riders_chain

    @pytest.mark.parametrize('chain', [
        Chain(0, boarding={('T9', 'A'): 1}, alighting={('T9', 'C'): 1}),
        Chain(0, boarding={('T1', 'HUB'): 1}, alighting={('T1', 'C'): 1}),
        Chain(0, boarding={('T1', 'B'): 1}, alighting={('T1', 'A'): 1}),
        Chain(0, boarding={('T1', 'A'): 2}, alighting={('T1', 'B'): 1}),
        Chain(0, boarding={('T1', 'A'): -1}),
        Chain(0, disruptions=(('T1', 0), ('T1', 2))),
        Chain(0, disruptions=(('T1', 3),)),
        Chain(0, disruptions=(('T7', 0),)),
    ], ids=['unknown-trip', 'stop-off-trip', 'alight-before-board', 'riders-remain',
            'negative', 'two-disruptions', 'seq-out-of-range', 'disrupted-unknown-trip'])
    def test_inconsistent(self, line_schedule, chain):
        with pytest.raises(InconsistentChain):
            chain.validate(line_schedule)

    def test_disruption_lookup(self):
        chain = Chain(0, disruptions=(('T2', 1),))
        assert chain.disruption_seq('T2') == 1
        assert chain.disruption_seq('T1') is None


class TestSample:
    def test_seeded(self, line_schedule):
        first = sample_chains(line_schedule, {'T1': 0.5}, PARAMS, 5, seed=3)
        second = sample_chains(line_schedule, {'T1': 0.5}, PARAMS, 5, seed=3)
        assert first == second
        assert [c.chain_id for c in first] == [0, 1, 2, 3, 4]

    def test_chains_are_consistent(self, line_schedule):
        for chain in sample_chains(line_schedule, {}, PARAMS, 20, seed=1):
            chain.validate(line_schedule)
            # the last stop of a trip never boards
            assert ('T1', 'C') not in chain.boarding
            assert ('T2', 'A') not in chain.boarding

    def test_certain_and_impossible_disruptions(self, line_schedule):
        chains = sample_chains(line_schedule, {'T1': 1.0, 'T2': 0.0}, PARAMS, 10, seed=0)
        for chain in chains:
            assert [t for t, _ in chain.disruptions] == ['T1']
            assert 0 <= chain.disruption_seq('T1') < 3

    @pytest.mark.parametrize('p', [1.5, -0.1, float('nan')])
    def test_bad_probability(self, line_schedule, p):
        with pytest.raises(InvalidProbability):
            sample_chains(line_schedule, {'T1': p}, PARAMS, 1, seed=0)

    def test_needs_a_chain(self, line_schedule):
        with pytest.raises(DataError):
            sample_chains(line_schedule, {}, PARAMS, 0, seed=0)


class TestFiles:
    def test_chain_round_trip(self, riders_chain, tmp_path):
        chain = Chain(4, riders_chain.boarding, riders_chain.alighting, (('T2', 1),))
        assert read_chain(write_chain(chain, str(tmp_path / 'chain_0004.json'))) == chain

    def test_directory_sorted_by_id(self, tmp_path):
        for chain_id in (3, 1, 2):
            write_chain(Chain(chain_id), str(tmp_path / f'chain_x{10 - chain_id}.json'))
        (tmp_path / 'notes.txt').write_text('ignored')
        assert [c.chain_id for c in read_chain_dir(str(tmp_path))] == [1, 2, 3]

    def test_empty_directory(self, tmp_path):
        with pytest.raises(DataError):
            read_chain_dir(str(tmp_path))

    def test_missing_directory(self, tmp_path):
        with pytest.raises(DataError):
            read_chain_dir(str(tmp_path / 'nope'))

    def test_ridership_round_trip(self, tmp_path):
        path = write_ridership_params(PARAMS, str(tmp_path / 'ridership.csv'))
        assert read_ridership_params(path) == PARAMS
