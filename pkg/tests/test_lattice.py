import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qwalk.lattice import (
    SWISS_CROSS_LABELS,
    CouplingModel,
    Waveguide,
    WaveguideLattice,
    build_linear_chain,
    build_swiss_cross,
    hamiltonian,
    lattice_from_config,
    lattice_to_config,
)


def test_swiss_cross_layout(swiss):
    assert swiss.labels == list(SWISS_CROSS_LABELS)
    pos = dict(zip(swiss.labels, map(tuple, swiss.positions)))
    assert pos["X1"] == (-36.0, 0.0)
    assert pos["X4"] == (36.0, 0.0)
    assert pos["C"] == (0.0, 0.0)
    assert pos["Y1"] == (0.0, -38.0)
    assert pos["Y3"] == (0.0, 19.0)


def test_swiss_cross_even_nearest_coupling(swiss):
    c = swiss.coupling
    i = swiss.index
    for a, b in [("X1", "X2"), ("X2", "C"), ("C", "X3"), ("X3", "X4"),
                 ("Y1", "Y2"), ("Y2", "C"), ("C", "Y3"), ("Y3", "Y4")]:
        assert c[i(a), i(b)] == 1.5


def test_swiss_cross_cutoff_at_spacing_keeps_only_nearest():
    d = 18.0
    lat = build_swiss_cross(d, d, 0.9, 0.0, 1.0, CouplingModel(0.9, d, 6.0, cutoff=d))
    assert np.count_nonzero(np.triu(lat.coupling)) == 8
    assert set(np.unique(lat.coupling)) == {0.0, 0.9}


@pytest.mark.parametrize("decay", [2.0, 6.0, 11.5])
def test_swiss_cross_diagonal_coupling(decay):
    lat = build_swiss_cross(18, 19, 1.5, 0.0, 1.4, CouplingModel(1.5, 18, decay, 30))
    expected = 1.5 * math.exp(-(math.sqrt(18**2 + 19**2) - 18) / decay)
    assert lat.coupling[lat.index("X2"), lat.index("Y2")] == pytest.approx(expected, rel=1e-14)
    # next-nearest along an arm is 36 um, beyond the 30 um default cutoff
    assert lat.coupling[lat.index("X1"), lat.index("C")] == 0.0


@pytest.mark.parametrize("bad", [dict(dx=0), dict(dy=-1), dict(c1=0), dict(length=0)])
def test_swiss_cross_rejects_bad_geometry(bad):
    with pytest.raises(ValueError):
        build_swiss_cross(**bad)


def test_chain_two_sites():
    lat = build_linear_chain(2, 18, 1.5, 0.3, 1.0)
    np.testing.assert_array_equal(lat.coupling, [[0, 1.5], [1.5, 0]])


def test_chain_single_site():
    lat = build_linear_chain(1, 18, 1.5, 0.3, 1.0)
    assert lat.n == 1
    np.testing.assert_array_equal(lat.coupling, [[0.0]])


def test_chain_next_nearest_from_model():
    model = CouplingModel(1.5, 18.0, 6.0, cutoff=40.0)
    lat = build_linear_chain(5, 18, 1.5, 0.0, 1.0, model)
    expected = 1.5 * math.exp(-(36 - 18) / 6.0)
    for k in range(3):
        assert lat.coupling[k, k + 1] == 1.5
        assert lat.coupling[k, k + 2] == pytest.approx(expected, rel=1e-14)
    assert lat.coupling[0, 3] == 0.0


def test_chain_rejects_empty():
    with pytest.raises(ValueError):
        build_linear_chain(0)


def test_hamiltonian_two_site():
    h = hamiltonian(build_linear_chain(2, 18, 0.7, 2.5, 1.0))
    np.testing.assert_array_equal(h, [[2.5, 0.7], [0.7, 2.5]])


def test_hamiltonian_uniform_beta_diagonal():
    lat = build_swiss_cross(beta=3.25)
    h = hamiltonian(lat)
    assert np.all(np.diag(h - 3.25 * np.eye(lat.n)) == 0)


def test_rotation_symmetry_for_square_arms():
    lat = build_swiss_cross(dx=18, dy=18)
    h = hamiltonian(lat)
    swap = [lat.index(s.replace("X", "T").replace("Y", "X").replace("T", "Y")) for s in lat.labels]
    np.testing.assert_array_equal(h[np.ix_(swap, swap)], h)


def test_lattice_invariants_enforced():
    sites = (Waveguide("a", 0, 0), Waveguide("b", 1, 0))
    with pytest.raises(ValueError, match="symmetric"):
        WaveguideLattice(sites, 0.0, [[0, 1], [2, 0]], 1.0)
    with pytest.raises(ValueError, match="diagonal"):
        WaveguideLattice(sites, 0.0, [[1, 1], [1, 0]], 1.0)
    with pytest.raises(ValueError, match="non-negative"):
        WaveguideLattice(sites, 0.0, [[0, -1], [-1, 0]], 1.0)
    with pytest.raises(ValueError, match="unique"):
        WaveguideLattice((sites[0], sites[0]), 0.0, np.zeros((2, 2)), 1.0)
    with pytest.raises(ValueError, match="beta"):
        WaveguideLattice(sites, [1, 2, 3], np.zeros((2, 2)), 1.0)
    with pytest.raises(ValueError, match="length"):
        WaveguideLattice(sites, 0.0, np.zeros((2, 2)), 0.0)


def test_coupling_model_validation():
    with pytest.raises(ValueError):
        CouplingModel(0.0, 18)
    with pytest.raises(ValueError):
        CouplingModel(1.0, 18, decay_length=0)
    with pytest.raises(ValueError):
        CouplingModel(1.0, 18, cutoff=10)


def test_index_lookup(swiss):
    assert swiss.index("C") == 2
    assert swiss.index(5) == 5
    with pytest.raises(KeyError):
        swiss.index("Z9")
    with pytest.raises(IndexError):
        swiss.index(9)


def test_config_round_trip_model(swiss):
    config = lattice_to_config(swiss)
    assert config["coupling"]["model"]["pin_nearest"] is True
    back = lattice_from_config(config)
    np.testing.assert_array_equal(back.coupling, swiss.coupling)
    np.testing.assert_array_equal(back.beta, swiss.beta)
    assert back.labels == swiss.labels


def test_config_explicit_matrix_and_beta_list():
    config = {
        "sites": [{"label": "a", "x_um": 0, "y_um": 0}, {"label": "b", "x_um": 5, "y_um": 0}],
        "beta_cm": [0.1, -0.2],
        "coupling": {"matrix": [[0, 0.4], [0.4, 0]]},
        "length_cm": 2.0,
    }
    lat = lattice_from_config(config)
    np.testing.assert_array_equal(hamiltonian(lat), [[0.1, 0.4], [0.4, -0.2]])
    assert lattice_to_config(lat) == config | {"sites": [
        {"label": "a", "x_um": 0.0, "y_um": 0.0}, {"label": "b", "x_um": 5.0, "y_um": 0.0}]}


def test_config_missing_coupling():
    with pytest.raises(ValueError):
        lattice_from_config({"sites": [], "length_cm": 1.0, "coupling": {}})
    with pytest.raises(ValueError):
        lattice_from_config({"sites": []})


@settings(max_examples=50, deadline=None)
@given(
    st.floats(0.1, 5.0), st.floats(1.0, 30.0), st.floats(1.0, 50.0),
    st.lists(st.floats(0.0, 200.0), min_size=2, max_size=20),
)
def test_model_monotone_in_separation(c_ref, d_ref, decay, ds):
    model = CouplingModel(c_ref, d_ref, decay, cutoff=d_ref + 100)
    ds = np.sort(ds)
    values = model(ds)
    assert np.all(np.diff(values) <= 0)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_hamiltonian_bitwise_symmetric(n, seed):
    rng = np.random.default_rng(seed)
    sites = [Waveguide(f"s{i}", *rng.uniform(-50, 50, 2)) for i in range(n)]
    model = CouplingModel(rng.uniform(0.1, 3), 10.0, rng.uniform(1, 20), cutoff=rng.uniform(10, 80))
    from qwalk.lattice import lattice_from_model

    lat = lattice_from_model(sites, rng.normal(size=n), model, 1.0, pin_nearest=bool(seed % 2))
    h = hamiltonian(lat)
    assert np.array_equal(h, h.T)
