import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from qwalk.io import (
    load_lattice,
    read_matrix_csv,
    read_pgm,
    save_lattice,
    write_matrix_csv,
    write_pgm,
)
from qwalk.lattice import build_linear_chain


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6)), elements=st.floats(-1e300, 1e300)))
def test_csv_round_trip_exact(tmp_path_factory, m):
    path = tmp_path_factory.mktemp("csv") / "m.csv"
    write_matrix_csv(path, m)
    labels, back = read_matrix_csv(path)
    assert labels is None
    np.testing.assert_array_equal(back, m)


def test_csv_labels(tmp_path):
    m = np.arange(6.0).reshape(2, 3)
    write_matrix_csv(tmp_path / "m.csv", m, ["a", "b"], ["x", "y", "z"])
    labels, back = read_matrix_csv(tmp_path / "m.csv")
    assert labels == ["x", "y", "z"]
    np.testing.assert_array_equal(back, m)


def test_csv_rejects_ragged_and_text(tmp_path):
    (tmp_path / "r.csv").write_text("1,2\n3\n")
    with pytest.raises(ValueError, match="row 1"):
        read_matrix_csv(tmp_path / "r.csv")
    (tmp_path / "t.csv").write_text("1,2\n3,abc\n")
    with pytest.raises(ValueError, match="non-numeric"):
        read_matrix_csv(tmp_path / "t.csv")
    (tmp_path / "e.csv").write_text("")
    with pytest.raises(ValueError):
        read_matrix_csv(tmp_path / "e.csv")


def test_pgm_zero_matrix_is_black(tmp_path):
    write_pgm(tmp_path / "z.pgm", np.zeros((3, 4)))
    pixels, comments = read_pgm(tmp_path / "z.pgm")
    assert pixels.shape == (3, 4)
    assert np.all(pixels == 0)
    assert comments["white"] == "0.0"


def test_pgm_identity(tmp_path):
    write_pgm(tmp_path / "i.pgm", np.eye(5))
    pixels, _ = read_pgm(tmp_path / "i.pgm")
    np.testing.assert_array_equal(pixels, 65535 * np.eye(5, dtype=int))


def test_pgm_hom_pattern(tmp_path, hom_coupler):
    from qwalk.correlations import quantum_correlations

    g = quantum_correlations(hom_coupler, 0, 1).gamma
    write_pgm(tmp_path / "max.pgm", g)
    write_pgm(tmp_path / "unit.pgm", g, scale="unit")
    assert np.array_equal(read_pgm(tmp_path / "max.pgm")[0], [[65535, 0], [0, 65535]])
    # half intensity, up to one grey level of rounding
    np.testing.assert_allclose(read_pgm(tmp_path / "unit.pgm")[0], [[32767.5, 0], [0, 32767.5]], atol=1)


def test_pgm_non_finite_black(tmp_path):
    write_pgm(tmp_path / "n.pgm", np.array([[np.nan, 1.0], [np.inf, 0.5]]))
    pixels, _ = read_pgm(tmp_path / "n.pgm")
    np.testing.assert_array_equal(pixels, [[0, 65535], [0, 32768]])


def test_pgm_byte_reproducible(tmp_path, rng):
    m = rng.uniform(size=(7, 7))
    write_pgm(tmp_path / "a.pgm", m)
    write_pgm(tmp_path / "b.pgm", m)
    assert (tmp_path / "a.pgm").read_bytes() == (tmp_path / "b.pgm").read_bytes()


def test_lattice_round_trip(tmp_path, swiss):
    save_lattice(tmp_path / "s.json", swiss)
    back = load_lattice(tmp_path / "s.json")
    assert back.labels == swiss.labels
    np.testing.assert_array_equal(back.coupling, swiss.coupling)
    np.testing.assert_array_equal(back.beta, swiss.beta)
    chain = build_linear_chain(4, 20.0, 0.8, 0.1, 2.0)
    save_lattice(tmp_path / "c.json", chain)
    np.testing.assert_array_equal(load_lattice(tmp_path / "c.json").coupling, chain.coupling)


def test_no_temp_files_left(tmp_path):
    write_matrix_csv(tmp_path / "m.csv", np.eye(2))
    assert [p.name for p in tmp_path.iterdir()] == ["m.csv"]
