import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from projwalk import io
from projwalk import transferop as T
from projwalk.errors import FormatError
from projwalk.montecarlo import EmpiricalMeasure


def _random_measure(seed, size, d):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(size, d))
    w = rng.random(size) + 0.1
    return EmpiricalMeasure(pts, w / w.sum())


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(1, 40), st.integers(2, 4))
def test_measure_round_trip_bitwise(tmp_path_factory, seed, size, d):
    tmp = tmp_path_factory.mktemp("m")
    meas = _random_measure(seed, size, d)
    io.save_measure(meas, tmp / "a.txt")
    back = io.load_measure(tmp / "a.txt")
    assert np.array_equal(back.points, meas.points)
    assert np.array_equal(back.weights, meas.weights)
    io.save_measure(back, tmp / "b.txt")
    assert (tmp / "a.txt").read_bytes() == (tmp / "b.txt").read_bytes()


def test_truncated_measure(tmp_path):
    io.save_measure(_random_measure(1, 10, 3), tmp_path / "m.txt")
    lines = (tmp_path / "m.txt").read_text().splitlines()
    (tmp_path / "cut.txt").write_text("\n".join(lines[:8]) + "\n")
    with pytest.raises(FormatError, match="truncated") as err:
        io.load_measure(tmp_path / "cut.txt")
    assert err.value.line is not None


def test_missing_end_line(tmp_path):
    io.save_measure(_random_measure(1, 4, 2), tmp_path / "m.txt")
    text = (tmp_path / "m.txt").read_text().replace("end\n", "0.1 1 0\n")
    (tmp_path / "bad.txt").write_text(text)
    with pytest.raises(FormatError, match="end"):
        io.load_measure(tmp_path / "bad.txt")


def test_weights_off_names_deviation(tmp_path):
    (tmp_path / "w.txt").write_text(
        "# projwalk measure v1\nd = 2\ncount = 2\n0.5 1 0\n0.6 0 1\nend\n")
    with pytest.raises(FormatError, match="deviation 0.1"):
        io.load_measure(tmp_path / "w.txt")


def test_bad_row_reports_line(tmp_path):
    (tmp_path / "r.txt").write_text(
        "# projwalk measure v1\nd = 2\ncount = 2\n0.5 1 0\n0.5 0\nend\n")
    with pytest.raises(FormatError) as err:
        io.load_measure(tmp_path / "r.txt")
    assert err.value.line == 5


def test_wrong_header(tmp_path):
    (tmp_path / "h.txt").write_text("d = 2\n")
    with pytest.raises(FormatError, match="header"):
        io.load_measure(tmp_path / "h.txt")


def test_spectral_round_trip(tmp_path, generic2):
    grid = T.ProjGrid.angles(64)
    spec = T.spectrum(generic2, grid, 0.5)
    io.save_spectral(spec, tmp_path / "s.txt")
    back = io.load_spectral(tmp_path / "s.txt")
    assert back.kappa == spec.kappa and back.s == spec.s and back.gap == spec.gap
    assert np.array_equal(back.r, spec.r) and np.array_equal(back.nu, spec.nu)
    assert np.array_equal(back.grid.points, grid.points)
    assert back.operator is None
    io.save_spectral(back, tmp_path / "t.txt")
    assert (tmp_path / "s.txt").read_bytes() == (tmp_path / "t.txt").read_bytes()


def test_spectral_rejects_foreign_grid(tmp_path, generic2):
    spec = T.spectrum(generic2, T.ProjGrid.angles(16), 0.0)
    io.save_spectral(spec, tmp_path / "s.txt")
    text = (tmp_path / "s.txt").read_text().replace("m = 16", "m = 15")
    lines = text.splitlines()
    del lines[8]
    (tmp_path / "x.txt").write_text("\n".join(lines) + "\n")
    with pytest.raises(FormatError):
        io.load_spectral(tmp_path / "x.txt")
