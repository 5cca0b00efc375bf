import numpy as np
import pytest

from spectral_dc import mmio
from spectral_dc.errors import InvalidInputError


def write_text(tmp_path, text, name="m.mtx"):
    p = tmp_path / name
    p.write_text(text)
    return p


@pytest.mark.parametrize("cplx", [False, True])
@pytest.mark.parametrize("sym", ["general", "symmetric"])
def test_round_trip_bit_exact(tmp_path, rng, cplx, sym):
    a = rng.standard_normal((7, 7)) * np.exp(rng.uniform(-30, 30, (7, 7)))
    if cplx:
        a = a + 1j * rng.standard_normal((7, 7))
    if sym == "symmetric":
        a = a + a.T
    p = tmp_path / "a.mtx"
    mmio.write(p, a, symmetry=sym, comment="round trip\nsecond line")
    b = mmio.read(p)
    assert b.dtype == a.dtype
    assert np.array_equal(a, b)


def test_round_trip_hermitian(tmp_path, rng):
    a = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
    a = a + a.conj().T
    p = tmp_path / "h.mtx"
    mmio.write(p, a, symmetry="hermitian")
    assert np.array_equal(mmio.read(p), a)


def test_round_trip_vector(tmp_path):
    v = np.array([1 / 3, -2e-300, 7.0])
    p = tmp_path / "v.mtx"
    mmio.write(p, v)
    assert np.array_equal(mmio.read(p)[:, 0], v)


def test_coordinate_symmetric(tmp_path):
    p = write_text(tmp_path, """%%MatrixMarket matrix coordinate real symmetric
% comment line
3 3 3
1 1 2.0
2 1 -1
3 2 0.5
""")
    a = mmio.read(p)
    assert np.array_equal(a, [[2, -1, 0], [-1, 0, 0.5], [0, 0.5, 0]])


def test_coordinate_hermitian_complex(tmp_path):
    p = write_text(tmp_path, """%%MatrixMarket matrix coordinate complex hermitian
2 2 2
1 1 1 0
2 1 0 1
""")
    a = mmio.read(p)
    assert np.array_equal(a, [[1, -1j], [1j, 0]])


def test_integer_and_skew(tmp_path):
    p = write_text(tmp_path, """%%MatrixMarket matrix array integer skew-symmetric
2 2
3
""")
    assert np.array_equal(mmio.read(p), [[0, -3], [3, 0]])


@pytest.mark.parametrize(
    "body, line, col, fragment",
    [
        ("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 x 1.0\n", 3, 3, "integer"),
        ("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n", 3, 1, "row index"),
        ("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 abc\n", 3, 5, "number"),
        ("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n", 4, 1, "expected 2 entries"),
        ("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 2 1.0\n", 3, 1, "lower triangle"),
        ("%%MatrixMarket matrix coordinate real banana\n1 1 0\n", 1, 39, "symmetry"),
        ("%%MatrixMarket matrix array real hermitian\n1 1\n1\n", 1, 34, "complex field"),
        ("not a header\n", 1, 1, "header"),
        ("%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n", 6, 1, "expected 4 values"),
        ("%%MatrixMarket matrix array complex general\n1 1\n1.0\n", 3, 1, "expected 2 fields"),
    ],
)
def test_parse_errors_report_position(tmp_path, body, line, col, fragment):
    p = write_text(tmp_path, body)
    with pytest.raises(mmio.ParseError) as info:
        mmio.read(p)
    err = info.value
    assert (err.line, err.col) == (line, col)
    assert fragment in str(err)
    assert str(err).startswith(f"{p}:{line}:{col}:")
    assert isinstance(err, InvalidInputError)


def test_empty_file(tmp_path):
    with pytest.raises(mmio.ParseError):
        mmio.read(write_text(tmp_path, ""))


def test_vector_csv(tmp_path):
    p = tmp_path / "v.csv"
    mmio.write_vector_csv(p, [0.1, -2.0])
    lines = p.read_text().splitlines()
    assert lines[0] == "index,value"
    assert lines[1:] == ["1,0.10000000000000001", "2,-2"]
    assert float(lines[1].split(",")[1]) == 0.1
