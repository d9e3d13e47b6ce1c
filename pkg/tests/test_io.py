import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qbl import hilbert as hb
from qbl.io import (
    CSV_COLUMNS, FormatError, format_complex, parse_complex, read_matrix, read_matrix_header,
    read_trajectory_csv, write_matrix, write_trajectory_csv,
)
from qbl.model import dark_density
from qbl.validation import random_state

finite = st.floats(-1e300, 1e300)


@settings(max_examples=200, deadline=None)
@given(finite, finite)
def test_complex_token_roundtrip(re, im):
    z = complex(re, im)
    back = parse_complex(format_complex(z))
    assert back.real == pytest.approx(re, rel=1e-11, abs=1e-300)
    assert back.imag == pytest.approx(im, rel=1e-11, abs=1e-300)


@pytest.mark.parametrize("tok", ["1+2j", "abc", "nan+0i", "1+infi"])
def test_bad_tokens(tok):
    with pytest.raises(ValueError):
        parse_complex(tok)


def test_matrix_roundtrip(tmp_path, rng):
    rho = random_state(rng)
    path = write_matrix(tmp_path / "rho.txt", rho, ["sector = 1", "energy_cm1 = 3.5"])
    back = read_matrix(path)
    assert hb.fro(back - rho) <= 1e-11
    assert read_matrix_header(path) == {"sector": "1", "energy_cm1": "3.5"}


def test_matrix_errors_report_line(tmp_path):
    path = write_matrix(tmp_path / "m.txt", dark_density(), ["note"])
    lines = path.read_text().splitlines()
    lines[3] = lines[3].replace("0+0i", "zero", 1)
    path.write_text("\n".join(lines))
    with pytest.raises(FormatError, match=r"m.txt:4"):
        read_matrix(path)
    lines[3] = "0+0i 1+0i"
    path.write_text("\n".join(lines))
    with pytest.raises(FormatError, match="expected 64 entries"):
        read_matrix(path)


def test_matrix_rejects_non_hermitian(tmp_path):
    m = np.zeros((64, 64), complex)
    m[0, 1] = 1.0
    write_matrix(tmp_path / "m.txt", m)
    with pytest.raises(FormatError, match="Hermitian"):
        read_matrix(tmp_path / "m.txt")
    assert read_matrix(tmp_path / "m.txt", hermitian=False)[0, 1] == 1.0


def test_matrix_row_count(tmp_path):
    write_matrix(tmp_path / "m.txt", np.eye(64)[:10])
    with pytest.raises(FormatError):
        read_matrix(tmp_path / "m.txt", hermitian=False)


def test_trajectory_csv_roundtrip(tmp_path, protocol):
    path = write_trajectory_csv(tmp_path / "t.csv", protocol)
    header = path.read_text().splitlines()[0]
    assert header == ("time_internal,time_ps,region,pop1,pop2,pop3,pop4,pop5,pop6,"
                      "energy_cm1,ergotropy_cm1,n_expect,purity,trace_dev,min_eig")
    cols = read_trajectory_csv(path)
    assert tuple(cols) == CSV_COLUMNS
    np.testing.assert_allclose(cols["time_internal"], protocol.times, rtol=1e-11)
    np.testing.assert_allclose(cols["energy_cm1"], protocol.energy, rtol=1e-11, atol=1e-12)
    assert list(cols["region"]) == protocol.regions


def test_trajectory_csv_is_bit_stable(tmp_path, protocol):
    a = write_trajectory_csv(tmp_path / "a.csv", protocol).read_bytes()
    b = write_trajectory_csv(tmp_path / "b.csv", protocol).read_bytes()
    assert a == b


def test_trajectory_csv_bad_header(tmp_path):
    (tmp_path / "x.csv").write_text("a,b\n1,2\n")
    with pytest.raises(FormatError):
        read_trajectory_csv(tmp_path / "x.csv")
