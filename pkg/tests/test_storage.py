import numpy as np
import pytest

from conftest import random_connection
from ymflow.groups import SU2, U1, GroupSpec
from ymflow.storage import FieldFileError, read_field, write_field


@pytest.mark.parametrize("group,cutoff", [(U1, 3), (SU2, 2), (GroupSpec("u", 2), 1)])
def test_round_trip_bit_exact(tmp_path, group, cutoff):
    a = random_connection(group, cutoff, seed=1)
    path = tmp_path / "field.ymf"
    write_field(path, a)
    b = read_field(path)
    assert b.group == a.group
    assert b.cutoff == a.cutoff
    assert np.array_equal(b.coeffs, a.coeffs)
    # writing the reread field reproduces the file byte for byte
    path2 = tmp_path / "field2.ymf"
    write_field(path2, b)
    assert path.read_bytes() == path2.read_bytes()


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "junk.ymf"
    path.write_bytes(b"NOPE" + bytes(60))
    with pytest.raises(FieldFileError, match="magic"):
        read_field(path)


def test_truncated_payload_rejected(tmp_path):
    a = random_connection(U1, 2, seed=2)
    path = tmp_path / "field.ymf"
    write_field(path, a)
    raw = path.read_bytes()
    path.write_bytes(raw[: len(raw) - 16])
    with pytest.raises(FieldFileError, match="coefficients"):
        read_field(path)


def test_truncated_header_rejected(tmp_path):
    path = tmp_path / "short.ymf"
    path.write_bytes(b"YMF1")
    with pytest.raises(FieldFileError, match="header"):
        read_field(path)
