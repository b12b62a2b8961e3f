"""NPY v1.0 container contract: round trips, interop, strict rejection."""

import struct

import numpy as np
import pytest

from lmhbrtf.npyio import read_tensor, write_tensor


def rng():
    return np.random.default_rng(31)


@pytest.mark.parametrize("shape,complex_", [((4, 3, 2), False), ((2, 3, 2, 2), False),
                                            ((3, 3, 2), True)])
def test_write_read_roundtrip_bitwise(tmp_path, shape, complex_):
    r = rng()
    x = r.standard_normal(shape)
    if complex_:
        x = x + 1j * r.standard_normal(shape)
    path = tmp_path / "t.npy"
    write_tensor(path, x)
    back = read_tensor(path)
    assert back.dtype == x.dtype
    assert back.shape == x.shape
    assert back.tobytes() == x.astype(back.dtype).tobytes()


def test_written_file_loads_with_numpy(tmp_path):
    x = rng().standard_normal((3, 4, 2))
    path = tmp_path / "t.npy"
    write_tensor(path, x)
    assert np.array_equal(np.load(path), x)


def test_reads_numpy_written_fortran_file(tmp_path):
    x = np.asfortranarray(rng().standard_normal((3, 4, 2)))
    path = tmp_path / "t.npy"
    np.save(path, x)
    assert np.array_equal(read_tensor(path), x)


def test_header_alignment_and_version(tmp_path):
    path = tmp_path / "t.npy"
    write_tensor(path, rng().standard_normal((5, 7, 3)))
    raw = path.read_bytes()
    assert raw[:6] == b"\x93NUMPY"
    assert raw[6:8] == bytes((1, 0))
    (hlen,) = struct.unpack("<H", raw[8:10])
    assert (10 + hlen) % 64 == 0
    header = raw[10:10 + hlen].decode("latin1")
    assert "'descr': '<f8'" in header
    assert "'fortran_order': True" in header
    assert header.endswith("\n")


def test_rejects_c_order_file(tmp_path):
    path = tmp_path / "c.npy"
    np.save(path, np.ascontiguousarray(rng().standard_normal((3, 4, 2))))
    with pytest.raises(ValueError, match="C-order"):
        read_tensor(path)


def test_rejects_unsupported_dtype(tmp_path):
    path = tmp_path / "f4.npy"
    np.save(path, np.asfortranarray(rng().standard_normal((3, 3, 2)).astype(np.float32)))
    with pytest.raises(ValueError, match="dtype"):
        read_tensor(path)


def test_rejects_bad_magic(tmp_path):
    path = tmp_path / "junk.npy"
    path.write_bytes(b"NOTNPY" + b"\x00" * 32)
    with pytest.raises(ValueError, match="magic"):
        read_tensor(path)


def test_rejects_wrong_version(tmp_path):
    path = tmp_path / "v2.npy"
    good = tmp_path / "good.npy"
    write_tensor(good, np.zeros((2, 2, 2)))
    raw = bytearray(good.read_bytes())
    raw[6] = 2  # pretend to be format version 2.0
    path.write_bytes(bytes(raw))
    with pytest.raises(ValueError, match="version"):
        read_tensor(path)


def test_rejects_truncated_data(tmp_path):
    good = tmp_path / "good.npy"
    write_tensor(good, np.ones((2, 2, 2)))
    raw = good.read_bytes()
    bad = tmp_path / "short.npy"
    bad.write_bytes(raw[:-8])
    with pytest.raises(ValueError, match="data size"):
        read_tensor(bad)


def test_descr_parsing_maps_to_float64(tmp_path):
    path = tmp_path / "t.npy"
    write_tensor(path, np.ones((2, 2, 2)))
    arr = read_tensor(path)
    assert arr.dtype == np.float64


def test_matrix_and_vector_roundtrip(tmp_path):
    # transform matrices are plain 2-d arrays in the same container
    m = rng().standard_normal((4, 4)) + 1j * rng().standard_normal((4, 4))
    path = tmp_path / "m.npy"
    write_tensor(path, m)
    assert np.array_equal(read_tensor(path), m)
