import numpy as np
import pytest

from triarray.errors import ConfigError
from triarray.tensor_io import (
    read_tensor,
    tensor_from_json,
    tensor_to_json,
    write_tensor,
)


def test_binary_round_trip_unsigned(tmp_path):
    rng = np.random.default_rng(0)
    t = rng.integers(0, 256, size=(3, 5, 4))
    path = tmp_path / "fmap.itf"
    write_tensor(path, t, bits=8, signed=False)
    got, bits, signed = read_tensor(path)
    assert np.array_equal(got, t)
    assert (bits, signed) == (8, False)


def test_binary_round_trip_signed_4d(tmp_path):
    rng = np.random.default_rng(1)
    t = rng.integers(-128, 128, size=(2, 3, 3, 3))
    path = tmp_path / "filt.itf"
    write_tensor(path, t, bits=8, signed=True)
    got, bits, signed = read_tensor(path)
    assert np.array_equal(got, t)
    assert (bits, signed) == (8, True)


def test_header_is_16_bytes(tmp_path):
    path = tmp_path / "t.itf"
    write_tensor(path, np.array([1, 2, 3]), bits=8, signed=False)
    assert path.stat().st_size == 16 + 3 * 4


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "t.itf"
    write_tensor(path, np.array([1]), bits=8, signed=False)
    raw = bytearray(path.read_bytes())
    raw[:4] = b"XXXX"
    path.write_bytes(raw)
    with pytest.raises(ConfigError):
        read_tensor(path)


def test_truncated_payload_rejected(tmp_path):
    path = tmp_path / "t.itf"
    write_tensor(path, np.array([1, 2, 3, 4]), bits=8, signed=False)
    path.write_bytes(path.read_bytes()[:-4])
    with pytest.raises(ConfigError):
        read_tensor(path)


def test_range_violation_rejected(tmp_path):
    with pytest.raises(ConfigError):
        write_tensor(tmp_path / "t.itf", np.array([300]), bits=8, signed=False)
    with pytest.raises(ConfigError):
        write_tensor(tmp_path / "t.itf", np.array([-1]), bits=8, signed=False)


def test_json_debug_form_round_trip():
    t = np.array([[1, -2], [3, -4]])
    got, bits, signed = tensor_from_json(tensor_to_json(t, bits=8, signed=True))
    assert np.array_equal(got, t)
    assert (bits, signed) == (8, True)
