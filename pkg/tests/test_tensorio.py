import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tcdcnet.errors import (
    BadMagic,
    RankOutOfRange,
    ShapeMismatch,
    TruncatedPayload,
    ZeroDim,
)
from tcdcnet.tensorio import (
    MAX_RANK,
    as_tensor,
    tensor_load,
    tensor_map2,
    tensor_new,
    tensor_save,
)


def test_tensor_new_fill():
    t = tensor_new((2, 3), fill=1.5)
    assert t.shape == (2, 3)
    assert t.dtype == np.float32
    assert (t == 1.5).all()


def test_tensor_new_rejects_zero_dim():
    with pytest.raises(ZeroDim):
        tensor_new((2, 0, 3))


def test_tensor_new_rejects_bad_rank():
    with pytest.raises(RankOutOfRange):
        tensor_new((1,) * (MAX_RANK + 1))
    with pytest.raises(RankOutOfRange):
        tensor_new(())


def test_as_tensor_contiguity():
    a = np.arange(12, dtype=np.float64).reshape(3, 4)[:, ::2]
    t = as_tensor(a)
    assert t.flags["C_CONTIGUOUS"]
    assert t.dtype == np.float32


def test_map2_ops():
    a = tensor_new((2, 2), 3.0)
    b = tensor_new((2, 2), 2.0)
    assert (tensor_map2(a, b, "add") == 5.0).all()
    assert (tensor_map2(a, b, "sub") == 1.0).all()
    assert (tensor_map2(a, b, "mul") == 6.0).all()
    assert (tensor_map2(a, np.array([2.0]), "scale") == 6.0).all()


def test_map2_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        tensor_map2(tensor_new((2, 2)), tensor_new((3, 2)), "add")
    with pytest.raises(ShapeMismatch):
        tensor_map2(tensor_new((2, 2)), tensor_new((2,)), "scale")


@given(
    a=st.lists(st.floats(-1e6, 1e6), min_size=4, max_size=4),
    b=st.lists(st.floats(-1e6, 1e6), min_size=4, max_size=4),
)
@settings(max_examples=100)
def test_map2_add_commutes(a, b):
    ta = np.array(a, dtype=np.float32).reshape(2, 2)
    tb = np.array(b, dtype=np.float32).reshape(2, 2)
    assert (tensor_map2(ta, tb, "add") == tensor_map2(tb, ta, "add")).all()
    assert (tensor_map2(ta, tb, "mul") == tensor_map2(tb, ta, "mul")).all()


@given(
    dims=st.lists(st.integers(1, 6), min_size=1, max_size=MAX_RANK),
    seed=st.integers(0, 2**31 - 1),
)
@settings(max_examples=120, deadline=None)
def test_save_load_roundtrip(dims, seed, tmp_path_factory):
    rng = np.random.default_rng(seed)
    t = rng.standard_normal(dims).astype(np.float32)
    path = tmp_path_factory.mktemp("vtns") / "t.vtns"
    tensor_save(t, path)
    back = tensor_load(path)
    assert back.shape == t.shape
    assert back.dtype == np.float32
    assert (back == t).all()


def test_load_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.vtns"
    path.write_bytes(b"NOPE" + bytes(16))
    with pytest.raises(BadMagic):
        tensor_load(path)


def test_load_rejects_truncated_payload(tmp_path):
    path = tmp_path / "t.vtns"
    tensor_save(tensor_new((4, 4), 1.0), path)
    blob = path.read_bytes()
    path.write_bytes(blob[:-8])
    with pytest.raises(TruncatedPayload):
        tensor_load(path)


def test_load_rejects_bad_rank(tmp_path):
    path = tmp_path / "t.vtns"
    path.write_bytes(b"VTNS" + bytes([1, 9]) + bytes(40))
    with pytest.raises(RankOutOfRange):
        tensor_load(path)


def test_file_layout_is_little_endian(tmp_path):
    path = tmp_path / "t.vtns"
    tensor_save(np.array([1.0, 2.0], dtype=np.float32), path)
    blob = path.read_bytes()
    assert blob[:4] == b"VTNS"
    assert blob[4] == 1  # version
    assert blob[5] == 1  # rank
    assert int.from_bytes(blob[6:10], "little") == 2
    assert np.frombuffer(blob[10:], dtype="<f4").tolist() == [1.0, 2.0]
