import pytest
from hypothesis import given
from hypothesis import strategies as st

from tap.bulletin import GENESIS_EPOCH, RECORD_LEN, Bulletin
from tap.crypto.hashing import hash_bytes
from tap.errors import DecodeError, EpochRegression, Equivocation, UnknownEpoch


def d(i: int) -> bytes:
    return hash_bytes(b"digest", i.to_bytes(4, "big"))


def test_publish_and_get():
    b = Bulletin()
    b.publish(GENESIS_EPOCH, d(0))
    b.publish(0, d(1))
    assert b.get(-1) == d(0) and b.get(0) == d(1)
    assert b.epochs() == [-1, 0]
    with pytest.raises(UnknownEpoch):
        b.get(5)


def test_equivocation_is_refused_and_republish_is_idempotent():
    b = Bulletin()
    b.publish(0, d(1))
    b.publish(0, d(1))
    assert len(b) == 1
    with pytest.raises(Equivocation):
        b.publish(0, d(2))
    assert b.get(0) == d(1)


def test_regression_refused():
    b = Bulletin()
    b.publish(3, d(3))
    with pytest.raises(EpochRegression):
        b.publish(2, d(2))
    with pytest.raises(EpochRegression):
        Bulletin().publish(-2, d(0))
    with pytest.raises(ValueError):
        b.publish(4, b"short")


def test_persistence_roundtrip(tmp_path):
    path = tmp_path / "bulletin.bin"
    b = Bulletin(path)
    for t in (-1, 0, 1, 4):
        b.publish(t, d(t + 10))
    assert path.stat().st_size == 4 * RECORD_LEN
    again = Bulletin(path)
    assert again.snapshot() == b.snapshot()
    with pytest.raises(Equivocation):
        again.publish(1, d(0))


def test_refresh_sees_appends_from_another_writer(tmp_path):
    path = tmp_path / "bulletin.bin"
    reader = Bulletin(path)
    writer = Bulletin(path)
    writer.publish(0, d(0))
    writer.publish(1, d(1))
    reader.refresh()
    assert reader.get(1) == d(1)


@pytest.mark.parametrize("offset", [0, 8, 40, RECORD_LEN + 45])
def test_tampered_file_is_detected(tmp_path, offset):
    path = tmp_path / "bulletin.bin"
    b = Bulletin(path)
    for t in range(3):
        b.publish(t, d(t))
    data = bytearray(path.read_bytes())
    data[offset] ^= 1
    path.write_bytes(bytes(data))
    if offset < 8:
        # a changed first epoch is still a valid chain start; the digest it names moves
        try:
            assert Bulletin(path).snapshot() != b.snapshot()
        except DecodeError:
            pass
    else:
        with pytest.raises(DecodeError):
            Bulletin(path)


def test_partial_record_is_detected(tmp_path):
    path = tmp_path / "bulletin.bin"
    Bulletin(path).publish(0, d(0))
    with open(path, "ab") as f:
        f.write(b"\x00" * 5)
    with pytest.raises(DecodeError):
        Bulletin(path)


ops = st.lists(st.tuples(st.integers(-1, 8), st.integers(0, 3)), max_size=30)


@given(ops)
def test_history_is_append_only(seq):
    """Whatever is attempted, earlier entries never change and epochs only grow."""
    b = Bulletin()
    history = []
    for t, i in seq:
        before = b.snapshot()
        try:
            b.publish(t, d(i))
        except (Equivocation, EpochRegression):
            assert b.snapshot() == before
            continue
        after = b.snapshot()
        assert after[:len(before)] == before
        history = list(after)
    epochs = [t for t, _ in history]
    assert epochs == sorted(set(epochs))
