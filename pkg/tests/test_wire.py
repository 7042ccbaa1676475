import pytest
from hypothesis import given
from hypothesis import strategies as st

from support import proof_cases
from tap import wire
from tap.errors import DecodeError, UnknownKind
from tap.prefix_tree import RangeSpec
from tap.wire import DigestResponse, EpochRequest, ErrorResponse, RowSubmission


@pytest.fixture(scope="module")
def cases(t2_server):
    return proof_cases(t2_server)


@pytest.mark.parametrize("mode", ["binary", "text"])
def test_every_proof_kind_roundtrips(cases, mode):
    for name, proof, verify, _ in cases:
        data = wire.encode(proof, mode)
        back = wire.decode(data)
        assert back == proof, name
        assert wire.encode(back, mode) == data
        assert verify(back), name


def test_text_and_binary_agree(cases):
    for _, proof, *_ in cases:
        assert wire.decode(wire.encode(proof, "text")) == wire.decode(wire.encode(proof))


rows = st.lists(st.builds(RowSubmission, st.text(max_size=12), st.lists(st.integers(0, 2**32 - 1), max_size=3)
                          .map(tuple), st.integers(0, 2**32 - 1)), max_size=5).map(tuple)
messages = st.one_of(
    st.builds(EpochRequest, st.integers(-1, 2**40), rows),
    st.builds(DigestResponse, st.integers(-1, 2**40), st.binary(min_size=32, max_size=32)),
    st.builds(ErrorResponse, st.text(max_size=20), st.text(max_size=60)),
    st.builds(RangeSpec, st.integers(0, 100), st.integers(0, 100),
              st.lists(st.tuples(st.integers(0, 9), st.integers(0, 9)), max_size=3).map(tuple)),
)


@given(messages, st.sampled_from(["binary", "text"]))
def test_service_messages_roundtrip(msg, mode):
    assert wire.decode(wire.encode(msg, mode)) == msg


def test_decode_checks_expected_kind(cases):
    data = wire.encode(cases[0][1])
    with pytest.raises(DecodeError):
        wire.decode(data, DigestResponse)


def test_malformed_inputs(cases):
    data = wire.encode(cases[3][1])
    with pytest.raises(DecodeError):
        wire.decode(data + b"\x00")
    for cut in (1, 2, len(data) // 2, len(data) - 1):
        with pytest.raises(DecodeError):
            wire.decode(data[:cut])
    with pytest.raises(UnknownKind):
        wire.decode(bytes([wire.VERSION, 250]))
    with pytest.raises(DecodeError):
        wire.decode(bytes([wire.VERSION + 1]) + data[1:])
    with pytest.raises(DecodeError):
        wire.decode(b"{not json")
    with pytest.raises(UnknownKind):
        wire.decode('{"version": 1, "kind": "Nope", "body": {}}')
    with pytest.raises(TypeError):
        wire.encode(object())


def test_encoded_size_is_binary_length(cases):
    for _, proof, *_ in cases:
        assert wire.encoded_size(proof) == len(wire.encode(proof))
