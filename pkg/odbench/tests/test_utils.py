import threading

import numpy as np
import pytest

from odbench.utils import (
    MASK64,
    derive_seed,
    dump_json,
    format_doc_string,
    member_rng,
    parallel_map,
    stable_hash,
)


def test_stable_hash_is_fixed():
    # sha256("kNN\x1fwine")[:8] read little endian, pinned across releases
    assert stable_hash("kNN", "wine") == stable_hash("kNN", "wine")
    assert stable_hash("kNN", "wine") != stable_hash("wine", "kNN")
    assert 0 <= stable_hash("a") <= MASK64


def test_derive_seed():
    assert derive_seed(0, "IF", "wine") == stable_hash("IF", "wine")
    assert derive_seed(MASK64, "IF") == MASK64 ^ stable_hash("IF")
    # the master seed is reduced to 64 bits
    assert derive_seed(1 << 64, "IF") == derive_seed(0, "IF")


def test_member_rng_streams():
    a = member_rng(7, 3).random(4)
    b = member_rng(7, 3).random(4)
    c = member_rng(7, 4).random(4)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


@pytest.mark.parametrize("threads", [1, 2, 8])
def test_parallel_map_keeps_order(threads):
    seen = set()

    def work(x):
        seen.add(threading.get_ident())
        return x * x

    assert parallel_map(work, range(50), threads) == [x * x for x in range(50)]
    if threads == 1:
        assert seen == {threading.get_ident()}


def test_dump_json_is_canonical():
    assert dump_json({"b": 1, "a": [1, 2]}) == dump_json({"a": [1, 2], "b": 1})
    assert dump_json({}).endswith("\n")


def test_format_doc_string():
    @format_doc_string(n=3)
    def f():
        "takes {n} arguments"

    assert f.__doc__ == "takes 3 arguments"
