import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from numpy.testing import assert_allclose, assert_array_equal

from aewb.data import images as im
from aewb.data import openml
from aewb.data import tabular as tb
from aewb.data.synthetic import (faces_images, manifold_table, planar_table, shapes_images, topic_corpus,
                                 traffic_table)

NAN = np.nan


class TestCSV:
    def test_numeric(self, golden):
        ds = tb.parse_csv((golden / "numeric.csv").read_bytes())
        assert ds.names == ["a", "b"]
        assert_array_equal(ds.matrix(), [[1, 2], [3, 4]])

    def test_mixed_types_and_quoting(self, golden):
        ds = tb.parse_csv((golden / "mixed.csv").read_bytes())
        assert [c.kind for c in ds.columns] == ["nominal", "numeric", "nominal"]
        assert list(ds.column("name")) == ["Smith, J", "Lee", 'Quote "Q"']
        assert_array_equal(ds.column("score"), [3.5, NAN, -1000.0])
        assert ds.columns[2].categories == ("x", "y")

    def test_ragged_row_names_line(self, golden):
        with pytest.raises(tb.ParseError, match="line 3"):
            tb.parse_csv((golden / "ragged.csv").read_bytes())

    def test_empty(self):
        with pytest.raises(tb.ParseError):
            tb.parse_csv(b"")

    def test_no_header_and_delimiter(self):
        ds = tb.parse_csv("1;2\n3;4\n", has_header=False, delimiter=";")
        assert ds.names == ["V1", "V2"]
        assert_array_equal(ds.matrix(), [[1, 2], [3, 4]])

    @given(arrays(np.float64, (4, 3), elements=st.floats(-1e12, 1e12, allow_nan=False)))
    def test_roundtrip(self, X):
        ds = tb.Dataset([tb.Column(f"c{j}") for j in range(3)], [X[:, j] for j in range(3)])
        back = tb.parse_csv(tb.write_csv(ds))
        # 15 significant digits at least; repr gives the exact double
        assert_allclose(back.matrix(), X, rtol=1e-15, atol=0)


class TestARFF:
    def test_golden(self, golden):
        ds = tb.parse_arff((golden / "toy.arff").read_bytes())
        assert ds.relation == "toy"
        assert ds.names == ["load", "proto", "log in"]
        assert [c.kind for c in ds.columns] == ["numeric", "nominal", "nominal"]
        assert ds.columns[1].categories == ("tcp", "udp", "icmp")
        assert_array_equal(ds.column("load"), [1.5, -2.0, 0.25, NAN])
        assert list(ds.column("proto")) == ["udp", "tcp", "icmp", "udp"]
        assert list(ds.column("log in")) == ["yes", "no", "yes", "no"]

    def test_golden_dummy_expansion(self, golden):
        ds = tb.dummy_encode(tb.parse_arff((golden / "toy.arff").read_bytes()))
        assert ds.names == ["load", "proto=tcp", "proto=udp", "proto=icmp", "log in=yes", "log in=no"]
        expected = np.array([
            [1.5, 0, 1, 0, 1, 0],
            [-2.0, 1, 0, 0, 0, 1],
            [0.25, 0, 0, 1, 1, 0],
            [NAN, 0, 1, 0, 0, 1],
        ])
        assert_array_equal(ds.matrix(), expected)

    def test_udp_one_hot(self):
        ds = tb.parse_arff("@relation r\n@attribute proto {tcp,udp,icmp}\n@data\nudp\n")
        assert_array_equal(tb.dummy_encode(ds).matrix(), [[0, 1, 0]])

    def test_unknown_type(self):
        with pytest.raises(tb.ParseError, match="date"):
            tb.parse_arff("@relation r\n@attribute t date\n@data\n")

    def test_arity_mismatch(self):
        with pytest.raises(tb.ParseError, match="line 5"):
            tb.parse_arff("@relation r\n@attribute a numeric\n@attribute b numeric\n@data\n1,2,3\n")

    def test_roundtrip_golden(self, golden):
        ds = tb.parse_arff((golden / "toy.arff").read_bytes())
        back = tb.parse_arff(tb.write_arff(ds))
        assert back.columns == ds.columns and back.relation == ds.relation
        for a, b in zip(ds.values, back.values):
            if a.dtype == object:
                assert list(a) == list(b)
            else:
                assert_array_equal(a, b)

    @given(arrays(np.float64, 5, elements=st.floats(-1e6, 1e6)),
           st.lists(st.sampled_from(["a", "b c", "d,e"]), min_size=5, max_size=5))
    def test_roundtrip_property(self, nums, cats):
        ds = tb.Dataset([tb.Column("x"), tb.Column("k", "nominal", ("a", "b c", "d,e"))],
                        [nums, np.array(cats, dtype=object)], relation="prop test")
        back = tb.parse_arff(tb.write_arff(ds))
        assert_array_equal(back.values[0], nums)
        assert list(back.values[1]) == cats
        assert back.columns == ds.columns


class TestDummy:
    def test_binary_nominal(self):
        ds = tb.Dataset([tb.Column("f", "nominal", ("yes", "no"))], [np.array(["no", "yes"], dtype=object)])
        out = tb.dummy_encode(ds)
        assert len(out.columns) == 2
        assert_array_equal(out.matrix(), [[0, 1], [1, 0]])

    def test_all_numeric_unchanged(self, rng):
        X = rng.random((3, 2))
        ds = tb.Dataset([tb.Column("a"), tb.Column("b")], [X[:, 0], X[:, 1]])
        assert_array_equal(tb.dummy_encode(ds).matrix(), X)

    def test_two_nominal_toy(self):
        ds = tb.Dataset(
            [tb.Column("c", "nominal", ("r", "g", "b")), tb.Column("n"), tb.Column("s", "nominal", ("s", "m"))],
            [np.array(["g", "b", "r"], dtype=object), np.array([7.0, 8, 9]), np.array(["m", "s", "m"], dtype=object)])
        out = tb.dummy_encode(ds)
        assert out.names == ["c=r", "c=g", "c=b", "n", "s=s", "s=m"]
        assert_array_equal(out.matrix(), [[0, 1, 0, 7, 0, 1], [0, 0, 1, 8, 1, 0], [1, 0, 0, 9, 0, 1]])

    def test_unseen_category(self):
        ds = tb.Dataset([tb.Column("proto", "nominal", ("tcp", "udp"))], [np.array(["sctp"], dtype=object)])
        with pytest.raises(tb.EncodingError, match="proto.*sctp"):
            tb.dummy_encode(ds)

    def test_rows_sum_to_nominal_count(self):
        ds = traffic_table(n_train=50, n_test=20, seed=3)
        nominal = sum(c.kind == "nominal" for c in ds.columns)
        out = tb.dummy_encode(ds)
        dummies = [j for j, c in enumerate(out.columns) if c.kind == "dummy"]
        assert_array_equal(out.matrix()[:, dummies].sum(axis=1), nominal)


class TestScaleSplit:
    def ds(self, train_col, test_col):
        vals = np.r_[train_col, test_col].astype(float)
        is_test = np.r_[np.zeros(len(train_col), bool), np.ones(len(test_col), bool)]
        return tb.Dataset([tb.Column("x")], [vals], is_test=is_test)

    def test_hand_value(self):
        out = tb.minmax_scale(self.ds([2, 6, 4], []))
        assert_allclose(out.matrix()[:, 0], [0, 1, 0.5])

    def test_constant_column(self):
        assert_array_equal(tb.minmax_scale(self.ds([3, 3, 3], [5])).matrix(), 0)

    def test_test_values_clamped(self):
        out = tb.minmax_scale(self.ds([0, 10], [-5, 20]))
        assert_array_equal(out.test_matrix()[:, 0], [0, 1])

    def test_training_values_in_unit_interval(self, rng):
        ds = tb.Dataset([tb.Column("a"), tb.Column("b")], [rng.normal(size=40), rng.normal(size=40) * 1e3])
        out = tb.minmax_scale(tb.split(ds, 0.25, 1))
        tr = out.train_matrix()
        assert tr.min() >= 0 and tr.max() <= 1

    def test_split_is_seeded(self, rng):
        ds = tb.Dataset([tb.Column("a")], [rng.random(100)])
        a, b, c = tb.split(ds, 0.3, 5), tb.split(ds, 0.3, 5), tb.split(ds, 0.3, 6)
        assert_array_equal(a.is_test, b.is_test)
        assert a.is_test.sum() == 30
        assert not np.array_equal(a.is_test, c.is_test)

    @given(arrays(np.float64, (6, 2), elements=st.floats(-1e3, 1e3), unique=True))
    def test_unscale_inverts(self, X):
        ds = tb.Dataset([tb.Column("a"), tb.Column("b")], [X[:, 0], X[:, 1]])
        out = tb.minmax_scale(ds)
        assert_allclose(tb.unscale(out, out.matrix()), X, rtol=0, atol=1e-12 * max(1.0, np.abs(X).max()))

    def test_impute_with_training_mean_and_mode(self):
        ds = tb.Dataset([tb.Column("x"), tb.Column("k", "nominal", ("a", "b"))],
                        [np.array([1.0, NAN, 3.0, 100.0]), np.array(["b", None, "b", "a"], dtype=object)],
                        is_test=np.array([False, False, False, True]))
        out = tb.impute_missing(ds)
        assert out.values[0][1] == 2.0
        assert out.values[1][1] == "b"

    def test_prepare_keeps_preset_split(self):
        ds = traffic_table(n_train=40, n_test=10, seed=0)
        out = tb.prepare(ds, test_fraction=0.5, seed=9)
        assert_array_equal(out.is_test, ds.is_test)

    def test_set_target_nominal(self, golden):
        ds = tb.set_target(tb.parse_arff((golden / "toy.arff").read_bytes()))
        assert ds.target_column.name == "log in"
        assert_array_equal(ds.target, [0, 1, 0, 1])


class TestImages:
    def test_white_pixel(self, golden):
        assert_array_equal(im.read_pnm((golden / "white1x1.pgm").read_bytes()), [[[1.0]]])

    def test_golden_p2(self, golden):
        img = im.read_pnm((golden / "gray2x2.pgm").read_bytes())
        assert_array_equal(img[..., 0], [[0.0, 0.2], [0.8, 1.0]])

    def test_golden_p3(self, golden):
        img = im.read_pnm((golden / "rgb2x1.ppm").read_bytes())
        assert_array_equal(img * 255, [[[255, 0, 0], [0, 128, 255]]])

    def test_golden_raw(self, golden):
        assert_array_equal(im.read_pnm((golden / "raw3x1.pgm").read_bytes())[..., 0] * 255, [[0, 128, 255]])
        assert_array_equal(im.read_pnm((golden / "raw1x1.ppm").read_bytes()) * 255, [[[10, 20, 30]]])

    def test_bad_magic(self, golden):
        with pytest.raises(im.FormatError, match="magic"):
            im.read_pnm((golden / "badmagic.pgm").read_bytes())

    def test_truncated(self, golden):
        with pytest.raises(im.FormatError, match="truncated"):
            im.read_pnm((golden / "truncated.pgm").read_bytes())

    def test_golden_bytes_reproduced(self, golden):
        img = im.read_pnm((golden / "raw3x1.pgm").read_bytes())
        assert im.write_pnm(img) == (golden / "raw3x1.pgm").read_bytes()

    @pytest.mark.parametrize("plain", [True, False])
    @pytest.mark.parametrize("channels", [1, 3])
    def test_roundtrip(self, plain, channels, rng):
        img = rng.integers(0, 256, (5, 4, channels)) / 255.0
        assert_array_equal(im.read_pnm(im.write_pnm(img, plain)), img)

    def test_round_half_up(self):
        img = np.array([[[0.5 / 255], [1.5 / 255]]])
        assert_array_equal(im.read_pnm(im.write_pnm(img)) * 255, [[[1], [2]]])

    def test_read_images_requires_uniform_shape(self, tmp_path, golden):
        (tmp_path / "a.pgm").write_bytes((golden / "gray2x2.pgm").read_bytes())
        (tmp_path / "b.pgm").write_bytes((golden / "white1x1.pgm").read_bytes())
        with pytest.raises(im.FormatError):
            im.read_images([tmp_path / "a.pgm", tmp_path / "b.pgm"])
        assert im.read_images([tmp_path / "a.pgm"]).images.shape == (1, 2, 2, 1)

    def test_strip_geometry(self):
        strip = im.image_strip(np.zeros((3, 4, 5, 1)))
        assert strip.shape == (4, 3 * 5 + 2, 1)
        assert_array_equal(strip[:, 5], 1.0)


class StubTransport:
    def __init__(self, responses):
        self.responses = dict(responses)
        self.calls = []

    def get(self, url, timeout):
        self.calls.append(url)
        out = self.responses[url]
        if isinstance(out, list):
            out = out.pop(0)
        if isinstance(out, Exception):
            raise out
        return out


ARFF_URL = "https://example.org/data/v1/download/1/cpu.arff"
META = json.dumps({"data_set_description": {"id": "573", "url": ARFF_URL}}).encode()


class TestOpenML:
    def test_fetch_then_cache(self, tmp_path, golden):
        body = (golden / "toy.arff").read_bytes()
        stub = StubTransport({openml.API.format(id=573): META, ARFF_URL: body})
        assert openml.fetch_openml(573, tmp_path, stub) == body
        assert (tmp_path / "openml" / "573.arff").read_bytes() == body
        n = len(stub.calls)
        assert openml.fetch_openml(573, tmp_path, stub) == body
        assert len(stub.calls) == n == 2

    def test_id_zero(self, tmp_path):
        stub = StubTransport({})
        with pytest.raises(openml.NotFoundError):
            openml.fetch_openml(0, tmp_path, stub)
        assert stub.calls == []

    def test_http_404(self, tmp_path):
        stub = StubTransport({openml.API.format(id=99999999): openml.HTTPStatusError("u", 404)})
        with pytest.raises(openml.NotFoundError):
            openml.fetch_openml(99999999, tmp_path, stub, sleep=lambda s: None)

    def test_retries_with_backoff(self, tmp_path):
        waits = []
        fail = openml.FetchError("connection reset")
        stub = StubTransport({openml.API.format(id=5): [fail, fail, META], ARFF_URL: b"@relation x\n"})
        assert openml.fetch_openml(5, tmp_path, stub, sleep=waits.append) == b"@relation x\n"
        assert waits == [1.0, 2.0]

    def test_gives_up_after_three_retries(self, tmp_path):
        waits = []
        stub = StubTransport({openml.API.format(id=5): [openml.HTTPStatusError("u", 503)] * 4})
        with pytest.raises(openml.FetchError, match="4 attempts"):
            openml.fetch_openml(5, tmp_path, stub, sleep=waits.append)
        assert waits == [1.0, 2.0, 4.0]
        assert not (tmp_path / "openml" / "5.arff").exists()

    def test_cache_env(self, monkeypatch, tmp_path):
        monkeypatch.setenv("AEWB_CACHE", str(tmp_path))
        assert openml.default_cache_dir() == tmp_path


class TestSynthetic:
    def test_shapes_and_ranges(self):
        imgs = shapes_images(n=20, seed=1)
        assert imgs.images.shape == (20, 28, 28, 3)
        assert imgs.images.min() >= 0 and imgs.images.max() <= 1
        faces = faces_images(n=10, seed=2)
        assert faces.images.shape == (10, 32, 32, 1)

    def test_deterministic(self):
        assert_array_equal(manifold_table(n=50, seed=3).matrix(), manifold_table(n=50, seed=3).matrix())
        assert not np.array_equal(planar_table(n=20, seed=1).matrix(), planar_table(n=20, seed=2).matrix())

    def test_corpus(self):
        binary, counts, vocab, topic = topic_corpus(n_docs=100, n_terms=50, seed=0)
        assert binary.shape == counts.shape == (100, 50) and len(vocab) == 50
        assert set(np.unique(binary)) <= {0.0, 1.0}
        assert_array_equal(binary, counts > 0)

    def test_traffic_train_split_is_clean(self):
        ds = traffic_table(n_train=200, n_test=100, anomaly_rate=0.1, seed=4)
        assert ds.target[~ds.is_test].sum() == 0
        assert ds.target[ds.is_test].sum() == 10
