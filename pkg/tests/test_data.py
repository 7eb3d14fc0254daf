import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from twistboost.data import (
    Column,
    CsvError,
    Dataset,
    SplitPlan,
    load_csv,
    schema_to_dicts,
    split,
    synth_xd6,
    write_csv,
    xd6_label,
)

SCHEMA = [
    {"name": "age", "type": "numeric"},
    {"name": "vip", "type": "boolean"},
    {"name": "month", "type": "categorical", "alphabet": ["Jan", "Feb", "Mar"]},
]


def _write(tmp_path, text):
    p = tmp_path / "d.csv"
    p.write_text(text, encoding="utf-8")
    return p


class TestColumn:
    def test_parse_forms(self):
        assert Column.parse({"name": "a", "kind": "boolean"}) == Column("a", "boolean")
        assert Column.parse(("m", "categorical", ["x", "y"])).alphabet == ("x", "y")
        assert Column.parse(Column("z")) == Column("z")

    def test_validation(self):
        with pytest.raises(ValueError):
            Column("a", "text")
        with pytest.raises(ValueError):
            Column("a", "categorical")
        with pytest.raises(ValueError):
            Column("a", "categorical", ("x", "x"))
        with pytest.raises(ValueError):
            Column("a", "numeric", ("x",))

    def test_encode_decode(self):
        b = Column("b", "boolean")
        assert b.encode(" TRUE ") == 1.0 and b.encode("no") == 0.0
        with pytest.raises(ValueError):
            b.encode("maybe")
        c = Column("c", "categorical", ("Jan", "Feb"))
        assert c.decode(c.encode("Feb")) == "Feb"
        with pytest.raises(ValueError):
            Column("n").encode("inf")

    @given(st.floats(allow_nan=False, allow_infinity=False))
    def test_numeric_round_trip(self, v):
        c = Column("n")
        assert c.encode(c.decode(v)) == v


class TestDataset:
    def test_validation(self):
        cols = (Column("a"),)
        with pytest.raises(ValueError):
            Dataset(np.zeros((2, 1)), np.array([1, 0]), cols)
        with pytest.raises(ValueError):
            Dataset(np.zeros((2, 2)), np.array([1, -1]), cols)
        with pytest.raises(ValueError):
            Dataset(np.array([[2.0]]), np.array([1]), (Column("b", "boolean"),))
        with pytest.raises(ValueError):
            Dataset(np.array([[3.0]]), np.array([1]), (Column("c", "categorical", ("x", "y")),))

    def test_read_only(self):
        ds = synth_xd6(20)
        with pytest.raises(ValueError):
            ds.X[0, 0] = 5

    def test_orders_are_stable_sorts(self):
        ds = synth_xd6(50)
        for j in range(ds.d):
            col = ds.X[ds.orders[:, j], j]
            assert np.all(np.diff(col) >= 0)
            for v in (0.0, 1.0):
                rows = ds.orders[col == v, j]
                assert np.all(np.diff(rows) > 0)

    def test_fingerprint(self):
        a, b = synth_xd6(30, 1), synth_xd6(30, 1)
        assert a.fingerprint == b.fingerprint and a.equals(b)
        assert a.fingerprint != synth_xd6(30, 2).fingerprint

    def test_column_index(self):
        ds = synth_xd6(10)
        assert ds.column_index("x3") == 2
        with pytest.raises(KeyError):
            ds.column_index("x10")


class TestXd6:
    def test_formula(self):
        X = np.zeros((3, 9))
        X[1, 3:6] = 1
        X[2, [0, 1, 4, 5, 6, 7]] = 1
        assert xd6_label(X).tolist() == [-1, 1, -1]

    def test_generator(self):
        ds = synth_xd6()
        assert (ds.m, ds.d, ds.name) == (973, 9, "xd6")
        assert np.array_equal(ds.y, xd6_label(ds.X))
        # P(positive) = 1 - (7/8)^3
        assert abs((ds.y == 1).mean() - 0.330) < 0.05

    def test_bad_size(self):
        with pytest.raises(ValueError):
            synth_xd6(0)


class TestSplit:
    def test_partition(self):
        ds = synth_xd6(100)
        tr, te = split(ds, SplitPlan(0.7, 10, 3), 4)
        assert (tr.m, te.m) == (70, 30)
        rows = {tuple(r) + (y,) for r, y in zip(tr.X, tr.y)}
        assert len(rows) <= 70

    def test_index_level_partition(self):
        X = np.arange(50, dtype=float)[:, None]
        ds = Dataset(X, np.ones(50, dtype=int), (Column("i"),))
        tr, te = split(ds, SplitPlan(0.7, 5, 0), 2)
        idx = np.concatenate([tr.X[:, 0], te.X[:, 0]])
        assert sorted(idx.tolist()) == list(range(50))

    def test_deterministic_and_fold_dependent(self):
        ds = synth_xd6(200)
        plan = SplitPlan(seed=9)
        a, b = split(ds, plan, 1)[0], split(ds, plan, 1)[0]
        assert a.equals(b)
        assert not split(ds, plan, 2)[0].equals(a)

    def test_fold_range(self):
        with pytest.raises(ValueError):
            split(synth_xd6(20), SplitPlan(folds=2), 2)
        with pytest.raises(ValueError):
            SplitPlan(train_fraction=1.0)

    @given(st.integers(2, 300), st.floats(0.05, 0.95), st.integers(0, 9))
    def test_sizes(self, m, frac, fold):
        X = np.arange(m, dtype=float)[:, None]
        ds = Dataset(X, np.ones(m, dtype=int), (Column("i"),))
        tr, te = split(ds, SplitPlan(frac, 10, 0), fold)
        assert tr.m + te.m == m and tr.m >= 1 and te.m >= 1
        assert not set(tr.X[:, 0]) & set(te.X[:, 0])


class TestCsv:
    def test_load(self, tmp_path):
        p = _write(tmp_path, "age,vip,month,buy\n31,1,Feb,yes\n45.5,false,Jan,no\n")
        ds = load_csv(p, SCHEMA, "buy", "yes")
        assert ds.X.tolist() == [[31.0, 1.0, 1.0], [45.5, 0.0, 0.0]]
        assert ds.y.tolist() == [1, -1]
        assert ds.label_names == ("no", "yes")
        assert ds.name == "d"

    def test_bad_rows_dropped(self, tmp_path):
        p = _write(tmp_path, "age,vip,month,buy\n31,1,Feb,yes\nx,1,Feb,no\n2,1,Apr,no\n3,1,Mar,\n4,0,Jan,no\n")
        with pytest.warns(UserWarning, match="dropped 3"):
            ds = load_csv(p, SCHEMA, "buy", "yes")
        assert ds.m == 2

    def test_missing_column(self, tmp_path):
        p = _write(tmp_path, "age,vip,buy\n1,1,yes\n")
        with pytest.raises(CsvError, match="month"):
            load_csv(p, SCHEMA, "buy", "yes")

    def test_empty_and_nonbinary(self, tmp_path):
        with pytest.raises(CsvError):
            load_csv(_write(tmp_path, ""), SCHEMA, "buy", "yes")
        p = _write(tmp_path, "age,vip,month,buy\n1,1,Jan,a\n2,1,Jan,b\n3,1,Jan,c\n")
        with pytest.raises(CsvError, match="binary"):
            load_csv(p, SCHEMA, "buy", "a")

    def test_round_trip(self, tmp_path):
        p = _write(tmp_path, "age,vip,month,buy\n0.1,1,Feb,yes\n1e-7,0,Mar,no\n")
        ds = load_csv(p, SCHEMA, "buy", "yes")
        back = load_csv(write_csv(ds, tmp_path / "out.csv", "buy"), SCHEMA, "buy", "yes")
        assert back.equals(ds)

    @given(st.lists(st.tuples(st.floats(-1e6, 1e6), st.booleans(), st.sampled_from(["Jan", "Feb", "Mar"]),
                              st.booleans()), min_size=1, max_size=20))
    def test_round_trip_property(self, tmp_path_factory, rows):
        d = tmp_path_factory.mktemp("rt")
        cols = tuple(Column.parse(s) for s in SCHEMA)
        X = np.array([[a, float(b), ("Jan", "Feb", "Mar").index(c)] for a, b, c, _ in rows])
        y = np.array([1 if r[3] else -1 for r in rows])
        ds = Dataset(X, y, cols, ("no", "yes"))
        back = load_csv(write_csv(ds, d / "x.csv", "buy"), SCHEMA, "buy", "yes")
        assert np.array_equal(back.X, ds.X)
        assert np.array_equal(back.y, ds.y)

    def test_schema_to_dicts(self):
        cols = [Column.parse(s) for s in SCHEMA]
        assert schema_to_dicts(cols) == SCHEMA
