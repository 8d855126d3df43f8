import numpy as np
import pytest

from mollowkit.tables import TableError, read_table, write_table


def test_round_trip(tmp_path):
    cols = {"x": np.linspace(0, 1, 7), "y": np.exp(np.linspace(0, 1, 7))}
    write_table(tmp_path / "t.csv", cols, ["units: GHz", "seed 3"])
    back, comments = read_table(tmp_path / "t.csv")
    assert comments == ["units: GHz", "seed 3"]
    for k in cols:
        assert np.allclose(back[k], cols[k], rtol=1e-9)


@pytest.mark.parametrize("text,match", [
    ("", "no header"),
    ("# only comments\n", "no header"),
    ("a,b\n", "no data"),
    ("a,b\n1,2\n3\n", ":3: expected 2 fields"),
    ("a,b\n1,x\n", ":2: non-numeric"),
    ("a,b\n1,nan\n", "non-finite"),
    ("a,a\n1,2\n", "bad header"),
])
def test_malformed(tmp_path, text, match):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(TableError, match=match):
        read_table(p)


def test_missing_file(tmp_path):
    with pytest.raises(TableError):
        read_table(tmp_path / "missing.csv")
