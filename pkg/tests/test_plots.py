"""Tests for the convergence-figure renderer."""

import json
import os

import pytest
from matplotlib import pyplot as plt

from nldd.errors import InvalidInput
from nldd.harness import CSV_HEADER, HistoryRecord, write_history_csv
from plots.render import (FigureSpec, load_figure_spec, main,
                          render_convergence_figure)


def _records(n, seed=1.0):
    return [HistoryRecord("dn", 0.5, 1e-3, 2, i, seed * 10.0 ** (-i),
                          seed * 10.0 ** (-i - 1), 3) for i in range(n)]


@pytest.fixture
def csv_dir(tmp_path):
    write_history_csv(_records(7), tmp_path / "a.csv")
    write_history_csv(_records(7, seed=2.0), tmp_path / "b.csv")
    return tmp_path


def _spec_file(tmp_path, series, output="fig.png", **extra):
    spec = {"output": output, "series": series, **extra}
    path = tmp_path / "figure.json"
    path.write_text(json.dumps(spec), encoding="utf-8")
    return path


def test_point_count_matches_csv_rows(csv_dir):
    spec = FigureSpec((str(csv_dir / "a.csv"), str(csv_dir / "b.csv")),
                      ("a", "b"), str(csv_dir / "fig.png"))
    render_convergence_figure(spec)
    assert os.path.exists(spec.output)
    # re-draw onto a live axes to inspect the line data
    fig, ax = plt.subplots()
    from nldd.harness import read_history_csv
    for path in spec.csv_paths:
        recs = read_history_csv(path)
        line, = ax.semilogy([r.iteration for r in recs],
                            [r.error_inf for r in recs])
        assert len(line.get_xdata()) == len(recs) == 7
    plt.close(fig)


def test_output_is_1200_by_900_png(csv_dir):
    out = csv_dir / "size.png"
    spec = FigureSpec((str(csv_dir / "a.csv"),), ("a",), str(out))
    render_convergence_figure(spec)
    data = out.read_bytes()
    assert data[:8] == b"\x89PNG\r\n\x1a\n"
    width = int.from_bytes(data[16:20], "big")
    height = int.from_bytes(data[20:24], "big")
    assert (width, height) == (1200, 900)


def test_load_figure_spec_resolves_relative_paths(csv_dir):
    path = _spec_file(csv_dir, [{"csv": "a.csv", "label": "run A"}],
                      title="demo")
    spec = load_figure_spec(path)
    assert spec.csv_paths == (str(csv_dir / "a.csv"),)
    assert spec.labels == ("run A",)
    assert spec.title == "demo"
    assert spec.output == str(csv_dir / "fig.png")


def test_label_defaults_to_csv_stem(csv_dir):
    path = _spec_file(csv_dir, [{"csv": "a.csv"}])
    assert load_figure_spec(path).labels == ("a",)


def test_missing_csv_rejected(tmp_path):
    with pytest.raises(InvalidInput):
        FigureSpec((str(tmp_path / "nope.csv"),), ("x",),
                   str(tmp_path / "fig.png"))


def test_label_count_mismatch_rejected(csv_dir):
    with pytest.raises(InvalidInput):
        FigureSpec((str(csv_dir / "a.csv"),), ("x", "y"),
                   str(csv_dir / "fig.png"))


def test_header_only_csv_warns_and_exits_zero(tmp_path, capsys):
    empty = tmp_path / "empty.csv"
    empty.write_text(CSV_HEADER + "\n", encoding="utf-8")
    path = _spec_file(tmp_path, [{"csv": "empty.csv", "label": "empty"}])
    assert main(["--spec", str(path)]) == 0
    captured = capsys.readouterr()
    assert "warning" in captured.err
    assert os.path.exists(tmp_path / "fig.png")


def test_malformed_csv_names_offending_line(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text(CSV_HEADER + "\ndn,0.5,oops\n", encoding="utf-8")
    path = _spec_file(tmp_path, [{"csv": "bad.csv", "label": "bad"}])
    assert main(["--spec", str(path)]) == 2
    err = capsys.readouterr().err
    assert "error:" in err
    assert "dn,0.5,oops" in err


def test_cli_renders_figure(csv_dir, capsys):
    path = _spec_file(csv_dir, [{"csv": "a.csv", "label": "a"},
                                {"csv": "b.csv", "label": "b"}],
                      output="out.png")
    assert main(["--spec", str(path)]) == 0
    assert os.path.exists(csv_dir / "out.png")
    assert "wrote" in capsys.readouterr().out


def test_invalid_json_spec_exits_nonzero(tmp_path, capsys):
    path = tmp_path / "figure.json"
    path.write_text("{not json", encoding="utf-8")
    assert main(["--spec", str(path)]) == 2
    assert "error:" in capsys.readouterr().err


def test_spec_without_series_rejected(tmp_path):
    path = tmp_path / "figure.json"
    path.write_text(json.dumps({"output": "f.png", "series": []}),
                    encoding="utf-8")
    with pytest.raises(InvalidInput):
        load_figure_spec(path)
