import numpy as np
import pytest
from matplotlib.container import ErrorbarContainer

from plotkit import FigureSpec, SchemaMismatch, build_panels, load_rows, render
from plotkit.render import main

EXP1_HEADER = "mu,m,rho_apc_mean,rho_apc_se,rho_hbm_mean,rho_hbm_se,rejections"
EXP2_HEADER = "m,n,rho_apc_mean,rho_apc_se,rho_hbm_mean,rho_hbm_se,rejections"
EXP3_HEADER = "n,c_mean,c_se"


@pytest.fixture()
def csvs(tmp_path):
    rows1 = [EXP1_HEADER]
    for mu in (0.0, 1.0):
        for i, m in enumerate((2, 3, 4, 6)):
            rho = 0.90 + 0.02 * i + 0.01 * mu
            rows1.append(f"{mu},{m},{rho},0.002,0.985,0.001,{int(mu)}")
    (tmp_path / "exp1.csv").write_text("\n".join(rows1) + "\n")

    rows2 = [EXP2_HEADER]
    for m in (10, 20):
        for i, n in enumerate(range(2 * m, 101, m)):
            rows2.append(f"{m},{n},{0.91 + 0.01 * i},0.003,{0.95 + 0.008 * i},0.002,0")
    (tmp_path / "exp2.csv").write_text("\n".join(rows2) + "\n")

    rows3 = [EXP3_HEADER]
    for n in range(2, 30):
        rows3.append(f"{n},{0.9 / np.sqrt(n)},{0.01}")
    (tmp_path / "exp3.csv").write_text("\n".join(rows3) + "\n")
    return tmp_path


def test_fig1_two_panels_with_error_bars_and_legend(csvs):
    rows = load_rows(csvs / "exp1.csv", "fig1")
    panels = build_panels("fig1", rows)
    assert [key for key, _ in panels] == ["mu0", "mu1"]
    for _, fig in panels:
        ax = fig.axes[0]
        bars = [c for c in ax.containers if isinstance(c, ErrorbarContainer)]
        assert len(bars) == 2
        legend = ax.get_legend()
        assert legend is not None
        labels = [t.get_text() for t in legend.get_texts()]
        assert labels == ["APC", "D-HBM"]


def test_fig1_render_writes_one_file_per_panel(csvs):
    out = csvs / "figs" / "fig1.png"
    written = render(FigureSpec("fig1", str(csvs / "exp1.csv"), str(out)))
    assert written == [str(csvs / "figs" / "fig1_mu0.png"),
                       str(csvs / "figs" / "fig1_mu1.png")]
    for path in written:
        data = open(path, "rb").read()
        assert data[:8] == b"\x89PNG\r\n\x1a\n"
        assert len(data) > 1000


def test_fig2_panels_per_machine_count(csvs):
    written = render(FigureSpec("fig2", str(csvs / "exp2.csv"), str(csvs / "fig2.png")))
    assert len(written) == 2
    assert written[0].endswith("fig2_m10.png")
    assert written[1].endswith("fig2_m20.png")


def test_fig3_single_decreasing_curve(csvs):
    rows = load_rows(csvs / "exp3.csv", "fig3")
    (key, fig), = build_panels("fig3", rows)
    assert key == ""
    ax = fig.axes[0]
    assert ax.get_legend() is not None
    assert any(isinstance(c, ErrorbarContainer) for c in ax.containers)
    written = render(FigureSpec("fig3", str(csvs / "exp3.csv"), str(csvs / "fig3.png")))
    assert written == [str(csvs / "fig3.png")]


def test_vector_output_format(csvs):
    written = render(FigureSpec("fig3", str(csvs / "exp3.csv"), str(csvs / "fig3.svg")))
    text = open(written[0], "rb").read(500)
    assert b"<svg" in text or text.startswith(b"<?xml")


def test_empty_csv_schema_mismatch(csvs):
    empty = csvs / "empty.csv"
    empty.write_text("")
    with pytest.raises(SchemaMismatch):
        load_rows(empty, "fig1")
    header_only = csvs / "header.csv"
    header_only.write_text(EXP1_HEADER + "\n")
    with pytest.raises(SchemaMismatch, match="no data rows"):
        load_rows(header_only, "fig1")


def test_missing_column_diagnostic(csvs):
    bad = csvs / "bad.csv"
    bad.write_text("mu,m,rho_apc_mean\n0,2,0.9\n")
    with pytest.raises(SchemaMismatch, match="rho_apc_se"):
        load_rows(bad, "fig1")


def test_wrong_schema_for_figure(csvs):
    with pytest.raises(SchemaMismatch, match="mu"):
        load_rows(csvs / "exp3.csv", "fig1")


def test_non_numeric_cell(csvs):
    bad = csvs / "nan.csv"
    bad.write_text(EXP3_HEADER + "\n2,oops,0.1\n")
    with pytest.raises(SchemaMismatch, match="c_mean"):
        load_rows(bad, "fig3")


def test_script_entry_point(csvs, capsys):
    rc = main(["fig3", str(csvs / "exp3.csv"), str(csvs / "cli_fig3.png")])
    assert rc == 0
    assert (csvs / "cli_fig3.png").exists()
    assert "wrote" in capsys.readouterr().out
    rc = main(["fig1", str(csvs / "exp3.csv"), str(csvs / "x.png")])
    assert rc == 2


def test_axis_label_override(csvs):
    rows = load_rows(csvs / "exp3.csv", "fig3")
    written = render(
        FigureSpec("fig3", str(csvs / "exp3.csv"), str(csvs / "labelled.png"),
                   x_label="dimension", y_label="alignment")
    )
    assert written
