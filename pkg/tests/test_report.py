import numpy as np
import pytest

from pricepanel.schemas import ConvergenceInfo, EventStudyFit
from pricepanel.services.report import CSV_COLUMNS, bin_cell, parse_table_csv, render_csv, render_latex, render_table


def make_fit(group="treated", n_obs=1443, scale=1.0):
    bins = [-6, -3, 3, 6]
    beta = [0.2 * scale, -0.1 * scale, 13.0149 * scale, 9.5 * scale]
    se = [0.5, 0.4, 1.2, 4.0]
    return EventStudyFit(
        group=group,
        bins=bins,
        beta=beta,
        vcov=np.diag(np.square(se)).tolist(),
        n_obs=n_obs,
        n_products=31,
        n_retailers=8,
        n_pairs=120,
        rmse=6.4321,
        adj_r2=0.8149,
        within_r2=0.3051,
        dof_inference=7,
        convergence=ConvergenceInfo(iterations=12, max_change=1e-9),
    )


def test_starred_estimate_cell():
    cell = bin_cell(make_fit(), 3)
    assert (cell.est, cell.stars, cell.se) == ("13.01", "***", "1.20")
    assert cell.t == "10.85"
    assert bin_cell(make_fit(), 0).est == ""


def test_latex_rows_and_footer():
    tex = render_latex(make_fit(), make_fit("control", n_obs=902, scale=0.1))
    assert r"\multicolumn{4}{c}{\textbf{Treated}}" in tex
    assert r"\multicolumn{4}{c}{\textbf{Control}}" in tex
    row = next(line for line in tex.splitlines() if line.startswith("3 &"))
    assert row.startswith("3 & 13.01*** & 1.20 & 10.85 & ")
    assert r"\multicolumn{4}{c}{1{,}443}" in tex
    assert r"Adj. R$^2$ & \multicolumn{4}{c}{0.81}" in tex
    assert tex.endswith("\\end{tabular}\n")


def test_single_block_table():
    tex = render_table(make_fit(), fmt="latex")
    assert "Control" not in tex
    assert "Bin & Est. & SE & t & p \\\\" in tex


def test_csv_round_trip_agrees_with_latex():
    fit_t, fit_c = make_fit(), make_fit("control", n_obs=902, scale=0.1)
    text = render_csv(fit_t, fit_c)
    assert text.splitlines()[0].split(",") == CSV_COLUMNS
    parsed = parse_table_csv(text)
    assert parsed[("3", "Treated")] == {"est": 13.01, "stars": "***", "se": 1.2, "t": 10.85, "p": 0.0}
    assert parsed[("Observations", "Control")] == {"est": 902}
    assert parsed[("RMSE", "Treated")]["est"] == 6.43

    tex = render_latex(fit_t, fit_c)
    for b in (-6, -3, 3, 6):
        row = next(line for line in tex.splitlines() if line.startswith(f"{b} &"))
        cells = [c.strip() for c in row.rstrip("\\ ").split("&")[1:]]
        for offset, group in ((0, "Treated"), (4, "Control")):
            rec = parsed[(str(b), group)]
            assert cells[offset] == f"{rec['est']:.2f}{rec['stars']}"
            assert float(cells[offset + 1]) == rec["se"]


def test_rows_union_of_bins():
    narrow = make_fit("control").model_copy(update={"bins": [-3, 3], "beta": [0.0, 1.0], "vcov": [[1.0, 0.0], [0.0, 1.0]]})
    parsed = parse_table_csv(render_csv(make_fit(), narrow))
    assert parsed[("-6", "Control")] == {"est": None, "stars": "", "se": None, "t": None, "p": None}
    assert parsed[("-6", "Treated")]["est"] == 0.2


def test_no_covariance_leaves_blank_inference():
    fit = make_fit().model_copy(update={"vcov": None, "dof_inference": 0})
    cell = bin_cell(fit, 3)
    assert cell.est == "13.01" and cell.se == "" and cell.stars == ""


def test_unknown_format():
    with pytest.raises(ValueError):
        render_table(make_fit(), fmt="html")


def test_parse_rejects_foreign_header():
    with pytest.raises(ValueError):
        parse_table_csv("a,b\n1,2\n")
