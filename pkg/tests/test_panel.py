import numpy as np
import pytest

from helpers import panel_from_values
from resid_arb.errors import (
    InsufficientDataError,
    InsufficientHistoryError,
    PanelParseError,
    PanelValidationError,
)
from resid_arb.panel import (
    DatasetMeta,
    ResidualPanel,
    context_windows,
    eligible_assets,
    load_panel,
    save_panel,
    summary_stats,
)
from resid_arb.synthetic import make_panel


BASIC_CSV = """date,AAA,BBB
2020-01-02,0.01,-0.02
2020-01-03,,0.005
2020-01-06,NaN,0.001
"""


def write(tmp_path, text, name="panel.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestLoadPanel:
    def test_missing_cells_leave_the_universe(self, tmp_path):
        panel = load_panel(write(tmp_path, BASIC_CSV))
        assert panel.asset_ids == ["AAA", "BBB"]
        assert panel.present.tolist() == [[True, True], [False, True], [False, True]]
        assert panel.values[0, 0] == 0.01
        assert np.isnan(panel.values[1, 0])

    def test_unordered_rows_are_sorted_consistently(self, tmp_path):
        shuffled = (
            "date,AAA,BBB\n"
            "2020-01-06,NaN,0.001\n"
            "2020-01-02,0.01,-0.02\n"
            "2020-01-03,,0.005\n"
        )
        a = load_panel(write(tmp_path, BASIC_CSV, "a.csv"))
        b = load_panel(write(tmp_path, shuffled, "b.csv"))
        assert (a.dates == b.dates).all()
        assert (a.present == b.present).all()
        assert np.array_equal(a.values, b.values, equal_nan=True)

    def test_malformed_date_reports_line(self, tmp_path):
        bad = "date,AAA\n2020-01-02,0.01\nnot-a-date,0.02\n"
        with pytest.raises(PanelParseError, match="line 3"):
            load_panel(write(tmp_path, bad))

    def test_non_numeric_cell_reports_line_and_column(self, tmp_path):
        bad = "date,AAA,BBB\n2020-01-02,0.01,oops\n"
        with pytest.raises(PanelParseError, match=r"line 2.*'BBB'"):
            load_panel(write(tmp_path, bad))

    def test_duplicate_date_rejected(self, tmp_path):
        bad = "date,AAA\n2020-01-02,0.01\n2020-01-02,0.02\n"
        with pytest.raises(PanelValidationError, match="duplicate date"):
            load_panel(write(tmp_path, bad))

    def test_missing_file_mentions_path(self, tmp_path):
        with pytest.raises(PanelParseError, match="nowhere.csv"):
            load_panel(tmp_path / "nowhere.csv")

    def test_meta_is_attached(self, tmp_path):
        meta = DatasetMeta(factor_model="PCA", source_path="x")
        panel = load_panel(write(tmp_path, BASIC_CSV), meta)
        assert panel.meta is meta

    def test_roundtrip_identity(self, tmp_path, rng):
        panel = make_panel(n_dates=40, n_assets=7, missing=0.15, staggered=True, seed=3)
        path = tmp_path / "out.csv"
        save_panel(panel, path)
        back = load_panel(path)
        assert (back.dates == panel.dates).all()
        assert back.asset_ids == panel.asset_ids
        assert (back.present == panel.present).all()
        assert np.array_equal(back.values, panel.values, equal_nan=True)


class TestPanelValidation:
    def test_dates_must_increase(self):
        with pytest.raises(PanelValidationError):
            ResidualPanel(
                dates=np.array(["2020-01-02", "2020-01-02"], dtype="datetime64[D]"),
                asset_ids=["A"],
                values=np.zeros((2, 1)),
                present=np.ones((2, 1), dtype=bool),
            )

    def test_values_finite_where_present(self):
        values = np.array([[np.inf]])
        with pytest.raises(PanelValidationError):
            ResidualPanel(
                dates=np.array(["2020-01-02"], dtype="datetime64[D]"),
                asset_ids=["A"],
                values=values,
                present=np.ones((1, 1), dtype=bool),
            )

    def test_asset_ids_unique(self):
        with pytest.raises(PanelValidationError):
            ResidualPanel(
                dates=np.array(["2020-01-02"], dtype="datetime64[D]"),
                asset_ids=["A", "A"],
                values=np.zeros((1, 2)),
                present=np.ones((1, 2), dtype=bool),
            )


class TestSummaryStats:
    def test_symmetric_two_cell_panel(self):
        panel = panel_from_values([[0.02], [-0.02]])
        stats = summary_stats(panel)
        assert stats.mean == 0.0
        assert stats.skewness == 0.0
        assert stats.count == 2

    def test_matches_plain_python_oracle(self, rng):
        panel = make_panel(n_dates=30, n_assets=5, missing=0.1, seed=9)
        xs = [float(v) for row, mask in zip(panel.values, panel.present)
              for v, m in zip(row, mask) if m]
        n = len(xs)
        mean = sum(xs) / n
        m2 = sum((x - mean) ** 2 for x in xs) / n
        m3 = sum((x - mean) ** 3 for x in xs) / n
        m4 = sum((x - mean) ** 4 for x in xs) / n
        stats = summary_stats(panel)
        assert stats.count == n
        assert stats.mean == pytest.approx(mean, rel=1e-12)
        assert stats.sd == pytest.approx((m2 * n / (n - 1)) ** 0.5, rel=1e-12)
        assert stats.skewness == pytest.approx(m3 / m2**1.5, rel=1e-12)
        assert stats.kurtosis == pytest.approx(m4 / m2**2, rel=1e-12)

    def test_permutation_invariance(self):
        a = panel_from_values([[0.01, 0.03], [-0.02, 0.005]])
        b = panel_from_values([[0.005, -0.02], [0.03, 0.01]])
        sa, sb = summary_stats(a), summary_stats(b)
        assert sa.mean == pytest.approx(sb.mean, rel=1e-12)
        assert sa.sd == pytest.approx(sb.sd, rel=1e-12)
        assert sa.kurtosis == pytest.approx(sb.kurtosis, rel=1e-12)

    def test_insufficient_data(self):
        panel = panel_from_values([[0.01, np.nan]])
        with pytest.raises(InsufficientDataError):
            summary_stats(panel)


class TestEligibility:
    def panel(self):
        # asset A solid, B has a hole at index 3, C lists late
        values = np.full((6, 3), 0.01)
        values[3, 1] = np.nan
        values[:2, 2] = np.nan
        return panel_from_values(values, ids=["A", "B", "C"])

    def test_gap_inside_window_excludes(self):
        panel = self.panel()
        assert eligible_assets(panel, panel.dates[5], window=3) == ["A", "C"]

    def test_full_presence_includes(self):
        panel = self.panel()
        assert "A" in eligible_assets(panel, panel.dates[4], window=3)

    def test_too_early_raises(self):
        panel = self.panel()
        with pytest.raises(InsufficientHistoryError):
            eligible_assets(panel, panel.dates[2], window=3)

    def test_matches_brute_force_scan(self):
        panel = make_panel(n_dates=60, n_assets=12, missing=0.12,
                           staggered=True, seed=21)
        window = 10
        for idx in (window, 25, 59):
            date = panel.dates[idx]
            brute = sorted(
                panel.asset_ids[j]
                for j in range(panel.n_assets)
                if panel.present[idx - window + 1 : idx + 1, j].all()
            )
            assert eligible_assets(panel, date, window) == brute

    def test_longer_window_is_subset(self):
        panel = make_panel(n_dates=60, n_assets=12, missing=0.1, seed=5)
        date = panel.dates[40]
        wide = set(eligible_assets(panel, date, 12))
        narrow = set(eligible_assets(panel, date, 11))
        assert wide <= narrow


class TestContextWindows:
    def test_matches_direct_slices(self):
        panel = make_panel(n_dates=50, n_assets=8, missing=0.08, seed=13)
        window = 9
        date = panel.dates[30]
        col = {a: j for j, a in enumerate(panel.asset_ids)}
        for cw in context_windows(panel, date, window):
            expect = panel.values[22:31, col[cw.asset_id]]
            assert np.array_equal(cw.returns, expect)
            assert len(cw.returns) == window

    def test_empty_when_no_eligible(self):
        values = np.full((8, 2), 0.01)
        values[5, :] = np.nan
        panel = panel_from_values(values)
        assert context_windows(panel, panel.dates[7], window=4) == []

    def test_sorted_by_asset_id(self):
        panel = make_panel(n_dates=30, n_assets=6, seed=2)
        ids = [cw.asset_id for cw in context_windows(panel, panel.dates[20], 5)]
        assert ids == sorted(ids)
