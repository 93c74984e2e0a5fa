import json

import numpy as np
import pytest

from tvnet.panel import CovarianceSnapshot, TimeSeriesPanel


def test_csv_round_trip_exact(tmp_path):
    rng = np.random.default_rng(0)
    panel = TimeSeriesPanel(rng.standard_normal((7, 3)) * 1e3)
    path = tmp_path / "panel.csv"
    panel.to_csv(path)
    again = TimeSeriesPanel.from_csv(path)
    assert np.array_equal(panel.data, again.data)


def test_validation_rejects_bad_shapes_and_values():
    with pytest.raises(ValueError, match="2-D"):
        TimeSeriesPanel(np.zeros(5))
    with pytest.raises(ValueError, match="n >= 2"):
        TimeSeriesPanel(np.zeros((1, 5)))
    bad = np.zeros((4, 3))
    bad[2, 1] = np.nan
    with pytest.raises(ValueError, match="finite"):
        TimeSeriesPanel(bad)


def test_one_based_rows_and_times():
    panel = TimeSeriesPanel(np.arange(8.0).reshape(4, 2))
    assert np.allclose(panel.times(), [0.25, 0.5, 0.75, 1.0])
    assert np.array_equal(panel.row(1), [0.0, 1.0])
    assert np.array_equal(panel.row(4), [6.0, 7.0])
    with pytest.raises(IndexError):
        panel.row(0)


def test_data_is_read_only():
    panel = TimeSeriesPanel(np.zeros((3, 2)))
    with pytest.raises(ValueError):
        panel.data[0, 0] = 1.0


def test_snapshot_rejects_asymmetry_and_exports(tmp_path):
    with pytest.raises(ValueError, match="asymmetric"):
        CovarianceSnapshot(np.array([[1.0, 0.5], [0.2, 1.0]]), t=0.5, source="true")
    with pytest.raises(ValueError, match="source"):
        CovarianceSnapshot(np.eye(2), t=0.5, source="guessed")
    snap = CovarianceSnapshot(np.eye(2), t=0.5, source="smoothed", bandwidth=0.2, family="uniform")
    snap.export(tmp_path / "cov.csv", tmp_path / "cov.json")
    meta = json.loads((tmp_path / "cov.json").read_text())
    assert meta == {"t": 0.5, "b": 0.2, "family": "uniform", "source": "smoothed"}
    assert np.array_equal(np.loadtxt(tmp_path / "cov.csv", delimiter=","), np.eye(2))
