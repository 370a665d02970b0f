"""Data helpers behind the Split Configuration Explorer page."""

import pandas as pd
import pytest

from utils.functions.explorer import RANKED_COLUMNS, pareto_chart, ranked_frame, read_accuracies, score_chart


class _Upload:
    def __init__(self, text: str):
        self._data = text.encode("utf-8")

    def getvalue(self) -> bytes:
        return self._data


@pytest.fixture
def search_result():
    return {
        "enumerated": 3,
        "configs": [
            {"tuple_form": [12, 6, 12, 12, 1, 1, 12], "phi_alpha": 6, "phi_beta": 12, "clc": "1", "score": 1.49,
             "block_cost": 1032, "network_cost": 5569, "analytic_cost": 5569, "cfg": [12, 6, 12, 12, 1, 1, 12]},
            {"tuple_form": [12, 6, 12, 24, 1, 3, 12], "phi_alpha": 6, "phi_beta": 8, "clc": "1/3", "score": 0.4,
             "block_cost": 84, "network_cost": 2000, "analytic_cost": 2000, "cfg": [12, 6, 12, 24, 1, 3, 12]},
        ],
    }


def test_ranked_frame(search_result):
    df = ranked_frame(search_result)
    assert list(df.columns) == RANKED_COLUMNS
    assert df["tuple_form"].tolist() == ["(12,6,12,12,1,1,12)", "(12,6,12,24,1,3,12)"]


def test_ranked_frame_empty():
    assert ranked_frame({"enumerated": 0, "configs": []}).empty


def test_read_accuracies_strips_spaces():
    df = read_accuracies(_Upload("tuple_form,accuracy,notes\n\"(12, 6, 12, 12, 1, 1, 12)\",95.34,x\n"))
    assert df.to_dict("records") == [{"tuple_form": "(12,6,12,12,1,1,12)", "accuracy": 95.34}]


def test_read_accuracies_missing_column():
    with pytest.raises(ValueError, match="accuracy"):
        read_accuracies(_Upload("tuple_form,acc\n(1,1,1,1,1,1,1),90\n"))


def test_score_chart_draws_the_threshold(search_result):
    spec = score_chart(ranked_frame(search_result), 5.0).to_dict()
    marks = [layer["mark"]["type"] if isinstance(layer["mark"], dict) else layer["mark"] for layer in spec["layer"]]
    assert marks == ["circle", "rule"]


def test_pareto_chart_marks_the_front(search_result):
    merged = ranked_frame(search_result).merge(
        pd.DataFrame({"tuple_form": ["(12,6,12,12,1,1,12)", "(12,6,12,24,1,3,12)"], "accuracy": [95.34, 93.9]}),
        on="tuple_form",
    )
    chart = pareto_chart(merged, {"(12,6,12,12,1,1,12)"})
    assert chart.data["front"].tolist() == [True, False]
