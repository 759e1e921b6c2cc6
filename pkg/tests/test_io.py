"""I/O round-trip and schema-validation tests."""

from __future__ import annotations

import pytest

from qstar import DataError, MosCell, MosTable, RatingRecord, SequenceParams, ShapeConstants
from qstar.io import (
    ParamsFile,
    fmt,
    read_config,
    read_mos_csv,
    read_params_json,
    read_predictions_csv,
    read_rates_csv,
    read_ratings_csv,
    write_mos_csv,
    write_params_json,
    write_predictions_csv,
    write_ratings_csv,
)
from qstar.pipeline import StarLabel


def sample_table() -> MosTable:
    cells = {}
    for qp, mos in ((28.0, 9.0), (36.0, 7.5), (44.0, 4.25)):
        label = StarLabel(704, 576, 30.0, qp)
        cells[("city", label)] = MosCell(
            mos=mos, n=3, ci_halfwidth=0.25, scores=(mos - 0.5, mos, mos + 0.5)
        )
    cells[("city", StarLabel(176, 144, 7.5, 28.0))] = MosCell(
        mos=3.0, n=1, ci_halfwidth=None, scores=(3.0,)
    )
    return MosTable(cells=cells)


class TestFmt:
    def test_integral(self):
        assert fmt(28.0) == "28"
        assert fmt(-3.0) == "-3"

    def test_fractional_round_trips(self):
        for v in (7.5, 0.1, 40.31747359663594, 1 / 3):
            assert float(fmt(v)) == v


class TestRatingsCsv:
    def test_round_trip(self, tmp_path):
        records = [
            RatingRecord("v1", "t1", "city", StarLabel(176, 144, 7.5, 28.0), 4.5),
            RatingRecord("v2", "t1", "crew", StarLabel(704, 576, 30.0, 44.0), 9.0),
        ]
        path = tmp_path / "r.csv"
        write_ratings_csv(path, records)
        assert read_ratings_csv(path) == records

    def test_missing_column(self, tmp_path):
        path = tmp_path / "r.csv"
        path.write_text("viewer_id,test_id\nv,t\n")
        with pytest.raises(DataError) as exc:
            read_ratings_csv(path)
        assert "sequence_id" in str(exc.value)

    def test_malformed_row_is_named(self, tmp_path):
        path = tmp_path / "r.csv"
        path.write_text(
            "viewer_id,test_id,sequence_id,width,height,fps,qp,raw_score\n"
            "v,t,city,176,144,30,28,5\n"
            "v,t,city,176,144,thirty,28,5\n"
        )
        with pytest.raises(DataError) as exc:
            read_ratings_csv(path)
        assert "row 3" in str(exc.value)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "r.csv"
        path.write_text("viewer_id,test_id,sequence_id,width,height,fps,qp,raw_score\n")
        with pytest.raises(DataError):
            read_ratings_csv(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            read_ratings_csv(tmp_path / "nope.csv")


class TestMosCsv:
    def test_round_trip(self, tmp_path):
        table = sample_table()
        path = tmp_path / "mos.csv"
        write_mos_csv(path, table)
        back = read_mos_csv(path)
        assert back == table

    def test_byte_stability(self, tmp_path):
        table = sample_table()
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_mos_csv(p1, table)
        write_mos_csv(p2, read_mos_csv(p1))
        assert p1.read_bytes() == p2.read_bytes()

    def test_duplicate_cell_rejected(self, tmp_path):
        path = tmp_path / "mos.csv"
        row = "city,704,576,30,28,9,2,0.1,8.5;9.5\n"
        path.write_text(
            "sequence_id,width,height,fps,qp,mos,n,ci_halfwidth,scores\n" + row + row
        )
        with pytest.raises(DataError):
            read_mos_csv(path)


class TestParamsJson:
    def _params_file(self) -> ParamsFile:
        return ParamsFile(
            references={"s_max": 405504.0, "t_max": 30.0, "q_min": 16.0},
            constants=ShapeConstants(),
            sequences={
                "city": SequenceParams(7.25, 3.52, 4.10),
                "crew": SequenceParams(4.51, 4.07, 3.09),
            },
            provenance={"created": "2026-01-01T00:00:00+00:00", "input_sha256": "ab" * 32},
        )

    def test_round_trip_byte_identical(self, tmp_path):
        pf = self._params_file()
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        write_params_json(p1, pf)
        write_params_json(p2, read_params_json(p1))
        assert p1.read_bytes() == p2.read_bytes()

    def test_values_preserved(self, tmp_path):
        pf = self._params_file()
        path = tmp_path / "p.json"
        write_params_json(path, pf)
        back = read_params_json(path)
        assert back.sequences["city"].alpha_q == 7.25
        assert back.constants == ShapeConstants()
        assert back.references["s_max"] == 405504.0

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "p.json"
        path.write_text("{not json")
        with pytest.raises(DataError):
            read_params_json(path)

    def test_missing_reference_key(self, tmp_path):
        path = tmp_path / "p.json"
        path.write_text('{"references": {"s_max": 1.0}, "constants": {}, "sequences": {}}')
        with pytest.raises(DataError):
            read_params_json(path)


class TestRatesCsv:
    def test_read(self, tmp_path):
        path = tmp_path / "rates.csv"
        path.write_text(
            "width,height,fps,qp,rate\n704,576,30,28,2000\n176,144,7.5,44,80.5\n"
        )
        rates = read_rates_csv(path)
        assert rates[StarLabel(704, 576, 30.0, 28.0)] == 2000.0
        assert rates[StarLabel(176, 144, 7.5, 44.0)] == 80.5

    def test_duplicate_rejected(self, tmp_path):
        path = tmp_path / "rates.csv"
        path.write_text("width,height,fps,qp,rate\n704,576,30,28,2000\n704,576,30,28,100\n")
        with pytest.raises(DataError):
            read_rates_csv(path)

    def test_negative_rate_rejected(self, tmp_path):
        path = tmp_path / "rates.csv"
        path.write_text("width,height,fps,qp,rate\n704,576,30,28,-5\n")
        with pytest.raises(DataError):
            read_rates_csv(path)


class TestPredictionsCsv:
    def test_round_trip_skips_flagged(self, tmp_path):
        rows = [
            {
                "sequence_id": "city",
                "label": StarLabel(704, 576, 30.0, 28.0),
                "mnqq": 1.0,
                "mnqs": 1.0,
                "mnqt": 1.0,
                "qstar": 1.0,
            },
            {
                "sequence_id": "city",
                "label": StarLabel(704, 576, 60.0, 28.0),
                "warning": "outside validity range: t=60 exceeds t_max=30",
            },
        ]
        path = tmp_path / "pred.csv"
        write_predictions_csv(path, rows)
        back = read_predictions_csv(path)
        assert back == {("city", StarLabel(704, 576, 30.0, 28.0)): 1.0}


class TestConfig:
    def test_sections_and_types(self, tmp_path):
        path = tmp_path / "cfg.toml"
        path.write_text(
            "# pipeline thresholds\n"
            "[pipeline]\n"
            "ratio_threshold = 1.1\n"
            "ratio_max_outliers = 2\n"
            'bt500_mode = "global"\n'
            "mapping_enabled = false\n"
            "\n"
            "[constants]\n"
            "beta_s = 0.74\n"
        )
        cfg = read_config(path)
        assert cfg["pipeline.ratio_threshold"] == 1.1
        assert cfg["pipeline.ratio_max_outliers"] == 2
        assert cfg["pipeline.bt500_mode"] == "global"
        assert cfg["pipeline.mapping_enabled"] is False
        assert cfg["constants.beta_s"] == 0.74

    def test_bad_line(self, tmp_path):
        path = tmp_path / "cfg.toml"
        path.write_text("just some words\n")
        with pytest.raises(DataError) as exc:
            read_config(path)
        assert "line 1" in str(exc.value)

    def test_bad_value(self, tmp_path):
        path = tmp_path / "cfg.toml"
        path.write_text("key = one point five\n")
        with pytest.raises(DataError):
            read_config(path)


class TestWriteJson:
    def test_non_finite_values_become_null(self, tmp_path):
        import json
        import math

        from qstar.io import write_json

        path = tmp_path / "out.json"
        write_json(path, {"pcc": math.nan, "f": math.inf, "ok": 1.5, "rows": [math.nan]})
        back = json.loads(path.read_text())
        assert back == {"pcc": None, "f": None, "ok": 1.5, "rows": [None]}
