import numpy as np
import pytest

from models.dataset import ColumnSchema, Dataset, Record, TemporalSplitSpec
from services.data_service import class_counts, dataset_frame, load_csv, require_both_classes, temporal_split
from tests.factories import make_dataset
from utils.errors import DataValidationError

SCHEMA = ColumnSchema(lon="LON", lat="LAT", year="YEAR", label="PRESENT", features=["Gtemp_c", "BEST_DEPTH_M", "AREA_SWEPT_MSQ"])

HEADER = "LON,LAT,YEAR,PRESENT,Gtemp_c,BEST_DEPTH_M,AREA_SWEPT_MSQ\n"


def write(tmp_path, body, name="data.csv"):
    path = tmp_path / name
    path.write_text(HEADER + body, encoding="utf-8")
    return str(path)


def test_load_csv_all_valid(tmp_path):
    path = write(tmp_path, "-124.1,44.2,2006,1,7.5,120,0.02\n-124.3,44.9,2007,0,7.1,90,0.03\n"
                           "-125.0,46.0,2008,0,6.8,200,0.02\n-124.7,47.1,2009,1,7.0,150,0.04\n")
    d, summary = load_csv(path, SCHEMA)
    assert len(d) == 4
    assert summary.rows_dropped == 0
    assert d.feature_names == ["Gtemp_c", "BEST_DEPTH_M", "AREA_SWEPT_MSQ"]
    assert d.ids.tolist() == [0, 1, 2, 3]
    assert d.year.tolist() == [2006, 2007, 2008, 2009]


def test_load_csv_drops_and_counts_bad_rows(tmp_path):
    path = write(tmp_path, "-124.1,44.2,2006,1,7.5,120,0.02\n"
                           "-124.3,44.9,2007,0,,90,0.03\n"
                           "abc,45.0,2007,0,7.0,90,0.03\n"
                           "200.0,45.0,2008,1,7.0,90,0.03\n"
                           "-124.7,47.1,2016,0,7.0,150,0.04\n")
    d, summary = load_csv(path, SCHEMA)
    assert len(d) == 2
    assert summary.rows_read == 5
    assert summary.rows_dropped == 3
    assert summary.drop_reasons == {"missing_value": 1, "unparseable_value": 1, "coordinates_out_of_bounds": 1}
    assert d.ids.tolist() == [0, 4]


def test_load_csv_uses_id_column(tmp_path):
    schema = SCHEMA.model_copy(update={"id": "ID"})
    path = tmp_path / "ids.csv"
    path.write_text("ID," + HEADER + "17,-124.1,44.2,2006,1,7.5,120,0.02\n5,-124.3,44.9,2007,0,7.1,90,0.03\n")
    d, _ = load_csv(str(path), schema)
    assert d.ids.tolist() == [17, 5]


def test_load_csv_non_binary_label(tmp_path):
    path = write(tmp_path, "-124.1,44.2,2006,2,7.5,120,0.02\n")
    with pytest.raises(DataValidationError, match="Non-binary"):
        load_csv(path, SCHEMA)


def test_load_csv_missing_column(tmp_path):
    path = tmp_path / "short.csv"
    path.write_text("LON,LAT,YEAR,PRESENT\n-124.1,44.2,2006,1\n")
    with pytest.raises(DataValidationError, match="Missing mapped columns"):
        load_csv(str(path), SCHEMA)


def test_load_csv_zero_usable_rows(tmp_path):
    path = write(tmp_path, "-124.1,44.2,2006,1,,120,0.02\n")
    with pytest.raises(DataValidationError, match="No usable rows"):
        load_csv(path, SCHEMA)


def test_load_csv_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_csv(str(tmp_path / "nope.csv"), SCHEMA)


def test_load_csv_duplicate_ids(tmp_path):
    schema = SCHEMA.model_copy(update={"id": "ID"})
    path = tmp_path / "dup.csv"
    path.write_text("ID," + HEADER + "1,-124.1,44.2,2006,1,7.5,120,0.02\n1,-124.3,44.9,2007,0,7.1,90,0.03\n")
    with pytest.raises(DataValidationError, match="Duplicate"):
        load_csv(str(path), schema)


def test_load_csv_fractional_year(tmp_path):
    path = write(tmp_path, "-124.1,44.2,2010.5,1,7.5,120,0.02\n-124.3,44.9,2007,0,7.1,90,0.03\n")
    with pytest.raises(DataValidationError, match="YEAR"):
        load_csv(path, SCHEMA)


def test_schema_rejects_coordinate_as_feature():
    with pytest.raises(ValueError):
        ColumnSchema(lon="LON", lat="LAT", year="YEAR", label="P", features=["LON", "T"])


def _with_years(years):
    n = len(years)
    return Dataset(ids=np.arange(n), lon=np.zeros(n), lat=np.zeros(n), year=years,
                   label=np.arange(n) % 2, X=np.zeros((n, 1)), feature_names=["f"])


def test_temporal_split_by_year():
    d = _with_years(list(range(2003, 2013)))
    in_time, out_of_time = temporal_split(d, TemporalSplitSpec(train_years=(2006, 2012), test_years=(2003, 2005)))
    assert in_time.year.tolist() == list(range(2006, 2013))
    assert out_of_time.year.tolist() == [2003, 2004, 2005]
    assert not set(in_time.ids) & set(out_of_time.ids)


def test_temporal_split_drops_uncovered_years():
    d = _with_years([2002, 2005, 2010])
    in_time, out_of_time = temporal_split(d, TemporalSplitSpec(train_years=(2006, 2012), test_years=(2003, 2005)))
    assert len(in_time) == 1 and len(out_of_time) == 1


def test_temporal_split_empty_test():
    d = _with_years([2010, 2010])
    with pytest.raises(DataValidationError, match="test years"):
        temporal_split(d, TemporalSplitSpec(train_years=(2010, 2010), test_years=(2011, 2011)))


def test_temporal_split_spec_rejects_overlap():
    with pytest.raises(ValueError):
        TemporalSplitSpec(train_years=(2006, 2012), test_years=(2010, 2014))


@pytest.mark.parametrize("labels, expected", [([1, 1, 0], (2, 1)), ([], (0, 0)), ([0] * 10, (0, 10))])
def test_class_counts(labels, expected):
    n = len(labels)
    d = Dataset(ids=np.arange(n), lon=np.zeros(n), lat=np.zeros(n), year=np.zeros(n, dtype=int),
                label=np.array(labels, dtype=int), X=np.zeros((n, 1)), feature_names=["f"])
    assert class_counts(d) == expected


def test_require_both_classes():
    d = _with_years([2010])
    with pytest.raises(DataValidationError):
        require_both_classes(d, "Training data")


def test_dataset_rejects_duplicate_ids():
    with pytest.raises(ValueError):
        Dataset(ids=[1, 1], lon=[0, 0], lat=[0, 0], year=[2000, 2000], label=[0, 1], X=[[0.0], [1.0]],
                feature_names=["f"])


def test_dataset_select_orders_by_id():
    d = make_dataset(n=20, ids=np.arange(20)[::-1] * 3)
    sub = d.select([3, 30, 9])
    assert sub.ids.tolist() == [3, 9, 30]
    with pytest.raises(KeyError):
        d.select([4])


def test_record_round_trip_through_from_records():
    d = make_dataset(n=5)
    again = Dataset.from_records([d.record(i) for i in range(len(d))], d.feature_names)
    assert np.array_equal(again.X, d.X) and np.array_equal(again.ids, d.ids)
    assert isinstance(d.record(0), Record)


def test_dataset_frame_columns():
    frame = dataset_frame(make_dataset(n=4))
    assert list(frame.columns) == ["id", "lon", "lat", "year", "label", "f0", "f1", "f2"]
