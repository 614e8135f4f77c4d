def test_import():
    import geokit
    assert geokit.DB_PATH == "data/db/geokit.duckdb"
    assert geokit.REPORT_SCHEMA == 1


def test_entry_point():
    from geokit.cli import main
    assert main.name == "cli"
