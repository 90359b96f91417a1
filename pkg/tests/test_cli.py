"""The shell front end: commands, formats, error categories, exit codes."""

import json

import pytest

from crossdb.cli import (
    Session,
    SessionConfig,
    format_result,
    main,
    run_command,
)
from crossdb.errors import EngineError, QuerySyntaxError
from crossdb.executor import QueryResult
from crossdb.optimizer import OptimizerOptions


@pytest.fixture
def session(tmp_path):
    s = Session(SessionConfig(directory=str(tmp_path / "db")))
    yield s
    s.close()


def load_fixture(session):
    cmds = [
        "CREATE TABLE Customer (id INT, person_id INT, name TEXT)",
        "CREATE COLLECTION Orders",
        "CREATE VERTEX TABLE Persons (name TEXT) LABEL Persons",
        "CREATE VERTEX TABLE Tags (content TEXT) LABEL Tags",
        "CREATE EDGE TABLE Interest_edges (weight FLOAT) LABEL 'Interested in'",
        "CREATE GRAPH Interested_in VERTICES (Persons, Tags) EDGES (Interest_edges)",
    ]
    for c in cmds:
        out, code = run_command(session, c)
        assert code == 0
    db = session.db
    db.insert("Persons", [[0, "ann"], [1, "bob"]])
    db.insert("Tags", [[0, "food"]])
    p, t = db.catalog.schema("Persons").oid, db.catalog.schema("Tags").oid
    db.insert("Interest_edges", [[p, 0, t, 0, 0.9], [p, 1, t, 0, 0.4]])


def test_ddl_then_query_and_audit(session):
    load_fixture(session)
    out, code = run_command(
        session,
        "SELECT p.vid FROM Interested_in MATCH (p:Persons)-[e:Interested in]->(t:Tags) "
        "WHERE t.content = 'food'",
    )
    assert code == 0
    assert "(2 rows)" in out
    out, code = run_command(session, ".audit")
    assert code == 0
    assert "consistent" in out


def test_explain_differs_but_results_agree_across_optimizer_settings(session):
    load_fixture(session)
    query = (
        "SELECT p.vid FROM Interested_in MATCH (p:Persons)-[e:Interested in]->(t:Tags) "
        "WHERE t.content = 'food'"
    )
    on, _ = run_command(session, f"EXPLAIN {query}")
    session.config.optimizer = OptimizerOptions(enabled=False)
    session.db.optimizer_options = session.config.optimizer
    off, _ = run_command(session, f"EXPLAIN {query}")
    assert on != off
    assert on.splitlines()[-1] != "rules: "
    assert off.splitlines()[-1] == "rules: "
    rows_off, _ = run_command(session, query)
    session.config.optimizer = OptimizerOptions()
    rows_on, _ = run_command(session, query)
    assert sorted(rows_on.splitlines()[2:]) == sorted(rows_off.splitlines()[2:])


def test_import_malformed_csv_reports_line_number(session, tmp_path):
    load_fixture(session)
    bad = tmp_path / "bad.csv"
    bad.write_text("id,person_id,name\n1,2,ann\nnope,4,bob\n", encoding="utf-8")
    with pytest.raises(EngineError) as err:
        run_command(session, f"IMPORT Customer FROM '{bad}'")
    assert err.value.category == "io"
    assert "line 3" in str(err.value)


def test_import_export_round_trip(session, tmp_path):
    load_fixture(session)
    db = session.db
    db.insert("Customer", [[1, 0, "ann"], [2, 1, "bob"]])
    out = tmp_path / "cust.csv"
    run_command(session, f"EXPORT Customer TO '{out}'")
    run_command(session, "CREATE TABLE Customer2 (id INT, person_id INT, name TEXT)")
    msg, code = run_command(session, f"IMPORT Customer2 FROM '{out}'")
    assert code == 0 and "2 records" in msg
    assert sorted(r.values for r in db.collection("Customer2").iter_live()) == sorted(
        r.values for r in db.collection("Customer").iter_live()
    )


def test_errors_carry_category_and_never_a_traceback(session):
    cases = {
        "SELECT FROM": "syntax",
        "SELECT x FROM NoSuchTable": "schema",
        "IMPORT Missing FROM 'nowhere.csv'": "schema",
    }
    for text, category in cases.items():
        with pytest.raises(EngineError) as err:
            run_command(session, text)
        assert err.value.category == category
        rendered = err.value.render()
        assert "Traceback" not in rendered
        assert rendered.startswith(f"{category} error")


def test_unknown_command_is_syntax_error(session):
    with pytest.raises(QuerySyntaxError):
        run_command(session, "FLY TO THE MOON")


def test_output_formats():
    result = QueryResult(columns=["a", "b"], rows=[(1, "x"), (None, "y")])
    table = format_result(result, "table")
    assert "(2 rows)" in table
    csv_text = format_result(result, "csv")
    assert csv_text.splitlines()[0] == "a,b"
    payload = json.loads(format_result(result, "json"))
    assert payload["columns"] == ["a", "b"]
    assert payload["rows"][0] == [1, "x"]


def test_main_executes_and_exits_clean(tmp_path, capsys):
    code = main(
        [
            "--db",
            str(tmp_path / "db"),
            "-e",
            "CREATE TABLE t (x INT)",
            "-e",
            ".stats",
        ]
    )
    out = capsys.readouterr().out
    assert code == 0
    assert "created table t" in out
    assert "t: kind=relation rows=0" in out


def test_main_error_exit_code(tmp_path, capsys):
    code = main(["--db", str(tmp_path / "db"), "-e", "SELECT x FROM missing"])
    err = capsys.readouterr().err
    assert code == 1
    assert "schema error" in err
    assert "Traceback" not in err


def test_main_rule_toggles_and_bad_rule(tmp_path, capsys):
    code = main(
        ["--db", str(tmp_path / "db"), "--rule", "traversal-pruning", "off", "-e", ".stats"]
    )
    assert code == 0
    code = main(["--db", str(tmp_path / "db"), "--rule", "nonsense", "on", "-e", ".stats"])
    assert code == 1


def test_main_audit_exit_code_two(tmp_path, capsys):
    # corrupt a graph store in-process to force an audit failure
    s = Session(SessionConfig(directory=str(tmp_path / "db")))
    try:
        load_fixture(s)
        store = s.db.graph_store("Interested_in")
        store.forward.targets[0].append(0)  # silent corruption
        store.forward.edge_count += 1
        out, code = run_command(s, ".audit")
        assert code == 2
        assert "INCONSISTENT" in out
    finally:
        s.close()


def test_bench_scale_zero_empty_report(capsys):
    code = main(["-e", ".bench 0"])
    out = capsys.readouterr().out
    assert code == 0
    assert "empty report" in out


def test_script_file_execution(tmp_path, capsys):
    script = tmp_path / "script.txt"
    script.write_text(
        "CREATE TABLE t (x INT);\n.stats\n", encoding="utf-8"
    )
    code = main(["--db", str(tmp_path / "db"), "-f", str(script)])
    out = capsys.readouterr().out
    assert code == 0
    assert "created table t" in out
