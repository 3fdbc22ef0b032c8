import csv
import io
import json

import pytest

from cuspcert import cli
from cuspcert.report import LemmaReport


def run(tmp_path, *argv):
    out = tmp_path / "report.out"
    code = cli.main([*argv, "--out", str(out)])
    return code, out.read_text() if out.exists() else ""


def test_config_file_grammar(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("[run]\ngroup = FIX-PATH9  # fixture\nlemmas = gm310, subball1\n"
                    "delta = estimate\nseed = 4\ntiming = no\n")
    cfg = cli.load_config(str(path))
    assert cfg.group == "FIX-PATH9" and cfg.lemmas == ("gm310", "subball1")
    assert cfg.delta is None and cfg.seed == 4 and cfg.timing is False


@pytest.mark.parametrize("text", ["[run]\nradius = 0\n", "[run]\nbogus = 1\n",
                                  "[run]\nseed = x\n", "[run]\nlemmas = nope\n"])
def test_bad_config_rejected(text):
    with pytest.raises(cli.UsageError):
        cli.load_config(text=text).validate()


def test_path9_gm310_report(tmp_path):
    code, text = run(tmp_path, "verify", "gm310", "--group", "FIX-PATH9")
    assert code == 0
    data = json.loads(text)
    (rep,) = data["reports"]
    assert rep["lemma"] == "gm310" and rep["status"] == "pass"
    assert rep["pairs_checked"] > 0
    assert data["totals"]["failed"] == 0


def test_rerun_is_byte_identical(tmp_path):
    argv = ["all", "--group", "FIX-PATH9", "--seed", "7"]
    _, first = run(tmp_path, *argv)
    _, second = run(tmp_path, *argv)
    assert first == second


def test_totals_consistent():
    cfg = cli.RunConfig(group="FIX-PATH9", lemmas=("subball1", "subball2", "geo"))
    report = cli.run_suite(cfg)
    t = report.totals
    assert t["checked"] == sum(r.pairs_checked for r in report.reports)
    assert t["passed"] + t["failed"] + t["inconclusive"] == t["reports"] == 3
    assert report.exit_code == cli.EXIT_PASS


def test_delta_runs_first():
    cfg = cli.RunConfig(group="FIX-PATH9", lemmas=("geo", "delta"))
    report = cli.run_suite(cfg)
    assert [r.lemma for r in report.reports] == ["delta", "geo"]
    assert report.delta == 2


def fake_report(violations):
    cfg = cli.RunConfig(group="FIX-PATH9", delta=1)
    rep = LemmaReport("subball1", pairs_checked=3)
    for i in range(violations):
        rep.add_violation(i=i)
    return cli.SuiteReport(cfg.to_dict(), {}, 1, None, [rep, LemmaReport("geo")])


def test_csv_rows_match_violations():
    rows = list(csv.reader(io.StringIO(cli.emit(fake_report(3), "csv"))))
    assert rows[0] == list(cli.CSV_COLUMNS)
    assert len(rows) == 3 + 1


def test_text_has_delta_line():
    text = cli.emit(fake_report(0), "text")
    assert text.startswith("delta estimate:")


def test_json_parses_back():
    report = fake_report(2)
    data = json.loads(cli.emit(report, "json"))
    assert data["totals"]["violations"] == 2
    assert LemmaReport.from_dict(data["reports"][0]).violation_count == 2


def test_exit_codes():
    assert fake_report(1).exit_code == cli.EXIT_FAIL
    assert fake_report(0).exit_code == cli.EXIT_PASS
    only_inconclusive = fake_report(0)
    only_inconclusive.reports = [LemmaReport("geo")]
    assert only_inconclusive.exit_code == cli.EXIT_INCONCLUSIVE


def test_usage_errors_exit_3(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["verify", "nonsense"])
    assert exc.value.code == cli.EXIT_USAGE
    assert cli.main(["all", "--config", str(tmp_path / "missing.ini")]) == cli.EXIT_USAGE
    assert cli.main(["all", "--group", "Z^2 rel q"]) == cli.EXIT_USAGE
    assert cli.main(["all", "--group", "FIX-PATH9", "--out", str(tmp_path / "no" / "x")]) == cli.EXIT_USAGE


def test_unwritable_path():
    with pytest.raises(cli.UsageError):
        cli.emit(fake_report(0), "json", "/nonexistent/dir/report.json")


def test_build_and_export(tmp_path):
    code, text = run(tmp_path, "build", "--group", "FIX-Z2-SINGLE", "--radius", "4", "--depth", "3")
    assert code == 0 and json.loads(text)["R"] == 4
    code, text = run(tmp_path, "export", "--group", "FIX-PATH9", "--depth", "2")
    assert code == 0 and len(text.splitlines()) > 9


def test_inapplicable_lemma_is_inconclusive():
    cfg = cli.RunConfig(group="FIX-PATH9", lemmas=("tight",), delta=1)
    report = cli.run_suite(cfg)
    assert report.reports[0].status == "inconclusive"
    assert report.exit_code == cli.EXIT_INCONCLUSIVE
