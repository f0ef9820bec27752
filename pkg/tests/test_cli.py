import json

import pytest

from fluxq.cli import main

import corpus

WEAK_DTD = """<!ELEMENT bib (book)*>
<!ELEMENT book (title|author)*>
<!ELEMENT title (#PCDATA)>
<!ELEMENT author (#PCDATA)>
"""
DOC = "<bib><book><author>A</author><title>T</title></book></bib>"


@pytest.fixture
def files(tmp_path):
    (tmp_path / "weak.dtd").write_text(WEAK_DTD)
    (tmp_path / "q3.xq").write_text(corpus.XMP_Q3)
    (tmp_path / "doc.xml").write_text(DOC)
    return tmp_path


def test_analyze_example_schema(capsys, tmp_path):
    dtd = tmp_path / "ex.dtd"
    dtd.write_text("<!ELEMENT r (((a*,b,c*,d)|e*),a*)>\n" + "".join(
        f"<!ELEMENT {x} (#PCDATA)>\n" for x in "abcde"))
    assert main(["analyze", "--dtd", str(dtd), "--element", "r"]) == 0
    out = capsys.readouterr().out
    assert "one-unambiguous: no" in out
    for pair in ("Ord(b, c)", "Ord(c, d)", "Ord(c, e)", "Ord(b, d)"):
        assert pair in out
    assert "Ord(a, c)" not in out


def test_compile_prints_flux(capsys, files):
    code = main(["compile", "--dtd", str(files / "weak.dtd"), "--query", str(files / "q3.xq"),
                 "--fold", "--dump-normal-form", "--dump-buffer-trees"])
    assert code == 0
    out = capsys.readouterr().out
    assert "-- normal form --" in out and "-- buffer trees --" in out
    assert "on-first past(title,author)" in out
    assert "$b\n  author *" in out


def test_run_with_oracle_and_stats(capsys, files):
    stats = files / "stats.jsonl"
    code = main(["run", "--dtd", str(files / "weak.dtd"), "--query", str(files / "q3.xq"),
                 "--input", str(files / "doc.xml"), "--oracle", "--stats-file", str(stats)])
    assert code == 0
    captured = capsys.readouterr()
    assert "<result><title>T</title><author>A</author></result>" in captured.out
    assert "MATCH" in captured.err
    recs = [json.loads(line) for line in stats.read_text().splitlines()]
    assert {"var": "$b", "events_hwm": 3, "bytes_hwm": recs[0]["bytes_hwm"],
            "items_hwm": 1, "fills": 1, "frees": 1} == recs[0]


def test_run_streams_to_stdout(capsys, files):
    code = main(["run", "--dtd", str(files / "weak.dtd"), "--query-text",
                 "{ for $t in $ROOT/bib/book/title return {$t} }",
                 "--input", str(files / "doc.xml")])
    assert code == 0
    assert capsys.readouterr().out == "<title>T</title>"


def test_gen_builtin(capsysbinary):
    assert main(["gen", "--schema", "bib", "--size", "2000", "--seed", "1"]) == 0
    assert capsysbinary.readouterr().out.startswith(b"<bib>")


@pytest.mark.parametrize("argv, code", [
    (["frobnicate"], 1),
    (["analyze", "--dtd", "/nonexistent.dtd"], 1),
    (["compile", "--dtd", "builtin:nope", "--query-text", "()"], 1),
    (["compile", "--dtd", "builtin:bib"], 1),
    (["compile", "--dtd", "builtin:bib", "--query-text", "{ for $x in return }"], 2),
    (["compile", "--dtd", "builtin:bib", "--query-text", "{ for $x in $ROOT/bib/nope return {$x} }"], 2),
    (["compile", "--dtd", "builtin:bib", "--query-text", "{ for $x in $ROOT/bib/nope return {$x} }",
      "--allow-dead-loops"], 0),
])
def test_exit_codes(argv, code, capsys):
    try:
        got = main(argv)
    except SystemExit as e:
        got = e.code
    assert got == code
    assert capsys.readouterr().err


def test_invalid_input_document(capsys, files):
    (files / "bad.xml").write_text("<bib><title>x</title></bib>")
    code = main(["run", "--dtd", str(files / "weak.dtd"), "--query", str(files / "q3.xq"),
                 "--input", str(files / "bad.xml")])
    assert code == 2
    assert "title" in capsys.readouterr().err
