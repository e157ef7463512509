import pytest
from conftest import BONGARD_BIAS_TEXT, bongard12_kb_text
from rdb_fixtures import CHEM_SCHEMA_WITH_CLASS, CHEM_TABLES, write_tables

from foldt.cli import main
from foldt.model import load_model, tree_depth


@pytest.fixture
def bias_file(tmp_path):
    p = tmp_path / "bias.s"
    p.write_text(BONGARD_BIAS_TEXT)
    return p


@pytest.fixture
def data_file(tmp_path):
    p = tmp_path / "b12.kb"
    p.write_text(bongard12_kb_text())
    return p


def test_learn_and_classify(tmp_path, bias_file, data_file, capsys):
    model_path = tmp_path / "m.foldt"
    rc = main(
        [
            "learn",
            "--data", str(data_file),
            "--settings", str(bias_file),
            "--algo", "lds",
            "--out", str(model_path),
        ]
    )
    assert rc == 0
    out = capsys.readouterr().out
    assert "12 examples" in out and "passes 3" in out
    model = load_model(model_path)
    assert tree_depth(model.tree) == 3

    preds = tmp_path / "preds.tsv"
    rc = main(
        [
            "classify",
            "--model", str(model_path),
            "--data", str(data_file),
            "--out", str(preds),
        ]
    )
    assert rc == 0
    assert "accuracy 12/12 = 1.00000" in capsys.readouterr().out
    lines = preds.read_text().splitlines()
    assert lines[0] == "id\tactual\tpredicted"
    assert len(lines) == 13


def test_gen_and_bench(tmp_path, bias_file, capsys):
    data = tmp_path / "bon.kb"
    rc = main(["gen", "--domain", "bongard", "--count", "40", "--seed", "3", "--out", str(data)])
    assert rc == 0
    report = tmp_path / "bench.tsv"
    rc = main(
        [
            "bench",
            "--data", str(data),
            "--settings", str(bias_file),
            "--k", "1,2",
            "--out", str(report),
            "--workdir", str(tmp_path / "w"),
        ]
    )
    assert rc == 0
    assert report.read_text().startswith("k\tN\tcpu_seconds")
    assert len(report.read_text().splitlines()) == 3


def test_convert_cli(tmp_path, capsys):
    tables = write_tables(tmp_path / "chem", CHEM_TABLES)
    schema = tmp_path / "schema.s"
    schema.write_text(CHEM_SCHEMA_WITH_CLASS)
    rc = main(
        [
            "convert",
            "--tables", str(tables),
            "--schema", str(schema),
            "--out", str(tmp_path / "chem.kb"),
            "--bg", str(tmp_path / "bg.pl"),
        ]
    )
    assert rc == 0
    assert "wrote 5 examples" in capsys.readouterr().out
    assert "begin(model('H2O'))." in (tmp_path / "chem.kb").read_text()


def test_discretize_cli(tmp_path, capsys):
    kb = tmp_path / "vals.kb"
    blocks = []
    for i, (v, label) in enumerate([(1, "a"), (2, "a"), (3, "a"), (8, "b"), (9, "b"), (10, "b")], 1):
        blocks.append(f"begin(model({i})). val(x,{v}). {label}. end(model({i})).")
    kb.write_text("\n".join(blocks) + "\n")
    settings = tmp_path / "s.s"
    settings.write_text("classes([a,b]).\ndiscretize(val(_,C), C).\n")
    rc = main(["discretize", "--data", str(kb), "--settings", str(settings)])
    assert rc == 0
    assert "5.5" in capsys.readouterr().out


def test_usage_error_exit_1(capsys):
    assert main(["learn"]) == 1
    assert main(["frobnicate"]) == 1


def test_data_error_exit_2(tmp_path, bias_file, capsys):
    bad = tmp_path / "bad.kb"
    bad.write_text("begin(model(1)). pos. neg. end(model(1)).\n")
    rc = main(
        ["learn", "--data", str(bad), "--settings", str(bias_file), "--out", str(tmp_path / "m")]
    )
    assert rc == 2
    assert "error:" in capsys.readouterr().err


def test_classify_unlabeled(tmp_path, bias_file, data_file, capsys):
    model_path = tmp_path / "m.foldt"
    main(["learn", "--data", str(data_file), "--settings", str(bias_file), "--out", str(model_path)])
    capsys.readouterr()
    unlabeled = tmp_path / "u.kb"
    unlabeled.write_text(
        "begin(model(u1)). triangle(t1). inside(t1,t2). circle(t2). end(model(u1)).\n"
    )
    rc = main(["classify", "--model", str(model_path), "--data", str(unlabeled)])
    assert rc == 0
    captured = capsys.readouterr()
    assert "u1\t?\tpos" in captured.out
    assert "classified 1 examples" in captured.err
