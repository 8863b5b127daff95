import pytest

from utils.tail_model import load_tabulated_csv
from utils.validate_tail_table import main, repair_tail_table, validate_tail_table


def test_valid_table(tail_csv, capsys):
    assert validate_tail_table(tail_csv("t,I\n0,0\n1,1\n4,2\n"))
    out = capsys.readouterr().out
    assert "✅ 3 grid points" in out
    assert "SubLinear" in out


def test_missing_file(tmp_path, capsys):
    assert not validate_tail_table(tmp_path / "nope.csv")
    assert "does not exist" in capsys.readouterr().out


def test_invalid_without_repair(tail_csv, capsys):
    path = tail_csv("t,I\n2,1\n1,0.5\n")
    assert not validate_tail_table(path)
    assert "line 3" in capsys.readouterr().out
    assert not (path.parent / "tail_repaired.csv").exists()


def test_repair_sorts_and_smooths(tail_csv):
    path = tail_csv("t,I\n3,2.0\n1,0.5\n2,0.4\n2,9\nx,1\n")
    assert validate_tail_table(path, repair=True)
    repaired = load_tabulated_csv(path.parent / "tail_repaired.csv")
    assert repaired.grid_t == (1.0, 2.0, 3.0)
    assert repaired.grid_I == (0.5, 0.5, 2.0)


def test_repair_needs_header(tail_csv):
    assert not repair_tail_table(tail_csv("a,b\n1,2\n2,3\n"))


def test_main_exit_code(tail_csv):
    with pytest.raises(SystemExit) as exc:
        main([str(tail_csv("t,I\n1,1\n"))])
    assert exc.value.code == 1


def test_main_success(tail_csv, capsys):
    main([str(tail_csv("t,I\n1,1\n2,2\n"))])
    assert "Validation completed successfully" in capsys.readouterr().out
