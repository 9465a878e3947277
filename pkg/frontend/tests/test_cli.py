"""Entry point tests: exit codes and argument plumbing."""

from __future__ import annotations

from aoiiplots.cli import main

from test_render import pull_sweep_rows, row, write_csv


def test_successful_render(tmp_path, capsys):
    path = write_csv(tmp_path / "in.csv", pull_sweep_rows())
    out = tmp_path / "fig.png"
    assert main(["pull_vs_Q", "--in", path, "--out", str(out)]) == 0
    assert out.exists()
    assert str(out) in capsys.readouterr().out


def test_missing_column_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("pull_policy,Q\npps,10\n")
    code = main(["pull_vs_Q", "--in", str(path), "--out", str(tmp_path / "f.png")])
    assert code == 2
    assert "missing required columns" in capsys.readouterr().err


def test_constrained_best_options(tmp_path):
    path = write_csv(
        tmp_path / "joint.csv",
        [row(psi_avg_ms=1.2, theta_p99_ms=20),
         row(pull_policy="maf", push_policy="maf", psi_avg_ms=1.5, theta_p99_ms=90)],
    )
    out = tmp_path / "best.png"
    code = main([
        "constrained_best", "--in", path, "--out", str(out),
        "--constraint", "theta_p99_ms<=30", "--objective", "psi_avg_ms",
    ])
    assert code == 0 and out.exists()


def test_bad_constraint_exit_code(tmp_path, capsys):
    path = write_csv(tmp_path / "in.csv", [row()])
    code = main([
        "constrained_best", "--in", path, "--out", str(tmp_path / "f.png"),
        "--constraint", "psi_avg_ms<1",
    ])
    assert code == 2
    assert "constraint" in capsys.readouterr().err
