from __future__ import annotations

from pathlib import Path

from conftest import all_clear_rg
from nexthop.cli import main
from nexthop.model import Network, format_instance


def write_instance(tmp_path: Path, net: Network, rg0=None, name="net.txt") -> Path:
    path = tmp_path / name
    path.write_text(format_instance(net, rg0))
    return path


def test_run_coordinate_summary(tmp_path, capsys, nogood):
    inst = write_instance(tmp_path, nogood, all_clear_rg(nogood))
    code = main(["run", str(inst), "--scheduler", "coordinate"])
    out = capsys.readouterr().out
    assert code == 0
    assert "delivered 2/2 by round 2" in out
    assert "equilibrium: no" in out


def test_run_fair_stabilise_summary(tmp_path, capsys, notme2):
    inst = write_instance(tmp_path, notme2)
    code = main(
        ["run", str(inst), "--scheduler", "fair-stabilise", "--stop", "equilibrium"]
    )
    out = capsys.readouterr().out
    assert code == 0
    assert "delivered 2/2 by round 1" in out
    assert "equilibrium: yes" in out


def test_run_scheduler_filter_mismatch(tmp_path, capsys, notme2):
    inst = write_instance(tmp_path, notme2)
    code = main(["run", str(inst), "--scheduler", "coordinate"])
    assert code == 3
    assert "error" in capsys.readouterr().err


def test_run_stop_unmet_exit_code(tmp_path, capsys, nogood):
    inst = write_instance(tmp_path, nogood, all_clear_rg(nogood))
    # one random round on the no-equilibrium instance cannot stabilise
    code = main(
        [
            "run",
            str(inst),
            "--scheduler",
            "random",
            "--stop",
            "equilibrium",
            "--max-rounds",
            "1",
        ]
    )
    assert code == 2


def test_replay_reproduces_trace(tmp_path, capsys, nogood):
    inst = write_instance(tmp_path, nogood, all_clear_rg(nogood))
    trace1 = tmp_path / "a.trace"
    perms = tmp_path / "perms.txt"
    assert (
        main(
            [
                "run",
                str(inst),
                "--scheduler",
                "coordinate",
                "--trace",
                str(trace1),
                "--perms-out",
                str(perms),
            ]
        )
        == 0
    )
    trace2 = tmp_path / "b.trace"
    assert (
        main(
            [
                "run",
                str(inst),
                "--scheduler",
                "replay",
                "--replay-file",
                str(perms),
                "--stop",
                "rounds",
                "--max-rounds",
                str(len(perms.read_text().splitlines())),
                "--trace",
                str(trace2),
            ]
        )
        == 0
    )
    assert trace1.read_bytes() == trace2.read_bytes()


def test_run_seed_determinism(tmp_path, capsys, nogood):
    inst = write_instance(tmp_path, nogood)
    t1, t2 = tmp_path / "1.trace", tmp_path / "2.trace"
    for t in (t1, t2):
        main(
            [
                "run",
                str(inst),
                "--scheduler",
                "random",
                "--seed",
                "42",
                "--stop",
                "rounds",
                "--max-rounds",
                "5",
                "--trace",
                str(t),
            ]
        )
    capsys.readouterr()
    assert t1.read_bytes() == t2.read_bytes()


def test_gen_gadget_and_check_stable(tmp_path, capsys):
    cnf = tmp_path / "f.cnf"
    cnf.write_text("p cnf 1 1\n1 1 1 0\n")
    out = tmp_path / "gadget.txt"
    assert (
        main(
            ["gen-gadget", "--cnf", str(cnf), "--padding", "2", "--out", str(out)]
        )
        == 0
    )
    assert "13 nodes" in capsys.readouterr().out
    labels = out.with_suffix(out.suffix + ".labels").read_text()
    assert "label 0 r" in labels

    tree = tmp_path / "tree.txt"
    tree.write_text("1 0\n")  # just the dummy sink attached
    assert main(["check-stable", str(out), "--tree", str(tree)]) == 0
    capsys.readouterr()


def test_check_stable_fixture(tmp_path, capsys, notme2):
    inst = write_instance(tmp_path, notme2)
    tree = tmp_path / "tree.txt"
    tree.write_text("1 2\n2 0\n")
    assert main(["check-stable", str(inst), "--tree", str(tree)]) == 0
    assert "stable" in capsys.readouterr().out
    tree.write_text("1 0\n2 0\n")
    assert main(["check-stable", str(inst), "--tree", str(tree)]) == 2


def test_max_stable_tree_and_enumerate(tmp_path, capsys, nogood, notme2):
    inst = write_instance(tmp_path, notme2)
    assert main(["max-stable-tree", str(inst)]) == 0
    assert "size 3" in capsys.readouterr().out
    inst2 = write_instance(tmp_path, nogood, name="nogood.txt")
    assert main(["enumerate-equilibria", str(inst2)]) == 0
    assert "0 equilibria" in capsys.readouterr().out


def test_export_dot_deterministic(tmp_path, capsys, tri):
    inst = write_instance(tmp_path, tri)
    assert main(["export-dot", str(inst)]) == 0
    first = capsys.readouterr().out
    assert main(["export-dot", str(inst)]) == 0
    second = capsys.readouterr().out
    assert first == second
    assert '1 -> 0 [label="1"]' in first
    assert '2 -> 1 [label="1"]' in first


def test_export_dot_empty_graph(tmp_path, capsys, tri):
    inst = write_instance(tmp_path, tri)
    arcs = tmp_path / "arcs.txt"
    arcs.write_text("")
    assert main(["export-dot", str(inst), "--rg", str(arcs)]) == 0
    out = capsys.readouterr().out
    assert "->" not in out


def test_bad_instance_error_exit(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("nodes 2\nsink 0\nprefs 1: 1\n")
    assert main(["run", str(bad)]) == 3


def test_seed_env_variable(tmp_path, capsys, monkeypatch, nogood):
    inst = write_instance(tmp_path, nogood)
    t_env, t_flag = tmp_path / "env.trace", tmp_path / "flag.trace"
    monkeypatch.setenv("NEXTHOP_SEED", "42")
    main(["run", str(inst), "--stop", "rounds", "--max-rounds", "3",
          "--trace", str(t_env)])
    monkeypatch.delenv("NEXTHOP_SEED")
    main(["run", str(inst), "--seed", "42", "--stop", "rounds",
          "--max-rounds", "3", "--trace", str(t_flag)])
    capsys.readouterr()
    assert t_env.read_bytes() == t_flag.read_bytes()
