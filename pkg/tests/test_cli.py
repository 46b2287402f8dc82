"""End-to-end runs of the command-line entry points."""

import csv

import pytest

from consentledger.blocklog import BlockLog, FileLogStore
from consentledger.cli import main
from consentledger.keys import ConsentFact, WorldStateDesign
from consentledger.membership import population_registry
from consentledger.pipeline import PipelineConfig, SyncLedger
from consentledger.transactions import access_request, assign_role, grant_consent


def _write_scripted_log(tmp_path):
    """A small committed history plus the registry file that produced it."""
    registry = population_registry(3)
    log_path = tmp_path / "chain.log"
    store = FileLogStore(log_path)
    ledger = SyncLedger(
        WorldStateDesign.IWS,
        registry,
        PipelineConfig(block_size=1),
        log=BlockLog(store),
    )
    steps = [
        grant_consent("i0", ConsentFact("i0", "r0", "d0", "w0", "t0")),
        assign_role("w0", "d0", "c0", "w0"),
        access_request("c0", "c0", "d0", "w0", "r0", "t0"),
    ]
    for step in steps:
        ledger.submit_one(step)
    store.close()
    registry_path = tmp_path / "actors.txt"
    registry.save_file(registry_path)
    return log_path, registry_path


def test_bench_conflict_sweep_with_csv_and_logs(tmp_path, capsys):
    out_csv = tmp_path / "results.csv"
    log_base = tmp_path / "chain.log"
    code = main(
        [
            "bench",
            "conflict",
            "--out",
            str(out_csv),
            "--log-file",
            str(log_base),
        ]
    )
    assert code == 0
    captured = capsys.readouterr().out
    assert captured.count("conflict design=iws") == 3
    with open(out_csv, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 4  # header + one row per cell
    assert rows[1][0] == "conflict"
    # one chain log per cell, each independently verifiable
    for index in range(3):
        cell_log = tmp_path / f"chain-{index}.log"
        assert cell_log.exists()
        assert main(["verify", "--log", str(cell_log)]) == 0


def test_bench_refuses_existing_chain_log(tmp_path, capsys):
    # multi-cell sweeps derive one file per cell from the base name
    (tmp_path / "chain-0.log").write_bytes(b"\x00\x00\x00\x01x")
    code = main(
        ["bench", "conflict", "--log-file", str(tmp_path / "chain.log")]
    )
    assert code == 2
    assert "already holds a chain" in capsys.readouterr().err


def test_bench_policy_endorser_mismatch_exits_2(capsys):
    code = main(["bench", "conflict", "--policy", "1/2", "--endorsers", "3"])
    assert code == 2
    assert "does not match" in capsys.readouterr().err


def test_bench_rejects_unknown_kind():
    with pytest.raises(SystemExit):
        main(["bench", "nonsense"])


def test_audit_subcommand(tmp_path, capsys):
    log_path, registry_path = _write_scripted_log(tmp_path)
    code = main(
        ["audit", "individual:i0", "--log", str(log_path), "--registry", str(registry_path)]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "grant_consent" in out
    assert "access_grant" in out
    assert "# 2 events for individual:i0" in out

    code = main(["audit", "watchdog:w0", "--log", str(log_path)])
    assert code == 0
    assert "assign_role" in capsys.readouterr().out


def test_audit_rejects_bad_subject(tmp_path, capsys):
    log_path, _ = _write_scripted_log(tmp_path)
    assert main(["audit", "i0", "--log", str(log_path)]) == 2
    assert main(["audit", "martian:x1", "--log", str(log_path)]) == 2
    capsys.readouterr()


def test_verify_and_replay_detect_tampering(tmp_path, capsys):
    log_path, registry_path = _write_scripted_log(tmp_path)
    assert main(["verify", "--log", str(log_path)]) == 0
    assert (
        main(["replay", "--log", str(log_path), "--registry", str(registry_path)]) == 0
    )
    capsys.readouterr()

    raw = bytearray(log_path.read_bytes())
    raw[len(raw) // 2] ^= 0x01
    broken = tmp_path / "broken.log"
    broken.write_bytes(bytes(raw))
    assert main(["verify", "--log", str(broken)]) == 1
    assert main(["replay", "--log", str(broken)]) == 1
    assert main(["audit", "individual:i0", "--log", str(broken)]) == 1
    err = capsys.readouterr()
    assert "failed at height" in err.out
    assert "refusing" in err.err


def test_replay_reports_summary(tmp_path, capsys):
    log_path, registry_path = _write_scripted_log(tmp_path)
    code = main(
        ["replay", "--log", str(log_path), "--registry", str(registry_path)]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "committed=3" in out
    assert "interpreted=true" in out
