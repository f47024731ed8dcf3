"""Builds the extension module with cargo and exercises it end to end.

    python3 python/smoke_test.py
"""

import json
import os
import shutil
import subprocess
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def build() -> str:
    subprocess.run(
        ["cargo", "build", "--release", "-p", "hrteam-py"],
        cwd=ROOT,
        check=True,
    )
    lib = os.path.join(ROOT, "target", "release", "libhrteam.so")
    dest = tempfile.mkdtemp(prefix="hrteam-py-")
    shutil.copy(lib, os.path.join(dest, "hrteam.so"))
    return dest


def main() -> None:
    sys.path.insert(0, build())
    import hrteam

    report = hrteam.run()
    assert report.outcome == "found", report
    assert report.leader == "UGV-1"
    chat = report.chat()
    assert chat[0] == "HUMAN-1>team: Robots, please find my keys."
    assert chat[-1] == "UGV-1>HUMAN-1: I found your keys in the entry-way."
    assert len(report.digests) == report.ticks + 1

    # determinism and replay
    again = hrteam.run()
    assert again.transcript == report.transcript
    assert hrteam.replay(report.transcript, "\n".join(report.digests), seed=report.seed) is None
    assert "tick 0" in hrteam.replay(report.transcript, "\n".join(report.digests), seed=report.seed + 1)

    # live stepping with a human typing
    sim = hrteam.Sim(human_script="")
    sim.say("Robots, please find my keys.")
    sim.step()
    while "look like" not in sim.transcript:
        sim.step()
    sim.say("They have a red keychain.", addressee=sim.leader)
    for _ in range(3):
        sim.step()
    snapshot = json.loads(sim.map_snapshot())
    assert snapshot["tick"] == sim.tick
    assert {r["id"] for r in snapshot["robots"]} == {"UGV-1", "DRONE-1"}

    no_keys = hrteam.shipped_scenario().replace('id = "OBJ-KEYS"', 'id = "OBJ-KEYS-GONE"')
    assert hrteam.validate_scenario(no_keys) == []
    assert hrteam.validate_scenario("grid = 3") != []

    try:
        hrteam.Sim(human_script="say hi")
    except hrteam.SimulationError as e:
        assert "line 1" in str(e)
    else:
        raise AssertionError("bad script accepted")

    with tempfile.TemporaryDirectory() as d:
        report.write_dir(d)
        assert os.path.exists(os.path.join(d, "transcript.jsonl"))

    print("smoke test ok:", report)


if __name__ == "__main__":
    main()
