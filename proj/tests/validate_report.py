"""Runs a few scenetex commands and validates their run reports against the schema."""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

import jsonschema


def main() -> int:
    cli, schema_path = sys.argv[1], sys.argv[2]
    schema = json.loads(Path(schema_path).read_text())
    validator = jsonschema.Draft202012Validator(schema)
    failures = 0
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        runs = [
            (["fixture", "cube", "--resolution", "64", "--out", str(tmp / "cube")], tmp / "cube" / "report.json", 0),
            (["fixture", "synthetic", "--out", str(tmp / "syn")], tmp / "syn" / "report.json", 0),
            (["eval", str(tmp / "syn" / "instance.ply"), str(tmp / "syn" / "instance.ply"),
              "--report", str(tmp / "eval.json")], tmp / "eval.json", 0),
            (["condition", "--mesh", str(tmp / "cube" / "cube.obj"), "--config", str(tmp / "cube" / "manifest.json"),
              "--out", str(tmp / "cond")], tmp / "cond" / "report.json", 0),
            (["optimize", "--camera", str(tmp / "missing.json"), "--instance", "a.ply", "--mesh", "b.obj",
              "--out", str(tmp / "bad")], tmp / "bad" / "report.json", 2),
            (["propagate", "--mesh", str(tmp / "cube" / "cube.obj"), "--generator", "exit 1", "--retries", "0",
              "--out", str(tmp / "gen")], tmp / "gen" / "report.json", 3),
        ]
        for args, report, expected in runs:
            proc = subprocess.run([cli, *args, "-q"], capture_output=True, text=True)
            name = " ".join(args[:2])
            if proc.returncode != expected:
                print(f"FAIL {name}: exit {proc.returncode}, expected {expected}\n{proc.stderr}")
                failures += 1
                continue
            doc = json.loads(report.read_text())
            errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.path))
            for err in errors:
                print(f"FAIL {name}: {'/'.join(map(str, err.path))}: {err.message}")
            failures += bool(errors)
            if not errors:
                print(f"ok   {name}")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
