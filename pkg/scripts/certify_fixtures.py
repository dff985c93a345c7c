#!/usr/bin/env python3
"""Run the whole bundled fixture corpus through `sipcert certify` and tabulate."""

import json
import subprocess
import sys

from sipcert.fixtures import fixture_names, fixture_path


def main():
    rows = []
    for name in fixture_names():
        proc = subprocess.run(
            [sys.executable, "-m", "sipcert", "certify", fixture_path(name), "--json"],
            capture_output=True,
            text=True,
        )
        report = json.loads(proc.stdout)
        verdict = report.get("verdict", "error")
        residual = report.get("residual")
        if residual is None:
            residual = report.get("certificate", {}).get("residual")
        rows.append((name, verdict, proc.returncode, residual))
    width = max(len(r[0]) for r in rows)
    print(f"{'fixture':<{width}}  {'verdict':<18} exit  residual")
    for name, verdict, code, residual in rows:
        res = "-" if residual is None else format(residual, ".2e")
        print(f"{name:<{width}}  {verdict:<18} {code:<5} {res}")


if __name__ == "__main__":
    main()
