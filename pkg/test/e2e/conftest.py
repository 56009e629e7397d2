"""End-to-end test configuration."""

import subprocess


def run_cli(*args: str, cwd: str | None = None) -> subprocess.CompletedProcess[str]:
    """Run the CLI as a subprocess."""
    return subprocess.run(
        ["lagrange-converters", *args],
        capture_output=True,
        text=True,
        check=False,
        cwd=cwd,
    )
