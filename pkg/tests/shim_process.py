"""Spawn the TypeScript shim for integration tests, if it can be built."""

import re
import shutil
import subprocess
import time
import urllib.request
from contextlib import contextmanager
from pathlib import Path

SHIM_DIR = Path(__file__).parent.parent / "shim"
SERVER_JS = SHIM_DIR / "dist" / "src" / "server.js"


class ShimUnavailable(Exception):
    pass


def _ensure_built():
    if SERVER_JS.exists():
        return
    if shutil.which("tsc") is None:
        raise ShimUnavailable("tsc is not installed")
    build = subprocess.run(
        ["tsc", "-p", str(SHIM_DIR)], capture_output=True, text=True)
    if build.returncode != 0 or not SERVER_JS.exists():
        raise ShimUnavailable(f"shim build failed: {build.stdout}{build.stderr}")


@contextmanager
def spawn_shim():
    """Start the shim on an ephemeral port; yields its base URL."""
    if shutil.which("node") is None:
        raise ShimUnavailable("node is not installed")
    _ensure_built()
    process = subprocess.Popen(
        ["node", str(SERVER_JS), "--port", "0"],
        stdout=subprocess.PIPE, stderr=subprocess.STDOUT, text=True)
    try:
        line = process.stdout.readline()
        match = re.search(r"listening on (http://\S+)", line)
        if not match:
            raise ShimUnavailable(f"unexpected shim startup output: {line!r}")
        base_url = match.group(1)
        deadline = time.time() + 10.0
        while True:
            try:
                with urllib.request.urlopen(base_url + "/v1/health", timeout=1.0):
                    break
            except OSError:
                if time.time() > deadline:
                    raise ShimUnavailable("shim did not become healthy") from None
                time.sleep(0.05)
        yield base_url
    finally:
        process.terminate()
        process.wait(timeout=10)
