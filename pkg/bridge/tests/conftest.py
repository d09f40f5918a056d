from __future__ import annotations

import threading
import time
from pathlib import Path

import pytest
import uvicorn

from stepsql_bridge.service import create_app

REPO_ROOT = Path(__file__).resolve().parents[2]
FIXTURES = REPO_ROOT / "tests" / "data" / "bridge_fixtures.json"
SYNTH_SCHEMA = REPO_ROOT / "src" / "stepsql" / "data" / "synth_schema.json"


class LiveServer:
    """uvicorn on an ephemeral localhost port, torn down after the tests."""

    def __init__(self, app):
        self.config = uvicorn.Config(app, host="127.0.0.1", port=0, log_level="warning")
        self.server = uvicorn.Server(self.config)
        self.thread = threading.Thread(target=self.server.run, daemon=True)

    def __enter__(self) -> str:
        self.thread.start()
        deadline = time.time() + 10
        while not self.server.started:
            if time.time() > deadline:
                raise RuntimeError("bridge server did not start")
            time.sleep(0.02)
        port = self.server.servers[0].sockets[0].getsockname()[1]
        return f"http://127.0.0.1:{port}"

    def __exit__(self, *exc):
        self.server.should_exit = True
        self.thread.join(timeout=10)


@pytest.fixture(scope="session")
def stub_server_url():
    app = create_app(mode="stub", fixtures=FIXTURES)
    with LiveServer(app) as url:
        yield url
