"""Shared fixtures: a live server running the deterministic encoder."""
from __future__ import annotations

import threading
import time

import pytest
import uvicorn

from embedsvc import HashEncoder, create_app


@pytest.fixture(scope="session")
def live_server():
    """embedsvc on an OS-assigned port, torn down after the session."""
    config = uvicorn.Config(
        create_app(HashEncoder(dim=64)), host="127.0.0.1", port=0, log_level="warning"
    )
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 10.0
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("server did not start within 10s")
        time.sleep(0.02)
    port = server.servers[0].sockets[0].getsockname()[1]
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=5)
