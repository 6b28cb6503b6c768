import logging

import pytest
from hypothesis import HealthCheck, settings

from aqnet.server import IngestServer
from aqnet.store import ChannelStore

settings.register_profile(
    "ci", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("ci")

logging.getLogger("aqnet").setLevel(logging.INFO)


@pytest.fixture
def store(tmp_path):
    s = ChannelStore(tmp_path / "data")
    yield s
    s.close()


@pytest.fixture
def server(tmp_path):
    s = IngestServer(ChannelStore(tmp_path / "data"), port=0, admin_key="test-admin")
    s.start()
    yield s
    s.stop()
