import os

import pytest

from s3ap.config import load_settings
from s3ap.core.llm_backend import ResponseCache, backend_from_profile
from s3ap.core.narrative_parser import ParseTask, parse_narrative
from s3ap.core.narrative_templates import render_narrative

pytestmark = pytest.mark.live

LIVE_PROFILE = os.getenv("S3AP_LIVE_PROFILE", "gpt-4o")


@pytest.fixture
def live_backend(tmp_path):
    settings = load_settings()
    return backend_from_profile(settings.profile(LIVE_PROFILE), ResponseCache(tmp_path / "cache"))


def test_hosted_model_parses_a_story(live_backend, sally_anne):
    traj, attempts = parse_narrative(render_narrative(sally_anne), ParseTask.named("ToMi"), live_backend)
    assert len(attempts) <= 3
    assert set(traj.agents) == {"Sally", "Anne"}
    assert traj.metadata["backend"] == live_backend.identity
