"""s3ap: structured social world states for narratives, simulation and lookahead agents."""

from s3ap.config import VERSION as __version__
