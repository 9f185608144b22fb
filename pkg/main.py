import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent / "src"))

from temporal_gossip.cli import cli_app  # noqa: E402

if __name__ == "__main__":
    cli_app()
