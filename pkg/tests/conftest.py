import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import fig1_graph  # noqa: E402


@pytest.fixture
def fig1():
    return fig1_graph()


@pytest.fixture
def fig1_file(tmp_path, fig1):
    from p2pcap import write_instance

    path = tmp_path / "fig1.p2p"
    write_instance(fig1, path)
    return path
