import pytest

pytest.importorskip("agmn_bridge", reason="binding package not installed")
