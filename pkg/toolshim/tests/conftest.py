from pathlib import Path

import pytest

from toolshim.fixtures import install_corpus


@pytest.fixture
def corpus_dir(tmp_path) -> Path:
    target = tmp_path / "tools"
    install_corpus(target, core=True, pairs=3, fillers=12)
    return target
