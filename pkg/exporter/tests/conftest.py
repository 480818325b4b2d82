import os

os.environ.setdefault("HF_HUB_OFFLINE", "1")
os.environ.setdefault("TOKENIZERS_PARALLELISM", "false")

import pytest
import transformers

from tiny_bert import build_tiny_checkpoint

transformers.utils.logging.set_verbosity_error()
transformers.utils.logging.disable_progress_bar()


@pytest.fixture(scope="session")
def model_dir(tmp_path_factory) -> str:
    """One tiny checkpoint shared across the session (weights are read-only)."""
    return build_tiny_checkpoint(tmp_path_factory.mktemp("tiny-bert") / "ckpt", seed=0)
