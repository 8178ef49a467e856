import pytest

from ftcal import ToySpec, default_train_config, run_toy_pipeline


@pytest.fixture(scope="session")
def toy_report(tmp_path_factory):
    """One default toy run shared by every test that needs a trained pair."""
    outdir = tmp_path_factory.mktemp("toy_fixture")
    return run_toy_pipeline(ToySpec(), default_train_config(seed=0), outdir)
