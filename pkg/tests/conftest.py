import pytest

from headfield import config
from headfield.synthdata import SynthSpec, generate_dataset, load_dataset


@pytest.fixture(scope="session")
def micro_dataset(tmp_path_factory):
    """8px, 1 subject x 1 expression x 1 lighting x 2 views + 1 holdout."""
    root = tmp_path_factory.mktemp("micro_data")
    spec = SynthSpec(subjects=1, expressions=1, lightings=1, views=2,
                     resolution=8, seed=3, samples_per_ray=24, holdout_views=1)
    manifest = generate_dataset(spec, str(root))
    return load_dataset(manifest)


@pytest.fixture(scope="session")
def shared_dataset(tmp_path_factory):
    """8px, 2 subjects x 2 expressions x 1 lighting for sharing tests."""
    root = tmp_path_factory.mktemp("shared_data")
    spec = SynthSpec(subjects=2, expressions=2, lightings=1, views=2,
                     resolution=8, seed=5, samples_per_ray=24, holdout_views=0)
    manifest = generate_dataset(spec, str(root))
    return load_dataset(manifest)


@pytest.fixture
def micro_cfg():
    return config.micro()
