import pytest

from apps.core.tests.factories import EffectStreamFactory, ModelConfigFactory, PposConfigFactory


@pytest.fixture(autouse=True)
def interim_settings(settings, tmp_path):
    """Keep run logs and reports inside the test's temporary directory."""
    settings.INTERIM_ANALYSIS = {
        **settings.INTERIM_ANALYSIS,
        'RESULT_LOG': str(tmp_path / 'runs.jsonl'),
        'OUTPUT_DIR': str(tmp_path / 'out'),
        'SEED': 0,
    }
    return settings.INTERIM_ANALYSIS


@pytest.fixture
def model_config():
    return ModelConfigFactory()


@pytest.fixture
def closed_form_ppos():
    return PposConfigFactory()


@pytest.fixture
def null_stream():
    return EffectStreamFactory()
