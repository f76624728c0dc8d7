import dataclasses

import pytest

from rimsim import config, mlp, pipeline

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def small_cfg():
    """Quick configuration: 2,000 pre-training records, 40 epochs."""
    cfg = config.ExperimentConfig(seed=42)
    return cfg.replace(training=dataclasses.replace(
        cfg.training, pretrain_users=200, pretrain_days=10, epochs=40))


@pytest.fixture(scope="session")
def small_pretrained(small_cfg):
    return pipeline.pretrain(small_cfg)


@pytest.fixture(scope="session")
def small_checkpoint(small_pretrained, tmp_path_factory):
    path = tmp_path_factory.mktemp("ckpt") / "small.json"
    ck = small_pretrained.checkpoint
    mlp.save_checkpoint(ck.params, ck.scaler, ck.arch, path)
    return path


@pytest.fixture(scope="session")
def default_pretrained():
    """Pre-training at the default configuration (10,000 records, up to 200 epochs)."""
    return pipeline.pretrain(config.ExperimentConfig(seed=42))
