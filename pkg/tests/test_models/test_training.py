import math

from pydantic import ValidationError
from pytest import raises

from bandtint import constants, models


def test_train_config():
    cfg = models.TrainConfig()

    assert (cfg.steps, cfg.batch, cfg.lr, cfg.seed) == (500, 4, 1e-3, 42)
    assert cfg.loss == constants.LossKind.L1
    assert cfg.validation == constants.ValidationProtocol.NONE
    assert not cfg.joint_stubs
    assert cfg.loss_config.alpha == 0.5

    with raises(ValidationError):
        models.TrainConfig(lr=-1)
    with raises(ValidationError):
        models.TrainConfig(validation='kfold10')
    with raises(ValidationError):
        models.TrainConfig(alpha=1.5)


def test_loss_config():
    cfg = models.LossConfig()

    assert cfg.c1 == 0.01**2
    assert cfg.c2 == 0.03**2

    with raises(ValidationError, match='odd'):
        models.LossConfig(window=4)


def test_run_manifest(tmp_path):
    report = models.MetricsReport(psnr_r=math.inf, psnr_g=1, psnr_b=2, psnr_avg=3, ssim=1)
    manifest = models.RunManifest(
        name='eval',
        command='eval',
        corpus=models.CorpusSpec(count=2),
        scheme='five',
        reports={'identity': report.model_dump(mode='json')},
    )

    path = manifest.write(tmp_path / 'run')

    assert path == tmp_path / 'run' / 'manifest.json'
    restored = models.RunManifest.model_validate_json(path.read_text())
    assert restored == manifest
    assert restored.reports['identity']['psnr_r'] == 'inf'
