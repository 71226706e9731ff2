import pytest

from tcdcnet import config as runconfig
from tcdcnet.errors import UsageError


def test_defaults_present():
    cfg = runconfig.resolve()
    assert cfg["theta"] == 0.7
    assert cfg["batch"] == 32
    assert cfg["lr"] == 0.1
    assert cfg["momentum"] == 0.9
    assert cfg["lr_patience"] == 10
    assert cfg["epochs"] == 200
    assert cfg["clip_len"] == 16
    assert cfg["crop_size"] == 112


def test_file_overrides_defaults(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\ntheta = 0.2\nepochs=5\n")
    cfg = runconfig.resolve(str(path))
    assert cfg["theta"] == 0.2
    assert cfg["epochs"] == 5


def test_flag_overrides_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("theta=0.2\n")
    cfg = runconfig.resolve(str(path), {"theta": 0.5})
    assert cfg["theta"] == 0.5


def test_unknown_key_rejected(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("not_a_key=1\n")
    with pytest.raises(UsageError):
        runconfig.resolve(str(path))
    with pytest.raises(UsageError):
        runconfig.resolve(None, {"not_a_key": 1})


def test_missing_file(tmp_path):
    with pytest.raises(UsageError):
        runconfig.resolve(str(tmp_path / "absent.cfg"))


def test_bad_line(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("theta 0.2\n")
    with pytest.raises(UsageError):
        runconfig.resolve(str(path))


def test_validation():
    with pytest.raises(UsageError):
        runconfig.resolve(None, {"stream": "rgb"})
    with pytest.raises(UsageError):
        runconfig.resolve(None, {"clip_len": 13})


def test_echo_roundtrip(tmp_path):
    cfg = runconfig.resolve(None, {"theta": 0.5})
    path = runconfig.echo(cfg, tmp_path)
    lines = dict(
        line.split("=", 1) for line in open(path).read().splitlines()
    )
    assert lines["theta"] == "0.5"
    assert lines["deterministic"] == "true"
    assert lines["target_val_acc"] == "none"
    assert sorted(lines) == sorted(runconfig.DEFAULTS)
