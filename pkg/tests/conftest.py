import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from tcdcnet.datapipe import prepare_dataset, synth_dataset
from tcdcnet.net import TrainConfig, desk_net_config, train


def _quiet(_msg):
    pass


@pytest.fixture(scope="session")
def train_records():
    """The acceptance training set: 25 records per class, seed 7."""
    return synth_dataset(num_per_class=25, T=16, H=128, W=128, seed=7)


@pytest.fixture(scope="session")
def test_records():
    """Held-out split from an independent seed."""
    return synth_dataset(num_per_class=5, T=16, H=128, W=128, seed=8)


@pytest.fixture(scope="session")
def prepared_train(train_records):
    """stream -> list of network-ready stacks, computed once."""
    return {
        stream: prepare_dataset(train_records, stream)
        for stream in ("fused", "flow")
    }


@pytest.fixture(scope="session")
def prepared_test(test_records):
    return {
        stream: prepare_dataset(test_records, stream)
        for stream in ("fused", "flow")
    }


@pytest.fixture(scope="session")
def trained_models(train_records, prepared_train):
    """(stream, clip_len) -> (state, metrics) for the 4 stream/length
    combinations shared by the training and ensemble criteria."""
    models = {}
    for stream, clip_len in (("fused", 16), ("fused", 12),
                             ("flow", 16), ("flow", 12)):
        in_channels = 5 if stream == "fused" else 2
        net_cfg = desk_net_config(in_channels=in_channels, clip_len=clip_len,
                                  num_classes=4, theta=0.7)
        # defaults scaled to desk size: 200 -> 60 epochs, and lr 0.1 ->
        # 0.03 (the unnormalized desk backbone diverges at 0.1; see the
        # training docs). Early stop once the accuracy bar is met.
        train_cfg = TrainConfig(epochs=60, lr=0.03, seed=7,
                                target_val_acc=0.9)
        state, metrics = train(net_cfg, train_cfg, train_records,
                               prepared=prepared_train[stream], log=_quiet)
        models[(stream, clip_len)] = (state, metrics)
    return models
