import time

import pytest

from speechedit.acoustic import AcousticModel, DurationModel, ModelConfig
from speechedit.corpus import PreparedCorpus, prepare_corpus
from speechedit.editing import SpeechEditor
from speechedit.toy import build_toy_corpus

OVERFIT_SEED = 1234
OVERFIT_ITERATIONS = 500
OVERFIT_SCALE = 0.125


@pytest.fixture(scope="session")
def toy_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("toy-corpus")
    return build_toy_corpus(root)


@pytest.fixture(scope="session")
def cache_dir(tmp_path_factory, toy_corpus):
    out = tmp_path_factory.mktemp("cache")
    prepare_corpus(
        toy_corpus["manifest"], toy_corpus["lexicon"], toy_corpus["alignments"], out
    )
    return out


@pytest.fixture(scope="session")
def corpus(cache_dir):
    return PreparedCorpus(cache_dir)


@pytest.fixture(scope="session")
def desk_config():
    return ModelConfig(scale_factor=OVERFIT_SCALE)


@pytest.fixture(scope="session")
def trained(corpus, desk_config):
    """The overfit run the acceptance criteria are defined against:
    2 utterances, scale 0.125, 500 iterations, seed 1234."""
    start = time.monotonic()
    acoustic = AcousticModel(
        config=desk_config, seed=OVERFIT_SEED, iterations=OVERFIT_ITERATIONS
    ).fit(corpus)
    duration = DurationModel(
        config=desk_config, seed=OVERFIT_SEED, iterations=OVERFIT_ITERATIONS
    ).fit(corpus, text_encoder=acoustic.net_.text_encoder)
    elapsed = time.monotonic() - start
    return {"acoustic": acoustic, "duration": duration, "train_seconds": elapsed}


@pytest.fixture(scope="session")
def editor(trained, corpus):
    return SpeechEditor(trained["acoustic"], trained["duration"], corpus.lexicon)


@pytest.fixture(scope="session")
def untrained_editor(corpus, desk_config):
    """Fresh random weights: enough for mechanics that hold for any model."""
    acoustic = AcousticModel(config=desk_config, seed=99, iterations=0).fit(corpus)
    duration = DurationModel(config=desk_config, seed=99, iterations=0).fit(
        corpus, text_encoder=acoustic.net_.text_encoder
    )
    return SpeechEditor(acoustic, duration, corpus.lexicon)


@pytest.fixture(scope="session")
def quick_checkpoints(tmp_path_factory, cache_dir):
    """Briefly trained checkpoints for CLI/service plumbing tests."""
    from speechedit.cli import main

    out = tmp_path_factory.mktemp("ckpt")
    rc = main(
        [
            "train",
            "--cache",
            str(cache_dir),
            "--out",
            str(out),
            "--iterations",
            "8",
            "--seed",
            "7",
        ]
    )
    assert rc == 0
    return {"acoustic": out / "acoustic.ckpt", "duration": out / "duration.ckpt"}
