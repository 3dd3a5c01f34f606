import pytest

from movepose.bench import run_bench
from movepose.config import load_keypoints
from movepose.errors import ConfigurationError
from movepose.model import ModelConfig, build_lite, build_movepose

PAIRS = load_keypoints().flip_pairs


@pytest.fixture(scope="module")
def movepose():
    return build_movepose().init_weights(0)


def test_fifty_iterations_recorded(movepose):
    rep = run_bench(movepose, iters=50, warmup=2)
    assert rep.iters == 50 and len(rep.samples_ms) == 50
    assert all(s > 0 for s in rep.samples_ms)
    assert rep.median_ms <= rep.p95_ms
    assert rep.fps == pytest.approx(1000.0 / rep.mean_ms)
    assert rep.model == "movepose" and rep.upsample == "deconv" and rep.threads == 1


@pytest.mark.slow
def test_flip_costs_about_two_forwards(movepose):
    plain = run_bench(movepose, iters=15, warmup=2)
    flipped = run_bench(movepose, iters=15, warmup=2, flip_test=True, flip_pairs=PAIRS)
    assert flipped.median_ms >= 1.8 * plain.median_ms


def test_bilinear_and_lite_paths_benchable():
    for g in (build_movepose(ModelConfig(upsample="bilinear")), build_lite()):
        rep = run_bench(g.init_weights(0), iters=3, warmup=1)
        assert rep.iters == 3
    assert run_bench(build_movepose(ModelConfig(upsample="bilinear")).init_weights(0), iters=1).upsample == "bilinear"


def test_report_without_timing_is_deterministic(movepose):
    a = run_bench(movepose, iters=2, warmup=0).to_dict(timing=False)
    b = run_bench(movepose, iters=2, warmup=0).to_dict(timing=False)
    assert a == b and "fps" not in a


def test_bad_arguments(movepose):
    with pytest.raises(ConfigurationError):
        run_bench(movepose, iters=0)
    with pytest.raises(ConfigurationError):
        run_bench(movepose, threads=0)
