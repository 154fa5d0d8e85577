import logging
import math
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from kpareto.core import ClipDescriptor, MetricKind, OperatingPoint, RateControlMode
from kpareto.encoders import (
    EncodeCache,
    EncodeRequest,
    EncodeResult,
    EncodeSession,
    ExternalBackend,
    ExternalEncoderConfig,
    SyntheticBackend,
    SyntheticClipModel,
    encode,
    generate_corpus,
    synthetic_distortion,
)
from kpareto.encoders.base import KUnsupported, ProcessFailed, StatsParseError
from kpareto.encoders.external import X265_TEMPLATES, render_command
from kpareto.encoders.lambdas import FrameType, QpOutOfRange, default_lambda, scaled_lambda
from kpareto.encoders.synthetic import ssim_from_db

CBR, CRF = RateControlMode.CBR, RateControlMode.CRF
CLIP = ClipDescriptor("clip-a", "clip-a.y4m")
FAKE = Path(__file__).with_name("fake_encoder.py")


def req(value=1000, k=1.0, mode=CBR, tune=MetricKind.PSNR, clip=CLIP):
    return EncodeRequest(clip, OperatingPoint(mode, value), k, tune)


# lambdas

@pytest.mark.parametrize("ft,qp,expected", [
    ("I", 12, 0.57),
    ("P", 12, 0.85),
    ("B", 24, 0.68 * 2 * 2 ** 4),
])
def test_lambda_goldens(ft, qp, expected):
    assert abs(default_lambda(ft, qp) - expected) <= 1e-12


def test_lambda_b_value():
    assert default_lambda(FrameType.B, 24) == pytest.approx(21.76, abs=1e-12)


def test_lambda_b_clamp_upper():
    assert default_lambda("B", 48) == pytest.approx(0.68 * 4 * 2 ** 12)


@pytest.mark.parametrize("qp", [-1, 52])
def test_qp_out_of_range(qp):
    with pytest.raises(QpOutOfRange):
        default_lambda("P", qp)


def test_scaled_lambda():
    assert scaled_lambda("P", 30, 0.782) == pytest.approx(0.782 * default_lambda("P", 30))


# synthetic model

def test_cbr_returns_requested_rate():
    b = SyntheticBackend({CLIP.id: SyntheticClipModel()})
    assert b.run(req(1000)).achieved_bitrate == 1000.0


def test_k_insensitive_when_c_zero():
    b = SyntheticBackend({CLIP.id: SyntheticClipModel(c=0.0)})
    assert b.run(req(1000, 0.5)).psnr == b.run(req(1000, 1.0)).psnr


def test_model_value():
    b = SyntheticBackend({CLIP.id: SyntheticClipModel(a=20, b=3, c=0)})
    assert b.run(req(1000)).psnr == pytest.approx(20 + 3 * math.log(1000))
    assert b.run(req(1000)).psnr == pytest.approx(40.72, abs=5e-3)


def test_penalty_is_c_at_one_log_unit():
    m = SyntheticClipModel(c=2.0, k_lo_opt=0.8, k_hi_opt=0.8)
    drop = synthetic_distortion(m, 1500, 0.8) - synthetic_distortion(m, 1500, 0.8 * math.e)
    assert drop == pytest.approx(2.0, abs=1e-12)


def test_optimum_at_r_min():
    m = SyntheticClipModel(c=1.5, k_lo_opt=0.6, k_hi_opt=1.2)
    assert synthetic_distortion(m, m.r_min, 0.6) == pytest.approx(m.a + m.b * math.log(m.r_min))


def test_crf_anchor():
    m = SyntheticClipModel(gamma=0.0, r0=2500.0, crf0=28)
    b = SyntheticBackend({CLIP.id: m})
    for k in (0.3, 1.0, 1.7):
        assert b.run(req(28, k, CRF)).achieved_bitrate == pytest.approx(2500.0)


def test_crf_rate_decreases_with_crf():
    m = SyntheticClipModel()
    assert m.crf_rate(24, 1.0) > m.crf_rate(30, 1.0) > m.crf_rate(36, 1.0)
    assert m.crf_rate(30, 1.0) / m.crf_rate(36, 1.0) == pytest.approx(2.0)


def test_argmax_over_k_tracks_drifting_optimum():
    m = SyntheticClipModel(c=2.0, k_lo_opt=0.55, k_hi_opt=1.25)
    ks = np.arange(0.25, 2.0 + 5e-4, 1e-3)
    for rate in np.geomspace(m.r_min, m.r_max, 10):
        d = [synthetic_distortion(m, rate, k) for k in ks]
        assert abs(ks[int(np.argmax(d))] - m.k_opt(rate)) <= 1e-3


def test_different_k_wins_in_different_bands():
    m = SyntheticClipModel(c=2.0, k_lo_opt=0.6, k_hi_opt=1.2)
    lo, hi = 300.0, 10000.0
    assert synthetic_distortion(m, lo, 0.6) > synthetic_distortion(m, lo, 1.2)
    assert synthetic_distortion(m, hi, 1.2) > synthetic_distortion(m, hi, 0.6)


def test_ssim_surrogate_bounds():
    assert ssim_from_db(40.0) == pytest.approx(0.9999)
    assert ssim_from_db(-50.0) == 1e-6
    assert 0 < ssim_from_db(5.0) < ssim_from_db(10.0) <= 1.0


@given(st.integers(100, 20000), st.floats(0.25, 2.0), st.integers(0, 1000))
def test_synthetic_is_pure(rate, k, seed):
    m = SyntheticClipModel(c=1.0, k_lo_opt=0.7, k_hi_opt=1.1, seed=seed, jitter=0.02)
    a = SyntheticBackend({CLIP.id: m}).run(req(rate, k))
    b = SyntheticBackend({CLIP.id: m}).run(req(rate, k))
    assert a == b
    assert abs(a.achieved_bitrate / rate - 1) <= 0.02


def test_generate_corpus_is_seeded():
    a, b = generate_corpus(5, 3), generate_corpus(5, 3)
    assert a == b
    assert generate_corpus(5, 4) != a
    assert [c.id for c, _ in a] == [f"synth-3-{i:04d}" for i in range(5)]


def test_unknown_clip():
    with pytest.raises(ValueError):
        SyntheticBackend({}).run(req())


# cache

def result(psnr=40.0):
    return EncodeResult(1000.0, psnr, 0.99, "synthetic-v1")


def test_cache_rounds_k():
    c = EncodeCache()
    c.store(c.key_for(req(k=0.70041), "e"), result())
    assert c.lookup(c.key_for(req(k=0.700), "e")) == result()


def test_cache_miss_before_store():
    c = EncodeCache()
    assert c.lookup(c.key_for(req(), "e")) is None


def test_cache_first_wins(caplog):
    c = EncodeCache()
    key = c.key_for(req(), "e")
    c.store(key, result(40.0))
    with caplog.at_level(logging.WARNING):
        c.store(key, result(41.0))
    assert c.lookup(key).psnr == 40.0
    assert "keeping the first" in caplog.text


def test_cache_identical_store_is_silent(tmp_path, caplog):
    c = EncodeCache(tmp_path / "c.jsonl")
    key = c.key_for(req(), "e")
    with caplog.at_level(logging.WARNING):
        c.store(key, result())
        c.store(key, result())
    assert caplog.text == ""
    assert len((tmp_path / "c.jsonl").read_text().splitlines()) == 1


def test_cache_persists(tmp_path):
    path = tmp_path / "c.jsonl"
    c = EncodeCache(path)
    for v in (500, 1000, 2000):
        c.store(c.key_for(req(v), "e"), result(float(v)))
    again = EncodeCache(path)
    assert len(again) == 3
    assert again.lookup(again.key_for(req(1000), "e")).psnr == 1000.0


def test_cache_skips_corrupt_lines(tmp_path):
    path = tmp_path / "c.jsonl"
    c = EncodeCache(path)
    c.store(c.key_for(req(500), "e"), result())
    with open(path, "a") as fh:
        fh.write("{not json\n")
        fh.write('{"key": {"clip": "x"}}\n')
    c2 = EncodeCache(path)
    c2.store(c2.key_for(req(600), "e"), result())
    c3 = EncodeCache(path)
    assert c3.skipped_lines == 2
    assert len(c3) == 2


def test_session_counts_and_caches():
    backend = SyntheticBackend({CLIP.id: SyntheticClipModel()})
    s = EncodeSession(backend, EncodeCache())
    s.encode(req(1000))
    s.encode(req(1000))
    s.encode(req(1000, 1.0004))
    assert s.invocations == backend.calls == 1
    s.encode(req(2000))
    assert s.per_clip[CLIP.id] == 2


def test_encode_helper():
    backend = SyntheticBackend({CLIP.id: SyntheticClipModel()})
    cache = EncodeCache()
    encode(req(), backend, cache)
    encode(req(), backend, cache)
    assert backend.calls == 1


# external backend

def fake_config(tmp_path, extra="", **kw):
    py = sys.executable
    tmpl = {
        "cbr": f"{py} {FAKE} --input {{input}} --bitrate {{bitrate}} --k {{k}} --tune-{{tune}} --{{tune}} "
               f"--csv {{csv}} --output {{output}} {extra}",
        "crf": f"{py} {FAKE} --input {{input}} --crf {{crf}} --k {{k}} --csv {{csv}} --output {{output}} {extra}",
    }
    return ExternalEncoderConfig(command_templates=tmpl, work_dir=tmp_path / "enc", **kw)


def test_default_template_shape():
    cfg = ExternalEncoderConfig()
    argv, out, csv_path = render_command(cfg, req(3000, tune=MetricKind.SSIM))
    assert argv[:5] == ["x265", "--input", "clip-a.y4m", "--bitrate", "3000"]
    assert "--tune-ssim" in argv and "--ssim" in argv
    assert argv[argv.index("--csv") + 1] == str(csv_path)
    assert argv[-1] == str(out)
    assert "{" not in " ".join(argv)
    assert "--crf" in X265_TEMPLATES[CRF]


def test_default_template_rejects_scaled_k():
    with pytest.raises(KUnsupported):
        render_command(ExternalEncoderConfig(), req(k=0.8))


def test_placeholders_substituted_literally(tmp_path):
    clip = ClipDescriptor("a b", "/videos/my clip;rm.y4m")
    argv, _, _ = render_command(fake_config(tmp_path), req(1000, 0.8, clip=clip))
    assert "/videos/my clip;rm.y4m" in argv
    assert argv[argv.index("--k") + 1] == "0.800"


def test_template_validation():
    with pytest.raises(ValueError):
        ExternalEncoderConfig(command_templates={"cbr": "enc --input {input} --output {output}"})
    with pytest.raises(ValueError):
        ExternalEncoderConfig(command_templates={"cbr": "enc {input} {output} {crf} {bitrate}"})


def test_external_round_trip(tmp_path):
    b = ExternalBackend(fake_config(tmp_path))
    r = b.run(req(1500, 0.8))
    assert r.achieved_bitrate == pytest.approx(1500.0)
    assert r.psnr == pytest.approx(20 + 3 * math.log(1500), abs=1e-3)
    assert 0 < r.ssim < 1
    assert r.encoder_id == "x265"
    crf = b.run(req(30, 1.0, CRF))
    assert crf.achieved_bitrate == pytest.approx(2000.0)


def test_external_through_cache(tmp_path):
    b = ExternalBackend(fake_config(tmp_path))
    s = EncodeSession(b, EncodeCache(tmp_path / "cache.jsonl"))
    s.encode(req(1000, 0.9))
    s2 = EncodeSession(b, EncodeCache(tmp_path / "cache.jsonl"))
    s2.encode(req(1000, 0.9))
    assert b.calls == 1 and s2.invocations == 0


def test_nonzero_exit(tmp_path):
    with pytest.raises(ProcessFailed, match="forced failure"):
        ExternalBackend(fake_config(tmp_path, "--fail")).run(req())


def test_timeout(tmp_path):
    with pytest.raises(ProcessFailed, match="timed out"):
        ExternalBackend(fake_config(tmp_path, "--sleep 5", timeout=0.5)).run(req())


def test_missing_binary(tmp_path):
    cfg = ExternalEncoderConfig(command_templates={"cbr": "no-such-encoder-xyz {input} {bitrate} {output}"},
                                work_dir=tmp_path)
    with pytest.raises(ProcessFailed):
        ExternalBackend(cfg).run(req())


def test_missing_csv(tmp_path):
    with pytest.raises(StatsParseError):
        ExternalBackend(fake_config(tmp_path, "--no-csv")).run(req())


def test_missing_tuned_metric_fails(tmp_path):
    with pytest.raises(StatsParseError):
        ExternalBackend(fake_config(tmp_path, "--no-ssim")).run(req(tune=MetricKind.SSIM))


def test_missing_other_metric_is_nan(tmp_path):
    r = ExternalBackend(fake_config(tmp_path, "--no-ssim")).run(req(tune=MetricKind.PSNR))
    assert math.isnan(r.ssim) and math.isfinite(r.psnr)


def test_pattern_and_size_extraction(tmp_path):
    stats = {
        "bitrate": {"from_size": True},
        "psnr": {"pattern": r"Global PSNR: ([0-9.]+)"},
        "ssim": {"column": "SSIM", "aggregate": "mean"},
    }
    cfg = fake_config(tmp_path, stats=stats, fps=30.0)
    r = ExternalBackend(cfg).run(req(1200))
    # 5 s of stream over a 150-frame, 30 fps clip
    assert r.achieved_bitrate == pytest.approx(1200.0, rel=1e-6)
    assert r.psnr == pytest.approx(20 + 3 * math.log(1200) - math.log(1 / 0.8) ** 2, abs=1e-3)


def test_config_from_json(tmp_path):
    path = tmp_path / "enc.json"
    path.write_text('{"command_templates": {"CBR": "enc -i {input} -b {bitrate} -k {k} -o {output}"},'
                    ' "stats": {"psnr": {"pattern": "PSNR=([0-9.]+)"}}, "timeout": 10}')
    cfg = ExternalEncoderConfig.from_json(path)
    assert cfg.supports_k(CBR)
    assert cfg.stats["psnr"] == {"pattern": "PSNR=([0-9.]+)"}
    assert cfg.stats["bitrate"] == {"column": "Bitrate"}
