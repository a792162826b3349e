import math
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from codecspoof.codecsim import (
    CodecConfig,
    CodecConfigError,
    ExternalCodecError,
    PacketModel,
    Waveform,
    WaveformError,
    apply_dtx,
    apply_packet_loss,
    cvsd,
    degrade,
    format_codec,
    g711,
    g726,
    parse_codec,
    read_wav,
    resample,
    run_external,
    snr_db,
    utterance_seed,
    write_wav,
)
from codecspoof.codecsim import adpcm, companding
from codecspoof.codecsim.cvsd import STEP_MIN_16K


def sine(freq=1000.0, rate=8000, seconds=1.0, dbfs=-6.0):
    t = np.arange(int(rate * seconds)) / rate
    return Waveform(10 ** (dbfs / 20) * np.sin(2 * np.pi * freq * t), rate)


def speechlike(rate=8000, seconds=1.0, seed=0):
    """Harmonic complex with a slow amplitude contour, band-limited below 3.4 kHz."""
    rng = np.random.default_rng(seed)
    t = np.arange(int(rate * seconds)) / rate
    x = sum(rng.uniform(0.2, 1.0) / k * np.sin(2 * np.pi * 150 * k * t + rng.uniform(0, 6)) for k in range(1, 22))
    x *= 0.5 + 0.5 * np.sin(2 * np.pi * 3 * t) ** 2
    return Waveform(0.3 * x / np.max(np.abs(x)), rate)


# ---- waveform


def test_waveform_invariants():
    with pytest.raises(WaveformError):
        Waveform(np.zeros(10), 44100)
    with pytest.raises(WaveformError):
        Waveform(np.array([0.0, np.nan]), 8000)
    w = Waveform(np.zeros(4), 8000)
    with pytest.raises(ValueError):
        w.samples[0] = 1.0


def test_wav_round_trip(tmp_path):
    w = sine(rate=16000, seconds=0.1)
    write_wav(w, tmp_path / "a.wav")
    r = read_wav(tmp_path / "a.wav")
    assert r.rate == 16000 and len(r) == len(w)
    assert np.max(np.abs(r.samples - w.samples)) <= 1 / 32768


# ---- config strings


def test_codec_string_examples():
    assert format_codec(parse_codec("g726:bitrate=16000,loss=0.1,band=narrow")) == "g726:bitrate=16000,loss=0.1"
    assert parse_codec("g711:law=mu") == CodecConfig("g711", law="mu")
    c = parse_codec("cvsd:bitrate=16000,dtx=true")
    assert c.dtx and c.bitrate_bps == 16000 and c.category == "satellite"
    e = parse_codec("external:cmd=sox -t raw - -t raw -, x")
    assert e.external_cmd == "sox -t raw - -t raw -, x"


@pytest.mark.parametrize(
    "bad",
    ["mp3", "g711:law=x", "g726:bitrate=8000", "cvsd:bitrate=24000", "g711:bitrate=16000", "g726:law=mu",
     "g711:loss=1.5", "passthrough:foo=1", "g711:band=wide", "external", "g711:cmd=cat", "g711:dtx=maybe"],
)
def test_codec_string_rejects(bad):
    with pytest.raises(CodecConfigError):
        parse_codec(bad)


configs = st.one_of(
    st.builds(CodecConfig, st.just("g711"), st.none(), st.sampled_from(["mu", "a"]),
              st.sampled_from([0.0, 0.05, 0.1, 0.3]), st.booleans()),
    st.builds(CodecConfig, st.just("g726"), st.sampled_from([16000, 24000, 32000, 40000]), st.none(),
              st.floats(0, 1), st.booleans()),
    st.builds(CodecConfig, st.just("cvsd"), st.sampled_from([16000, 32000, 64000]), st.none(),
              st.floats(0, 1), st.booleans(), st.sampled_from(["narrow", "wide"])),
    st.builds(CodecConfig, st.just("passthrough"), st.none(), st.none(), st.floats(0, 1), st.booleans(),
              st.sampled_from(["narrow", "wide"])),
)


@given(configs)
def test_codec_string_round_trip(cfg):
    assert parse_codec(format_codec(cfg)) == cfg


# ---- G.711


def test_mu_law_curve_values():
    assert companding.mu_compress(1.0) == pytest.approx(1.0)
    assert companding.mu_compress(0.1) == pytest.approx(math.log(1 + 25.5) / math.log(256), abs=1e-12)
    assert companding.mu_compress(0.1) == pytest.approx(0.5910, abs=5e-5)


@pytest.mark.parametrize("law", ["mu", "a"])
def test_g711_zero_maps_to_zero(law):
    assert companding.encode(0.0, law) == 128
    assert companding.decode(128, law) == 0.0
    out = g711(Waveform(np.zeros(100), 8000), law)
    assert np.all(out.samples == 0.0)


@pytest.mark.parametrize("law", ["mu", "a"])
def test_g711_codes_are_8_bit_and_monotone(law):
    x = np.linspace(-1, 1, 5001)
    codes = companding.encode(x, law)
    assert codes.dtype == np.uint8
    assert np.all(np.diff(codes.astype(int)) >= 0)
    assert len(np.unique(codes)) <= 256


@pytest.mark.parametrize("law", ["mu", "a"])
def test_g711_snr_and_shape(law):
    w = sine()
    out = g711(w, law)
    assert len(out) == len(w) and out.rate == 8000
    assert snr_db(w.samples, out.samples) > 30.0


def test_g711_needs_8k():
    with pytest.raises(WaveformError):
        g711(sine(rate=16000), "mu")


# ---- G.726


def test_g726_zeros_and_length():
    z = Waveform(np.zeros(8000), 8000)
    for rate in adpcm.BITS_PER_RATE:
        out = g726(z, rate)
        assert len(out) == 8000 and np.all(out.samples == 0.0)


def test_g726_codes_fit_bit_budget():
    x = speechlike().samples
    for rate, bits in adpcm.BITS_PER_RATE.items():
        codes = adpcm.encode(x, rate)
        assert np.max(np.abs(codes)) <= 2 ** (bits - 1) - 1
        assert np.array_equal(adpcm.decode(codes, rate), g726(speechlike(), rate).samples)


@pytest.mark.parametrize("signal", [sine(dbfs=0.0), sine(dbfs=-6.0), speechlike(seed=0), speechlike(seed=1)])
def test_g726_snr_monotone_in_bitrate(signal):
    snrs = [snr_db(signal.samples, g726(signal, r).samples) for r in (16000, 24000, 32000, 40000)]
    assert all(b >= a for a, b in zip(snrs, snrs[1:])), snrs
    assert snrs[-1] > snrs[0]


def test_g726_rejects_bitrate():
    with pytest.raises(ValueError):
        g726(sine(), 8000)


# ---- CVSD


def test_cvsd_one_bit_per_sample_at_16k():
    from codecspoof.codecsim.cvsd import bits_per_sample

    assert bits_per_sample(16000, 16000) == 1
    assert bits_per_sample(16000, 64000) == 4
    assert bits_per_sample(8000, 16000) == 2
    with pytest.raises(ValueError):
        bits_per_sample(16000, 24000)
    with pytest.raises(ValueError):
        bits_per_sample(16000, 48000)


def test_cvsd_idle_channel():
    out = cvsd(Waveform(np.zeros(16000), 16000), 16000)
    assert len(out) == 16000
    assert np.max(np.abs(out.samples)) <= STEP_MIN_16K + 1e-15


@pytest.mark.parametrize("rate", [8000, 16000])
def test_cvsd_more_bits_better(rate):
    w = sine(freq=800.0, rate=rate, dbfs=-12.0)
    one, four = (snr_db(w.samples, cvsd(w, rate * k).samples) for k in (1, 4))
    assert four > one


def test_cvsd_snr_monotone_on_speechlike():
    w = speechlike(rate=16000)
    snrs = [snr_db(w.samples, cvsd(w, r).samples) for r in (16000, 32000, 64000)]
    assert snrs[0] <= snrs[1] <= snrs[2], snrs


# ---- packet loss


def test_packet_loss_zero_rate_identity():
    w = speechlike()
    assert apply_packet_loss(w, PacketModel(loss_rate=0.0)).samples is w.samples


def test_packet_loss_total():
    out = apply_packet_loss(speechlike(), PacketModel(loss_rate=1.0, seed=4))
    assert np.all(out.samples == 0.0)


def test_packet_loss_binomial_mean():
    w = Waveform(np.full(8000, 0.5), 8000)  # 50 packets of 160 samples
    n, p, trials = 50, 0.3, 10_000
    dropped = np.empty(trials)
    for t in range(trials):
        out = apply_packet_loss(w, PacketModel(loss_rate=p, seed=t)).samples.reshape(n, 160)
        dropped[t] = np.sum(np.all(out == 0.0, axis=1))
    sigma_mean = math.sqrt(n * p * (1 - p) / trials)
    assert abs(dropped.mean() - n * p) < 3 * sigma_mean
    assert dropped.var() == pytest.approx(n * p * (1 - p), rel=0.1)


def test_packet_loss_repeat_previous():
    x = np.repeat(np.arange(1, 11, dtype=float) / 20, 160)
    w = Waveform(x, 8000)
    model = PacketModel(loss_rate=0.5, seed=7, concealment="repeat_previous")
    y = apply_packet_loss(w, model).samples.reshape(10, 160)
    from codecspoof.codecsim.channel import drop_mask

    lost = drop_mask(10, 0.5, 7)
    expected = []
    prev = 0.0
    for i in range(10):
        prev = prev if lost[i] else x[i * 160]
        expected.append(prev)
    assert np.allclose(y, np.array(expected)[:, None])


def test_packet_model_validation():
    with pytest.raises(ValueError):
        PacketModel(packet_ms=0)
    with pytest.raises(ValueError):
        PacketModel(loss_rate=1.2)


# ---- DTX


def _oracle_active(x, frame, thr, hang):
    count, left = 0, 0
    for i in range(0, len(x), frame):
        seg = x[i : i + frame]
        level = 10 * math.log10(float(np.mean(seg**2)) + 1e-20)
        if level > thr:
            count, left = count + 1, hang
        elif left:
            count, left = count + 1, left - 1
    return count


def test_dtx_silence():
    out, active = apply_dtx(Waveform(np.zeros(8000), 8000))
    assert active == 0
    rms_db = 10 * np.log10(np.mean(out.samples**2))
    assert rms_db == pytest.approx(-60.0, abs=0.5)


def test_dtx_full_scale_sine():
    w = sine(dbfs=0.0)
    out, active = apply_dtx(w)
    assert active == 50
    assert np.array_equal(out.samples, w.samples)


@pytest.mark.parametrize("rate", [8000, 16000])
def test_dtx_half_and_half(rate):
    n = rate
    x = np.zeros(n)
    x[n // 2 :] = sine(rate=rate, seconds=0.5).samples
    sil_first, act1 = apply_dtx(Waveform(x, rate))
    assert act1 == 25 == _oracle_active(x, rate // 50, -45.0, 4)
    x2 = x[::-1].copy()
    out2, act2 = apply_dtx(Waveform(x2, rate))
    assert act2 == _oracle_active(x2, rate // 50, -45.0, 4)
    assert 25 <= act2 <= 25 + 4
    # active frames are passed through untouched
    assert np.array_equal(out2.samples[: n // 2], x2[: n // 2])


# ---- resampling


def test_resample_round_trip_snr():
    w = sine(rate=16000, dbfs=-6.0)
    down = resample(w, 8000)
    assert abs(len(down) - len(w) // 2) <= 1
    back = resample(down, 16000)
    assert abs(len(back) - len(w)) <= 1
    assert snr_db(w.samples, back.samples[: len(w)]) > 25.0


def test_resample_dc():
    w = Waveform(np.full(16000, 0.25), 16000)
    for target in (8000, 16000):
        out = resample(w, target)
        assert np.allclose(out.samples, 0.25, atol=1e-6)
    up = resample(Waveform(np.full(8000, -0.4), 8000), 16000)
    assert np.allclose(up.samples, -0.4, atol=1e-6)


def test_resample_rejects_rate():
    with pytest.raises(WaveformError):
        resample(sine(), 44100)


# ---- pipeline


def test_degrade_passthrough_is_identity():
    w = speechlike(rate=16000)
    out = degrade(w, parse_codec("passthrough"), seed=3)
    assert np.array_equal(out.samples, w.samples)


def test_degrade_g711_composition():
    w = speechlike(rate=16000)
    out = degrade(w, parse_codec("g711:law=mu"), seed=3)
    ref = resample(g711(resample(w, 8000), "mu"), 16000)
    assert np.array_equal(out.samples, ref.samples)


ALL_CODECS = [
    "passthrough", "passthrough:band=narrow", "g711:law=a,dtx=true", "g711:law=mu,loss=0.2",
    "g726:bitrate=24000,loss=0.1", "cvsd:bitrate=16000", "cvsd:bitrate=64000,dtx=true", "cvsd:bitrate=16000,band=narrow",
]


@pytest.mark.parametrize("spec", ALL_CODECS)
@pytest.mark.parametrize("n", [16000, 12345, 330])
def test_degrade_length_and_determinism(spec, n):
    w = Waveform(speechlike(rate=16000, seconds=1.0).samples[:n], 16000)
    cfg = parse_codec(spec)
    a = degrade(w, cfg, seed=11)
    b = degrade(w, cfg, seed=11)
    assert len(a) == n and a.rate == 16000
    assert np.array_equal(a.samples, b.samples)
    assert np.all(np.abs(a.samples) <= 1.0)


def test_degrade_needs_16k():
    with pytest.raises(WaveformError):
        degrade(sine(), parse_codec("passthrough"))


@pytest.mark.parametrize("codec", ["g711:law=mu", "g726:bitrate=32000", "cvsd:bitrate=32000"])
def test_loss_monotone_in_rate(codec):
    w = speechlike(rate=16000, seed=2)
    means = []
    for rate in (0.0, 0.1, 0.3, 0.5):
        cfg = parse_codec(f"{codec},loss={rate}")
        means.append(np.mean([snr_db(w.samples, degrade(w, cfg, seed=s).samples) for s in range(20)]))
    assert all(b <= a for a, b in zip(means, means[1:])), means


def test_utterance_seed_stable():
    assert utterance_seed(0, "U1") == utterance_seed(0, "U1")
    assert utterance_seed(0, "U1") != utterance_seed(1, "U1")
    assert utterance_seed(0, "U1") != utterance_seed(0, "U2")
    assert 0 <= utterance_seed(123, "x") < 2**63


ECHO = f"{sys.executable} -c \"import sys; sys.stdout.buffer.write(sys.stdin.buffer.read())\""


def test_external_identity_and_rate(tmp_path):
    w = speechlike(rate=16000)
    out = degrade(w, parse_codec(f"external:cmd={ECHO}"))
    assert np.max(np.abs(out.samples - w.samples)) <= 1 / 32768
    script = tmp_path / "rate.py"
    script.write_text(
        "import os, sys, struct\n"
        "n = len(sys.stdin.buffer.read()) // 2\n"
        "sys.stdout.buffer.write(struct.pack('<h', int(os.environ['CODECSIM_RATE']) // 2) * (n + 5))\n"
    )
    got = run_external(sine(), f"{sys.executable} {script}")
    assert len(got) == 8000  # trimmed to the input length
    assert np.all(got.samples == 4000 / 32768)


def test_external_failure():
    with pytest.raises(ExternalCodecError):
        run_external(sine(), f"{sys.executable} -c \"import sys; sys.exit(3)\"")
    with pytest.raises(ExternalCodecError):
        run_external(sine(), "/nonexistent/codec")
