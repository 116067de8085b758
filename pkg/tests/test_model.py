import numpy as np
import pytest

from firecast.grid import Indicator
from firecast.model import (
    ConfigError,
    CnnConfig,
    UlstmConfig,
    VARIANT_CHANNELS,
    build_cnn_baseline,
    build_ulstm,
    load_model,
    variant_config,
)

I = Indicator
V4 = variant_config("V4")

# First-build regression values for the default 32x32, C=7, T=7 configurations.
ULSTM_V4_PARAMS = 2_149_809
CNN_V4_PARAMS = 306_296


def small_ulstm(**kw):
    base = dict(channels=(I.TEMPERATURE, I.DEW_POINT, I.PM25), T=4, rows=12, cols=10,
                encoder_widths=(3, 5), hidden=6)
    base.update(kw)
    return build_ulstm(UlstmConfig(**base))


def small_cnn(**kw):
    base = dict(channels=(I.TEMPERATURE, I.DEW_POINT, I.PM25), T=4, rows=12, cols=12,
                widths=(3, 4, 8), fc_hidden=10)
    base.update(kw)
    return build_cnn_baseline(CnnConfig(**base))


def window(model, seed=0, n=None):
    c = model.config
    shape = (c.T, len(c.channels), c.rows, c.cols)
    return np.random.default_rng(seed).standard_normal(shape if n is None else (n,) + shape)


def test_variant_channels():
    assert variant_config("V1") == (I.PM25, I.PM10, I.CO, I.NO2)
    assert set(variant_config("V2")) == {I.DEW_POINT, I.TEMPERATURE, I.PM25, I.CO}
    assert set(variant_config("V3")) == {I.WIND_SPEED, I.TEMPERATURE, I.DEW_POINT}
    assert len(V4) == 7 and set(V4) == set().union(*VARIANT_CHANNELS.values())
    assert variant_config("v3") == variant_config("V3")
    with pytest.raises(ValueError):
        variant_config("V5")


def test_default_parameter_counts_pinned():
    ulstm = build_ulstm(UlstmConfig(channels=V4))
    cnn = build_cnn_baseline(CnnConfig(channels=V4))
    assert ulstm.num_params == ULSTM_V4_PARAMS
    assert cnn.num_params == CNN_V4_PARAMS
    assert cnn.num_params < ulstm.num_params


def test_init_scheme_keeps_shapes():
    a = build_ulstm(UlstmConfig(channels=V4, init="fan_in"))
    assert a.num_params == ULSTM_V4_PARAMS
    with pytest.raises(ConfigError):
        UlstmConfig(channels=V4, init="xavier")
    with pytest.raises(ConfigError):
        CnnConfig(channels=V4, init="xavier")


@pytest.mark.parametrize("bad", [
    dict(hidden=0),
    dict(channels=()),
    dict(channels=(I.PM25, I.PM25)),
    dict(decoder_widths=(3, 5)),
    dict(lstm_layers=3),
    dict(readout="max"),
])
def test_ulstm_config_errors(bad):
    base = dict(channels=(I.PM25,), rows=8, cols=8, encoder_widths=(2, 3), hidden=4)
    base.update(bad)
    with pytest.raises(ConfigError):
        UlstmConfig(**base)


def test_cnn_config_errors():
    with pytest.raises(ConfigError):
        CnnConfig(channels=())
    with pytest.raises(ConfigError):
        CnnConfig(channels=(I.PM25,), widths=(2, 3))
    with pytest.raises(ConfigError):
        CnnConfig(channels=(I.PM25,), rows=3, cols=3)


def test_same_seed_bit_identical_params():
    a, b = small_ulstm(seed=3), small_ulstm(seed=3)
    assert all(a.params[k].data.tobytes() == b.params[k].data.tobytes() for k in a.params)
    c = small_ulstm(seed=4)
    assert any(a.params[k].data.tobytes() != c.params[k].data.tobytes() for k in a.params)


@pytest.mark.parametrize("builder", [small_ulstm, small_cnn])
def test_output_shape_and_range(builder):
    m = builder()
    out = m.predict(window(m))
    assert out.shape == (m.config.rows, m.config.cols)
    assert np.all(np.isfinite(out)) and np.all((out > 0) & (out < 1))
    batch = m.predict(window(m, n=3))
    assert batch.shape == (3, m.config.rows, m.config.cols)
    np.testing.assert_array_equal(m.predict(window(m)), out)


@pytest.mark.parametrize("builder", [small_ulstm, small_cnn])
def test_shape_mismatch_is_error(builder):
    m = builder()
    with pytest.raises(ValueError, match="does not match"):
        m.predict(np.zeros((m.config.T + 1, len(m.config.channels), m.config.rows, m.config.cols)))


def test_decoder_restores_odd_grid():
    m = small_ulstm(rows=13, cols=9, encoder_widths=(2, 3, 4))
    assert m.predict(window(m)).shape == (13, 9)


def test_channel_permutation_equivariance():
    m = small_ulstm(seed=2)
    perm = [2, 0, 1]
    cfg = m.config
    pcfg = UlstmConfig(**{**cfg.__dict__, "channels": tuple(cfg.channels[i] for i in perm)})
    pm = build_ulstm(pcfg)
    # copy weights with the first-layer input channels permuted the same way
    for k in m.params:
        pm.params[k].data = m.params[k].data.copy()
    pm.params["enc0.w"].data = m.params["enc0.w"].data[:, perm].copy()
    x = window(m, 5)
    np.testing.assert_allclose(pm.predict(x[:, perm]), m.predict(x), rtol=0, atol=1e-13)


def test_day_order_matters_for_ulstm_and_wires_as_channels_in_cnn():
    u = small_ulstm(seed=1)
    x = window(u, 2)
    assert not np.allclose(u.predict(x[::-1]), u.predict(x))
    c = small_cnn(seed=1)
    assert c.params["conv0.w"].shape[1] == c.config.T * len(c.config.channels)


def test_geo_channels():
    m = small_ulstm(include_geo=True)
    geo = np.random.default_rng(0).standard_normal((2, m.config.rows, m.config.cols))
    assert m.predict(window(m), geo).shape == (m.config.rows, m.config.cols)
    with pytest.raises(ValueError):
        m.predict(window(m))


@pytest.mark.parametrize("builder", [small_ulstm, small_cnn])
def test_save_load_reproduces_outputs(tmp_path, builder):
    m = builder(seed=7)
    m.fit_normalization(window(m, n=4) * 3 + 1)
    m.save(tmp_path)
    m2 = load_model(tmp_path)
    assert type(m2) is type(m) and m2.config == m.config
    x = window(m, 9)
    assert m2.predict(x).tobytes() == m.predict(x).tobytes()


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_model(tmp_path)
    (tmp_path / "config.json").write_text('{"kind": "rnn", "config": {}}')
    with pytest.raises(ConfigError):
        load_model(tmp_path)
