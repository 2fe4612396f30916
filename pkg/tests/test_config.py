import pytest

from stdpvideo.config import (ConfigError, ExperimentConfig, dumps_config, parse_config,
                              parse_config_text, with_overrides)


def test_defaults_only_config_is_fully_defaulted(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[dataset]\nkind = synthetic\n")
    cfg = parse_config(p)
    assert cfg == ExperimentConfig()
    pl = cfg.plasticity
    assert (pl.eta_w, pl.tau_stdp, pl.th_min, pl.eta_th) == (0.1, 0.1, 1.0, 1.0)
    assert (pl.th_init_mean, pl.th_init_std) == (5.0, 1.0)
    a = cfg.architecture
    assert a.filters == (16, 32, 64) and a.kernel == ((5, 5, 2),) and a.t_obj == (0.65, 0.3, 0.1)
    assert (cfg.encoding.frames_per_video, cfg.encoding.skip) == (8, 1)


def test_unknown_key_names_its_line():
    text = "[dataset]\nkind = synthetic\n\n[plasticity]\neta_w = 0.2\neta_wx = 0.1\n"
    with pytest.raises(ConfigError, match="eta_wx") as e:
        parse_config_text(text)
    assert e.value.line == 6 and "line 6" in str(e.value)


def test_unknown_section_and_syntax_errors():
    with pytest.raises(ConfigError) as e:
        parse_config_text("[dataset]\nkind = synthetic\n[layers]\nx = 1\n")
    assert e.value.line == 3
    with pytest.raises(ConfigError) as e:
        parse_config_text("[dataset]\nkind = synthetic\nthis line is broken\n")
    assert e.value.line == 3
    with pytest.raises(ConfigError, match="bad value"):
        parse_config_text("[dataset]\nkind = synthetic\nwidth = wide\n")


def test_missing_required_keys(tmp_path):
    with pytest.raises(ConfigError, match="kind"):
        parse_config_text("[run]\nseed = 1\n")
    with pytest.raises(ConfigError, match="root"):
        parse_config_text("[dataset]\nkind = frames\n")
    with pytest.raises(ConfigError, match="not found"):
        parse_config(tmp_path / "absent.ini")


def test_t_obj_length_mismatch():
    with pytest.raises(ConfigError, match="t_obj"):
        parse_config_text("[dataset]\nkind = synthetic\n[architecture]\n"
                          "filters = 16, 32, 64\nt_obj = 0.65, 0.3\n")


def test_other_validation():
    base = "[dataset]\nkind = synthetic\n[architecture]\n"
    for body, pat in [("kind = 2d\nkernel = 3x3x2\n", "temporal"),
                      ("wta_rule = last\n", "wta_rule"),
                      ("kernel = 3x3x2, 3x3x2\n", "kernel"),
                      ("epochs = 0\n", ">= 1")]:
        with pytest.raises(ConfigError, match=pat):
            parse_config_text(base + body)


def test_dependent_defaults():
    cfg = parse_config_text("[dataset]\nkind = synthetic\n[architecture]\nkind = 2d\n"
                            "filters = 16, 32\n")
    a = cfg.architecture
    assert a.kernel == ((5, 5, 1),) and a.pool == ((2, 2, 1),) and a.t_obj == (0.65, 0.3)
    cfg = parse_config_text("[dataset]\nkind = frames\nroot = data/weizmann\n"
                            "protocol = leave-one-out\n")
    assert cfg.architecture.t_obj == (0.75, 0.55, 0.15) and cfg.encoding.half_scale


def test_dumps_roundtrip():
    text = ("[dataset]\nkind = synthetic  # inline comment\nwidth = 32\nheight = 32\n"
            "[architecture]\nfilters = 16, 32\nkernel = 3x3x2\nconv_stride = 1x1x1\n"
            "pool = 2x2x1\nt_obj = 0.8, 0.8\nwta_rule = margin\nfeature_grid = 2x2x1\n"
            "[run]\nseed = 7\n")
    cfg = parse_config_text(text)
    back = parse_config_text(dumps_config(cfg))
    # an empty pool_stride is written out as the pool size it resolves to
    assert back.architecture.pool_stride == cfg.architecture.pool
    for name in ("dataset", "encoding", "plasticity", "classifier", "run"):
        assert getattr(back, name) == getattr(cfg, name)
    frames = parse_config_text("[dataset]\nkind = frames\nroot = /x\nprotocol = leave-one-out\n")
    for c in (cfg, ExperimentConfig(), frames):
        assert dumps_config(parse_config_text(dumps_config(c))) == dumps_config(c)


def test_overrides():
    cfg = with_overrides(ExperimentConfig(), seed=3, runs=2, out="o")
    assert (cfg.run.seed, cfg.run.runs, cfg.run.out, cfg.run.parallel) == (3, 2, "o", 1)
