from decimal import Decimal

import pytest

from pricepanel.schemas import SimConfig
from pricepanel.services.estimator import RegressionSample, fit_event_study
from pricepanel.services.ingest import load_tables
from pricepanel.services.pipeline import build_panel
from pricepanel.services.simulate import SUP_NAMES, generate, replicate, write_raw
from pricepanel.services.summaries import did_window
from pricepanel.services.timevars import BASE_MONTH


def quiet_config(**overrides):
    values = dict(
        n_products=8,
        n_retailers=3,
        start_month="2021-08",
        end_month="2022-12",
        noise_sd=0.0,
        product_sd=0.0,
        retailer_sd=0.0,
        seed=3,
    )
    values.update(overrides)
    return SimConfig(**values)


def fit_groups(cfg, patterns):
    data = generate(cfg)
    panel = build_panel(data.products, data.offers, data.clicks, data.retailers, patterns)
    treated = fit_event_study(RegressionSample.from_rows(panel.split.treated, group="treated"))
    control = fit_event_study(RegressionSample.from_rows(panel.split.control, group="control"))
    return data, panel, treated, control


@pytest.mark.parametrize("effect", [0.0, 10.0])
def test_noiseless_effect_is_recovered_exactly(effect, patterns):
    _, _, treated, control = fit_groups(quiet_config(true_effect=effect), patterns)
    for b, beta in zip(treated.bins, treated.beta):
        assert beta == pytest.approx(effect if b > 0 else 0.0, abs=1e-8)
    for w in (6, 12, None):
        assert did_window(treated, w).estimate == pytest.approx(effect, abs=1e-8)
        assert did_window(control, w).estimate == pytest.approx(0.0, abs=1e-8)


def test_labels_are_recovered(patterns):
    data, panel, _, _ = fit_groups(quiet_config(n_products=12), patterns)
    assert panel.split.sup_ids == set(data.sup_ids)
    assert len(data.sup_ids) == 6
    assert set(panel.split.categories.values()) == {category for category, _ in SUP_NAMES}
    assert panel.split.strict_ids == {"p0006", "p0009"}


def test_every_cell_has_a_base_month_price(patterns):
    data = generate(quiet_config(missing_rate=0.4))
    cells = {(o.prod_id, o.ret_id) for o in data.offers}
    assert len(cells) == 8 * 3
    panel = build_panel(data.products, data.offers, data.clicks, data.retailers, patterns)
    assert panel.diagnostics.pairs_without_base == 0
    assert all(r.P is not None for r in panel.obs)
    assert any(str(r.month) == str(BASE_MONTH) for r in panel.obs)


def test_prices_are_whole_cents():
    data = generate(quiet_config(noise_sd=5.0, product_sd=2.0, retailer_sd=2.0))
    assert all(o.price == o.price.quantize(Decimal("0.01")) for o in data.offers)
    assert all(o.price > 0 for o in data.offers)


def test_retailer_name_history_is_written(tmp_path):
    data = generate(quiet_config())
    names = {r.ret_name for r in data.retailers}
    assert "Shop 0" in names and "Shop 0 (v1)" in names
    tables = load_tables(write_raw(data, tmp_path))
    assert len(tables["retailers"].rows) == 3 * 3


def test_same_seed_same_bytes(tmp_path):
    first = write_raw(generate(quiet_config(noise_sd=5.0)), tmp_path / "a")
    second = write_raw(generate(quiet_config(noise_sd=5.0)), tmp_path / "b")
    for kind in first:
        assert first[kind].read_bytes() == second[kind].read_bytes()
    other = write_raw(generate(quiet_config(noise_sd=5.0, seed=4)), tmp_path / "c")
    assert other["offers"].read_bytes() != first["offers"].read_bytes()


@pytest.mark.slow
def test_confidence_intervals_cover_the_true_effect():
    cfg = SimConfig(
        n_products=16,
        n_retailers=8,
        start_month="2021-08",
        end_month="2022-09",
        mean_clicks=0.0,
        seed=100,
    )
    result = replicate(cfg, replications=500)
    assert result.replications == 500
    assert result.mean_post_estimate == pytest.approx(10.0, abs=0.5)
    assert 0.85 <= result.coverage <= 0.95


def test_replications_do_not_depend_on_process_count():
    cfg = quiet_config(noise_sd=3.0, product_sd=1.0, retailer_sd=1.0, mean_clicks=0.0)
    serial = replicate(cfg, replications=3, processes=1)
    parallel = replicate(cfg, replications=3, processes=2)
    assert parallel.coverage == serial.coverage
    assert parallel.mean_post_estimate == pytest.approx(serial.mean_post_estimate, rel=1e-12)
    assert serial.replications == 3 and 0.0 <= serial.coverage <= 1.0
