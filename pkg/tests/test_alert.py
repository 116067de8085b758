import datetime as dt
import http.server
import json
import math
import threading

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from firecast.alert import (
    MESSAGE_TEMPLATES,
    Alert,
    AlertRule,
    Category,
    Delivery,
    RuleError,
    Trigger,
    UserProfile,
    default_rules,
    dispatch,
    evaluate_alerts,
    exacerbation_risk,
    haversine_miles,
    load_rules,
    save_rules,
    validate_rules,
)
from firecast.grid import Indicator, RasterFrame
from firecast.ingest import synth_spec

DAY = dt.date(2020, 8, 1)
SPEC = synth_spec(32, 32, 1.4)
LATS, LONS = SPEC.center_grid()
C = Category


def risk_frame(values):
    return RasterFrame(SPEC, Indicator.FIRE_RISK, DAY, np.asarray(values, dtype=np.float32))


def profile(pid, r, c, *cats):
    return UserProfile(pid, float(LATS[r, c]), float(LONS[r, c]), frozenset(cats or (C.GENERAL,)))


def keys(result):
    return {(a.profile_id, a.trigger) for a in result}


# -- exacerbation risk ------------------------------------------------------------------

def test_exacerbation_golden_values():
    assert exacerbation_risk(12, 7, 101.23, 68.0) == 0.0
    assert exacerbation_risk(22, 7, 101.23, 68.0) == pytest.approx(1.0, abs=1e-9)
    assert exacerbation_risk(12, 7, 101.23, 64.4) == pytest.approx(9.4, abs=1e-9)
    assert exacerbation_risk(12, 17, 101.23, 68.0) == pytest.approx(0.8, abs=1e-9)
    assert exacerbation_risk(12, 7, 111.23, 68.0) == pytest.approx(2.0, abs=1e-9)


def test_exacerbation_terms_floor_independently():
    # heat pushes the temperature term negative; it must not cancel the PM2.5 excess
    assert exacerbation_risk(22, 0, 0, 100.0) == pytest.approx(1.0)
    assert exacerbation_risk(0, 0, 0, 90.0) == 0.0


def test_exacerbation_rejects_negative():
    for args in [(-1, 0, 0, 70), (0, -1, 0, 70), (0, 0, -0.1, 70)]:
        with pytest.raises(ValueError):
            exacerbation_risk(*args)
    with pytest.raises(ValueError):
        exacerbation_risk(0, 0, 0, math.nan)


@settings(max_examples=500, deadline=None)
@given(st.lists(st.floats(0, 500), min_size=3, max_size=3), st.floats(-40, 130),
       st.integers(0, 3), st.floats(0, 50))
def test_exacerbation_monotone(conc, temp, which, bump):
    args = conc + [temp]
    base = exacerbation_risk(*args)
    raised = list(args)
    if which < 3:
        raised[which] += bump
        assert exacerbation_risk(*raised) >= base
    else:
        raised[3] -= bump
        assert exacerbation_risk(*raised) >= base


def test_haversine():
    assert haversine_miles(0, 0, 0, 0) == 0
    assert haversine_miles(0, 0, 1, 0) == pytest.approx(69.09, abs=0.01)


# -- rules -------------------------------------------------------------------------------

def test_default_rules_ordering():
    table = validate_rules(default_rules())
    assert set(table) == set(Category)
    g = table[C.GENERAL]
    assert (g.risk_threshold, g.radius_miles) == (0.7, 10.0)
    for cat, r in table.items():
        assert r.risk_threshold <= g.risk_threshold and r.radius_miles >= g.radius_miles
    assert "stay indoors and wear masks" in MESSAGE_TEMPLATES[table[C.RESPIRATORY].template]


@pytest.mark.parametrize("kw", [dict(risk_threshold=0.0), dict(risk_threshold=1.5), dict(radius_miles=0)])
def test_rule_field_validation(kw):
    base = dict(category=C.GENERAL, risk_threshold=0.5, radius_miles=5.0)
    with pytest.raises(RuleError):
        AlertRule(**{**base, **kw})


def test_rule_table_validation(tmp_path):
    with pytest.raises(RuleError, match="less sensitive"):
        validate_rules([AlertRule(C.GENERAL, 0.5, 10), AlertRule(C.RESPIRATORY, 0.6, 25)])
    with pytest.raises(RuleError, match="less sensitive"):
        validate_rules([AlertRule(C.GENERAL, 0.5, 10), AlertRule(C.RESPIRATORY, 0.4, 5)])
    with pytest.raises(RuleError, match="duplicate"):
        validate_rules([AlertRule(C.GENERAL, 0.5, 10), AlertRule(C.GENERAL, 0.6, 10)])
    with pytest.raises(RuleError, match="template"):
        validate_rules([AlertRule(C.GENERAL, 0.5, 10, template="nope")])
    path = tmp_path / "rules.json"
    save_rules(path, default_rules())
    assert load_rules(path) == default_rules()
    path.write_text('{"category": "general"}')
    with pytest.raises(RuleError):
        load_rules(path)


def test_profile_validation():
    with pytest.raises(ValueError):
        UserProfile("x", 37.0, -120.0, frozenset())
    with pytest.raises(ValueError):
        UserProfile("x", math.inf, -120.0, frozenset({C.GENERAL}))
    p = UserProfile.from_dict({"id": "a", "lat": 37.1, "lon": -119.9, "categories": ["respiratory", "general"]})
    assert UserProfile.from_dict(p.to_dict()) == p


# -- evaluate_alerts --------------------------------------------------------------------

def test_all_zero_risk_no_alerts():
    profs = [profile("a", 5, 5, C.RESPIRATORY), profile("b", 20, 20)]
    assert len(evaluate_alerts(risk_frame(np.zeros(SPEC.shape)), None, profs)) == 0


def test_respiratory_alerted_where_general_is_not():
    risk = np.zeros(SPEC.shape)
    risk[13, 12] = 0.5
    d = float(haversine_miles(LATS[10, 10], LONS[10, 10], LATS[13, 12], LONS[13, 12]))
    assert d == pytest.approx(5.0, abs=0.5)
    profs = [profile("asthma", 10, 10, C.RESPIRATORY), profile("healthy", 10, 10, C.GENERAL)]
    res = evaluate_alerts(risk_frame(risk), None, profs)
    assert keys(res) == {("asthma", Trigger.WILDFIRE_RISK)}
    a = res[0]
    assert a.risk == pytest.approx(0.5) and a.distance_miles == pytest.approx(d)
    assert a.risk >= 0.4 and "wear masks" in a.instructions


def test_two_firing_categories_dedup_to_one_alert():
    risk = np.zeros(SPEC.shape)
    risk[10, 11] = 0.9
    res = evaluate_alerts(risk_frame(risk), None, [profile("p", 10, 10, C.GENERAL, C.MOBILITY_IMPAIRED)])
    assert len(res) == 1 and res[0].trigger is Trigger.WILDFIRE_RISK
    assert set(res[0].categories) == {"general", "mobility_impaired"}


def test_off_grid_profile_skipped():
    away = UserProfile("far", 10.0, 10.0, frozenset({C.GENERAL}))
    res = evaluate_alerts(risk_frame(np.ones(SPEC.shape)), None, [away, profile("near", 3, 3)])
    assert keys(res) == {("near", Trigger.WILDFIRE_RISK)}
    assert res.skipped == [{"profile_id": "far", "reason": "outside grid"}]


def test_risk_map_range_checked():
    with pytest.raises(ValueError):
        evaluate_alerts(risk_frame(np.full(SPEC.shape, 1.5)), None, [])


def _indicator_frames(pm25):
    vals = {
        Indicator.PM25: pm25, Indicator.PM10: 0.0, Indicator.NO2: 0.0, Indicator.TEMPERATURE: 20.0,
    }
    return {i: RasterFrame(SPEC, i, DAY, np.full(SPEC.shape, v, dtype=np.float32)) for i, v in vals.items()}


def test_exacerbation_alert_for_respiratory_only():
    profs = [profile("r", 4, 4, C.RESPIRATORY), profile("g", 4, 4)]
    zero = risk_frame(np.zeros(SPEC.shape))
    res = evaluate_alerts(zero, _indicator_frames(62.0), profs)
    assert keys(res) == {("r", Trigger.EXACERBATION_RISK)}
    assert res[0].risk == pytest.approx(5.0, abs=1e-4)
    assert len(evaluate_alerts(zero, _indicator_frames(50.0), profs)) == 0
    assert len(evaluate_alerts(zero, _indicator_frames(50.0), profs, r_min=3.0)) == 1


def test_output_order_and_purity():
    rng = np.random.default_rng(3)
    risk = rng.uniform(size=SPEC.shape)
    profs = [profile(f"p{k}", *rng.integers(0, 32, 2), C.RESPIRATORY) for k in range(6)]
    a = evaluate_alerts(risk_frame(risk), _indicator_frames(80.0), profs[::-1])
    b = evaluate_alerts(risk_frame(risk), _indicator_frames(80.0), profs)
    assert a.alerts == b.alerts
    order = list(Trigger)
    got = [(x.profile_id, order.index(x.trigger)) for x in a]
    assert got == sorted(got)
    assert [x.trigger for x in a][:2] == [Trigger.WILDFIRE_RISK, Trigger.EXACERBATION_RISK]


rule_strategy = st.tuples(st.floats(0.05, 1.0), st.floats(0.5, 40.0))


@settings(max_examples=500, deadline=None)
@given(st.integers(0, 2**31), rule_strategy, rule_strategy, st.integers(1, 6), st.floats(0.0, 1.0))
def test_raising_risk_never_removes_alerts(seed, general, other, n_prof, lift):
    rng = np.random.default_rng(seed)
    g_thr, g_rad = general
    o_thr, o_rad = min(other[0], g_thr), max(other[1], g_rad)
    rules = [AlertRule(C.GENERAL, g_thr, g_rad)] + [
        AlertRule(c, o_thr, o_rad) for c in Category if c is not C.GENERAL]
    cats = list(Category)
    profs = [profile(f"p{k}", *rng.integers(0, 32, 2),
                     *(cats[i] for i in rng.choice(len(cats), size=rng.integers(1, 3), replace=False)))
             for k in range(n_prof)]
    risk = rng.uniform(size=SPEC.shape) * rng.uniform()
    before = keys(evaluate_alerts(risk_frame(risk), None, profs, rules))
    raised = risk.copy()
    mask = rng.uniform(size=SPEC.shape) < 0.3
    raised[mask] = np.minimum(1.0, raised[mask] + lift)
    assert before <= keys(evaluate_alerts(risk_frame(raised), None, profs, rules))


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**31))
def test_sensitive_category_gets_superset_of_general(seed):
    rng = np.random.default_rng(seed)
    risk = rng.uniform(size=SPEC.shape) ** 4
    r, c = rng.integers(0, 32, 2)
    for cat in Category:
        if cat is C.GENERAL:
            continue
        gen = evaluate_alerts(risk_frame(risk), None, [profile("x", r, c, C.GENERAL)])
        sens = evaluate_alerts(risk_frame(risk), None, [profile("x", r, c, cat)])
        assert keys(gen) <= keys(sens)


# -- dispatch ---------------------------------------------------------------------------

def _alerts(n):
    return [Alert(f"p{k}", DAY, Trigger.WILDFIRE_RISK, 0.8, 1.0, "go") for k in range(n)]


def _read_log(path):
    return [json.loads(line) for line in path.read_text().splitlines()]


def test_dispatch_log_only(tmp_path):
    log = tmp_path / "out" / "alerts.ndjson"
    rep = dispatch([], log)
    assert rep.alerts == [] and log.read_text() == ""
    rep = dispatch(_alerts(3), log)
    assert rep.counts["logged"] == 3 and len(_read_log(log)) == 3
    dispatch(_alerts(1), log)
    assert len(_read_log(log)) == 4


class _Handler(http.server.BaseHTTPRequestHandler):
    status = 200
    received: list = []

    def do_POST(self):
        body = self.rfile.read(int(self.headers["Content-Length"]))
        type(self).received.append(json.loads(body))
        self.send_response(type(self).status)
        self.end_headers()

    def log_message(self, *args):
        pass


@pytest.fixture
def server():
    handler = type("H", (_Handler,), {"received": []})
    srv = http.server.HTTPServer(("127.0.0.1", 0), handler)
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    yield srv, handler
    srv.shutdown()
    srv.server_close()


def test_webhook_success(tmp_path, server):
    srv, handler = server
    url = f"http://127.0.0.1:{srv.server_port}/hook"
    rep = dispatch(_alerts(2), tmp_path / "a.ndjson", webhook=url)
    assert rep.counts["webhook_sent"] == 2
    assert [r["profile_id"] for r in handler.received] == ["p0", "p1"]
    assert [e["delivery"] for e in _read_log(tmp_path / "a.ndjson")] == ["webhook_sent"] * 2


def test_webhook_error_status_still_logs(tmp_path, server):
    srv, handler = server
    handler.status = 500
    rep = dispatch(_alerts(2), tmp_path / "a.ndjson", webhook=f"http://127.0.0.1:{srv.server_port}/")
    assert rep.counts["webhook_failed"] == 2
    assert [e["delivery"] for e in _read_log(tmp_path / "a.ndjson")] == ["webhook_failed"] * 2


def test_unreachable_webhook_still_logs(tmp_path):
    import socket

    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    rep = dispatch(_alerts(3), tmp_path / "a.ndjson", webhook=f"http://127.0.0.1:{port}/", timeout=1.0)
    assert [a.delivery for a in rep.alerts] == [Delivery.WEBHOOK_FAILED] * 3
    assert len(_read_log(tmp_path / "a.ndjson")) == 3
