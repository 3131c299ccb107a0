"""Acceptance gate: one test per headline criterion, at its stated tolerance.

Each test is self-contained and deterministic (frozen seeds), so the -v
output reads as a per-criterion pass/fail checklist. Trend criteria assert
orderings with their stated slack; exact criteria compare bit-for-bit.
"""
import json
import math
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient
from scipy import stats

from locpriv import (
    AttackDataset,
    BudgetExhaustedError,
    DecisionKind,
    Fix,
    GeoPoint,
    Grid,
    MechanismConfig,
    ObjectFieldConfig,
    PlanarPoint,
    Projection,
    Region,
    StaircaseParams,
    Trace,
    TrPsmConfig,
    TrPsmSession,
    bench_perturb,
    build_attack_dataset,
    catchable_fraction,
    estimate_bayes_risk,
    generate_field,
    mne,
    perturb_points,
    plm_sample_many,
    psm_radial_inverse_cdf,
    psm_radial_mean,
    psm_radial_pdf,
    psm_sample,
    psm_sample_many,
    synth_walk,
)
from locpriv.service import PrivArRequest, ServiceSettings, create_app


# ---------------------------------------------------------------------------
# Reference interpreter for the thresholded-release session
# ---------------------------------------------------------------------------


def replay_thresholded_release(events, eps, eps_total, delta, seed):
    """Straight-line replay of the session loop, used as the ledger oracle.

    Owns its own control flow and budget arithmetic; shares only the scalar
    staircase samplers so outputs can be compared bit-for-bit against the
    session under the same seed. Events are ("fix", (x, y)) or
    ("topup", amount); each record is (kind, output xy or None,
    spent_this_step, budget_left_after).
    """
    rng = np.random.default_rng(seed)
    params = StaircaseParams(eps)
    records = []
    started = False
    noisy = z = left = None
    for tag, value in events:
        if tag == "topup":
            eps_total += value
            left += value
            records.append(("topup", None, 0.0, left))
            continue
        x = PlanarPoint(value[0], value[1])
        if not started:
            eta = psm_radial_inverse_cdf(rng.random(), params)
            noisy = delta + eta
            z = psm_sample(x, params, rng)
            left = eps_total - 2.0 * eps
            started = True
            records.append(("initial", (z.x, z.y), 2.0 * eps, left))
        elif math.hypot(x.x - z.x, x.y - z.y) < noisy:
            records.append(("reused", (z.x, z.y), 0.0, left))
        elif left < eps:
            records.append(("exhausted", None, 0.0, left))
        else:
            z = psm_sample(x, params, rng)
            left -= eps
            records.append(("released", (z.x, z.y), eps, left))
    return records


# ---------------------------------------------------------------------------
# Analytic radial CDFs, written out independently of the samplers
# ---------------------------------------------------------------------------


def _laplace_radial_cdf(eps):
    def cdf(r):
        r = np.asarray(r, dtype=float)
        return 1.0 - (1.0 + eps * r) * np.exp(-eps * r)

    return cdf


def _staircase_radial_cdf(eps, width):
    def cdf(r):
        r = np.asarray(r, dtype=float)
        k = np.maximum(np.ceil(r / width), 1.0)
        at_left = -np.expm1(-(k - 1.0) * eps)
        interval_mass = np.exp(-(k - 1.0) * eps) - np.exp(-k * eps)
        out = at_left + (r - (k - 1.0) * width) * interval_mass / width
        return np.where(r <= 0.0, 0.0, out)

    return cdf


# ---------------------------------------------------------------------------
# Criteria 1-4: sampler statistics and density shape
# ---------------------------------------------------------------------------


def test_criterion_01_plm_mean_displacement():
    t0 = time.perf_counter()
    pts = plm_sample_many(PlanarPoint(0.0, 0.0), 0.1, np.random.default_rng(101), 1_000_000)
    mean_r = float(np.mean(np.hypot(pts[:, 0], pts[:, 1])))
    elapsed = time.perf_counter() - t0
    assert mean_r == pytest.approx(20.0, abs=0.2)
    assert elapsed < 10.0


def test_criterion_02_psm_mean_displacement():
    t0 = time.perf_counter()
    params = StaircaseParams(0.1, delta_width=1.0)
    pts = psm_sample_many(PlanarPoint(0.0, 0.0), params, np.random.default_rng(102), 1_000_000)
    mean_r = float(np.mean(np.hypot(pts[:, 0], pts[:, 1])))
    elapsed = time.perf_counter() - t0
    assert mean_r == pytest.approx(10.0, abs=0.2)
    assert elapsed < 10.0


def test_criterion_03_radial_samplers_fit_analytic_cdfs():
    n = 100_000
    origin = PlanarPoint(0.0, 0.0)
    for i, eps in enumerate((0.1, 0.5, 1.0, 2.0)):
        pts = plm_sample_many(origin, eps, np.random.default_rng([3, i]), n)
        ks = stats.kstest(np.hypot(pts[:, 0], pts[:, 1]), _laplace_radial_cdf(eps))
        assert ks.statistic < 0.01, f"plm eps={eps}: KS={ks.statistic:.4f}"

        params = StaircaseParams(eps)
        pts = psm_sample_many(origin, params, np.random.default_rng([30, i]), n)
        ks = stats.kstest(np.hypot(pts[:, 0], pts[:, 1]), _staircase_radial_cdf(eps, params.delta_width))
        assert ks.statistic < 0.01, f"psm eps={eps}: KS={ks.statistic:.4f}"


def test_criterion_04_staircase_density_ratio_bound():
    for eps in (0.1, 1.0):
        params = StaircaseParams(eps)
        idx = np.arange(1, 201, dtype=float)
        mids = (idx - 0.5) * params.delta_width
        f = psm_radial_pdf(mids, params)
        # every interval pair: f_i / f_j = e^{(j-i) eps}
        ratio = f[:, None] / f[None, :]
        target = np.exp((idx[None, :] - idx[:, None]) * eps)
        assert float(np.max(np.abs(ratio / target - 1.0))) < 1e-9
        # distinguishability bound: f_1 / f_k never exceeds e^{eps d}
        d = np.random.default_rng(4).uniform(1e-6, 200.0, size=1000)
        k = np.ceil(d / params.delta_width)
        f_k = psm_radial_pdf((k - 0.5) * params.delta_width, params)
        assert np.all(f[0] / f_k <= np.exp(eps * d))


# ---------------------------------------------------------------------------
# Criterion 5: session ledger versus the straight-line replay
# ---------------------------------------------------------------------------


def test_criterion_05_session_ledger_matches_straight_line_replay():
    meta = np.random.default_rng(20260814)
    eps_choices = (0.1, 0.3, 0.5, 0.7, 1.0, 2.0)
    branch_counts = {"reused": 0, "released": 0, "exhausted": 0}
    for _ in range(1000):
        eps = float(eps_choices[meta.integers(len(eps_choices))])
        budget_multiple = int(meta.integers(2, 15))
        eps_total = budget_multiple * eps
        delta = float(meta.uniform(0.0, 30.0))
        n_fix = int(meta.integers(5, 41))
        scale = delta + psm_radial_mean(StaircaseParams(eps)) + 1.0
        steps = meta.normal(0.0, scale, size=(n_fix - 1, 2))
        fixes = np.vstack([np.zeros((1, 2)), np.cumsum(steps, axis=0)])
        seed = int(meta.integers(2**63))

        expected = replay_thresholded_release(
            [("fix", (p[0], p[1])) for p in fixes], eps, eps_total, delta, seed
        )

        cfg = TrPsmConfig(eps, eps_total, delta)
        session, first = TrPsmSession.start(
            PlanarPoint(fixes[0, 0], fixes[0, 1]), cfg, np.random.default_rng(seed)
        )
        got = [(first.kind.value, (first.output.x, first.output.y), first.budget_spent_this_step, session.epsilon_left)]
        prev = first.output
        for p in fixes[1:]:
            try:
                decision = session.step(PlanarPoint(p[0], p[1]))
            except BudgetExhaustedError as err:
                got.append(("exhausted", None, 0.0, session.epsilon_left))
                assert err.spend == session.spend()
            else:
                got.append(
                    (decision.kind.value, (decision.output.x, decision.output.y), decision.budget_spent_this_step, session.epsilon_left)
                )
                if decision.kind is DecisionKind.REUSED:
                    assert decision.budget_spent_this_step == 0.0
                    assert decision.output.x == prev.x and decision.output.y == prev.y
                prev = decision.output
            # spend is exactly (k + 2) eps and never exceeds the budget
            assert session.spend() == (session.releases + 2) * eps
            assert session.spend() <= eps_total
        assert got == expected
        for kind in branch_counts:
            branch_counts[kind] += any(g[0] == kind for g in got)
    # the trace generator must exercise every decision branch broadly
    assert all(count > 100 for count in branch_counts.values()), branch_counts


# ---------------------------------------------------------------------------
# Criteria 6-7: displacement-error orderings
# ---------------------------------------------------------------------------


def test_criterion_06_psm_beats_plm_on_mean_error():
    region = Region()
    pts = synth_walk("random_walk", 10.0, 10_000, np.random.default_rng(6), region=region).planar()
    mnes = {"plm": [], "psm": []}
    for i, eps in enumerate((0.1, 0.5, 1.0, 2.0)):
        per_fix = {}
        for mech in ("plm", "psm"):
            res = perturb_points(pts, MechanismConfig(mech, eps), np.random.default_rng([6, i, ord(mech[1])]))
            per_fix[mech] = np.hypot(*(res.released - pts).T)
            mnes[mech].append(mne([(pts, res.released)]).mne)
        assert mnes["psm"][-1] < mnes["plm"][-1]
        test = stats.ttest_rel(per_fix["plm"], per_fix["psm"], alternative="greater")
        assert test.pvalue < 0.01, f"eps={eps}: p={test.pvalue:.3g}"
    for series in mnes.values():
        assert all(b <= a for a, b in zip(series, series[1:])), series


def test_criterion_07_trpsm_error_grows_with_threshold():
    region = Region()
    for eps in (0.1, 1.0):
        pts = synth_walk("random_walk", 8.0, 4000, np.random.default_rng([7, int(eps * 10)]), region=region).planar()
        mnes = []
        for delta in (5, 10, 20, 50, 100):
            cfg = MechanismConfig("trpsm", eps, epsilon_total=(len(pts) + 3) * eps, delta=float(delta))
            res = perturb_points(pts, cfg, np.random.default_rng([7, delta]))
            assert not res.exhausted
            mnes.append(mne([(pts, res.released)]).mne)
        # nondecreasing within 5% estimator slack
        assert all(b >= 0.95 * a for a, b in zip(mnes, mnes[1:])), f"eps={eps}: {mnes}"


# ---------------------------------------------------------------------------
# Criterion 8: inference-attack risk trends and calibration
# ---------------------------------------------------------------------------


def test_criterion_08_attack_risk_trends():
    grid = Grid()
    region = grid.region
    proj = region.projection
    eps = 0.1
    n_traces, n_fixes = 30, 800

    start_rng = np.random.default_rng(8)
    traces, planars = [], []
    for i in range(n_traces):
        walk = synth_walk("random_walk", 8.0, n_fixes, np.random.default_rng([8, i]), region=region)
        pts = walk.planar() + start_rng.uniform(-2500.0, 2500.0, size=2)
        lats, lons = proj.unproject_array(pts)
        trace = Trace([Fix(t, GeoPoint(lats[t], lons[t]), f"u{i}") for t in range(n_fixes)], proj)
        traces.append(trace)
        planars.append(trace.planar())

    window_lens = (1, 5, 10, 25)
    risks = {}
    for mech in ("plm", "psm", "trpsm"):
        rows = []
        for i, pts in enumerate(planars):
            cfg = MechanismConfig(mech, eps, epsilon_total=(n_fixes + 3) * eps if mech == "trpsm" else None)
            res = perturb_points(pts, cfg, np.random.default_rng([8, 100 + i]))
            assert not res.exhausted
            rows.append((traces[i], res.released))
        per_len = []
        for L in window_lens:
            ds = build_attack_dataset(rows, grid, L)
            assert len(ds) >= 20_000
            per_len.append(estimate_bayes_risk(ds, np.random.default_rng([8, L]), split=0.25).bayes_risk)
        risks[mech] = per_len

    # longer windows help the attacker: risk nonincreasing within 0.03 slack
    for mech in ("plm", "psm"):
        series = risks[mech]
        assert all(b <= a + 0.03 for a, b in zip(series, series[1:])), f"{mech}: {series}"
    # thresholded reuse maps many fixes to one point, so inference gets harder
    for j, L in enumerate(window_lens):
        if L >= 5:
            assert risks["trpsm"][j] >= risks["psm"][j], f"L={L}: {risks}"

    # calibration: label-independent features give risk near 1 - max prior
    rng = np.random.default_rng(88)
    labels = rng.integers(0, 4, size=4000)
    noise = rng.normal(size=(4000, 2))
    est = estimate_bayes_risk(AttackDataset(noise, labels, window_len=1), np.random.default_rng(89))
    assert est.bayes_risk == pytest.approx(0.75, abs=0.05)

    # calibration: noiseless features (exact cell centers) are nearly solvable
    small = Grid(region=Region(side=120.0), cells_per_side=4)
    labels = rng.integers(0, 16, size=6000)
    centers = np.array([[small.cell_center(c).x, small.cell_center(c).y] for c in range(16)])
    est = estimate_bayes_risk(AttackDataset(centers[labels], labels, window_len=1), np.random.default_rng(90))
    assert est.bayes_risk < 0.05


# ---------------------------------------------------------------------------
# Criterion 9: per-fix perturbation latency
# ---------------------------------------------------------------------------


def test_criterion_09_perturbation_latency():
    reports = {}
    for mech in ("plm", "psm", "trpsm"):
        reports[mech] = bench_perturb(MechanismConfig(mech, 0.1), n=100_000, warmup=1000, rng=np.random.default_rng(9))
    for mech, report in reports.items():
        assert report.mean_ms < 1.0, f"{mech}: mean {report.mean_ms:.4f} ms"
    assert reports["trpsm"].mean_ms <= 3.0 * reports["psm"].mean_ms


# ---------------------------------------------------------------------------
# Criterion 10: catchable-objects ordering and geometry oracles
# ---------------------------------------------------------------------------


def test_criterion_10_catchable_objects_trend():
    region = Region()
    pts = synth_walk("random_walk", 10.0, 1000, np.random.default_rng(10), region=region).planar()
    for density in ("sparse", "dense"):
        field_cfg = ObjectFieldConfig.for_density(density)
        means = {}
        for m_i, mech in enumerate(("plm", "psm", "trpsm")):
            cfg = MechanismConfig(mech, 0.1, epsilon_total=(len(pts) + 3) * 0.1 if mech == "trpsm" else None)
            res = perturb_points(pts, cfg, np.random.default_rng([10, 100 + m_i]))
            object_rng = np.random.default_rng([10, 200 + m_i])
            fractions = []
            for x, z in zip(pts, res.released):
                released = PlanarPoint(z[0], z[1])
                objs = generate_field(released, field_cfg, object_rng)
                frac = catchable_fraction(PlanarPoint(x[0], x[1]), released, objs, field_cfg)
                if frac is not None:
                    fractions.append(frac)
            means[mech] = float(np.mean(fractions))
        # 2-point slack on the ordering
        assert means["psm"] > means["plm"] - 2.0, f"{density}: {means}"
        assert means["trpsm"] > means["plm"] - 2.0, f"{density}: {means}"

    # geometry oracles: identical points catch everything, 200 m separation nothing
    dense = ObjectFieldConfig.for_density("dense")
    rng = np.random.default_rng(1001)
    x = PlanarPoint(12.0, -7.0)
    assert catchable_fraction(x, x, generate_field(x, dense, rng), dense) == 100.0
    far = PlanarPoint(x.x + 200.0, x.y)
    defined = []
    for _ in range(20):
        frac = catchable_fraction(x, far, generate_field(far, dense, rng), dense)
        if frac is not None:
            defined.append(frac)
    assert defined and all(f == 0.0 for f in defined)


# ---------------------------------------------------------------------------
# Criterion 11: HTTP service conformance
# ---------------------------------------------------------------------------


def _wire_body(session_id, lat, lon, t, eps, eps_total, seed):
    return {
        "v": 1,
        "session_id": session_id,
        "mechanism": "trpsm",
        "epsilon": eps,
        "epsilon_total": eps_total,
        "true_location": {"lat": lat, "lon": lon},
        "timestamp": f"2026-08-14T12:{t // 60:02d}:{t % 60:02d}Z",
        "seed": seed,
    }


def _random_wire_request(rng):
    mech = ("plm", "psm", "trpsm")[int(rng.integers(3))]
    body = {
        "v": 1,
        "session_id": f"s{int(rng.integers(10**9))}",
        "mechanism": mech,
        "epsilon": float(np.round(10.0 ** rng.uniform(-2.0, 0.7), 6)),
        "true_location": {
            "lat": float(np.round(rng.uniform(-89.0, 89.0), 7)),
            "lon": float(np.round(rng.uniform(-179.0, 179.0), 7)),
        },
        "timestamp": f"2026-08-14T{int(rng.integers(24)):02d}:{int(rng.integers(60)):02d}:{int(rng.integers(60)):02d}Z",
    }
    if mech == "trpsm":
        body["epsilon_total"] = body["epsilon"] * float(int(rng.integers(2, 30)))
        if rng.random() < 0.5:
            body["delta"] = float(np.round(rng.uniform(0.5, 60.0), 3))
    if rng.random() < 0.5:
        body["density"] = "dense" if rng.random() < 0.5 else "sparse"
    if rng.random() < 0.5:
        body["seed"] = int(rng.integers(2**31))
    return body


def test_criterion_11_service_conformance():
    eps, delta, seed = 0.1, 5.0, 3
    lat0, lon0 = 40.0, -74.0
    jump_lat = lat0 + 0.01
    eps_total = 2 * eps

    # reference ledger for the scripted run: 10 stationary fixes, a jump that
    # exhausts, a top-up of one release, then the retried jump
    proj = Projection(GeoPoint(lat0, lon0))
    x1 = proj.project(GeoPoint(lat0, lon0))
    xj = proj.project(GeoPoint(jump_lat, lon0))
    events = [("fix", (x1.x, x1.y))] * 10 + [("fix", (xj.x, xj.y)), ("topup", eps), ("fix", (xj.x, xj.y))]
    expected = replay_thresholded_release(events, eps, eps_total, delta, seed)
    assert [r[0] for r in expected] == ["initial"] + ["reused"] * 9 + ["exhausted", "topup", "released"]

    client = TestClient(create_app(ServiceSettings()))
    sid = "conformance"
    wire = []
    for t in range(10):
        r = client.post("/PrivAR", json=_wire_body(sid, lat0, lon0, t, eps, eps_total, seed))
        assert r.status_code == 200
        wire.append(r.json())
    jump = client.post("/PrivAR", json=_wire_body(sid, jump_lat, lon0, 10, eps, eps_total, seed))
    assert jump.status_code == 409
    err = jump.json()
    assert err["error"] == "BudgetExhausted"
    assert err["spend"] == 2 * eps and err["epsilon_total"] == eps_total
    topup = client.post("/PrivAR/topup", json={"v": 1, "session_id": sid, "additional": eps})
    assert topup.status_code == 200
    retry = client.post("/PrivAR", json=_wire_body(sid, jump_lat, lon0, 11, eps, eps_total, seed))
    assert retry.status_code == 200
    wire.append(retry.json())

    # decision-by-decision and ledger comparison, bit-for-bit
    for resp, record in zip(wire, [r for r in expected if r[0] not in ("exhausted", "topup")]):
        kind, output, spent, left = record
        assert resp["decision"] == kind
        assert resp["budget_spent"] == spent
        assert resp["budget_left"] == left
        rel = proj.unproject(PlanarPoint(output[0], output[1]))
        assert resp["released_location"] == {"lat": rel.lat, "lon": rel.lon}
    topup_record = expected[11]
    assert topup.json()["budget_left"] == topup_record[3]
    assert topup.json()["epsilon_total"] == eps_total + eps

    end = client.post("/PrivAR/end", json={"v": 1, "session_id": sid})
    assert end.status_code == 200
    released_count = sum(1 for r in expected if r[0] == "released")
    assert end.json()["releases"] == released_count
    assert end.json()["spend"] == (released_count + 2) * eps

    # wire schema round-trip over generated payloads
    rng = np.random.default_rng(11)
    for _ in range(1000):
        raw = _random_wire_request(rng)
        first = PrivArRequest.model_validate(raw).model_dump()
        again = PrivArRequest.model_validate(json.loads(json.dumps(first))).model_dump()
        assert again == first
        assert first["session_id"] == raw["session_id"]
        assert first["epsilon"] == raw["epsilon"]
        assert first["true_location"]["lat"] == raw["true_location"]["lat"]
