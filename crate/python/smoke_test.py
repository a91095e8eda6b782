"""Smoke test for the modeshift_py extension.

Build and install it first:

    pip install maturin
    maturin build --release -m crates/python/Cargo.toml -o dist
    pip install dist/modeshift-*.whl
"""

import json
import sys
import tempfile
from pathlib import Path

import modeshift_py as ms

SCENARIOS = {
    "baseline": {"start": "2019-01-07T00:00:00", "weeks": 12, "seed": 5, "week_swing": 0.1},
    "scenarios": [
        {"kind": "holiday", "ranges": [{"start": "2019-01-22T06:00:00", "end": "2019-01-22T22:00:00"}]},
        {"kind": "metro_closure", "ranges": [{"start": "2019-02-13T07:00:00", "end": "2019-02-13T21:00:00"}]},
    ],
}


def main() -> int:
    mu, sigma, _ = ms.signature_element([100.0, 110.0, 90.0, 100.0])
    assert mu == 100.0 and abs(sigma - 7.0710678) < 1e-6

    series, truth = ms.synthesize(json.dumps(SCENARIOS))
    hits = series.detect()
    assert {t for t, _ in hits} == {t for t, _ in truth}, "detected hours differ from the injected ones"

    labels, profiles = series.profile(k_max=6)
    assert len(profiles) == 2 and sum(p[0] for p in profiles) == len(truth)
    metro = max(profiles, key=lambda p: p[2][3])
    assert metro[2][2] < -4 and metro[2][3] > 0

    with tempfile.TemporaryDirectory() as tmp:
        events = Path(tmp, "demand.csv")
        series.write_csv(events)
        assert len(ms.DemandSeries.read_csv(events)) == len(series)
        svg = ms.render_radar(metro[2], cluster_id=0, size=metro[0], share=metro[1])
        Path(tmp, "metro.svg").write_text(svg)

    try:
        ms.cosine_distance([0, 0], [1, 0])
    except ms.ModeshiftError as err:
        print(f"expected error: {err}")
    else:
        raise AssertionError("zero vector accepted")

    print(f"modeshift_py {ms.__version__}: {len(hits)} anomalous hours, {len(profiles)} clusters, OK")
    return 0


if __name__ == "__main__":
    sys.exit(main())
