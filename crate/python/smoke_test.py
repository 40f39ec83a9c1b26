"""Smoke test for the Python bindings. Build first with
`pip install --no-build-isolation -e crates/py` (or `maturin develop`)."""

import math
import tempfile

import player_form_py as pf


def main():
    before = pf.GameState(balls=3, strikes=2, bases=0b011, outs=1)
    after = pf.GameState(bases=0b111, outs=1)
    d = pf.compute_delta(before, after, True)
    assert pf.apply_delta(before, d) == after
    assert d.ends_at_bat()
    vocab = pf.vocabulary()
    assert vocab[:2] == ["[CLS]", "[MASK]"], vocab[:2]
    assert pf.token_id(d) is not None

    e1, e2 = [1.0, 0.0], [0.0, 1.0]
    assert abs(pf.contrastive_loss([e1] * 4, 1.0) - 4 * math.log(3)) < 1e-9
    assert abs(pf.contrastive_loss([e1, e1, e2, e2], 1.0) - 4 * math.log(1 + 2 / math.e)) < 1e-9
    assert pf.lr_schedule(0, 7500, 5e-4) == 0.0

    pts = [[0.0], [0.1], [5.0], [5.1]]
    assert pf.ward_cluster(pts, 2) == [0, 0, 1, 1]
    assert len(pf.ward_linkage(pts)) == 3
    ari, nmi = pf.agreement([0, 0, 1, 1], [1, 1, 0, 0])
    assert abs(ari - 1) < 1e-12 and abs(nmi - 1) < 1e-12

    mean, comps, var = pf.pca_fit([[0.0, 0.0], [1.0, 2.0], [2.0, 4.1]], 1)
    assert len(comps) == 1 and len(comps[0]) == 2
    assert pf.stat_feature_count("paper") == 1541

    with tempfile.TemporaryDirectory() as out:
        stages = pf.run_pipeline(out, games=30, steps=10, k=3)
        assert [s for s, _ in stages][-1] == "report"
        again = pf.run_pipeline(out, games=30, steps=10, k=3)
        assert all(status == "up to date" for _, status in again)
    print(f"ok: {len(vocab)} vocabulary ids, {len(stages)} pipeline stages")


if __name__ == "__main__":
    main()
