import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meshtok import ConfigError, DomainError, Mesh, StructureError
from meshtok.curation import (
    CurationConfig,
    DpoBatch,
    PairCandidate,
    PairOutcome,
    ScoreTable,
    build_pair_manifest,
    decide_pair,
    dpo_loss,
    dpo_loss_grad,
    merge_annotations,
    read_pair_manifest,
    run_filter_cascade,
    write_pair_manifest,
)


def scaled_square(side: float) -> Mesh:
    verts = np.array(
        [[0, 0, 0], [side, 0, 0], [side, side, 0], [0, side, 0]], dtype=float
    )
    return Mesh(verts, np.array([[0, 1, 2], [0, 2, 3]]))


# ---------------------------------------------------------------------------
# Filter cascade
# ---------------------------------------------------------------------------


class TestFilterCascade:
    def _tables(self, ids, loss=0.0, aesthetic=0.0):
        return (
            ScoreTable({i: loss for i in ids}, "loss"),
            ScoreTable({i: aesthetic for i in ids}, "aesthetic"),
        )

    def test_small_area_dropped(self):
        meshes = [("small", scaled_square(0.5)), ("big", scaled_square(10.0))]
        losses, aes = self._tables(["small", "big"])
        cfg = CurationConfig(area_min=1.0, loss_threshold=5.0)
        kept, dropped = run_filter_cascade(meshes, losses, aes, cfg)
        assert kept == ["big"]
        assert dropped == [("small", "area")]

    def test_low_loss_kept_regardless_of_aesthetics(self):
        meshes = [("m", scaled_square(10.0))]
        losses = ScoreTable({"m": 0.1}, "loss")
        aes = ScoreTable({}, "aesthetic")  # never consulted
        cfg = CurationConfig(area_min=1.0, loss_threshold=5.0)
        kept, dropped = run_filter_cascade(meshes, losses, aes, cfg)
        assert kept == ["m"] and dropped == []

    def test_top_fraction_rescued(self):
        # Sort oracle: of ten flagged ids with aesthetic scores 0..9 and
        # keep fraction 0.2, exactly the two highest scores survive.
        ids = [f"m{i}" for i in range(10)]
        meshes = [(i, scaled_square(10.0)) for i in ids]
        losses = ScoreTable({i: 9.0 for i in ids}, "loss")
        aes = ScoreTable({f"m{i}": float(i) for i in range(10)}, "aesthetic")
        cfg = CurationConfig(area_min=1.0, loss_threshold=5.0, aesthetic_keep_fraction=0.2)
        kept, dropped = run_filter_cascade(meshes, losses, aes, cfg)
        assert sorted(kept) == ["m8", "m9"]
        assert {sid for sid, _ in dropped} == set(ids) - {"m8", "m9"}
        assert all(reason == "loss" for _, reason in dropped)

    def test_ties_at_cut_kept(self):
        ids = [f"m{i}" for i in range(4)]
        meshes = [(i, scaled_square(10.0)) for i in ids]
        losses = ScoreTable({i: 9.0 for i in ids}, "loss")
        aes = ScoreTable({"m0": 1.0, "m1": 5.0, "m2": 5.0, "m3": 5.0}, "aesthetic")
        cfg = CurationConfig(loss_threshold=5.0, aesthetic_keep_fraction=0.25)
        kept, _ = run_filter_cascade(meshes, losses, aes, cfg)
        # floor(4 * 0.25) = 1 slot, but all three score-5 ids tie at the cut.
        assert sorted(kept) == ["m1", "m2", "m3"]

    def test_missing_loss_score_is_config_error(self):
        meshes = [("m", scaled_square(10.0))]
        with pytest.raises(ConfigError, match="m"):
            run_filter_cascade(
                meshes,
                ScoreTable({}, "loss"),
                ScoreTable({}, "aesthetic"),
                CurationConfig(loss_threshold=1.0),
            )

    def test_missing_aesthetic_score_is_config_error(self):
        meshes = [("m", scaled_square(10.0))]
        with pytest.raises(ConfigError, match="m"):
            run_filter_cascade(
                meshes,
                ScoreTable({"m": 9.0}, "loss"),
                ScoreTable({}, "aesthetic"),
                CurationConfig(loss_threshold=1.0),
            )

    def test_deterministic(self):
        ids = [f"m{i}" for i in range(20)]
        meshes = [(i, scaled_square(0.5 if int(i[1:]) % 3 == 0 else 10.0)) for i in ids]
        losses = ScoreTable({i: float(int(i[1:]) % 7) for i in ids}, "loss")
        aes = ScoreTable({i: float(int(i[1:]) % 5) for i in ids}, "aesthetic")
        cfg = CurationConfig(loss_threshold=3.0)
        assert run_filter_cascade(meshes, losses, aes, cfg) == run_filter_cascade(
            meshes, losses, aes, cfg
        )


class TestScoreTable:
    def test_load_save_round_trip(self, tmp_path):
        table = ScoreTable({"a": 1.25, "b": -0.5}, "loss")
        path = tmp_path / "scores.txt"
        table.save(path)
        again = ScoreTable.load(path, "loss")
        assert again.scores == table.scores

    def test_duplicate_id_rejected(self, tmp_path):
        path = tmp_path / "scores.txt"
        path.write_text("a 1.0\na 2.0\n")
        with pytest.raises(StructureError):
            ScoreTable.load(path)

    def test_malformed_row_rejected(self, tmp_path):
        path = tmp_path / "scores.txt"
        path.write_text("a 1.0 extra\n")
        with pytest.raises(StructureError):
            ScoreTable.load(path)


# ---------------------------------------------------------------------------
# Pair gating
# ---------------------------------------------------------------------------


class TestDecidePair:
    def test_both_above_discard(self):
        assert decide_pair(2.0, 3.0, 1.0).outcome is PairOutcome.DISCARD_BOTH

    def test_first_better(self):
        assert decide_pair(0.5, 2.0, 1.0).outcome is PairOutcome.PREFER_FIRST

    def test_second_better(self):
        assert decide_pair(2.0, 0.5, 1.0).outcome is PairOutcome.PREFER_SECOND

    def test_both_within_needs_human(self):
        assert decide_pair(0.5, 0.5, 1.0).outcome is PairOutcome.NEEDS_HUMAN

    def test_boundary_counts_as_within(self):
        assert decide_pair(1.0, 2.0, 1.0).outcome is PairOutcome.PREFER_FIRST

    def test_invalid_inputs(self):
        with pytest.raises(DomainError):
            decide_pair(-0.1, 0.5, 1.0)
        with pytest.raises(DomainError):
            decide_pair(0.1, 0.5, 0.0)

    @given(
        st.floats(0, 10, allow_nan=False),
        st.floats(0, 10, allow_nan=False),
        st.floats(0.01, 10, allow_nan=False),
        st.floats(0.001, 1000, allow_nan=False),
    )
    @settings(max_examples=200, deadline=None)
    def test_scale_covariance(self, cd_a, cd_b, tau, gain):
        base = decide_pair(cd_a, cd_b, tau).outcome
        scaled = decide_pair(cd_a * gain, cd_b * gain, tau * gain).outcome
        assert base is scaled


# ---------------------------------------------------------------------------
# DPO loss
# ---------------------------------------------------------------------------


def random_batch(rng: np.random.Generator, n: int | None = None) -> DpoBatch:
    n = n or int(rng.integers(1, 12))
    logps = -rng.exponential(scale=3.0, size=(4, n))
    return DpoBatch(
        policy_preferred=logps[0],
        policy_dispreferred=logps[1],
        reference_preferred=logps[2],
        reference_dispreferred=logps[3],
        beta=float(rng.uniform(0.01, 2.0)),
    )


def fd_gradient_oracle(batch: DpoBatch, eps: float = 1e-6) -> dict[str, np.ndarray]:
    """Central finite differences of dpo_loss w.r.t. every input slot."""
    fields = (
        "policy_preferred",
        "policy_dispreferred",
        "reference_preferred",
        "reference_dispreferred",
    )
    grads = {}
    for name in fields:
        base = getattr(batch, name)
        grad = np.zeros_like(base)
        for idx in range(len(base)):
            bumped = {f: getattr(batch, f).copy() for f in fields}
            bumped[name][idx] = base[idx] + eps
            hi = dpo_loss(DpoBatch(beta=batch.beta, **bumped))
            bumped[name][idx] = base[idx] - eps
            lo = dpo_loss(DpoBatch(beta=batch.beta, **bumped))
            grad[idx] = (hi - lo) / (2 * eps)
        grads[name] = grad
    return grads


class TestDpoLoss:
    @pytest.mark.parametrize("beta", [0.01, 0.1, 1.0, 10.0])
    def test_equal_margins_give_ln2(self, beta):
        batch = DpoBatch(
            policy_preferred=[-3.0],
            policy_dispreferred=[-7.0],
            reference_preferred=[-3.0],
            reference_dispreferred=[-7.0],
            beta=beta,
        )
        assert dpo_loss(batch) == pytest.approx(math.log(2.0), abs=1e-12)

    def test_ln2_margin_case(self):
        # margin z = 1 * (ln2 - (-ln2)) = ln4, sigmoid(ln4) = 4/5.
        batch = DpoBatch(
            policy_preferred=[-1.0 + math.log(2.0)],
            policy_dispreferred=[-1.0 - math.log(2.0)],
            reference_preferred=[-1.0],
            reference_dispreferred=[-1.0],
            beta=1.0,
        )
        assert dpo_loss(batch) == pytest.approx(-math.log(4.0 / 5.0), abs=1e-12)

    def test_loss_monotone_to_zero(self):
        losses = []
        for margin in (0.0, 2.0, 10.0, 50.0, 500.0):
            batch = DpoBatch(
                policy_preferred=[-1.0],
                policy_dispreferred=[-1.0 - margin],
                reference_preferred=[-1.0],
                reference_dispreferred=[-1.0],
                beta=1.0,
            )
            losses.append(dpo_loss(batch))
        assert all(a > b for a, b in zip(losses, losses[1:]))
        assert losses[-1] == pytest.approx(0.0, abs=1e-12)

    def test_stable_at_extreme_margins(self):
        batch = DpoBatch(
            policy_preferred=[0.0],
            policy_dispreferred=[-1e6],
            reference_preferred=[-1e6],
            reference_dispreferred=[0.0],
            beta=10.0,
        )
        assert np.isfinite(dpo_loss(batch))
        flipped = DpoBatch(
            policy_preferred=[-1e6],
            policy_dispreferred=[0.0],
            reference_preferred=[0.0],
            reference_dispreferred=[-1e6],
            beta=10.0,
        )
        assert np.isfinite(dpo_loss(flipped))
        assert dpo_loss(flipped) == pytest.approx(2e7, rel=1e-9)

    def test_non_finite_rejected(self):
        with pytest.raises(DomainError):
            DpoBatch([-np.inf], [-1.0], [-1.0], [-1.0])
        with pytest.raises(DomainError):
            DpoBatch([np.nan], [-1.0], [-1.0], [-1.0])

    def test_positive_logp_rejected(self):
        with pytest.raises(DomainError):
            DpoBatch([0.5], [-1.0], [-1.0], [-1.0])

    def test_mean_over_pairs(self):
        single = DpoBatch([-1.0], [-2.0], [-1.0], [-2.0], beta=1.0)
        double = DpoBatch([-1.0, -1.0], [-2.0, -2.0], [-1.0, -1.0], [-2.0, -2.0], beta=1.0)
        assert dpo_loss(double) == pytest.approx(dpo_loss(single))

    def test_strictly_monotone_in_margins(self):
        def loss(pref_delta, dispref_delta):
            return dpo_loss(
                DpoBatch(
                    policy_preferred=[-2.0 + pref_delta],
                    policy_dispreferred=[-2.0 + dispref_delta],
                    reference_preferred=[-2.0],
                    reference_dispreferred=[-2.0],
                    beta=0.7,
                )
            )

        deltas = [-2.0, -1.0, 0.0, 1.0, 2.0]
        up = [loss(d, 0.0) for d in deltas]
        assert all(a > b for a, b in zip(up, up[1:]))  # decreasing in preferred
        down = [loss(0.0, d) for d in deltas]
        assert all(a < b for a, b in zip(down, down[1:]))  # increasing in dispreferred

    def test_vanishing_beta_gives_ln2(self):
        batch = DpoBatch([-1.0], [-900.0], [-500.0], [-3.0], beta=1e-12)
        assert dpo_loss(batch) == pytest.approx(math.log(2.0), abs=1e-9)


class TestDpoGradients:
    def test_zero_margin_half(self):
        batch = DpoBatch([-1.0], [-1.0], [-1.0], [-1.0], beta=1.0)
        grads = dpo_loss_grad(batch)
        assert grads.policy_preferred[0] == pytest.approx(-0.5, abs=1e-12)
        assert grads.policy_dispreferred[0] == pytest.approx(0.5, abs=1e-12)

    def test_policy_reference_antisymmetry(self):
        rng = np.random.default_rng(3)
        batch = random_batch(rng)
        grads = dpo_loss_grad(batch)
        np.testing.assert_allclose(
            grads.policy_preferred + grads.reference_preferred, 0.0, atol=1e-18
        )
        np.testing.assert_allclose(
            grads.policy_dispreferred + grads.reference_dispreferred, 0.0, atol=1e-18
        )

    def test_matches_finite_differences_100_batches(self):
        # gradcheck-style relative error: |a - b| / max(|a|, |b|, 1), which
        # is a plain relative comparison wherever gradients are O(1) and an
        # absolute one below the finite-difference noise floor.
        rng = np.random.default_rng(17)
        for _ in range(100):
            batch = random_batch(rng)
            grads = dpo_loss_grad(batch)
            oracle = fd_gradient_oracle(batch)
            for name, expected in oracle.items():
                got = getattr(grads, name)
                denom = np.maximum(np.maximum(np.abs(expected), np.abs(got)), 1.0)
                rel = np.abs(got - expected) / denom
                assert rel.max() < 1e-6


# ---------------------------------------------------------------------------
# Pair manifest
# ---------------------------------------------------------------------------


def candidates_fixture():
    return [
        PairCandidate("c1", "a1", "b1", 0.2, 5.0, 9000, 8000),
        PairCandidate("c2", "a2", "b2", 5.0, 0.2, 9000, 8000),
        PairCandidate("c3", "a3", "b3", 5.0, 6.0, 9000, 8000),
        PairCandidate("c4", "a4", "b4", 0.2, 0.3, 9000, 8000),
        PairCandidate("c5", "a5", "b5", 0.2, 0.3, 4000, 8000),  # below face floor
    ]


class TestPairManifest:
    CFG = CurationConfig(face_min=5000, cd_threshold=1.0)

    def test_face_floor_excludes(self):
        rows = build_pair_manifest(candidates_fixture(), self.CFG)
        assert [r.condition_id for r in rows] == ["c1", "c2", "c3", "c4"]

    def test_outcomes_and_chosen(self):
        rows = {r.condition_id: r for r in build_pair_manifest(candidates_fixture(), self.CFG)}
        assert rows["c1"].outcome is PairOutcome.PREFER_FIRST and rows["c1"].chosen == "A"
        assert rows["c2"].outcome is PairOutcome.PREFER_SECOND and rows["c2"].chosen == "B"
        assert rows["c3"].outcome is PairOutcome.DISCARD_BOTH and rows["c3"].chosen == ""
        assert rows["c4"].outcome is PairOutcome.NEEDS_HUMAN and rows["c4"].chosen == ""

    def test_duplicate_candidate_rejected(self):
        cands = candidates_fixture()
        with pytest.raises(StructureError):
            build_pair_manifest(cands + [cands[0]], self.CFG)

    def test_round_trip_with_annotation(self, tmp_path):
        rows = build_pair_manifest(candidates_fixture(), self.CFG)
        manifest = tmp_path / "pairs.tsv"
        write_pair_manifest(rows, manifest)
        again = read_pair_manifest(manifest)
        assert again == rows

        # external annotator fills the NEEDS_HUMAN row and we re-ingest
        annotated = [
            r if r.outcome is not PairOutcome.NEEDS_HUMAN else
            type(r)(r.condition_id, r.mesh_a, r.mesh_b, r.cd_a, r.cd_b, r.outcome, "B")
            for r in again
        ]
        annotated_path = tmp_path / "annotated.tsv"
        write_pair_manifest(annotated, annotated_path)
        merged = merge_annotations(again, read_pair_manifest(annotated_path))
        assert all(r.resolved for r in merged)
        assert [r for r in merged if r.condition_id == "c4"][0].chosen == "B"

    def test_requires_threshold(self):
        with pytest.raises(ConfigError):
            build_pair_manifest(candidates_fixture(), CurationConfig(face_min=5000))
